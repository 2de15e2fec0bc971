#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bdlp/kernel.hpp"
#include "bdlp/params.hpp"
#include "bdlp/random.hpp"
#include "bdlp/space.hpp"

namespace bdlp {

/// Hard cap on configuration cardinality for subset-enumerating transforms
/// (2^n terms). Keeps every brute-force oracle sub-second.
inline constexpr int kCardinalityCap = 8;

/// A finite point configuration on R^d: an ordered list of pairwise distinct
/// positions. Order is bookkeeping only; every operation below is symmetric.
struct FiniteConfiguration {
    std::vector<Vec> points;

    FiniteConfiguration() = default;
    explicit FiniteConfiguration(std::vector<Vec> pts) : points(std::move(pts)) {}

    int size() const { return static_cast<int>(points.size()); }
    bool empty() const { return points.empty(); }

    FiniteConfiguration with_point(const Vec& x) const {
        FiniteConfiguration out = *this;
        out.points.push_back(x);
        return out;
    }

    FiniteConfiguration without_index(int i) const {
        FiniteConfiguration out;
        out.points.reserve(points.size() - 1);
        for (int j = 0; j < size(); ++j)
            if (j != i) out.points.push_back(points[j]);
        return out;
    }

    /// Point at index i replaced by x (the "relocation" move of the symbol).
    FiniteConfiguration with_replaced(int i, const Vec& x) const {
        FiniteConfiguration out = *this;
        out.points[i] = x;
        return out;
    }

    /// Sub-configuration selected by bitmask (bit j keeps point j).
    FiniteConfiguration subset(unsigned mask) const {
        FiniteConfiguration out;
        for (int j = 0; j < size(); ++j)
            if (mask & (1u << j)) out.points.push_back(points[j]);
        return out;
    }
};

/// Evaluable function on finite configurations with declared support bounds:
/// zero whenever the cardinality exceeds support_card or any point leaves
/// support_region. The wrapper enforces the declaration so downstream
/// integrators can trust it.
struct FiniteFunction {
    std::function<double(const FiniteConfiguration&)> evaluator;
    int support_card = kCardinalityCap;
    Box support_region;
    bool region_bounded = false;  // false: support bounded in cardinality only

    FiniteFunction() = default;
    FiniteFunction(std::function<double(const FiniteConfiguration&)> f, int card)
        : evaluator(std::move(f)), support_card(card) {}
    FiniteFunction(std::function<double(const FiniteConfiguration&)> f, int card, Box region)
        : evaluator(std::move(f)), support_card(card), support_region(region), region_bounded(true) {}

    double operator()(const FiniteConfiguration& eta) const {
        if (eta.size() > support_card) return 0.0;
        if (region_bounded)
            for (const auto& x : eta.points)
                if (!support_region.contains(x)) return 0.0;
        return evaluator(eta);
    }
};

/// Monte-Carlo estimate with one-sigma statistical error.
struct McEstimate {
    double value = 0.0;
    double std_err = 0.0;
};

/// Pairing <<G,k>> = int G k dlambda with its estimated error.
using DualityPairing = McEstimate;

namespace detail {

inline void check_cap(int n, const char* op) {
    if (n > kCardinalityCap)
        throw std::invalid_argument(std::string(op) + ": configuration exceeds cardinality cap");
}

inline McEstimate reduce_samples(double exact, const std::vector<double>& samples) {
    const std::size_t n = samples.size();
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= static_cast<double>(n - 1);
    return {exact + mean, std::sqrt(var / static_cast<double>(n))};
}

inline void require_mc(long mc) {
    if (mc < 2) throw std::invalid_argument("mc must be >= 2 for a variance estimate");
}

}  // namespace detail

/// K-transform (KG)(gamma) = sum over all subsets eta of gamma of G(eta),
/// empty set included. Linear, positivity preserving, invertible.
inline double k_transform(const FiniteFunction& G, const FiniteConfiguration& gamma) {
    detail::check_cap(gamma.size(), "k_transform");
    const unsigned full = 1u << gamma.size();
    double acc = 0.0;
    for (unsigned mask = 0; mask < full; ++mask) acc += G(gamma.subset(mask));
    return acc;
}

/// Inverse transform (K^{-1}F)(eta) = sum over subsets xi of eta of
/// (-1)^{|eta minus xi|} F(xi).
inline double k_inverse(const FiniteFunction& F, const FiniteConfiguration& eta) {
    detail::check_cap(eta.size(), "k_inverse");
    const int n = eta.size();
    const unsigned full = 1u << n;
    double acc = 0.0;
    for (unsigned mask = 0; mask < full; ++mask) {
        const int kept = std::popcount(mask);
        const double sign = ((n - kept) % 2 == 0) ? 1.0 : -1.0;
        acc += sign * F(eta.subset(mask));
    }
    return acc;
}

/// Interaction energy E^a(eta) = sum over ordered pairs (x,y), x != y, of
/// a(x - y). Zero for |eta| <= 1.
inline double interaction_energy(const Kernel& a, const FiniteConfiguration& eta) {
    double acc = 0.0;
    for (int i = 0; i < eta.size(); ++i)
        for (int j = 0; j < eta.size(); ++j)
            if (i != j) acc += a.eval(vec_sub(eta.points[i], eta.points[j]));
    return acc;
}

/// Monte-Carlo application of the model generator,
///   (LF)(gamma) = sum_x [m + kappa- sum_{y != x} a-(x-y)] [F(gamma\x) - F(gamma)]
///               + kappa+ sum_y int a+(x-y) [F(gamma u x) - F(gamma)] dx .
/// Death terms are exact; the birth integral is importance-sampled from a+
/// (a probability density), mc draws per parent.
inline McEstimate apply_generator(const ModelParams& params, const FiniteFunction& F,
                                  const FiniteConfiguration& gamma, long mc, Rng& rng) {
    detail::check_cap(gamma.size() + 1, "apply_generator");
    detail::require_mc(mc);
    const int n = gamma.size();
    const double f_gamma = F(gamma);

    double death = 0.0;
    for (int i = 0; i < n; ++i) {
        double rate = params.m;
        for (int j = 0; j < n; ++j)
            if (j != i)
                rate += params.kappa_minus * params.a_minus.eval(vec_sub(gamma.points[i], gamma.points[j]));
        death += rate * (F(gamma.without_index(i)) - f_gamma);
    }

    std::vector<double> samples(static_cast<std::size_t>(mc), 0.0);
    for (auto& s : samples) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const Vec x = vec_add(gamma.points[j], params.a_plus.sample(rng));
            acc += F(gamma.with_point(x)) - f_gamma;
        }
        s = params.kappa_plus * acc;
    }
    return detail::reduce_samples(death, samples);
}

/// Monte-Carlo application of the symbol L^ = K^{-1} L K on quasi-observables:
///   (L^G)(eta) = -(m|eta| + kappa- E^{a-}(eta)) G(eta)
///              - kappa- sum_x sum_{y != x} a-(x-y) G(eta\y)
///              + kappa+ int sum_y a+(x-y) G((eta\y) u x) dx
///              + kappa+ int sum_y a+(x-y) G(eta u x) dx .
/// The two integrals share one a+ draw per (sample, parent).
inline McEstimate apply_symbol(const ModelParams& params, const FiniteFunction& G,
                               const FiniteConfiguration& eta, long mc, Rng& rng) {
    detail::check_cap(eta.size() + 1, "apply_symbol");
    detail::require_mc(mc);
    const int n = eta.size();

    double exact = -(params.m * n + params.kappa_minus * interaction_energy(params.a_minus, eta)) * G(eta);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (j != i)
                exact -= params.kappa_minus * params.a_minus.eval(vec_sub(eta.points[i], eta.points[j])) *
                         G(eta.without_index(j));

    std::vector<double> samples(static_cast<std::size_t>(mc), 0.0);
    for (auto& s : samples) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const Vec x = vec_add(eta.points[j], params.a_plus.sample(rng));
            acc += G(eta.with_replaced(j, x)) + G(eta.with_point(x));
        }
        s = params.kappa_plus * acc;
    }
    return detail::reduce_samples(exact, samples);
}

/// Monte-Carlo application of the adjoint symbol on correlation vectors:
///   (L^*k)(eta) = -(m|eta| + kappa- E^{a-}(eta)) k(eta)
///               + kappa+ sum_x sum_{y != x} a+(x-y) k(eta\x)
///               + kappa+ int sum_y a+(x-y) k((eta\y) u x) dx
///               - kappa- int sum_y a-(x-y) k(eta u x) dx .
/// The kappa+ integral is sampled from a+, the kappa- integral from a-.
inline McEstimate apply_symbol_adjoint(const ModelParams& params, const FiniteFunction& k,
                                       const FiniteConfiguration& eta, long mc, Rng& rng) {
    detail::check_cap(eta.size() + 1, "apply_symbol_adjoint");
    detail::require_mc(mc);
    const int n = eta.size();

    double exact = -(params.m * n + params.kappa_minus * interaction_energy(params.a_minus, eta)) * k(eta);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (j != i)
                exact += params.kappa_plus * params.a_plus.eval(vec_sub(eta.points[i], eta.points[j])) *
                         k(eta.without_index(i));

    std::vector<double> samples(static_cast<std::size_t>(mc), 0.0);
    for (auto& s : samples) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const Vec xp = vec_add(eta.points[j], params.a_plus.sample(rng));
            acc += params.kappa_plus * k(eta.with_replaced(j, xp));
            const Vec xm = vec_add(eta.points[j], params.a_minus.sample(rng));
            acc -= params.kappa_minus * k(eta.with_point(xm));
        }
        s = acc;
    }
    return detail::reduce_samples(exact, samples);
}

namespace detail {

inline Vec uniform_in_box(const Box& region, Rng& rng) {
    Vec x{0.0, 0.0, 0.0};
    for (int i = 0; i < region.d; ++i) {
        std::uniform_real_distribution<double> u(region.lo[i], region.hi[i]);
        x[i] = u(rng);
    }
    return x;
}

/// Core of the Lebesgue-Poisson integral: sum over n of z^n V^n / n! times a
/// Monte-Carlo average of `f` over n i.i.d. uniform points in `region`. The
/// integrand may itself be stochastic (it receives the rng); its noise is
/// folded into the per-sector sample variance.
template <typename F>
McEstimate lp_apply(F&& f, double z, const Box& region, int n_cap, long mc, Rng& rng) {
    require_mc(mc);
    const double V = region.volume();
    FiniteConfiguration empty;
    double total = f(empty, rng);  // n = 0 sector, weight 1
    double var_total = 0.0;
    double weight = 1.0;  // z^n V^n / n!
    for (int n = 1; n <= n_cap; ++n) {
        weight *= z * V / n;
        std::vector<double> samples(static_cast<std::size_t>(mc), 0.0);
        for (auto& s : samples) {
            FiniteConfiguration eta;
            eta.points.reserve(n);
            for (int i = 0; i < n; ++i) eta.points.push_back(uniform_in_box(region, rng));
            s = f(eta, rng);
        }
        const McEstimate est = reduce_samples(0.0, samples);
        total += weight * est.value;
        var_total += weight * weight * est.std_err * est.std_err;
    }
    return {total, std::sqrt(var_total)};
}

}  // namespace detail

/// Lebesgue-Poisson integral of G over configurations in `region` with at
/// most n_cap points, at activity z:
///   int G dlambda_z = sum_n (z^n / n!) int_{region^n} G dx_1..dx_n .
inline McEstimate lp_integral(const FiniteFunction& G, double z, const Box& region, int n_cap,
                              long mc, Rng& rng) {
    return detail::lp_apply([&G](const FiniteConfiguration& eta, Rng&) { return G(eta); }, z,
                            region, n_cap, mc, rng);
}

struct MinlosCheckResult {
    double lhs = 0.0;
    double rhs = 0.0;
};

/// Both sides of the two-fold Minlos identity for functions of cardinality
/// only. The partition structure makes each side an exactly summable series:
///   lhs = sum_{n1,n2 <= n_cap} (zV)^{n1+n2} / (n1! n2!) G(n1+n2) H(n1,n2)
///   rhs = sum_{n <= 2 n_cap} (zV)^n / n! G(n) sum_k C(n,k) H(k, n-k) .
inline MinlosCheckResult minlos_check(const std::function<double(int)>& G,
                                      const std::function<double(int, int)>& H, double z,
                                      double volume, int n_cap) {
    const double zv = z * volume;
    std::vector<double> w(static_cast<std::size_t>(2 * n_cap + 1), 1.0);  // (zV)^n / n!
    for (int n = 1; n <= 2 * n_cap; ++n) w[n] = w[n - 1] * zv / n;

    double lhs = 0.0;
    for (int n1 = 0; n1 <= n_cap; ++n1)
        for (int n2 = 0; n2 <= n_cap; ++n2) lhs += w[n1] * w[n2] * G(n1 + n2) * H(n1, n2);

    double rhs = 0.0;
    std::vector<double> binom(1, 1.0);  // Pascal row, grown in place
    for (int n = 0; n <= 2 * n_cap; ++n) {
        if (n > 0) {
            binom.push_back(1.0);
            for (int k = n - 1; k >= 1; --k) binom[k] += binom[k - 1];
        }
        double inner = 0.0;
        for (int k = 0; k <= n; ++k) inner += binom[k] * H(k, n - k);
        rhs += w[n] * G(n) * inner;
    }
    return {lhs, rhs};
}

/// Monte-Carlo application of the stationary operator S: the off-diagonal
/// part of L^* divided by the diagonal rate m|eta| + kappa- E^{a-}(eta),
/// with (Sk)(empty) = 0 by definition. Fixed points of S on nonempty
/// configurations are stationary correlation vectors.
inline McEstimate stationary_S_apply(const ModelParams& params, const FiniteFunction& k,
                                     const FiniteConfiguration& eta, long mc, Rng& rng) {
    if (eta.empty()) return {0.0, 0.0};
    detail::check_cap(eta.size() + 1, "stationary_S_apply");
    detail::require_mc(mc);
    if (!(params.m > 0.0))
        throw std::domain_error("stationary_S_apply: m = 0 makes the diagonal rate vanish on singletons");
    const int n = eta.size();
    const double denom = params.m * n + params.kappa_minus * interaction_energy(params.a_minus, eta);

    double exact = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (j != i)
                exact += params.kappa_plus * params.a_plus.eval(vec_sub(eta.points[i], eta.points[j])) *
                         k(eta.without_index(i));
    exact /= denom;

    std::vector<double> samples(static_cast<std::size_t>(mc), 0.0);
    for (auto& s : samples) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const Vec y = vec_add(eta.points[j], params.a_minus.sample(rng));
            acc -= params.kappa_minus * k(eta.with_point(y));
            const Vec x = vec_add(eta.points[j], params.a_plus.sample(rng));
            acc += params.kappa_plus * k(eta.with_replaced(j, x));
        }
        s = acc / denom;
    }
    return detail::reduce_samples(exact, samples);
}

}  // namespace bdlp
