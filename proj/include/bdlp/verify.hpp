#pragma once

#include <bit>
#include <cmath>
#include <string>
#include <vector>

#include "bdlp/analysis.hpp"
#include "bdlp/harmonic.hpp"

namespace bdlp {

/// Budgets for the harmonic oracle suite (defaults complete in well under
/// two minutes).
struct OracleOptions {
    int roundtrip_instances = 100;
    int symbol_instances = 20;
    long symbol_mc = 3000;
    int adjoint_instances = 10;
    long adjoint_outer = 400;
    long adjoint_inner = 80;
    int minlos_instances = 10;
    std::uint64_t seed = 20240801;
};

namespace detail {

/// Pure symmetric pseudo-random function used as oracle material.
struct OracleFn {
    double a = 1.0, b = 1.0, c = 1.0;
    double operator()(const FiniteConfiguration& eta) const {
        double s = b * eta.size();
        for (const auto& p : eta.points) s += std::sin(a * p[0] + c) + 0.31 * std::cos(c * p[0] * p[0]);
        return std::sin(s + 0.2);
    }
};

inline FiniteConfiguration random_points(int n, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    FiniteConfiguration eta;
    for (int i = 0; i < n; ++i) eta.points.push_back({u(rng), 0.0, 0.0});
    return eta;
}

}  // namespace detail

/// Round trip K^{-1} K = K K^{-1} = id on random functions supported on at
/// most five points; margin is the tolerance minus the worst relative error.
inline ConditionReport oracle_roundtrip(const OracleOptions& opts) {
    Rng rng = make_rng(opts.seed);
    std::uniform_real_distribution<double> coef(0.3, 2.5);
    double worst = 0.0;
    for (int inst = 0; inst < opts.roundtrip_instances; ++inst) {
        detail::OracleFn fn{coef(rng), coef(rng), coef(rng)};
        FiniteFunction F(fn, 5);
        FiniteFunction KinvF([F](const FiniteConfiguration& eta) { return k_inverse(F, eta); }, 5);
        FiniteFunction KF([F](const FiniteConfiguration& eta) { return k_transform(F, eta); }, 5);
        const auto eta = detail::random_points(inst % 6, -2.0, 2.0, rng);
        const double ref = std::max(std::abs(F(eta)), 1.0);
        worst = std::max(worst, std::abs(k_transform(KinvF, eta) - F(eta)) / ref);
        worst = std::max(worst, std::abs(k_inverse(KF, eta) - F(eta)) / ref);
    }
    ConditionReport rep;
    rep.name = "harmonic.roundtrip";
    rep.margin = 1e-12 - worst;
    rep.verdict = rep.margin >= 0.0 ? Verdict::pass : Verdict::fail;
    rep.note = "max relative round-trip error " + std::to_string(worst);
    return rep;
}

/// Symbol identity L^ = K^{-1} L K on random instances, with common random
/// numbers across the two birth integrals. Margin is the worst allowance
/// (3 stderr) minus deviation.
inline ConditionReport oracle_symbol_identity(const OracleOptions& opts) {
    Rng rng = make_rng(opts.seed + 1);
    std::uniform_real_distribution<double> coef(0.3, 2.2);
    std::uniform_int_distribution<int> size_pick(1, 3);
    double min_margin = std::numeric_limits<double>::infinity();

    for (int inst = 0; inst < opts.symbol_instances; ++inst) {
        ModelParams params;
        params.m = 0.8 + 0.1 * (inst % 3);
        params.kappa_plus = 0.7;
        params.kappa_minus = 0.5;
        params.a_plus = Kernel(KernelFamily::gaussian, 1.0, 1);
        params.a_minus = Kernel(KernelFamily::gaussian, 1.0, 1);
        params.space = SpaceSpec(1, 100.0);

        detail::OracleFn fn{coef(rng), coef(rng), coef(rng)};
        FiniteFunction G(fn, 3, Box::interval(-3.0, 3.0));
        const auto eta = detail::random_points(size_pick(rng), -1.5, 1.5, rng);
        const int n = eta.size();

        double sym_exact =
            -(params.m * n + params.kappa_minus * interaction_energy(params.a_minus, eta)) * G(eta);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (j != i)
                    sym_exact -= params.kappa_minus *
                                 params.a_minus.eval(vec_sub(eta.points[i], eta.points[j])) *
                                 G(eta.without_index(j));

        const unsigned full = 1u << n;
        FiniteFunction KG([G](const FiniteConfiguration& c) { return k_transform(G, c); },
                          kCardinalityCap);
        double gen_exact = 0.0;
        for (unsigned mask = 0; mask < full; ++mask) {
            const auto xi = eta.subset(mask);
            const double sign = ((n - std::popcount(mask)) % 2 == 0) ? 1.0 : -1.0;
            double death = 0.0;
            for (int i = 0; i < xi.size(); ++i) {
                double rate = params.m;
                for (int j = 0; j < xi.size(); ++j)
                    if (j != i)
                        rate += params.kappa_minus *
                                params.a_minus.eval(vec_sub(xi.points[i], xi.points[j]));
                death += rate * (KG(xi.without_index(i)) - KG(xi));
            }
            gen_exact += sign * death;
        }

        std::vector<double> diff(static_cast<std::size_t>(opts.symbol_mc));
        std::vector<Vec> child(n);
        for (auto& dval : diff) {
            for (int j = 0; j < n; ++j)
                child[j] = vec_add(eta.points[j], params.a_plus.sample(rng));
            double sym_mc = 0.0;
            for (int j = 0; j < n; ++j)
                sym_mc += G(eta.with_replaced(j, child[j])) + G(eta.with_point(child[j]));
            sym_mc *= params.kappa_plus;
            double gen_mc = 0.0;
            for (unsigned mask = 0; mask < full; ++mask) {
                const auto xi = eta.subset(mask);
                const double sign = ((n - std::popcount(mask)) % 2 == 0) ? 1.0 : -1.0;
                const double kg_xi = KG(xi);
                double birth = 0.0;
                for (int j = 0; j < n; ++j)
                    if (mask & (1u << j)) birth += KG(xi.with_point(child[j])) - kg_xi;
                gen_mc += sign * params.kappa_plus * birth;
            }
            dval = (sym_exact + sym_mc) - (gen_exact + gen_mc);
        }
        const auto est = detail::reduce_samples(0.0, diff);
        min_margin = std::min(min_margin, 3.0 * est.std_err + 1e-10 - std::abs(est.value));
    }
    ConditionReport rep;
    rep.name = "harmonic.symbol_identity";
    rep.margin = min_margin;
    rep.verdict = min_margin >= 0.0 ? Verdict::pass : Verdict::fail;
    return rep;
}

/// Duality <<L^ G, k>> = <<G, L^* k>> with tophat kernels (exact supports).
inline ConditionReport oracle_adjointness(const OracleOptions& opts) {
    Rng rng = make_rng(opts.seed + 2);
    std::uniform_real_distribution<double> coef(0.4, 2.0);
    ModelParams params;
    params.m = 1.0;
    params.kappa_plus = 0.8;
    params.kappa_minus = 0.6;
    params.a_plus = Kernel(KernelFamily::tophat, 1.0, 1);
    params.a_minus = Kernel(KernelFamily::tophat, 1.0, 1);
    params.space = SpaceSpec(1, 100.0);
    const Box region_k = Box::interval(-2.0, 2.0);
    double min_margin = std::numeric_limits<double>::infinity();
    for (int inst = 0; inst < opts.adjoint_instances; ++inst) {
        detail::OracleFn gfn{coef(rng), coef(rng), coef(rng)};
        detail::OracleFn kfn{coef(rng), coef(rng), coef(rng)};
        FiniteFunction G(gfn, 2, Box::interval(-1.0, 1.0));
        FiniteFunction k(kfn, 3, region_k);
        auto lhs_f = [&](const FiniteConfiguration& eta, Rng& r) {
            return apply_symbol(params, G, eta, opts.adjoint_inner, r).value * k(eta);
        };
        auto rhs_f = [&](const FiniteConfiguration& eta, Rng& r) {
            return G(eta) * apply_symbol_adjoint(params, k, eta, opts.adjoint_inner, r).value;
        };
        const auto lhs = detail::lp_apply(lhs_f, 1.0, region_k, 3, opts.adjoint_outer, rng);
        const auto rhs = detail::lp_apply(rhs_f, 1.0, region_k, 2, opts.adjoint_outer, rng);
        const double se = std::sqrt(lhs.std_err * lhs.std_err + rhs.std_err * rhs.std_err);
        min_margin = std::min(min_margin, 3.0 * se + 1e-10 - std::abs(lhs.value - rhs.value));
    }
    ConditionReport rep;
    rep.name = "harmonic.adjointness";
    rep.margin = min_margin;
    rep.verdict = min_margin >= 0.0 ? Verdict::pass : Verdict::fail;
    return rep;
}

/// Minlos partition identity on random cardinality functions, to 1e-10.
inline ConditionReport oracle_minlos(const OracleOptions& opts) {
    Rng rng = make_rng(opts.seed + 3);
    std::uniform_real_distribution<double> c(0.2, 1.4);
    double worst = 0.0;
    for (int inst = 0; inst < opts.minlos_instances; ++inst) {
        const double a = c(rng), b = c(rng), zv = c(rng);
        const auto res = minlos_check([a](int n) { return std::cos(a * n) / (1.0 + n); },
                                      [b](int n1, int n2) { return std::sin(b * n1 + 0.4 * n2) + 0.5; },
                                      zv, 1.0, 30);
        worst = std::max(worst, std::abs(res.lhs - res.rhs) / std::max(std::abs(res.rhs), 1e-30));
    }
    ConditionReport rep;
    rep.name = "harmonic.minlos";
    rep.margin = 1e-10 - worst;
    rep.verdict = rep.margin >= 0.0 ? Verdict::pass : Verdict::fail;
    rep.note = "max relative lhs/rhs deviation " + std::to_string(worst);
    return rep;
}

/// The full harmonic oracle suite in report form.
inline std::vector<ConditionReport> harmonic_oracle_suite(const OracleOptions& opts = {}) {
    return {oracle_roundtrip(opts), oracle_symbol_identity(opts), oracle_adjointness(opts),
            oracle_minlos(opts)};
}

}  // namespace bdlp
