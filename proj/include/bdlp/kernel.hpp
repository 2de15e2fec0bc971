#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "bdlp/random.hpp"
#include "bdlp/space.hpp"

namespace bdlp {

enum class KernelFamily { gaussian, tophat, laplace };

inline const char* family_name(KernelFamily f) {
    switch (f) {
        case KernelFamily::gaussian: return "gaussian";
        case KernelFamily::tophat: return "tophat";
        case KernelFamily::laplace: return "laplace";
    }
    return "?";
}

inline KernelFamily family_from_name(const std::string& s) {
    if (s == "gaussian") return KernelFamily::gaussian;
    if (s == "tophat") return KernelFamily::tophat;
    if (s == "laplace") return KernelFamily::laplace;
    throw std::invalid_argument("unknown kernel family: " + s);
}

/// Surface area of the unit sphere in R^d.
inline double sphere_surface(int d) {
    switch (d) {
        case 1: return 2.0;
        case 2: return 2.0 * std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi;
    }
    throw std::invalid_argument("sphere_surface: d out of range");
}

/// Volume of the d-ball of radius r.
inline double ball_volume(int d, double r) {
    switch (d) {
        case 1: return 2.0 * r;
        case 2: return std::numbers::pi * r * r;
        case 3: return 4.0 / 3.0 * std::numbers::pi * r * r * r;
    }
    throw std::invalid_argument("ball_volume: d out of range");
}

/// Even, rotation-invariant probability density on R^d. Three closed-form
/// families are supported:
///   gaussian  (2 pi s^2)^{-d/2} exp(-r^2 / 2 s^2)
///   tophat    uniform on the ball of radius s
///   laplace   c_d exp(-r / s), radial exponential
/// Evaluation, exact sampling, the Fourier transform and radial tail masses
/// are all analytic; r_cut is the radius beyond which less than tail_eps of
/// the mass remains.
struct Kernel {
    KernelFamily family = KernelFamily::gaussian;
    double sigma = 1.0;  // length scale (tophat: ball radius)
    int d = 1;
    double r_cut = 0.0;
    double norm_const = 0.0;  // density prefactor

    static constexpr double tail_eps = 1e-6;

    Kernel() { finish(); }
    Kernel(KernelFamily f, double s, int dim) : family(f), sigma(s), d(dim) {
        if (!(sigma > 0.0)) throw std::invalid_argument("Kernel: sigma must be positive");
        if (d < 1 || d > 3) throw std::invalid_argument("Kernel: d must be 1, 2 or 3");
        finish();
    }

    /// Free-space density at displacement u (only the first d components count).
    double eval(const Vec& u) const { return radial_eval(norm(u)); }

    double radial_eval(double r) const {
        switch (family) {
            case KernelFamily::gaussian:
                return norm_const * std::exp(-0.5 * r * r / (sigma * sigma));
            case KernelFamily::tophat:
                return r <= sigma ? norm_const : 0.0;
            case KernelFamily::laplace:
                return norm_const * std::exp(-r / sigma);
        }
        return 0.0;
    }

    /// Periodized density a_L(u) = sum_n a(u + n L), truncated to images that
    /// can carry mass (|u + n L| <= r_cut). u is reduced to its minimal image
    /// first, so any representative of the displacement may be passed.
    double eval_periodized(const Vec& u, const SpaceSpec& space) const {
        if (space.d != d)
            throw std::invalid_argument("Kernel: space dimension mismatch");
        const Vec um = space.min_image(u);
        const int n_img = static_cast<int>(std::ceil((r_cut + 0.5 * space.L) / space.L));
        double acc = 0.0;
        Vec shifted = um;
        for (int nx = -n_img; nx <= n_img; ++nx) {
            shifted[0] = um[0] + nx * space.L;
            if (d == 1) {
                acc += eval(shifted);
                continue;
            }
            for (int ny = -n_img; ny <= n_img; ++ny) {
                shifted[1] = um[1] + ny * space.L;
                if (d == 2) {
                    acc += eval(shifted);
                    continue;
                }
                for (int nz = -n_img; nz <= n_img; ++nz) {
                    shifted[2] = um[2] + nz * space.L;
                    acc += eval(shifted);
                }
            }
        }
        return acc;
    }

    /// Fourier transform \hat a(p) = int exp(-i p.x) a(x) dx. Real and even
    /// because a is; \hat a(0) = 1 and |\hat a| <= 1.
    double fourier(const Vec& p) const { return fourier_radial(norm(p)); }

    double fourier_radial(double p) const {
        const double x = p * sigma;
        switch (family) {
            case KernelFamily::gaussian:
                return std::exp(-0.5 * x * x);
            case KernelFamily::tophat:
                return tophat_hat(x);
            case KernelFamily::laplace:
                return std::pow(1.0 + x * x, -0.5 * (d + 1));
        }
        return 0.0;
    }

    /// 1 - \hat a(p), evaluated without cancellation near p = 0 (needed by the
    /// D-integral where the integrand divides by this quantity).
    double one_minus_fourier_radial(double p) const {
        const double x = p * sigma;
        const double x2 = x * x;
        switch (family) {
            case KernelFamily::gaussian:
                return -std::expm1(-0.5 * x2);
            case KernelFamily::laplace:
                return -std::expm1(-0.5 * (d + 1) * std::log1p(x2));
            case KernelFamily::tophat:
                if (x < 0.1) {
                    switch (d) {
                        case 1: return x2 / 6.0 - x2 * x2 / 120.0 + x2 * x2 * x2 / 5040.0;
                        case 2: return x2 / 8.0 - x2 * x2 / 192.0 + x2 * x2 * x2 / 9216.0;
                        case 3: return x2 / 10.0 - x2 * x2 / 280.0 + x2 * x2 * x2 / 15120.0;
                    }
                }
                return 1.0 - tophat_hat(x);
        }
        return 0.0;
    }

    /// Coefficient c of the expansion 1 - \hat a(p) = c p^2 + O(p^4): half the
    /// per-axis second moment of the density.
    double quadratic_coefficient() const { return 0.5 * second_moment_axis(); }

    /// Second moment of one coordinate, int x_1^2 a(x) dx.
    double second_moment_axis() const {
        switch (family) {
            case KernelFamily::gaussian: return sigma * sigma;
            case KernelFamily::tophat: return sigma * sigma / (d + 2);
            case KernelFamily::laplace: return (d + 1) * sigma * sigma;
        }
        return 0.0;
    }

    /// Mass outside the ball of radius r (closed form per family).
    double tail_mass(double r) const {
        if (r <= 0.0) return 1.0;
        const double t = r / sigma;
        switch (family) {
            case KernelFamily::gaussian:
                switch (d) {
                    case 1: return std::erfc(t / std::numbers::sqrt2);
                    case 2: return std::exp(-0.5 * t * t);
                    case 3:
                        return std::erfc(t / std::numbers::sqrt2) +
                               std::sqrt(2.0 / std::numbers::pi) * t * std::exp(-0.5 * t * t);
                }
                break;
            case KernelFamily::tophat:
                if (t >= 1.0) return 0.0;
                return 1.0 - std::pow(t, d);
            case KernelFamily::laplace: {
                // radius ~ Gamma(d, sigma): upper regularized gamma at integer d
                double term = 1.0, sum = 1.0;
                for (int k = 1; k < d; ++k) {
                    term *= t / k;
                    sum += term;
                }
                return std::exp(-t) * sum;
            }
        }
        return 0.0;
    }

    /// Exact draw from the free-space density.
    Vec sample(Rng& rng) const {
        Vec u{0.0, 0.0, 0.0};
        switch (family) {
            case KernelFamily::gaussian: {
                std::normal_distribution<double> n(0.0, sigma);
                for (int i = 0; i < d; ++i) u[i] = n(rng);
                return u;
            }
            case KernelFamily::tophat: {
                // rejection from the bounding cube; acceptance >= pi/6 in 3d
                std::uniform_real_distribution<double> c(-sigma, sigma);
                for (;;) {
                    double r2 = 0.0;
                    for (int i = 0; i < d; ++i) {
                        u[i] = c(rng);
                        r2 += u[i] * u[i];
                    }
                    if (r2 <= sigma * sigma) return u;
                }
            }
            case KernelFamily::laplace: {
                std::gamma_distribution<double> g(static_cast<double>(d), sigma);
                const double r = g(rng);
                unit_direction(rng, u);
                for (int i = 0; i < d; ++i) u[i] *= r;
                return u;
            }
        }
        return u;
    }

    /// d=1 cumulative distribution function (used by goodness-of-fit tests).
    double cdf1d(double x) const {
        if (d != 1) throw std::logic_error("cdf1d: only defined for d = 1");
        const double t = x / sigma;
        switch (family) {
            case KernelFamily::gaussian:
                return 0.5 * std::erfc(-t / std::numbers::sqrt2);
            case KernelFamily::tophat:
                if (t <= -1.0) return 0.0;
                if (t >= 1.0) return 1.0;
                return 0.5 * (t + 1.0);
            case KernelFamily::laplace:
                return t < 0.0 ? 0.5 * std::exp(t) : 1.0 - 0.5 * std::exp(-t);
        }
        return 0.0;
    }

  private:
    void finish() {
        switch (family) {
            case KernelFamily::gaussian:
                norm_const = std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.5 * d);
                break;
            case KernelFamily::tophat:
                norm_const = 1.0 / ball_volume(d, sigma);
                break;
            case KernelFamily::laplace: {
                double gamma_d = 1.0;
                for (int k = 2; k < d; ++k) gamma_d *= k;  // Gamma(d) for integer d
                norm_const = 1.0 / (sphere_surface(d) * gamma_d * std::pow(sigma, d));
                break;
            }
        }
        r_cut = solve_r_cut();
    }

    double solve_r_cut() const {
        if (family == KernelFamily::tophat) return sigma;
        double lo = 0.0, hi = sigma;
        while (tail_mass(hi) > tail_eps) hi *= 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-12 * sigma; ++it) {
            const double mid = 0.5 * (lo + hi);
            (tail_mass(mid) > tail_eps ? lo : hi) = mid;
        }
        return hi;
    }

    double tophat_hat(double x) const {
        if (x < 1e-8) return 1.0;
        switch (d) {
            case 1: return std::sin(x) / x;
            case 2: return 2.0 * std::cyl_bessel_j(1.0, x) / x;
            case 3: return 3.0 * (std::sin(x) - x * std::cos(x)) / (x * x * x);
        }
        return 0.0;
    }

    void unit_direction(Rng& rng, Vec& u) const {
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        switch (d) {
            case 1:
                u[0] = uni(rng) < 0.5 ? -1.0 : 1.0;
                return;
            case 2: {
                const double phi = 2.0 * std::numbers::pi * uni(rng);
                u[0] = std::cos(phi);
                u[1] = std::sin(phi);
                return;
            }
            case 3: {
                // Marsaglia (1972) sphere point picking
                std::uniform_real_distribution<double> sym(-1.0, 1.0);
                double v, w, s;
                do {
                    v = sym(rng);
                    w = sym(rng);
                    s = v * v + w * w;
                } while (s >= 1.0);
                const double root = std::sqrt(1.0 - s);
                u[0] = 2.0 * v * root;
                u[1] = 2.0 * w * root;
                u[2] = 1.0 - 2.0 * s;
                return;
            }
        }
    }
};

}  // namespace bdlp
