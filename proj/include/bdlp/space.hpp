#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace bdlp {

/// Position or displacement in up to three dimensions. Components beyond the
/// active dimension are kept at exactly zero so norms and dot products can run
/// over all three slots unconditionally.
using Vec = std::array<double, 3>;

inline Vec vec_sub(const Vec& a, const Vec& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline Vec vec_add(const Vec& a, const Vec& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline double dot(const Vec& a, const Vec& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

/// Periodic simulation domain: a d-dimensional torus of side L.
struct SpaceSpec {
    int d = 1;
    double L = 100.0;

    SpaceSpec() = default;
    SpaceSpec(int dim, double side) : d(dim), L(side) { validate(); }

    void validate() const {
        if (d < 1 || d > 3) throw std::invalid_argument("SpaceSpec: d must be 1, 2 or 3");
        if (!(L > 0.0)) throw std::invalid_argument("SpaceSpec: L must be positive");
    }

    double volume() const {
        double v = 1.0;
        for (int i = 0; i < d; ++i) v *= L;
        return v;
    }

    /// Map a point into the fundamental cell [0,L)^d.
    Vec wrap(Vec x) const {
        for (int i = 0; i < d; ++i) {
            x[i] -= L * std::floor(x[i] / L);
            if (x[i] >= L) x[i] = 0.0;  // guard against floor rounding at the seam
        }
        return x;
    }

    /// Minimal-image representative of a displacement, components in [-L/2, L/2).
    Vec min_image(Vec u) const {
        for (int i = 0; i < d; ++i) {
            u[i] -= L * std::round(u[i] / L);
            if (u[i] >= 0.5 * L) u[i] -= L;
            if (u[i] < -0.5 * L) u[i] += L;
        }
        return u;
    }

    double torus_distance(const Vec& x, const Vec& y) const {
        return norm(min_image(vec_sub(x, y)));
    }
};

/// Axis-aligned box, used as the bounded support region of functions on
/// finite configurations and as the integration domain of Lebesgue-Poisson
/// integrals.
struct Box {
    Vec lo{0.0, 0.0, 0.0};
    Vec hi{0.0, 0.0, 0.0};
    int d = 1;

    Box() = default;
    Box(Vec low, Vec high, int dim) : lo(low), hi(high), d(dim) {
        for (int i = 0; i < d; ++i)
            if (!(hi[i] >= lo[i])) throw std::invalid_argument("Box: hi < lo");
    }

    static Box interval(double a, double b) { return Box{{a, 0, 0}, {b, 0, 0}, 1}; }

    double volume() const {
        double v = 1.0;
        for (int i = 0; i < d; ++i) v *= (hi[i] - lo[i]);
        return v;
    }

    double diameter() const {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += (hi[i] - lo[i]) * (hi[i] - lo[i]);
        return std::sqrt(s);
    }

    bool contains(const Vec& x) const {
        for (int i = 0; i < d; ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }
};

}  // namespace bdlp
