#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "bdlp/harmonic.hpp"
#include "bdlp/moments.hpp"

using namespace bdlp;

namespace {

ModelParams make_params(double m, double kp, double km, KernelFamily fam = KernelFamily::gaussian,
                        double sigma = 1.0, double L = 100.0) {
    ModelParams p;
    p.m = m;
    p.kappa_plus = kp;
    p.kappa_minus = km;
    p.a_plus = Kernel(fam, sigma, 1);
    p.a_minus = Kernel(fam, sigma, 1);
    p.space = SpaceSpec(1, L);
    return p;
}

std::vector<double> constant_field(const PeriodicGrid& grid, double v) {
    return std::vector<double>(grid.size(), v);
}

/// zeta(3/2) by direct summation with an Euler-Maclaurin tail.
double zeta_three_halves() {
    const int n = 2000;
    double s = 0.0;
    for (int k = 1; k <= n; ++k) s += std::pow(k, -1.5);
    const double x = n + 1.0;
    s += 2.0 / std::sqrt(x) + 0.5 * std::pow(x, -1.5) - (1.5 / 12.0) * std::pow(x, -2.5);
    return s;
}

}  // namespace

TEST_SUITE("moments") {

TEST_CASE("contact density closed form") {
    auto params = make_params(1.0, 0.8, 0.0);
    CHECK(contact_density(5.0, 1.0, params) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    auto critical = make_params(0.8, 0.8, 0.0);
    CHECK(contact_density(7.3, 0.4, critical) == doctest::Approx(0.4).epsilon(1e-12));
    auto free_growth = make_params(0.0, 0.5, 0.0);
    CHECK(contact_density(2.0, 1.0, free_growth) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    auto bad = make_params(1.0, 0.8, 0.3);
    CHECK_THROWS_AS(contact_density(1.0, 1.0, bad), std::invalid_argument);
}

TEST_CASE("grid transform round trip is the identity") {
    PeriodicGrid grid(1, 256, 40.0);
    Rng rng = make_rng(401);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::complex<double>> f(grid.size());
    for (auto& v : f) v = {u(rng), u(rng)};
    auto g = f;
    grid.forward(g);
    grid.inverse(g);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(g[i] - f[i]) < 1e-12);
}

TEST_CASE("two-dimensional grid transform round trip") {
    PeriodicGrid grid(2, 32, 16.0);
    Rng rng = make_rng(403);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::complex<double>> f(grid.size());
    for (auto& v : f) v = {u(rng), u(rng)};
    auto g = f;
    grid.forward(g);
    grid.inverse(g);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(g[i] - f[i]) < 1e-12);
}

TEST_CASE("spectral convolution of gaussians merges their widths") {
    // N(0, 1) * N(0, 2^2) = N(0, 5), all as densities on a wide torus
    PeriodicGrid grid(1, 512, 40.0);
    Kernel a(KernelFamily::gaussian, 1.0, 1);
    Kernel bump(KernelFamily::gaussian, 2.0, 1);
    Kernel merged(KernelFamily::gaussian, std::sqrt(5.0), 1);
    std::vector<double> field(grid.size());
    for (std::size_t i = 0; i < field.size(); ++i) field[i] = bump.eval(grid.point(i));
    const auto conv = grid.convolve(grid.kernel_symbol(a), field);
    for (std::size_t i = 0; i < field.size(); ++i)
        CHECK(conv[i] == doctest::Approx(merged.eval(grid.point(i))).epsilon(1e-9));
}

TEST_CASE("aliasing gate per kernel family") {
    SUBCASE("gaussian passes at the default grid") {
        PeriodicGrid grid(1, 1024, 100.0);
        CHECK(grid.kernel_alias_deviation(Kernel(KernelFamily::gaussian, 1.0, 1)) < 1e-8);
    }
    SUBCASE("laplace at the default grid is reported too coarse") {
        PeriodicGrid grid(1, 1024, 100.0);
        auto params = make_params(1.0, 0.5, 0.0, KernelFamily::laplace);
        const auto q0 = constant_field(grid, 1.0);
        CHECK_THROWS_AS(contact_pair_spectral(params, grid, 1.0, q0, 0.1, 1e-2, false),
                        GridTooCoarseError);
    }
    SUBCASE("laplace passes on a refined grid") {
        PeriodicGrid grid(1, 8192, 100.0);
        auto params = make_params(1.0, 0.5, 0.0, KernelFamily::laplace);
        const auto q0 = constant_field(grid, 1.0);
        CHECK_NOTHROW(contact_pair_spectral(params, grid, 1.0, q0, 0.05, 1e-2, false));
    }
    SUBCASE("tophat requires resolved kernel radius") {
        auto params = make_params(1.0, 0.5, 0.0, KernelFamily::tophat);
        PeriodicGrid coarse(1, 64, 100.0);
        const auto q0c = constant_field(coarse, 1.0);
        CHECK_THROWS_AS(contact_pair_spectral(params, coarse, 1.0, q0c, 0.1, 1e-2, false),
                        GridTooCoarseError);
        PeriodicGrid fine(1, 1024, 100.0);
        const auto q0f = constant_field(fine, 1.0);
        CHECK_NOTHROW(contact_pair_spectral(params, fine, 1.0, q0f, 0.1, 1e-2, false));
    }
}

TEST_CASE("contact spectral solution honors the initial condition") {
    PeriodicGrid grid(1, 512, 100.0);
    auto params = make_params(1.0, 0.8, 0.0);
    std::vector<double> q0(grid.size());
    for (std::size_t i = 0; i < q0.size(); ++i)
        q0[i] = 0.25 + 0.1 * std::cos(2.0 * std::numbers::pi * grid.point(i)[0] / grid.L);
    const auto sol = contact_pair_spectral(params, grid, 0.5, q0, 1.0, 1e-3, false);
    const auto qt0 = sol.q(0.0);
    for (std::size_t i = 0; i < q0.size(); ++i) CHECK(qt0[i] == doctest::Approx(q0[i]).epsilon(1e-12));
}

TEST_CASE("without births every mode decays at rate 2m") {
    PeriodicGrid grid(1, 512, 100.0);
    auto params = make_params(0.7, 0.0, 0.0);
    std::vector<double> q0(grid.size());
    for (std::size_t i = 0; i < q0.size(); ++i) {
        const double u = grid.point(i)[0];
        q0[i] = 1.0 + 0.3 * std::cos(2.0 * std::numbers::pi * u / grid.L) + 0.05 * u * u / 2500.0;
    }
    const auto sol = contact_pair_spectral(params, grid, 1.0, q0, 2.0, 1e-3, false);
    const double decay = std::exp(-2.0 * params.m * 2.0);
    const auto qt = sol.q(2.0);
    for (std::size_t i = 0; i < q0.size(); ++i)
        CHECK(qt[i] == doctest::Approx(q0[i] * decay).epsilon(1e-10));
}

TEST_CASE("two-dimensional contact solve decays mode-wise without births") {
    PeriodicGrid grid(2, 64, 16.0);
    ModelParams params;
    params.m = 0.7;
    params.kappa_plus = 0.0;
    params.kappa_minus = 0.0;
    params.a_plus = Kernel(KernelFamily::gaussian, 1.0, 2);
    params.a_minus = Kernel(KernelFamily::gaussian, 1.0, 2);
    params.space = SpaceSpec(2, 16.0);
    std::vector<double> q0(grid.size());
    for (std::size_t i = 0; i < q0.size(); ++i) {
        const Vec u = grid.point(i);
        q0[i] = 1.0 + 0.2 * std::cos(2.0 * std::numbers::pi * u[0] / grid.L) *
                          std::cos(2.0 * std::numbers::pi * u[1] / grid.L);
    }
    const auto sol = contact_pair_spectral(params, grid, 1.0, q0, 1.5, 1e-3, false);
    const double decay = std::exp(-2.0 * params.m * 1.5);
    const auto qt = sol.q(1.5);
    for (std::size_t i = 0; i < q0.size(); ++i)
        CHECK(qt[i] == doctest::Approx(q0[i] * decay).epsilon(1e-10));
}

TEST_CASE("exact-mode and RK4 integrations of the contact pair equation agree") {
    PeriodicGrid grid(1, 1024, 100.0);
    auto params = make_params(1.0, 0.8, 0.0);
    const double k1_0 = 1.0;
    const auto q0 = constant_field(grid, k1_0 * k1_0);  // Poisson start
    const auto sol = contact_pair_spectral(params, grid, k1_0, q0, 5.0, 1e-3, true);
    CHECK(sol.rk4_max_rel_dev() <= 1e-6);
}

TEST_CASE("exact-mode solution equals per-mode quadrature of the Duhamel integral") {
    PeriodicGrid grid(1, 512, 100.0);
    auto params = make_params(1.0, 0.8, 0.0);
    const double k1_0 = 1.0;
    const auto q0 = constant_field(grid, 1.0);
    const auto sol = contact_pair_spectral(params, grid, k1_0, q0, 5.0, 1e-3, false);

    auto q0_hat = grid.to_complex(q0);
    grid.forward(q0_hat);
    auto src_hat = grid.to_complex(grid.sample_kernel(params.a_plus));
    grid.forward(src_hat);
    const auto symbol = grid.kernel_symbol(params.a_plus);
    const QuadratureRule rule = gauss_legendre(48);
    const double mu = params.kappa_plus - params.m;

    for (double t : {0.5, 1.0, 2.0, 3.5, 5.0}) {
        std::vector<std::complex<double>> modes(grid.size());
        for (std::size_t j = 0; j < modes.size(); ++j) {
            const double lambda = -2.0 * params.m + 2.0 * params.kappa_plus * symbol[j];
            const std::complex<double> s = 2.0 * params.kappa_plus * src_hat[j] * k1_0;
            const double duhamel = gl_integrate(
                rule, [&](double w) { return std::exp(lambda * (t - w) + mu * w); }, 0.0, t);
            modes[j] = std::exp(lambda * t) * q0_hat[j] + s * duhamel;
        }
        grid.inverse(modes);
        const auto direct = grid.to_real(modes);
        const auto exact = sol.q(t);
        double scale = 0.0, dev = 0.0;
        for (std::size_t i = 0; i < exact.size(); ++i) {
            scale = std::max(scale, std::abs(exact[i]));
            dev = std::max(dev, std::abs(exact[i] - direct[i]));
        }
        CHECK(dev / scale <= 1e-4);
    }
}

TEST_CASE("evenness of the pair correlation is preserved") {
    PeriodicGrid grid(1, 512, 100.0);
    auto params = make_params(1.0, 0.8, 0.0);
    std::vector<double> q0(grid.size());
    for (std::size_t i = 0; i < q0.size(); ++i) {
        const double u = grid.point(i)[0];
        q0[i] = 1.0 + 0.2 * std::cos(4.0 * std::numbers::pi * u / grid.L);
    }
    const auto sol = contact_pair_spectral(params, grid, 1.0, q0, 3.0, 1e-3, false);
    const auto qt = sol.q(3.0);
    const int n = grid.n;
    for (int i = 1; i < n; ++i) CHECK(qt[i] == doctest::Approx(qt[n - i]).epsilon(1e-12));

    // hierarchy route with competition
    auto bdlp = make_params(2.0, 0.5, 0.4);
    const auto states = bdlp_hierarchy_solve(bdlp, ClosureScheme::power1(), grid, 0.5, q0, 0.5, 1e-3);
    const auto& qh = states.back().q;
    for (int i = 1; i < n; ++i) CHECK(qh[i] == doctest::Approx(qh[n - i]).epsilon(1e-12));
}

TEST_CASE("hierarchy with kappa- = 0 reduces to the contact solution") {
    PeriodicGrid grid(1, 512, 100.0);
    auto params = make_params(1.0, 0.8, 0.0);
    const double k1_0 = 1.0;
    const auto q0 = constant_field(grid, 1.0);
    const auto contact = contact_pair_spectral(params, grid, k1_0, q0, 1.0, 1e-3, false);
    for (const auto& closure : {ClosureScheme::power1(), ClosureScheme::kirkwood()}) {
        const auto states = bdlp_hierarchy_solve(params, closure, grid, k1_0, q0, 1.0, 1e-3);
        const auto& last = states.back();
        CHECK(last.k1 == doctest::Approx(contact.k1(1.0)).epsilon(1e-10));
        const auto qc = contact.q(1.0);
        double scale = 0.0, dev = 0.0;
        for (std::size_t i = 0; i < qc.size(); ++i) {
            scale = std::max(scale, std::abs(qc[i]));
            dev = std::max(dev, std::abs(qc[i] - last.q[i]));
        }
        CHECK(dev / scale <= 1e-10);
    }
}

TEST_CASE("empty population is a fixed point of the hierarchy") {
    PeriodicGrid grid(1, 256, 100.0);
    auto params = make_params(1.0, 0.8, 0.5);
    const auto states = bdlp_hierarchy_solve(params, ClosureScheme::power1(), grid, 0.0,
                                             constant_field(grid, 0.0), 2.0, 1e-2, {0.5, 1.0, 2.0});
    for (const auto& st : states) {
        CHECK(st.k1 == 0.0);
        for (double v : st.q) CHECK(v == 0.0);
    }
}

TEST_CASE("hierarchy right side matches the adjoint symbol at one and two points") {
    // dk1/dt and dq/dt from the solver must agree with Monte-Carlo estimates
    // of (L^* k)(eta) for the translation-invariant k with the closure's
    // third correlation, at |eta| = 1 and 2.
    PeriodicGrid grid(1, 1024, 100.0);
    auto params = make_params(1.2, 0.8, 0.6);
    const double k1v = 0.7;
    Kernel bump(KernelFamily::gaussian, 1.4, 1);
    auto qf = [k1v, bump](double u) { return k1v * k1v + 0.3 * bump.radial_eval(std::abs(u)); };

    std::vector<double> q0(grid.size());
    for (std::size_t i = 0; i < q0.size(); ++i) q0[i] = qf(grid.point(i)[0]);

    for (auto tag : {ClosureScheme::Tag::power1, ClosureScheme::Tag::kirkwood}) {
        ClosureScheme closure;
        closure.tag = tag;
        FiniteFunction k(
            [k1v, qf, tag](const FiniteConfiguration& eta) {
                switch (eta.size()) {
                    case 0: return 1.0;
                    case 1: return k1v;
                    case 2: return qf(eta.points[1][0] - eta.points[0][0]);
                    case 3: {
                        const double q01 = qf(eta.points[1][0] - eta.points[0][0]);
                        const double q02 = qf(eta.points[2][0] - eta.points[0][0]);
                        const double q12 = qf(eta.points[2][0] - eta.points[1][0]);
                        if (tag == ClosureScheme::Tag::power1)
                            return k1v * (q01 + q02 + q12) - 2.0 * k1v * k1v * k1v;
                        return q01 * q02 * q12 / (k1v * k1v * k1v);
                    }
                    default: return 0.0;
                }
            },
            3);

        HierarchySolver solver(params, closure, grid);
        double dk1 = 0.0;
        std::vector<double> dq;
        solver.rhs(k1v, q0, dk1, dq);

        Rng rng = make_rng(431);
        // |eta| = 1: first-moment equation
        const auto one = apply_symbol_adjoint(params, k, FiniteConfiguration{{Vec{50.0, 0, 0}}},
                                              60000, rng);
        CHECK(std::abs(one.value - dk1) <= 3.0 * one.std_err + 1e-6);

        // |eta| = 2 at a few grid separations
        for (int idx : {5, 13, 40}) {
            const double u = grid.point(idx)[0];
            FiniteConfiguration pair{{Vec{50.0, 0, 0}, Vec{50.0 + u, 0, 0}}};
            const auto two = apply_symbol_adjoint(params, k, pair, 60000, rng);
            CHECK(std::abs(two.value - dq[idx]) <= 3.0 * two.std_err + 1e-6);
        }
    }
}

TEST_CASE("strong mortality and competition drive the hierarchy to extinction") {
    PeriodicGrid grid(1, 512, 100.0);
    auto params = make_params(20.0, 1.0, 1.0);
    const double k1_0 = 0.5;
    const auto q0 = constant_field(grid, k1_0 * k1_0);
    for (const auto& closure : {ClosureScheme::power1(), ClosureScheme::kirkwood()}) {
        double prev = k1_0;
        bool monotone = true;
        auto observer = [&](const MomentState& st) {
            if (st.k1 > prev + 1e-12) monotone = false;
            prev = st.k1;
        };
        const auto states =
            bdlp_hierarchy_solve(params, closure, grid, k1_0, q0, 10.0, 2e-3, {}, observer);
        CHECK(monotone);
        CHECK(states.back().k1 < 1e-3 * k1_0);
    }
}

TEST_CASE("finite differences of k1 match the first-moment equation") {
    PeriodicGrid grid(1, 256, 100.0);
    auto params = make_params(1.5, 1.0, 0.5);
    const double k1_0 = 0.6;
    const auto q0 = constant_field(grid, k1_0 * k1_0);
    const double h = 0.05;
    std::vector<double> times{1.0 - h, 1.0, 1.0 + h};
    HierarchySolver solver(params, ClosureScheme::power1(), grid);
    const auto states = solver.solve(k1_0, q0, 1.0 + h, 1e-3, times);
    REQUIRE(states.size() >= 3);
    const double fd = (states[2].k1 - states[0].k1) / (2.0 * h);
    double dk1 = 0.0;
    std::vector<double> dq;
    solver.rhs(states[1].k1, states[1].q, dk1, dq);
    CHECK(std::abs(fd - dk1) <= 0.01 * std::abs(dk1) + 1e-8);  // O(h^2) residual
}

TEST_CASE("numerical blowup aborts with a diagnostic error") {
    PeriodicGrid grid(1, 256, 100.0);
    auto params = make_params(50.0, 0.5, 0.0);
    CHECK_THROWS_AS(bdlp_hierarchy_solve(params, ClosureScheme::power1(), grid, 0.5,
                                         constant_field(grid, 0.25), 50.0, 0.5),
                    HierarchyError);
}

TEST_CASE("analytic bounds closed forms") {
    SUBCASE("factorial bound at t = 0") {
        auto params = make_params(1.0, 0.8, 0.0);
        const double a0 = params.a_plus.radial_eval(0.0);
        const auto b = analytic_bounds(params, 1.0, a0, 0.0, 1, 1.0);
        CHECK(b.factorial == doctest::Approx(std::max(1.0, 0.8) * (1.0 + a0) * 1.0).epsilon(1e-12));
    }
    SUBCASE("tophat probe gives beta = 0.4 and the frozen two-point bound") {
        auto params = make_params(1.0, 0.8, 0.0, KernelFamily::tophat, 1.0);
        const auto b = analytic_bounds(params, 1.0, 0.5, 1.0, 2, 1.0);
        CHECK(b.alpha == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(b.beta == doctest::Approx(0.4).epsilon(1e-12));
        CHECK(b.cluster_two_point ==
              doctest::Approx(2.0 * 0.16 * std::exp(-0.4)).epsilon(1e-12));  // 0.21450...
    }
    SUBCASE("critical balance makes the two-point bound linear in t") {
        auto params = make_params(0.8, 0.8, 0.0, KernelFamily::tophat, 1.0);
        const auto b1 = analytic_bounds(params, 1.0, 0.5, 1.0, 2, 1.0);
        const auto b2 = analytic_bounds(params, 1.0, 0.5, 2.0, 2, 1.0);
        CHECK(b2.cluster_two_point == doctest::Approx(2.0 * b1.cluster_two_point).epsilon(1e-12));
    }
    SUBCASE("vacuous lower bound is reported, not failed") {
        auto params = make_params(1.0, 0.8, 0.0, KernelFamily::tophat, 1.0);
        const auto b = analytic_bounds(params, 1.0, 0.5, 1.0, 2, 2.5);  // probe wider than support
        CHECK_FALSE(b.alpha_positive);
        CHECK(b.cluster == 0.0);
    }
    SUBCASE("competition parameters are rejected") {
        auto params = make_params(1.0, 0.8, 0.3);
        CHECK_THROWS_AS(analytic_bounds(params, 1.0, 0.5, 1.0, 2, 1.0), std::invalid_argument);
    }
}

TEST_CASE("D-integral matches the gaussian series oracle in three dimensions") {
    Kernel g(KernelFamily::gaussian, 1.0, 3);
    const auto res = compute_D(g, 3);
    REQUIRE(res.converged);
    const double oracle =
        4.0 * std::numbers::pi * std::sqrt(std::numbers::pi / 2.0) * zeta_three_halves();
    CHECK(res.value == doctest::Approx(oracle).epsilon(1e-4));
    CHECK(res.g_sup == doctest::Approx(res.value / (2.0 * std::pow(2.0 * std::numbers::pi, 3))));
}

TEST_CASE("D-integral scales as sigma^{-d}") {
    Kernel g1(KernelFamily::gaussian, 1.0, 3);
    Kernel g2(KernelFamily::gaussian, 2.0, 3);
    const auto r1 = compute_D(g1, 3);
    const auto r2 = compute_D(g2, 3);
    REQUIRE(r1.converged);
    REQUIRE(r2.converged);
    CHECK(r2.value == doctest::Approx(r1.value / 8.0).epsilon(2e-4));

    Kernel l1(KernelFamily::laplace, 1.0, 3);
    Kernel l2(KernelFamily::laplace, 2.0, 3);
    const auto s1 = compute_D(l1, 3);
    const auto s2 = compute_D(l2, 3);
    REQUIRE(s1.converged);
    REQUIRE(s2.converged);
    CHECK(s2.value == doctest::Approx(s1.value / 8.0).epsilon(2e-4));
}

TEST_CASE("D-integral divergences are reported, not returned") {
    Kernel g2(KernelFamily::gaussian, 1.0, 2);
    CHECK_FALSE(compute_D(g2, 2).converged);  // logarithmic divergence at p = 0
    Kernel t3(KernelFamily::tophat, 1.0, 3);
    CHECK_FALSE(compute_D(t3, 3).converged);  // transform not integrable at infinity
}

TEST_CASE("sub-poissonian monitor holds under the semigroup conditions") {
    // kappa+ = kappa- = 1, C = 4, m = 11 > 2 (kappa- C + kappa+) = 10
    PeriodicGrid grid(1, 512, 100.0);
    auto params = make_params(11.0, 1.0, 1.0);
    const double C = 4.0;
    const double k1_0 = 0.5;
    const auto q0 = constant_field(grid, k1_0 * k1_0);
    const double q_sup_0 = k1_0 * k1_0;
    for (const auto& closure : {ClosureScheme::power1(), ClosureScheme::kirkwood()}) {
        bool ok = true;
        auto observer = [&](const MomentState& st) {
            if (st.k1 / C > 1.01 * k1_0 / C) ok = false;
            double sup = 0.0;
            for (double v : st.q) sup = std::max(sup, std::abs(v));
            if (sup / (C * C) > 1.01 * q_sup_0 / (C * C)) ok = false;
        };
        bdlp_hierarchy_solve(params, closure, grid, k1_0, q0, 10.0, 2e-3, {}, observer);
        CHECK(ok);
    }
}

}  // TEST_SUITE
