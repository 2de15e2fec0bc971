#include <doctest.h>

#include <cmath>
#include <vector>

#include "bdlp/simulator.hpp"

using namespace bdlp;

namespace {

ModelParams make_params(double m, double kp, double km, double L = 100.0,
                        KernelFamily fam = KernelFamily::gaussian, double sigma = 1.0) {
    ModelParams p;
    p.m = m;
    p.kappa_plus = kp;
    p.kappa_minus = km;
    p.a_plus = Kernel(fam, sigma, 1);
    p.a_minus = Kernel(fam, sigma, 1);
    p.space = SpaceSpec(1, L);
    return p;
}

Configuration config_at(const ModelParams& params, std::initializer_list<double> xs) {
    std::vector<Vec> pts;
    for (double x : xs) pts.push_back({x, 0.0, 0.0});
    return Configuration(params, pts);
}

/// Counts-only birth-death chain with rates (kappa+ n, m n): an independent
/// reference for the contact model's population-size law.
long reference_contact_count(double kp, double m, long n0, double t_end, Rng& rng) {
    long n = n0;
    double t = 0.0;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    while (n > 0) {
        const double rate = (kp + m) * n;
        std::exponential_distribution<double> exp_dt(rate);
        t += exp_dt(rng);
        if (t >= t_end) break;
        n += uni(rng) * (kp + m) < kp ? 1 : -1;
    }
    return n;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("poisson initial condition has the right mean count") {
    const auto params = make_params(1.0, 0.0, 0.0);
    Rng rng = make_rng(211);
    const double z = 0.5;
    const int draws = 1000;
    double sum = 0.0;
    for (int i = 0; i < draws; ++i) sum += sample_poisson_initial(params, z, rng).size();
    const double mean = sum / draws;
    const double expect = z * params.space.volume();  // 50
    const double se = std::sqrt(expect / draws);      // Poisson sd = sqrt(mean)
    CHECK(std::abs(mean - expect) < 4.0 * se);
}

TEST_CASE("poisson initial condition is empty in the z -> 0 limit") {
    auto params = make_params(1.0, 0.0, 0.0, 1.0);
    Rng rng = make_rng(223);
    for (int i = 0; i < 100; ++i) CHECK(sample_poisson_initial(params, 1e-9, rng).empty());
}

TEST_CASE("total rates of small configurations") {
    const auto params = make_params(0.7, 0.4, 1.0);
    SUBCASE("empty configuration is absorbing") {
        Configuration config(params);
        const auto rate = total_rate(params, config);
        CHECK(rate.birth == 0.0);
        CHECK(rate.death == 0.0);
    }
    SUBCASE("isolated particle has no competition") {
        const auto config = config_at(params, {10.0});
        const auto rate = total_rate(params, config);
        CHECK(rate.birth == doctest::Approx(params.kappa_plus));
        CHECK(rate.death == doctest::Approx(params.m));
    }
    SUBCASE("pair at distance r") {
        const double r = 1.2;
        const auto config = config_at(params, {10.0, 10.0 + r});
        const auto rate = total_rate(params, config);
        const double aL = params.a_minus.eval_periodized({r, 0, 0}, params.space);
        CHECK(rate.death == doctest::Approx(2.0 * params.m + 2.0 * aL).epsilon(1e-12));
        CHECK(rate.birth == doctest::Approx(2.0 * params.kappa_plus));
    }
}

TEST_CASE("pure death matches independent exponential lifetimes") {
    const auto params = make_params(0.8, 0.0, 0.0);
    const double t_probe = 1.0;
    const int replicates = 500, n0 = 100;
    Rng rng = make_rng(227);
    std::uniform_real_distribution<double> u(0.0, params.space.L);
    double sum = 0.0;
    for (int r = 0; r < replicates; ++r) {
        std::vector<Vec> pts(n0);
        for (auto& p : pts) p = {u(rng), 0.0, 0.0};
        Configuration config(params, pts);
        const auto traj = run(params, config, t_probe, {t_probe}, rng);
        sum += traj.counts.back();
    }
    const double p = std::exp(-params.m * t_probe);
    const double expect = n0 * p;
    const double se = std::sqrt(n0 * p * (1.0 - p) / replicates);  // binomial thinning
    CHECK(std::abs(sum / replicates - expect) < 4.0 * se);
}

TEST_CASE("free growth matches the exponential mean") {
    const auto params = make_params(0.0, 0.5, 0.0);
    const double t_probe = 2.0;
    const int replicates = 400, n0 = 50;
    Rng rng = make_rng(229);
    std::uniform_real_distribution<double> u(0.0, params.space.L);
    double sum = 0.0;
    for (int r = 0; r < replicates; ++r) {
        std::vector<Vec> pts(n0);
        for (auto& p : pts) p = {u(rng), 0.0, 0.0};
        Configuration config(params, pts);
        const auto traj = run(params, config, t_probe, {t_probe}, rng);
        sum += traj.counts.back();
    }
    const double g = std::exp(params.kappa_plus * t_probe);
    const double expect = n0 * g;           // Yule process from n0 lines
    const double var = n0 * g * (g - 1.0);  // Yule variance
    const double se = std::sqrt(var / replicates);
    CHECK(std::abs(sum / replicates - expect) < 4.0 * se);
}

TEST_CASE("death selection favors the crowded particle in the right proportion") {
    // pair at distance 0.5 plus an isolated particle; kappa- large
    auto params = make_params(0.3, 0.0, 5.0);
    const auto base = config_at(params, {10.0, 10.5, 50.0});
    std::vector<double> weight(3);
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
        weight[i] = params.m + base.competition_rate(i);
        total += weight[i];
    }
    Rng rng = make_rng(233);
    const int trials = 40000;
    std::vector<int> tally(3, 0);
    for (int t = 0; t < trials; ++t) {
        Configuration config = base;  // fresh copy, same state
        const auto ev = step(params, config, rng);
        REQUIRE(ev.kind == Event::Kind::death);
        ++tally[ev.subject];
    }
    for (int i = 0; i < 3; ++i) {
        const double p = weight[i] / total;
        const double se = std::sqrt(p * (1.0 - p) / trials);
        CHECK(std::abs(static_cast<double>(tally[i]) / trials - p) < 4.0 * se);
    }
    // the paired particles die more often than the isolated one
    CHECK(tally[0] > tally[2]);
    CHECK(tally[1] > tally[2]);
}

TEST_CASE("step on an empty configuration reports the absorbing state") {
    const auto params = make_params(1.0, 0.5, 0.0);
    Configuration config(params);
    Rng rng = make_rng(239);
    CHECK_THROWS_AS(step(params, config, rng), AbsorbingStateError);
}

TEST_CASE("empty initial configuration yields an all-empty trajectory") {
    const auto params = make_params(1.0, 0.5, 0.0);
    Configuration config(params);
    Rng rng = make_rng(241);
    const auto traj = run(params, config, 5.0, {0.0, 1.0, 2.0, 5.0}, rng);
    CHECK(traj.event_count == 0);
    for (long c : traj.counts) CHECK(c == 0);
}

TEST_CASE("identical seeds give bit-identical trajectories") {
    const auto params = make_params(1.0, 0.9, 0.4, 40.0);
    Rng rng_init = make_rng(251);
    const auto init = sample_poisson_initial(params, 0.5, rng_init);
    const auto a = run_seeded(params, init, 3.0, {0.0, 1.5, 3.0}, 777);
    const auto b = run_seeded(params, init, 3.0, {0.0, 1.5, 3.0}, 777);
    CHECK(a.event_count == b.event_count);
    CHECK(a.counts == b.counts);
    REQUIRE(a.snapshots.size() == b.snapshots.size());
    for (std::size_t i = 0; i < a.snapshots.size(); ++i) CHECK(a.snapshots[i] == b.snapshots[i]);
    const auto c = run_seeded(params, init, 3.0, {0.0, 1.5, 3.0}, 778);
    CHECK(a.counts != c.counts);  // a different stream actually differs
}

TEST_CASE("contact model density at t = 5 matches the decay law") {
    const auto params = make_params(1.0, 0.8, 0.0);
    const double z = 0.5, t_end = 5.0;
    const int replicates = 150;
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < replicates; ++r) {
        Rng rng = make_rng(replicate_seed(4242, r));
        const auto init = sample_poisson_initial(params, z, rng);
        const auto traj = run(params, init, t_end, {t_end}, rng);
        const double dens = traj.counts.back() / params.space.volume();
        sum += dens;
        sum2 += dens * dens;
    }
    const double mean = sum / replicates;
    const double se = std::sqrt((sum2 / replicates - mean * mean) / (replicates - 1.0));
    const double expect = z * std::exp((params.kappa_plus - params.m) * t_end);  // 0.18394
    CHECK(std::abs(mean - expect) < 4.0 * se);
}

TEST_CASE("absorbing state persists and snapshots stay empty") {
    const auto params = make_params(50.0, 0.0, 0.0, 10.0);
    const auto init = config_at(params, {1.0, 2.0, 3.0});
    const auto traj = run_seeded(params, init, 10.0, {0.5, 5.0, 10.0}, 31);
    CHECK(traj.event_count == 3);  // three deaths, then nothing
    CHECK(traj.counts[1] == 0);
    CHECK(traj.counts[2] == 0);
}

TEST_CASE("event cap reports explosion instead of silent truncation") {
    const auto params = make_params(0.0, 5.0, 0.0);
    Rng rng = make_rng(263);
    const auto init = sample_poisson_initial(params, 1.0, rng);
    RunOptions opts;
    opts.event_cap = 200;
    CHECK_THROWS_AS(run(params, init, 50.0, {}, rng, opts), ExplosionError);
}

TEST_CASE("cell-list competition rates equal the all-pairs sums") {
    auto params = make_params(0.5, 0.0, 1.3, 50.0, KernelFamily::gaussian, 0.7);
    Rng rng = make_rng(269);
    std::uniform_real_distribution<double> u(0.0, params.space.L);
    std::vector<Vec> pts(1000);
    for (auto& p : pts) p = {u(rng), 0.0, 0.0};
    Configuration config(params, pts);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double brute = config.recompute_rate(i);
        const double cached = config.competition_rate(i);
        CHECK(cached >= 0.0);
        CHECK(std::abs(cached - brute) <= 1e-10 * std::max(1.0, std::abs(brute)));
    }
    CHECK(config.competition_total() >= 0.0);
    CHECK(total_rate(params, config).death >= 0.0);
}

TEST_CASE("cell-list rates match brute force in two and three dimensions") {
    for (int d : {2, 3}) {
        ModelParams params;
        params.m = 0.5;
        params.kappa_plus = 0.0;
        params.kappa_minus = 1.0;
        params.a_plus = Kernel(KernelFamily::gaussian, 0.8, d);
        params.a_minus = Kernel(KernelFamily::gaussian, 0.8, d);
        params.space = SpaceSpec(d, 16.0);
        Rng rng = make_rng(600 + d);
        std::uniform_real_distribution<double> u(0.0, params.space.L);
        std::vector<Vec> pts(300);
        for (auto& p : pts) {
            p = {0.0, 0.0, 0.0};
            for (int c = 0; c < d; ++c) p[c] = u(rng);
        }
        Configuration config(params, pts);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double brute = config.recompute_rate(i);
            CHECK(std::abs(config.competition_rate(i) - brute) <=
                  1e-10 * std::max(1.0, std::abs(brute)));
        }
        // removal keeps the caches consistent through the index swaps
        for (int k = 0; k < 50; ++k) config.remove(static_cast<std::size_t>(k * 3 % config.size()));
        for (std::size_t i = 0; i < static_cast<std::size_t>(config.size()); ++i) {
            const double brute = config.recompute_rate(i);
            CHECK(std::abs(config.competition_rate(i) - brute) <=
                  1e-9 * std::max(1.0, std::abs(brute)));
        }
    }
}

TEST_CASE("incremental rate caches stay within drift tolerance over 1e5 events") {
    auto params = make_params(0.2, 1.0, 1.0, 100.0);
    Rng rng = make_rng(271);
    const auto init = sample_poisson_initial(params, 1.0, rng);
    RunOptions opts;
    opts.audit_interval = 100000;
    opts.store_positions = false;
    const auto traj = run(params, init, 2000.0, {}, rng, opts);
    REQUIRE(traj.event_count > 100000);
    CHECK(traj.max_cache_drift <= 1e-8);
}

TEST_CASE("with kappa- = 0 the simulator is indistinguishable from a contact reference") {
    const auto params = make_params(1.0, 0.7, 0.0, 50.0);
    const double t_end = 2.0;
    const int replicates = 300;
    const long n0 = 25;

    double sum_a = 0.0, sum2_a = 0.0, sum_b = 0.0, sum2_b = 0.0;
    for (int r = 0; r < replicates; ++r) {
        Rng rng = make_rng(replicate_seed(999, r));
        std::vector<Vec> pts(n0);
        std::uniform_real_distribution<double> u(0.0, params.space.L);
        for (auto& p : pts) p = {u(rng), 0.0, 0.0};
        const auto traj = run(params, Configuration(params, pts), t_end, {t_end}, rng);
        const double na = traj.counts.back();
        sum_a += na;
        sum2_a += na * na;

        Rng rng_ref = make_rng(replicate_seed(1000, r));
        const double nb = reference_contact_count(params.kappa_plus, params.m, n0, t_end, rng_ref);
        sum_b += nb;
        sum2_b += nb * nb;
    }
    const double mean_a = sum_a / replicates, mean_b = sum_b / replicates;
    const double var_a = sum2_a / replicates - mean_a * mean_a;
    const double var_b = sum2_b / replicates - mean_b * mean_b;
    const double se = std::sqrt((var_a + var_b) / replicates);
    CHECK(std::abs(mean_a - mean_b) < 3.0 * se);
}

TEST_CASE("record times must be increasing and inside the horizon") {
    const auto params = make_params(1.0, 0.0, 0.0);
    Configuration config(params);
    Rng rng = make_rng(277);
    CHECK_THROWS_AS(run(params, config, 1.0, {0.5, 0.25}, rng), std::invalid_argument);
    CHECK_THROWS_AS(run(params, config, 1.0, {0.5, 2.0}, rng), std::invalid_argument);
}

}  // TEST_SUITE
