#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bdlp/cell_list.hpp"
#include "bdlp/params.hpp"
#include "bdlp/prefix_sum_tree.hpp"
#include "bdlp/random.hpp"

namespace bdlp {

/// Thrown when a run exceeds its event budget (supercritical explosion).
struct ExplosionError : std::runtime_error {
    std::uint64_t event_count;
    explicit ExplosionError(std::uint64_t n)
        : std::runtime_error("event cap exceeded after " + std::to_string(n) +
                             " events; population is exploding"),
          event_count(n) {}
};

/// Thrown when step() is asked to advance a configuration with zero total
/// rate (the empty configuration is absorbing).
struct AbsorbingStateError : std::runtime_error {
    AbsorbingStateError() : std::runtime_error("total event rate is zero (absorbing state)") {}
};

/// Particle configuration on the torus with incrementally maintained caches:
/// a cell list at the competition cutoff, per-particle competition rates
///   w_i = kappa- * sum_{j != i} a-_L(x_i - x_j)   (pairs beyond r_cut drop),
/// their running total W, and a prefix-sum tree over the death weights
/// m + w_i used for O(log N) death selection.
class Configuration {
  public:
    Configuration() = default;

    explicit Configuration(const ModelParams& params)
        : space_(params.space),
          m_(params.m),
          kappa_minus_(params.kappa_minus),
          a_minus_(params.a_minus),
          cells_(params.space, params.a_minus.r_cut) {
        params.validate();
    }

    Configuration(const ModelParams& params, const std::vector<Vec>& points) : Configuration(params) {
        for (const auto& x : points) insert(space_.wrap(x));
    }

    int size() const { return static_cast<int>(positions_.size()); }
    bool empty() const { return positions_.empty(); }
    const std::vector<Vec>& positions() const { return positions_; }
    const SpaceSpec& space() const { return space_; }
    double competition_total() const { return total_w_; }
    double competition_rate(std::size_t i) const { return w_[i]; }
    double death_rate_total() const { return death_tree_.total(); }

    /// Competition contribution of an (unordered) pair at displacement u:
    /// truncated periodized kernel times kappa-.
    double pair_rate(const Vec& u) const {
        if (kappa_minus_ == 0.0) return 0.0;
        const Vec um = space_.min_image(u);
        if (norm(um) > a_minus_.r_cut) return 0.0;
        return kappa_minus_ * a_minus_.eval_periodized(um, space_);
    }

    /// Insert a particle (position must already lie in [0,L)^d).
    std::size_t insert(const Vec& x) {
        const std::size_t idx = positions_.size();
        double w_new = 0.0;
        if (kappa_minus_ != 0.0)
            cells_.for_neighbors(x, [&](std::size_t j) {
                const double c = pair_rate(vec_sub(x, positions_[j]));
                if (c == 0.0) return;
                w_new += c;
                w_[j] += c;
                death_tree_.set(j, m_ + w_[j]);
            });
        positions_.push_back(x);
        w_.push_back(w_new);
        cells_.insert(idx, x);
        death_tree_.push_back(m_ + w_new);
        total_w_ += 2.0 * w_new;
        return idx;
    }

    /// Remove particle i (swap-with-last keeps indices dense).
    void remove(std::size_t i) {
        const Vec x = positions_[i];
        cells_.remove(i);
        if (kappa_minus_ != 0.0)
            cells_.for_neighbors(x, [&](std::size_t j) {
                if (j == i) return;
                const double c = pair_rate(vec_sub(x, positions_[j]));
                if (c == 0.0) return;
                w_[j] -= c;
                death_tree_.set(j, m_ + w_[j]);
            });
        total_w_ -= 2.0 * w_[i];
        const std::size_t last = positions_.size() - 1;
        if (i != last) {
            positions_[i] = positions_[last];
            w_[i] = w_[last];
            cells_.rename(last, i);
        }
        positions_.pop_back();
        w_.pop_back();
        death_tree_.swap_remove(i);
    }

    /// Brute-force recomputation of one particle's competition rate.
    double recompute_rate(std::size_t i) const {
        double w = 0.0;
        for (std::size_t j = 0; j < positions_.size(); ++j)
            if (j != i) w += pair_rate(vec_sub(positions_[i], positions_[j]));
        return w;
    }

    /// Relative drift of the incremental total W against a from-scratch
    /// recomputation. Does not modify state.
    double cache_drift() const {
        double w_exact = 0.0;
        for (std::size_t i = 0; i < positions_.size(); ++i) w_exact += recompute_rate(i);
        return std::abs(total_w_ - w_exact) / std::max(std::abs(w_exact), 1.0);
    }

    /// Recompute all caches exactly (called periodically by run()).
    void refresh() {
        total_w_ = 0.0;
        for (std::size_t i = 0; i < positions_.size(); ++i) {
            w_[i] = recompute_rate(i);
            total_w_ += w_[i];
            death_tree_.set(i, m_ + w_[i]);
        }
        death_tree_.rebuild();
    }

    std::size_t sample_death_index(double u) const { return death_tree_.sample(u); }

  private:
    SpaceSpec space_;
    double m_ = 0.0;
    double kappa_minus_ = 0.0;
    Kernel a_minus_;
    CellList cells_;
    std::vector<Vec> positions_;
    std::vector<double> w_;
    PrefixSumTree death_tree_;
    double total_w_ = 0.0;
};

struct Event {
    enum class Kind { birth, death };
    Kind kind = Kind::birth;
    double dt = 0.0;
    std::size_t subject = 0;  // death: removed index (pre-removal); birth: new index
    std::size_t parent = 0;   // birth only
    Vec position{0.0, 0.0, 0.0};
};

struct TotalRate {
    double birth = 0.0;
    double death = 0.0;
    double total() const { return birth + death; }
};

/// Total birth and death rates of the configuration: birth = kappa+ N
/// (dispersal is a probability density, so the birth integral is exact),
/// death = m N + W.
inline TotalRate total_rate(const ModelParams& params, const Configuration& config) {
    const double n = static_cast<double>(config.size());
    return {params.kappa_plus * n, params.m * n + config.competition_total()};
}

/// Draw particle count ~ Poisson(z L^d) and i.i.d. uniform positions: a
/// sample of the Poisson point field at activity z on the torus.
inline Configuration sample_poisson_initial(const ModelParams& params, double z, Rng& rng) {
    if (!(z > 0.0)) throw std::invalid_argument("sample_poisson_initial: z must be positive");
    std::poisson_distribution<long> count(z * params.space.volume());
    const long n = count(rng);
    Configuration config(params);
    std::uniform_real_distribution<double> u(0.0, params.space.L);
    for (long i = 0; i < n; ++i) {
        Vec x{0.0, 0.0, 0.0};
        for (int c = 0; c < params.space.d; ++c) x[c] = u(rng);
        config.insert(config.space().wrap(x));
    }
    return config;
}

/// One event of the chain, applied in place: exponential waiting time at the
/// total rate, then a birth (uniform parent, offspring displaced by an exact
/// a+ draw, wrapped) or a death (particle i with probability proportional to
/// m + w_i).
inline Event step(const ModelParams& params, Configuration& config, Rng& rng) {
    const TotalRate rate = total_rate(params, config);
    if (!(rate.total() > 0.0)) throw AbsorbingStateError{};

    Event ev;
    std::exponential_distribution<double> exp_dt(rate.total());
    ev.dt = exp_dt(rng);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    if (uni(rng) * rate.total() < rate.birth) {
        ev.kind = Event::Kind::birth;
        std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(config.size()) - 1);
        ev.parent = pick(rng);
        const Vec x = config.space().wrap(vec_add(config.positions()[ev.parent], params.a_plus.sample(rng)));
        ev.position = x;
        ev.subject = config.insert(x);
    } else {
        ev.kind = Event::Kind::death;
        ev.subject = config.sample_death_index(uni(rng));
        ev.position = config.positions()[ev.subject];
        config.remove(ev.subject);
    }
    return ev;
}

/// Recorded history of one run: per record time the particle count and
/// (optionally) the full position list.
struct Trajectory {
    std::vector<double> record_times;
    std::vector<long> counts;
    std::vector<std::vector<Vec>> snapshots;  // empty when positions not stored
    std::uint64_t seed = 0;
    std::uint64_t event_count = 0;
    double max_cache_drift = 0.0;
};

struct RunOptions {
    std::uint64_t event_cap = 100000000;  // explicit explosion diagnosis past this
    bool store_positions = true;
    std::uint64_t audit_interval = 100000;  // cache audit/refresh period, in events
};

/// Simulate from `init` until t_end (or absorption), capturing at each record
/// time the state carried from the last event at or before it. Deterministic
/// given (params, init, rng state).
inline Trajectory run(const ModelParams& params, const Configuration& init, double t_end,
                      const std::vector<double>& record_times, Rng& rng,
                      const RunOptions& opts = {}) {
    params.validate();
    for (std::size_t i = 0; i < record_times.size(); ++i) {
        if (record_times[i] < 0.0 || record_times[i] > t_end)
            throw std::invalid_argument("run: record times must lie in [0, t_end]");
        if (i > 0 && !(record_times[i] > record_times[i - 1]))
            throw std::invalid_argument("run: record times must be strictly increasing");
    }

    Trajectory traj;
    traj.record_times = record_times;
    Configuration config = init;
    double t = 0.0;
    std::size_t next_record = 0;

    auto capture_through = [&](double horizon) {
        while (next_record < record_times.size() && record_times[next_record] < horizon) {
            traj.counts.push_back(config.size());
            if (opts.store_positions) traj.snapshots.push_back(config.positions());
            ++next_record;
        }
    };

    while (t < t_end) {
        const TotalRate rate = total_rate(params, config);
        if (!(rate.total() > 0.0)) break;  // absorbing (or frozen) state
        std::exponential_distribution<double> exp_dt(rate.total());
        const double dt = exp_dt(rng);
        if (t + dt > t_end) {
            t = t_end;
            break;
        }
        capture_through(t + dt);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        if (uni(rng) * rate.total() < rate.birth) {
            std::uniform_int_distribution<std::size_t> pick(
                0, static_cast<std::size_t>(config.size()) - 1);
            const std::size_t parent = pick(rng);
            config.insert(config.space().wrap(
                vec_add(config.positions()[parent], params.a_plus.sample(rng))));
        } else {
            config.remove(config.sample_death_index(uni(rng)));
        }
        t += dt;
        ++traj.event_count;
        if (traj.event_count > opts.event_cap) throw ExplosionError{traj.event_count};
        if (opts.audit_interval > 0 && traj.event_count % opts.audit_interval == 0) {
            traj.max_cache_drift = std::max(traj.max_cache_drift, config.cache_drift());
            config.refresh();
        }
    }
    // remaining record times see the final (possibly absorbing) state
    capture_through(t_end + 1.0);
    return traj;
}

/// Convenience wrapper deriving the rng from an explicit seed and recording it.
inline Trajectory run_seeded(const ModelParams& params, const Configuration& init, double t_end,
                             const std::vector<double>& record_times, std::uint64_t seed,
                             const RunOptions& opts = {}) {
    Rng rng = make_rng(seed);
    Trajectory traj = run(params, init, t_end, record_times, rng, opts);
    traj.seed = seed;
    return traj;
}

}  // namespace bdlp
