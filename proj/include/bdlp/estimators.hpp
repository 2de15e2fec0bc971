#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "bdlp/simulator.hpp"
#include "bdlp/space.hpp"

namespace bdlp {

/// Replicate-averaged population density per record time.
struct DensityEstimate {
    std::vector<double> times;
    std::vector<double> mean;     // 1/volume
    std::vector<double> std_err;  // sample std / sqrt(replicates)
    int replicates = 0;
};

/// Radially binned estimate of the second correlation function at one time.
/// Ordered pairs are counted (matching the definition of k2 on ordered
/// tuples), so a single pair at distance r contributes 2 to its bin.
struct PairCorrelationEstimate {
    std::vector<double> bin_lo;
    std::vector<double> bin_hi;
    std::vector<double> mean;     // 1/volume^2
    std::vector<double> std_err;
    std::vector<double> overflow_pairs;  // mean ordered pairs beyond the last bin
    int replicates = 0;
};

inline std::vector<double> uniform_bins(double r_max, int count) {
    std::vector<double> edges(static_cast<std::size_t>(count) + 1);
    for (int i = 0; i <= count; ++i) edges[i] = r_max * i / count;
    return edges;
}

/// Exact d-dimensional shell volume between radii. For d = 1 the "shell" is
/// two intervals (both displacement signs), consistent with ordered-pair
/// counting.
inline double shell_volume(int d, double r_lo, double r_hi) {
    switch (d) {
        case 1: return 2.0 * (r_hi - r_lo);
        case 2: return std::numbers::pi * (r_hi * r_hi - r_lo * r_lo);
        case 3: return 4.0 / 3.0 * std::numbers::pi * (r_hi * r_hi * r_hi - r_lo * r_lo * r_lo);
    }
    throw std::invalid_argument("shell_volume: d out of range");
}

namespace detail {

inline void mean_stderr(const std::vector<double>& xs, double& mean, double& se) {
    const std::size_t n = xs.size();
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(n);
    if (n < 2) {
        se = 0.0;
        return;
    }
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n - 1);
    se = std::sqrt(var / static_cast<double>(n));
}

}  // namespace detail

/// Mean density across replicate trajectories, which must share record times.
inline DensityEstimate density_estimate(const std::vector<Trajectory>& trajectories,
                                        const SpaceSpec& space) {
    if (trajectories.empty()) throw std::invalid_argument("density_estimate: no replicates");
    const auto& times = trajectories.front().record_times;
    for (const auto& t : trajectories)
        if (t.record_times != times)
            throw std::invalid_argument("density_estimate: replicates disagree on record times");

    DensityEstimate out;
    out.times = times;
    out.replicates = static_cast<int>(trajectories.size());
    const double volume = space.volume();
    std::vector<double> per_rep(trajectories.size());
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        for (std::size_t r = 0; r < trajectories.size(); ++r)
            per_rep[r] = static_cast<double>(trajectories[r].counts[ti]) / volume;
        double mean = 0.0, se = 0.0;
        detail::mean_stderr(per_rep, mean, se);
        out.mean.push_back(mean);
        out.std_err.push_back(se);
    }
    return out;
}

/// Per-snapshot ordered-pair counts in radial bins, normalized by L^d times
/// the exact shell volume; mean and stderr across replicates. Bin edges must
/// stay within L/2 so the minimal image is unique.
inline PairCorrelationEstimate pair_correlation_estimate(
    const std::vector<std::vector<Vec>>& snapshots, const SpaceSpec& space,
    const std::vector<double>& bin_edges) {
    if (snapshots.empty()) throw std::invalid_argument("pair_correlation_estimate: no snapshots");
    if (bin_edges.size() < 2)
        throw std::invalid_argument("pair_correlation_estimate: need at least one bin");
    for (std::size_t i = 1; i < bin_edges.size(); ++i)
        if (!(bin_edges[i] > bin_edges[i - 1]))
            throw std::invalid_argument("pair_correlation_estimate: bin edges must increase");
    if (bin_edges.back() > 0.5 * space.L + 1e-12)
        throw std::invalid_argument("pair_correlation_estimate: bins beyond L/2");

    const std::size_t nbins = bin_edges.size() - 1;
    const double r_min = bin_edges.front();
    const double r_max = bin_edges.back();
    const double volume = space.volume();

    PairCorrelationEstimate out;
    out.replicates = static_cast<int>(snapshots.size());
    out.bin_lo.assign(bin_edges.begin(), bin_edges.end() - 1);
    out.bin_hi.assign(bin_edges.begin() + 1, bin_edges.end());

    std::vector<std::vector<double>> per_rep(nbins,
                                             std::vector<double>(snapshots.size(), 0.0));
    std::vector<double> overflow(snapshots.size(), 0.0);

    for (std::size_t s = 0; s < snapshots.size(); ++s) {
        const auto& pts = snapshots[s];
        std::vector<double> counts(nbins, 0.0);
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                const double r = space.torus_distance(pts[i], pts[j]);
                if (r >= r_max) {
                    overflow[s] += 2.0;
                    continue;
                }
                if (r < r_min) continue;
                // uniform edges in the common case; general search otherwise
                std::size_t b = static_cast<std::size_t>(
                    std::upper_bound(bin_edges.begin(), bin_edges.end(), r) - bin_edges.begin());
                if (b == 0 || b > nbins) continue;
                counts[b - 1] += 2.0;  // ordered pairs
            }
        for (std::size_t b = 0; b < nbins; ++b)
            per_rep[b][s] = counts[b] / (volume * shell_volume(space.d, bin_edges[b], bin_edges[b + 1]));
    }

    for (std::size_t b = 0; b < nbins; ++b) {
        double mean = 0.0, se = 0.0;
        detail::mean_stderr(per_rep[b], mean, se);
        out.mean.push_back(mean);
        out.std_err.push_back(se);
    }
    out.overflow_pairs = overflow;
    return out;
}

}  // namespace bdlp
