#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "bdlp/space.hpp"

namespace bdlp {

/// Periodic cell list over [0,L)^d with cell side >= interaction range, so
/// every pair within range is found in the 3^d neighborhood of a cell. Stores
/// particle indices in per-cell buckets; removal swaps with the bucket tail.
class CellList {
  public:
    CellList() = default;

    CellList(const SpaceSpec& space, double range) : space_(space) {
        cells_per_axis_ = std::max(1, static_cast<int>(std::floor(space.L / std::max(range, 1e-300))));
        // with fewer than 3 cells per axis the 3^d stencil would alias; fall
        // back to a single bucket (all-pairs search stays correct)
        if (cells_per_axis_ < 3) cells_per_axis_ = 1;
        int total = 1;
        for (int i = 0; i < space_.d; ++i) total *= cells_per_axis_;
        buckets_.assign(static_cast<std::size_t>(total), {});
        cell_of_.clear();
    }

    int cells_per_axis() const { return cells_per_axis_; }

    std::size_t cell_index(const Vec& x) const {
        std::size_t idx = 0;
        for (int i = 0; i < space_.d; ++i) {
            int c = static_cast<int>(std::floor(x[i] / space_.L * cells_per_axis_));
            c = std::clamp(c, 0, cells_per_axis_ - 1);
            idx = idx * static_cast<std::size_t>(cells_per_axis_) + static_cast<std::size_t>(c);
        }
        return idx;
    }

    void insert(std::size_t particle, const Vec& x) {
        const std::size_t c = cell_index(x);
        if (particle >= cell_of_.size()) cell_of_.resize(particle + 1);
        cell_of_[particle] = c;
        buckets_[c].push_back(particle);
    }

    void remove(std::size_t particle) {
        auto& bucket = buckets_[cell_of_[particle]];
        auto it = std::find(bucket.begin(), bucket.end(), particle);
        assert(it != bucket.end());
        *it = bucket.back();
        bucket.pop_back();
    }

    /// Rename a particle index (after a swap-with-last removal in the caller).
    void rename(std::size_t from, std::size_t to) {
        auto& bucket = buckets_[cell_of_[from]];
        auto it = std::find(bucket.begin(), bucket.end(), from);
        assert(it != bucket.end());
        *it = to;
        cell_of_[to] = cell_of_[from];
    }

    /// Visit every particle in the 3^d periodic neighborhood of x (each at
    /// most once). The callback receives the particle index.
    template <typename F>
    void for_neighbors(const Vec& x, F&& visit) const {
        if (cells_per_axis_ == 1) {
            for (std::size_t p : buckets_[0]) visit(p);
            return;
        }
        int coord[3] = {0, 0, 0};
        for (int i = 0; i < space_.d; ++i) {
            int c = static_cast<int>(std::floor(x[i] / space_.L * cells_per_axis_));
            coord[i] = std::clamp(c, 0, cells_per_axis_ - 1);
        }
        const int span = space_.d;
        int off[3] = {-1, -1, -1};
        for (;;) {
            std::size_t idx = 0;
            for (int i = 0; i < span; ++i) {
                int c = (coord[i] + off[i] + cells_per_axis_) % cells_per_axis_;
                idx = idx * static_cast<std::size_t>(cells_per_axis_) + static_cast<std::size_t>(c);
            }
            for (std::size_t p : buckets_[idx]) visit(p);
            int i = 0;
            for (; i < span; ++i) {
                if (++off[i] <= 1) break;
                off[i] = -1;
            }
            if (i == span) break;
        }
    }

  private:
    SpaceSpec space_;
    int cells_per_axis_ = 1;
    std::vector<std::vector<std::size_t>> buckets_;
    std::vector<std::size_t> cell_of_;
};

}  // namespace bdlp
