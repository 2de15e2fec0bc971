#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace bdlp {

/// Binary indexed (Fenwick) tree over nonnegative weights with point updates
/// and weighted index sampling in O(log n). Backs the death-event selection:
/// index i is drawn with probability weight(i) / total(). Capacity is a power
/// of two, rebuilt on 2x size changes.
class PrefixSumTree {
  public:
    PrefixSumTree() { rebuild(); }

    std::size_t size() const { return weights_.size(); }
    double total() const { return total_; }
    double weight(std::size_t i) const { return weights_[i]; }

    void push_back(double w) {
        assert(w >= 0.0);
        weights_.push_back(w);
        if (weights_.size() > cap_) {
            rebuild();
        } else {
            total_ += w;
            add(weights_.size() - 1, w);
        }
    }

    void set(std::size_t i, double w) {
        assert(i < weights_.size());
        assert(w >= 0.0);
        const double delta = w - weights_[i];
        weights_[i] = w;
        total_ += delta;
        add(i, delta);
    }

    /// Remove index i by moving the last element into its slot; the caller is
    /// responsible for tracking that index move.
    void swap_remove(std::size_t i) {
        assert(i < weights_.size());
        const std::size_t last = weights_.size() - 1;
        if (i != last) set(i, weights_[last]);
        set(last, 0.0);
        weights_.pop_back();
        if (cap_ > kMinCap && weights_.size() < cap_ / 4) rebuild();
    }

    /// Index with probability proportional to its weight, from u in [0,1).
    std::size_t sample(double u) const {
        assert(total_ > 0.0 && !weights_.empty());
        double target = u * total_;
        std::size_t pos = 0;
        for (std::size_t mask = cap_; mask > 0; mask /= 2) {
            const std::size_t next = pos + mask;
            if (next <= cap_ && tree_[next - 1] <= target) {
                target -= tree_[next - 1];
                pos = next;
            }
        }
        return pos < weights_.size() ? pos : weights_.size() - 1;
    }

    /// From-scratch total, for drift audits against the incremental one.
    double recompute_total() const {
        double t = 0.0;
        for (double w : weights_) t += w;
        return t;
    }

    /// Rebuild the tree exactly from the stored weights (also resets drift).
    void rebuild() {
        cap_ = kMinCap;
        while (cap_ < weights_.size()) cap_ *= 2;
        tree_.assign(cap_, 0.0);
        total_ = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            total_ += weights_[i];
            add(i, weights_[i]);
        }
    }

  private:
    static constexpr std::size_t kMinCap = 16;

    void add(std::size_t i, double delta) {
        for (std::size_t j = i + 1; j <= cap_; j += j & (~j + 1)) tree_[j - 1] += delta;
    }

    std::vector<double> weights_;
    std::vector<double> tree_;
    std::size_t cap_ = kMinCap;
    double total_ = 0.0;
};

}  // namespace bdlp
