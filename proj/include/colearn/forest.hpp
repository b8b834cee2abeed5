#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "colearn/core_data.hpp"
#include "colearn/error.hpp"
#include "colearn/parallel.hpp"
#include "colearn/random.hpp"

namespace colearn {

struct ForestConfig {
  std::size_t n_trees = 1000;
  std::size_t mtry = 0;       // 0 selects ceil(sqrt(p))
  std::size_t min_leaf = 1;   // minimum rows on each side of a split
  std::size_t max_depth = 0;  // 0 is unbounded
  bool bootstrap = true;
  std::size_t n_threads = 1;

  std::size_t resolved_mtry(std::size_t p) const {
    if (mtry != 0) return mtry;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p)))));
  }
};

/// Flat tree node. A node with feature < 0 is a leaf. Rows with
/// x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
};

class Tree {
 public:
  explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const TreeNode& n = nodes_[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                           : n.right);
    }
    return nodes_[i].value;
  }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

namespace detail {

// Weighted mean computed around the first value so that constant inputs
// reproduce that constant exactly. Clamped to the input range, which any
// convex combination respects.
template <typename ValueAt, typename WeightAt>
double stable_weighted_mean(std::size_t n, ValueAt value, WeightAt weight) {
  const double y0 = value(0);
  double lo = y0, hi = y0, sw = 0.0, swd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = value(i), w = weight(i);
    lo = std::min(lo, y);
    hi = std::max(hi, y);
    sw += w;
    swd += w * (y - y0);
  }
  return std::clamp(y0 + swd / sw, lo, hi);
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& xs, std::span<const double> ys, std::span<const double> ws,
              const ForestConfig& cfg, std::size_t mtry, Rng rng)
      : xs_(xs), ys_(ys), ws_(ws), cfg_(cfg), mtry_(mtry), rng_(std::move(rng)) {}

  Tree build() {
    const std::size_t n = xs_.rows();
    rows_.resize(n);
    if (cfg_.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t& r : rows_) r = pick(rng_);
    } else {
      std::iota(rows_.begin(), rows_.end(), std::size_t{0});
    }
    features_.resize(xs_.cols());
    grow(0, n, 1);
    return Tree(std::move(nodes_));
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(std::size_t begin, std::size_t end, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const std::size_t count = end - begin;
    const double mean = stable_weighted_mean(
        count, [&](std::size_t i) { return ys_[rows_[begin + i]]; },
        [&](std::size_t i) { return ws_[rows_[begin + i]]; });
    nodes_[id].value = mean;

    double sse = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double d = ys_[rows_[i]] - mean;
      sse += ws_[rows_[i]] * d * d;
    }
    if (sse <= 0.0) return id;
    if (count < 2 * cfg_.min_leaf) return id;
    if (cfg_.max_depth != 0 && depth > cfg_.max_depth) return id;

    const Split best = find_split(begin, end, mean);
    if (best.feature < 0 || !(best.gain > 0.0)) return id;

    const auto first = rows_.begin() + static_cast<std::ptrdiff_t>(begin);
    const auto last = rows_.begin() + static_cast<std::ptrdiff_t>(end);
    const auto f = static_cast<std::size_t>(best.feature);
    const auto mid = std::stable_partition(
        first, last, [&](std::size_t r) { return xs_(r, f) <= best.threshold; });
    const auto split_at = begin + static_cast<std::size_t>(mid - first);

    const int left = grow(begin, split_at, depth + 1);
    const int right = grow(split_at, end, depth + 1);
    TreeNode& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  // Maximises W(L)·mean_L'^2 + W(R)·mean_R'^2 - W(A)·mean_A'^2 on targets
  // centred at the node mean, which equals the reduction in weighted SSE.
  Split find_split(std::size_t begin, std::size_t end, double mean) {
    const std::size_t p = xs_.cols();
    std::iota(features_.begin(), features_.end(), 0);
    if (mtry_ < p) {
      for (std::size_t i = 0; i < mtry_; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, p - 1);
        std::swap(features_[i], features_[pick(rng_)]);
      }
      std::sort(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(mtry_));
    }

    const std::size_t count = end - begin;
    double total_w = 0.0, total_s = 0.0, total_sse = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double w = ws_[rows_[i]], d = ys_[rows_[i]] - mean;
      total_w += w;
      total_s += w * d;
      total_sse += w * d * d;
    }
    const double parent_term = total_s * total_s / total_w;
    // Gains within this margin count as ties and keep the earlier candidate,
    // so rounding noise cannot reorder equal partitions.
    const double tie_margin = 1e-12 * total_sse;

    Split best;
    sorted_.resize(count);
    for (std::size_t k = 0; k < std::min(mtry_, p); ++k) {
      const std::size_t f = features_[k];
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t r = rows_[begin + i];
        sorted_[i] = {xs_(r, f), r};
      }
      std::sort(sorted_.begin(), sorted_.end());

      double wl = 0.0, sl = 0.0;
      for (std::size_t i = 0; i + 1 < count; ++i) {
        const std::size_t r = sorted_[i].second;
        wl += ws_[r];
        sl += ws_[r] * (ys_[r] - mean);
        const std::size_t n_left = i + 1;
        if (n_left < cfg_.min_leaf) continue;
        if (count - n_left < cfg_.min_leaf) break;
        const double a = sorted_[i].first, b = sorted_[i + 1].first;
        if (!(a < b)) continue;
        const double wr = total_w - wl, sr = total_s - sl;
        const double gain = sl * sl / wl + sr * sr / wr - parent_term;
        if (best.feature < 0 || gain > best.gain + tie_margin) {
          double threshold = a + (b - a) / 2.0;
          if (!(threshold < b)) threshold = a;
          best = {static_cast<int>(f), threshold, gain};
        }
      }
    }
    return best;
  }

  const Matrix& xs_;
  std::span<const double> ys_;
  std::span<const double> ws_;
  const ForestConfig& cfg_;
  std::size_t mtry_;
  Rng rng_;
  std::vector<std::size_t> rows_;
  std::vector<std::size_t> features_;
  std::vector<std::pair<double, std::size_t>> sorted_;
  std::vector<TreeNode> nodes_;
};

}  // namespace detail

/// Weighted random-forest regressor.
///
/// Each tree is grown on a uniform bootstrap resample (when enabled) with
/// weighted variance-reduction splits over `mtry` features drawn without
/// replacement per node. Weights enter only the split criterion and the leaf
/// means. Tree t draws from a stream derived from (seed, t), so fitted
/// forests do not depend on `n_threads`.
class Forest {
 public:
  static Forest fit(const Matrix& xs, std::span<const double> ys, std::span<const double> ws,
                    const ForestConfig& cfg, std::uint64_t seed) {
    const std::size_t n = xs.rows();
    const std::size_t p = xs.cols();
    if (n == 0) throw EmptySetError("cannot fit a forest on zero rows");
    if (ys.size() != n || ws.size() != n) {
      throw DimensionError("forest inputs disagree: " + std::to_string(n) + " rows, " +
                           std::to_string(ys.size()) + " targets, " + std::to_string(ws.size()) +
                           " weights");
    }
    if (p == 0) throw DimensionError("forest inputs need at least one column");
    if (cfg.n_trees == 0) throw ParameterError("forest needs at least one tree");
    if (cfg.min_leaf == 0) throw ParameterError("min_leaf must be positive");
    const std::size_t mtry = cfg.resolved_mtry(p);
    if (mtry > p) {
      throw ParameterError("mtry=" + std::to_string(mtry) + " exceeds input width " +
                           std::to_string(p));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(ys[i])) throw InvalidDataError("non-finite forest target");
      if (!(ws[i] > 0.0) || !std::isfinite(ws[i])) {
        throw InvalidDataError("forest weights must be positive and finite");
      }
      for (double v : xs.row(i)) {
        if (!std::isfinite(v)) throw InvalidDataError("non-finite forest input");
      }
    }

    std::vector<Tree> trees(cfg.n_trees, Tree({}));
    parallel_for(cfg.n_trees, cfg.n_threads, [&](std::size_t t) {
      detail::TreeBuilder builder(xs, ys, ws, cfg, mtry, make_stream(seed, {t}));
      trees[t] = builder.build();
    });
    return Forest(std::move(trees), p);
  }

  static Forest fit(const Matrix& xs, std::span<const double> ys, const ForestConfig& cfg,
                    std::uint64_t seed) {
    const std::vector<double> unit(ys.size(), 1.0);
    return fit(xs, ys, unit, cfg, seed);
  }

  /// Mean of per-tree predictions, summed in tree order.
  double predict(std::span<const double> x) const {
    if (x.size() != p_) {
      throw DimensionError("forest expects " + std::to_string(p_) + " inputs, got " +
                           std::to_string(x.size()));
    }
    return detail::stable_weighted_mean(
        trees_.size(), [&](std::size_t t) { return trees_[t].predict(x); },
        [](std::size_t) { return 1.0; });
  }

  std::size_t n_inputs() const noexcept { return p_; }
  std::size_t n_trees() const noexcept { return trees_.size(); }
  const std::vector<Tree>& trees() const noexcept { return trees_; }

 private:
  Forest(std::vector<Tree> trees, std::size_t p) : trees_(std::move(trees)), p_(p) {}

  std::vector<Tree> trees_;
  std::size_t p_ = 0;
};

}  // namespace colearn
