#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "colearn/core_data.hpp"
#include "colearn/distance.hpp"
#include "colearn/error.hpp"
#include "colearn/forest.hpp"
#include "colearn/parallel.hpp"
#include "colearn/random.hpp"

namespace colearn {

enum class LearnerKind { kT, kS, kX, kCo, kCoBagged };

inline std::string learner_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kT: return "T";
    case LearnerKind::kS: return "S";
    case LearnerKind::kX: return "X";
    case LearnerKind::kCo: return "Co";
    case LearnerKind::kCoBagged: break;
  }
  return "CoB";
}

/// How control neighbours of a treated vector are selected.
struct NeighborRule {
  enum class Kind { kRadius, kKnn };
  Kind kind = Kind::kRadius;
  std::size_t k = 5;  // only used by kKnn

  static NeighborRule radius() { return {}; }
  static NeighborRule knn(std::size_t k) { return {Kind::kKnn, k}; }
};

struct CoConfig {
  double radius = 1.5;      // largest treated/control distance for matched pairs and offsets
  double proportion = 1.0;  // synthetic examples per matched example
  Metric metric = Metric::euclidean();
  ForestConfig forest;
  double weight_floor = 1e-6;
  NeighborRule neighbor_rule;

  void validate() const {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw ParameterError("radius must be positive");
    if (!(proportion >= 0.0) || !std::isfinite(proportion)) {
      throw ParameterError("proportion must be non-negative");
    }
    if (!(weight_floor > 0.0)) throw ParameterError("weight floor must be positive");
    if (neighbor_rule.kind == NeighborRule::Kind::kKnn && neighbor_rule.k == 0) {
      throw ParameterError("knn neighbour rule needs k >= 1");
    }
  }
};

/// Random-subspace settings: `l` control-side and `t` treatment-side
/// features are kept in each of `n_draws` draws.
struct BagConfig {
  std::size_t l = 1;
  std::size_t t = 1;
  std::size_t n_draws = 10;
  std::uint64_t seed = 0;
};

/// Everything the concatenated-set construction produced, kept for
/// inspection and tests.
struct ConcatBuild {
  ConcatSet set;  // normalized weights
  std::shared_ptr<const Forest> control_model;
  std::vector<std::size_t> matched_counts;  // k_i per treated vector
  std::size_t synthetic_per_treated = 0;    // K
  std::vector<std::vector<double>> offsets; // the K shared offsets
};

namespace detail {

// Stage tags for derived random streams.
enum : std::uint64_t {
  kStageControl = 1,
  kStageTreated = 2,
  kStageSingle = 3,
  kStageTau0 = 4,
  kStageTau1 = 5,
  kStageAugment = 6,
  kStageConcat = 7,
  kStageSubspace = 8,
};

inline std::vector<std::size_t> all_indices(std::size_t m) {
  std::vector<std::size_t> v(m);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

inline std::vector<double> gather(std::span<const double> x, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(x[i]);
  return out;
}

inline std::vector<double> join(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline void check_width(std::span<const double> x, std::size_t m) {
  if (x.size() != m) {
    throw DimensionError("learner expects " + std::to_string(m) + " features, got " +
                         std::to_string(x.size()));
  }
}

// Concatenated-set construction with optional feature restriction. Matching
// and augmentation offsets live in the full feature space; the stored
// vectors keep treat_idx features of the treatment part and ctrl_idx
// features of the control part.
inline ConcatBuild build_concat(const Groups& groups, const CoConfig& co, std::uint64_t seed,
                                std::span<const std::size_t> treat_idx,
                                std::span<const std::size_t> ctrl_idx) {
  co.validate();
  const std::size_t m = groups.treated.front().features.size();
  const std::size_t n1 = groups.treated.size();

  Matrix control_x;
  for (const Sample& s : groups.controls) control_x.append_row(gather(s.features, ctrl_idx));
  const std::vector<double> control_y = outcomes(groups.controls);
  auto g0 = std::make_shared<const Forest>(
      Forest::fit(control_x, control_y, co.forest, derive_seed(seed, {kStageControl})));

  ConcatBuild out;
  out.control_model = g0;
  out.set.m = m;
  auto push = [&](std::span<const double> x_treat, std::span<const double> x_ctrl, double target,
                  double weight, ConcatOrigin origin, std::size_t i) {
    out.set.examples.push_back(
        {join(gather(x_treat, treat_idx), gather(x_ctrl, ctrl_idx)), target, weight, origin, i});
  };

  for (std::size_t i = 0; i < n1; ++i) {
    const Sample& s = groups.treated[i];
    const std::vector<double> own = gather(s.features, ctrl_idx);
    push(s.features, s.features, s.outcome - g0->predict(own), 1.0, ConcatOrigin::kSelf, i);
  }

  std::vector<std::vector<double>> pool;
  pool.reserve(groups.controls.size());
  for (const Sample& s : groups.controls) pool.push_back(s.features);

  out.matched_counts.assign(n1, 0);
  std::size_t matched_total = 0;
  for (std::size_t i = 0; i < n1; ++i) {
    const Sample& s = groups.treated[i];
    const std::vector<std::size_t> nbrs =
        co.neighbor_rule.kind == NeighborRule::Kind::kRadius
            ? neighbors_within(s.features, pool, co.radius, co.metric)
            : k_nearest(s.features, pool, co.neighbor_rule.k, co.metric);
    for (std::size_t j : nbrs) {
      const Sample& c = groups.controls[j];
      const double d = dist(s.features, c.features, co.metric);
      push(s.features, c.features, s.outcome - c.outcome, weight_from_distance(d, co.weight_floor),
           ConcatOrigin::kMatched, i);
    }
    out.matched_counts[i] = nbrs.size();
    matched_total += nbrs.size();
  }

  const double base = matched_total > 0 ? static_cast<double>(matched_total) / static_cast<double>(n1)
                                        : static_cast<double>(n1);
  out.synthetic_per_treated = static_cast<std::size_t>(std::llround(co.proportion * base));

  Rng rng = make_stream(seed, {kStageAugment});
  out.offsets.reserve(out.synthetic_per_treated);
  for (std::size_t k = 0; k < out.synthetic_per_treated; ++k) {
    out.offsets.push_back(sample_in_ball(m, co.radius, co.metric, rng));
  }
  for (std::size_t i = 0; i < n1; ++i) {
    const Sample& s = groups.treated[i];
    for (const std::vector<double>& delta : out.offsets) {
      std::vector<double> shifted(m);
      for (std::size_t c = 0; c < m; ++c) shifted[c] = s.features[c] + delta[c];
      const double target = s.outcome - g0->predict(gather(shifted, ctrl_idx));
      const double w = weight_from_distance(norm(delta, co.metric), co.weight_floor);
      push(s.features, shifted, target, w, ConcatOrigin::kSynthetic, i);
    }
  }

  out.set = normalize_weights(std::move(out.set));
  return out;
}

inline Forest fit_concat_model(const ConcatSet& set, const ForestConfig& cfg, std::uint64_t seed) {
  Matrix zs;
  zs.reserve_rows(set.size());
  std::vector<double> ys, ws;
  ys.reserve(set.size());
  ws.reserve(set.size());
  for (const ConcatExample& e : set.examples) {
    zs.append_row(e.z);
    ys.push_back(e.target);
    ws.push_back(e.weight);
  }
  return Forest::fit(zs, ys, ws, cfg, derive_seed(seed, {kStageConcat}));
}

}  // namespace detail

/// Builds the weighted concatenated training set: the control model's
/// residuals at each treated vector (weight 1), treated/control pairs
/// selected by the neighbour rule (weight 1/d), and K synthetic controls
/// per treated vector drawn inside the radius ball (weight 1/||offset||).
/// K = round(proportion * matched / n1), or round(proportion * n1) when
/// nothing was matched. Weights are normalized to mean 1.
inline ConcatBuild build_concat_set(const Dataset& d, const CoConfig& co, std::uint64_t seed) {
  const Groups groups = split_groups(d);
  const std::vector<std::size_t> all = detail::all_indices(d.m());
  return detail::build_concat(groups, co, seed, all, all);
}

struct TModel {
  std::shared_ptr<const Forest> control;
  std::shared_ptr<const Forest> treated;
};

struct SModel {
  std::shared_ptr<const Forest> joint;  // inputs: features ++ treatment flag
};

struct XModel {
  std::shared_ptr<const Forest> control;
  std::shared_ptr<const Forest> treated;
  std::shared_ptr<const Forest> tau0;  // fit on control-side imputed effects
  std::shared_ptr<const Forest> tau1;  // fit on treated-side imputed effects
  double alpha = 0.0;
};

struct CoModel {
  std::shared_ptr<const Forest> concat;
  std::vector<std::size_t> treat_idx;
  std::vector<std::size_t> ctrl_idx;
  std::size_t set_size = 0;
  std::size_t synthetic_per_treated = 0;
  std::vector<std::size_t> matched_counts;

  double predict(std::span<const double> x) const {
    return concat->predict(detail::join(detail::gather(x, treat_idx), detail::gather(x, ctrl_idx)));
  }
};

struct CoBaggedModel {
  std::vector<CoModel> draws;
};

/// A fitted CATE estimator. Immutable; safe to share across threads.
class FittedLearner {
 public:
  using Model = std::variant<TModel, SModel, XModel, CoModel, CoBaggedModel>;

  FittedLearner(LearnerKind kind, std::size_t m, Model model)
      : kind_(kind), m_(m), model_(std::move(model)) {}

  LearnerKind kind() const noexcept { return kind_; }
  std::size_t m() const noexcept { return m_; }
  const Model& model() const noexcept { return model_; }

  double predict_cate(std::span<const double> x) const {
    detail::check_width(x, m_);
    return std::visit([&](const auto& mdl) { return predict(mdl, x); }, model_);
  }

  /// Per-draw CATE estimates of a bagged Co-learner.
  std::vector<double> per_draw_cate(std::span<const double> x) const {
    detail::check_width(x, m_);
    const auto* bag = std::get_if<CoBaggedModel>(&model_);
    if (bag == nullptr) throw ParameterError("per-draw predictions need a bagged Co-learner");
    std::vector<double> out;
    out.reserve(bag->draws.size());
    for (const CoModel& draw : bag->draws) out.push_back(draw.predict(x));
    return out;
  }

 private:
  static double predict(const TModel& t, std::span<const double> x) {
    return t.treated->predict(x) - t.control->predict(x);
  }
  static double predict(const SModel& s, std::span<const double> x) {
    std::vector<double> q(x.begin(), x.end());
    q.push_back(1.0);
    const double on = s.joint->predict(q);
    q.back() = 0.0;
    return on - s.joint->predict(q);
  }
  static double predict(const XModel& xm, std::span<const double> x) {
    return xm.alpha * xm.tau0->predict(x) + (1.0 - xm.alpha) * xm.tau1->predict(x);
  }
  static double predict(const CoModel& co, std::span<const double> x) { return co.predict(x); }
  static double predict(const CoBaggedModel& bag, std::span<const double> x) {
    double sum = 0.0;
    for (const CoModel& draw : bag.draws) sum += draw.predict(x);
    return sum / static_cast<double>(bag.draws.size());
  }

  LearnerKind kind_;
  std::size_t m_;
  Model model_;
};

inline FittedLearner fit_t_learner(const Dataset& d, const ForestConfig& cfg, std::uint64_t seed) {
  const Groups g = split_groups(d);
  TModel t;
  t.control = std::make_shared<const Forest>(Forest::fit(
      feature_matrix(g.controls), outcomes(g.controls), cfg, derive_seed(seed, {detail::kStageControl})));
  t.treated = std::make_shared<const Forest>(Forest::fit(
      feature_matrix(g.treated), outcomes(g.treated), cfg, derive_seed(seed, {detail::kStageTreated})));
  return FittedLearner(LearnerKind::kT, d.m(), std::move(t));
}

/// One forest on features ++ treatment flag; the flag is the last column.
inline FittedLearner fit_s_learner(const Dataset& d, const ForestConfig& cfg, std::uint64_t seed) {
  split_groups(d);  // both groups must be present
  Matrix xs;
  xs.reserve_rows(d.size());
  std::vector<double> ys;
  ys.reserve(d.size());
  for (const Sample& s : d.samples()) {
    std::vector<double> row = s.features;
    row.push_back(static_cast<double>(s.treatment));
    xs.append_row(row);
    ys.push_back(s.outcome);
  }
  SModel s{std::make_shared<const Forest>(
      Forest::fit(xs, ys, cfg, derive_seed(seed, {detail::kStageSingle})))};
  return FittedLearner(LearnerKind::kS, d.m(), std::move(s));
}

/// X-learner. `alpha` defaults to the treated share n1 / (n0 + n1).
inline FittedLearner fit_x_learner(const Dataset& d, const ForestConfig& cfg,
                                   std::optional<double> alpha, std::uint64_t seed) {
  if (alpha && !(*alpha >= 0.0 && *alpha <= 1.0)) {
    throw ParameterError("X-learner alpha must lie in [0, 1], got " + std::to_string(*alpha));
  }
  const Groups g = split_groups(d);
  const Matrix x0 = feature_matrix(g.controls);
  const Matrix x1 = feature_matrix(g.treated);
  const std::vector<double> y0 = outcomes(g.controls);
  const std::vector<double> y1 = outcomes(g.treated);

  XModel xm;
  xm.control = std::make_shared<const Forest>(
      Forest::fit(x0, y0, cfg, derive_seed(seed, {detail::kStageControl})));
  xm.treated = std::make_shared<const Forest>(
      Forest::fit(x1, y1, cfg, derive_seed(seed, {detail::kStageTreated})));

  std::vector<double> d1(y1.size()), d0(y0.size());
  for (std::size_t i = 0; i < y1.size(); ++i) d1[i] = y1[i] - xm.control->predict(x1.row(i));
  for (std::size_t j = 0; j < y0.size(); ++j) d0[j] = xm.treated->predict(x0.row(j)) - y0[j];

  xm.tau1 = std::make_shared<const Forest>(
      Forest::fit(x1, d1, cfg, derive_seed(seed, {detail::kStageTau1})));
  xm.tau0 = std::make_shared<const Forest>(
      Forest::fit(x0, d0, cfg, derive_seed(seed, {detail::kStageTau0})));
  xm.alpha = alpha.value_or(static_cast<double>(y1.size()) /
                            static_cast<double>(y0.size() + y1.size()));
  return FittedLearner(LearnerKind::kX, d.m(), std::move(xm));
}

namespace detail {

inline CoModel fit_co_model(const Groups& groups, const CoConfig& co, std::uint64_t seed,
                            std::vector<std::size_t> treat_idx, std::vector<std::size_t> ctrl_idx) {
  ConcatBuild build = build_concat(groups, co, seed, treat_idx, ctrl_idx);
  CoModel model;
  model.concat = std::make_shared<const Forest>(fit_concat_model(build.set, co.forest, seed));
  model.treat_idx = std::move(treat_idx);
  model.ctrl_idx = std::move(ctrl_idx);
  model.set_size = build.set.size();
  model.synthetic_per_treated = build.synthetic_per_treated;
  model.matched_counts = std::move(build.matched_counts);
  return model;
}

// Sorted uniform sample of `size` distinct indices from [0, m).
inline std::vector<std::size_t> sample_index_set(std::size_t m, std::size_t size, Rng& rng) {
  std::vector<std::size_t> all = all_indices(m);
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, m - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(size);
  std::sort(all.begin(), all.end());
  return all;
}

// Draw i of a bagged fit runs the Co pipeline under this seed; draw 0 uses
// the bag seed itself so a single full-width draw matches the plain fit.
constexpr std::uint64_t draw_seed(std::uint64_t seed, std::size_t draw) noexcept {
  return seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(draw);
}

}  // namespace detail

/// Co-learner: a forest on the concatenated set, queried at x || x.
inline FittedLearner fit_co_learner(const Dataset& d, const CoConfig& co, std::uint64_t seed) {
  const Groups groups = split_groups(d);
  const std::vector<std::size_t> all = detail::all_indices(d.m());
  return FittedLearner(LearnerKind::kCo, d.m(), detail::fit_co_model(groups, co, seed, all, all));
}

/// Feature-bagged Co-learner: averages Co-learners fit on random
/// (treatment-side, control-side) feature subsets. The control model of
/// each draw is fit on the control-side subset.
inline FittedLearner fit_co_bagged(const Dataset& d, const CoConfig& co, const BagConfig& bag) {
  const std::size_t m = d.m();
  if (bag.l < 1 || bag.l > m) throw ParameterError("bagging l must lie in [1, m]");
  if (bag.t < 1 || bag.t > m) throw ParameterError("bagging t must lie in [1, m]");
  if (bag.n_draws < 1) throw ParameterError("bagging needs at least one draw");
  const Groups groups = split_groups(d);

  // Forest threads are spent on draws instead.
  CoConfig inner = co;
  inner.forest.n_threads = 1;

  CoBaggedModel model;
  model.draws.resize(bag.n_draws);
  parallel_for(bag.n_draws, co.forest.n_threads, [&](std::size_t i) {
    Rng rng = make_stream(bag.seed, {detail::kStageSubspace, i});
    std::vector<std::size_t> ctrl_idx = detail::sample_index_set(m, bag.l, rng);
    std::vector<std::size_t> treat_idx = detail::sample_index_set(m, bag.t, rng);
    model.draws[i] = detail::fit_co_model(groups, inner, detail::draw_seed(bag.seed, i),
                                          std::move(treat_idx), std::move(ctrl_idx));
  });
  return FittedLearner(LearnerKind::kCoBagged, m, std::move(model));
}

}  // namespace colearn
