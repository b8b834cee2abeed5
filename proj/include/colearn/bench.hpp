#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "colearn/csv.hpp"
#include "colearn/error.hpp"
#include "colearn/learners.hpp"
#include "colearn/parallel.hpp"
#include "colearn/random.hpp"
#include "colearn/simgen.hpp"

namespace colearn {

inline double mse(std::span<const double> estimates, std::span<const double> truths) {
  if (estimates.empty() || estimates.size() != truths.size()) {
    throw ParameterError("mse needs two non-empty vectors of equal length");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double d = estimates[i] - truths[i];
    s += d * d;
  }
  return s / static_cast<double>(estimates.size());
}

enum class SweepAxis { kNone, kJumps, kM, kRadius, kProportion, kBagN };

inline std::string axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNone: return "none";
    case SweepAxis::kJumps: return "jumps";
    case SweepAxis::kM: return "m";
    case SweepAxis::kRadius: return "radius";
    case SweepAxis::kProportion: return "proportion";
    case SweepAxis::kBagN: break;
  }
  return "bag-n";
}

inline SweepAxis parse_axis(const std::string& name) {
  if (name == "jumps") return SweepAxis::kJumps;
  if (name == "m") return SweepAxis::kM;
  if (name == "radius") return SweepAxis::kRadius;
  if (name == "proportion") return SweepAxis::kProportion;
  if (name == "bag-n") return SweepAxis::kBagN;
  throw ParameterError("unknown sweep axis '" + name + "'");
}

inline LearnerKind parse_learner(const std::string& name) {
  if (name == "t" || name == "T") return LearnerKind::kT;
  if (name == "s" || name == "S") return LearnerKind::kS;
  if (name == "x" || name == "X") return LearnerKind::kX;
  if (name == "co" || name == "Co") return LearnerKind::kCo;
  if (name == "cob" || name == "CoB") return LearnerKind::kCoBagged;
  throw ParameterError("unknown learner '" + name + "' (expected t, s, x, co or cob)");
}

struct ExperimentSpec {
  ScenarioKind scenario = ScenarioKind::kSim1;
  std::size_t jumps = 1;
  GenConfig gen;  // gen.seed is ignored; repetitions derive their own
  std::vector<LearnerKind> learners{LearnerKind::kT, LearnerKind::kX, LearnerKind::kCo};
  std::size_t repetitions = 100;
  std::uint64_t seed = 0;
  CoConfig co;  // co.forest is the base learner of every learner
  std::size_t bag_n = 10;
  std::optional<std::size_t> bag_l;  // default round(2m/3)
  std::optional<std::size_t> bag_t;
  std::optional<double> x_alpha;
  SweepAxis axis = SweepAxis::kNone;
  std::vector<double> values;
  std::size_t threads = 1;

  void validate() const {
    if (repetitions < 1) throw ParameterError("repetitions must be >= 1");
    if (learners.empty()) throw ParameterError("no learners requested");
    if (axis != SweepAxis::kNone && values.empty()) {
      throw ParameterError("sweep over " + axis_name(axis) + " needs at least one value");
    }
    co.validate();
  }
};

struct ResultRow {
  std::string scenario;
  std::string learner;
  std::size_t m = 0;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  std::size_t jumps = 0;
  double radius = 0.0;
  double proportion = 0.0;
  std::size_t bag_n = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  bool ok = true;
  std::string error;                    // failure message, not persisted
  std::size_t sweep_index = 0;          // not persisted
  long synthetic_per_treated = -1;      // K for Co rows, not persisted
};

struct AggregateRow {
  std::string scenario;
  std::string learner;
  std::size_t m = 0;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  std::size_t jumps = 0;
  double radius = 0.0;
  double proportion = 0.0;
  std::size_t bag_n = 0;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  double mse_mean = 0.0;
  double mse_std = 0.0;
  double mse_se = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<AggregateRow> aggregates;
  std::size_t failures = 0;
};

namespace detail {

// The experiment with the sweep value at `index` applied.
inline ExperimentSpec apply_sweep(ExperimentSpec spec, std::size_t index) {
  if (spec.axis == SweepAxis::kNone) return spec;
  const double v = spec.values.at(index);
  const auto as_count = [&](const char* what) {
    if (!(v >= 1.0) || v != std::floor(v)) {
      throw ParameterError(std::string(what) + " sweep values must be positive integers");
    }
    return static_cast<std::size_t>(v);
  };
  switch (spec.axis) {
    case SweepAxis::kJumps: spec.jumps = as_count("jumps"); break;
    case SweepAxis::kM: spec.gen.m = as_count("m"); break;
    case SweepAxis::kRadius: spec.co.radius = v; break;
    case SweepAxis::kProportion: spec.co.proportion = v; break;
    case SweepAxis::kBagN: spec.bag_n = as_count("bag-n"); break;
    case SweepAxis::kNone: break;
  }
  spec.axis = SweepAxis::kNone;
  spec.values.clear();
  return spec;
}

// Axes that change the generated data get their own repetition seeds; the
// others reuse the same datasets so that sweep cells are paired.
inline bool axis_changes_data(SweepAxis axis) {
  return axis == SweepAxis::kJumps || axis == SweepAxis::kM;
}

inline std::uint64_t learner_tag(LearnerKind kind) { return 100 + static_cast<std::uint64_t>(kind); }

inline FittedLearner fit_learner(LearnerKind kind, const ExperimentSpec& cell, const Dataset& d,
                                 std::uint64_t rep_seed) {
  const std::uint64_t seed = derive_seed(rep_seed, {learner_tag(kind)});
  switch (kind) {
    case LearnerKind::kT: return fit_t_learner(d, cell.co.forest, seed);
    case LearnerKind::kS: return fit_s_learner(d, cell.co.forest, seed);
    case LearnerKind::kX: return fit_x_learner(d, cell.co.forest, cell.x_alpha, seed);
    case LearnerKind::kCo: return fit_co_learner(d, cell.co, seed);
    case LearnerKind::kCoBagged: break;
  }
  const std::size_t m = d.m();
  const auto two_thirds =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(2.0 * static_cast<double>(m) / 3.0)));
  BagConfig bag{cell.bag_l.value_or(two_thirds), cell.bag_t.value_or(two_thirds), cell.bag_n, seed};
  return fit_co_bagged(d, cell.co, bag);
}

inline ResultRow blank_row(const ExperimentSpec& cell, LearnerKind kind, std::size_t rep,
                           std::uint64_t seed, std::size_t sweep_index) {
  ResultRow row;
  row.scenario = scenario_name(cell.scenario);
  row.learner = learner_name(kind);
  row.m = cell.gen.m;
  row.n0 = cell.gen.n0;
  row.n1 = cell.gen.n1;
  row.jumps = cell.scenario == ScenarioKind::kSim3 ? 0 : cell.jumps;
  row.radius = cell.co.radius;
  row.proportion = cell.co.proportion;
  row.bag_n = cell.bag_n;
  row.rep = rep;
  row.seed = seed;
  row.sweep_index = sweep_index;
  return row;
}

}  // namespace detail

/// Groups ok rows by (sweep cell, learner) in first-seen order.
inline std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows) {
  std::vector<AggregateRow> out;
  std::map<std::pair<std::size_t, std::string>, std::size_t> slot;
  std::vector<std::vector<double>> values;
  for (const ResultRow& r : rows) {
    const auto key = std::make_pair(r.sweep_index, r.learner);
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, out.size()).first;
      AggregateRow a;
      a.scenario = r.scenario;
      a.learner = r.learner;
      a.m = r.m;
      a.n0 = r.n0;
      a.n1 = r.n1;
      a.jumps = r.jumps;
      a.radius = r.radius;
      a.proportion = r.proportion;
      a.bag_n = r.bag_n;
      out.push_back(a);
      values.emplace_back();
    }
    AggregateRow& a = out[it->second];
    if (r.ok) {
      ++a.n_ok;
      values[it->second].push_back(r.mse);
    } else {
      ++a.n_failed;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::vector<double>& v = values[i];
    if (v.empty()) {
      out[i].mse_mean = out[i].mse_std = out[i].mse_se = std::nan("");
      continue;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    out[i].mse_mean = mean;
    out[i].mse_std = sd;
    out[i].mse_se = sd / std::sqrt(static_cast<double>(v.size()));
  }
  return out;
}

/// Runs every (sweep value, repetition) job, fitting each requested learner
/// on one shared dataset per job and scoring it against the truth grid.
/// Jobs run on `spec.threads` workers; rows come back ordered by (sweep
/// value, repetition, learner) whatever the scheduling.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const std::size_t n_cells = spec.axis == SweepAxis::kNone ? 1 : spec.values.size();
  std::vector<ExperimentSpec> cells;
  cells.reserve(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c) {
    cells.push_back(detail::apply_sweep(spec, c));
    cells.back().co.forest.n_threads = 1;
    cells.back().co.validate();
  }

  const std::size_t n_jobs = n_cells * spec.repetitions;
  std::vector<std::vector<ResultRow>> job_rows(n_jobs);
  parallel_for(n_jobs, spec.threads, [&](std::size_t job) {
    const std::size_t c = job / spec.repetitions;
    const std::size_t rep = job % spec.repetitions;
    const ExperimentSpec& cell = cells[c];
    const std::uint64_t data_index = detail::axis_changes_data(spec.axis) ? c : 0;
    const std::uint64_t rep_seed = derive_seed(spec.seed, {data_index, rep});

    std::vector<ResultRow>& rows = job_rows[job];
    std::optional<GeneratedData> data;
    std::string data_error;
    try {
      Rng scen_rng = make_stream(rep_seed, {0});
      GenConfig gen = cell.gen;
      gen.seed = rep_seed;
      const Scenario scenario = draw_scenario(cell.scenario, cell.jumps, gen.m, scen_rng);
      data = generate_dataset(scenario, gen);
    } catch (const std::exception& e) {
      data_error = e.what();
    }

    for (LearnerKind kind : cell.learners) {
      ResultRow row = detail::blank_row(cell, kind, rep, rep_seed, c);
      try {
        if (!data) throw Error("data generation failed: " + data_error);
        const FittedLearner fitted = detail::fit_learner(kind, cell, data->train, rep_seed);
        std::vector<double> est(data->test_xs.rows());
        for (std::size_t i = 0; i < est.size(); ++i) est[i] = fitted.predict_cate(data->test_xs.row(i));
        row.mse = mse(est, data->test_tau);
        if (!std::isfinite(row.mse)) throw NumericError("non-finite MSE");
        if (const auto* co = std::get_if<CoModel>(&fitted.model())) {
          row.synthetic_per_treated = static_cast<long>(co->synthetic_per_treated);
        }
      } catch (const std::exception& e) {
        row.ok = false;
        row.mse = std::nan("");
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  });

  ExperimentResult result;
  for (std::vector<ResultRow>& rows : job_rows) {
    for (ResultRow& r : rows) {
      result.failures += static_cast<std::size_t>(!r.ok);
      result.rows.push_back(std::move(r));
    }
  }
  result.aggregates = aggregate(result.rows);
  return result;
}

inline ExperimentResult sweep_radius(ExperimentSpec spec, std::vector<double> radii) {
  for (double r : radii) {
    if (!(r > 0.0)) throw ParameterError("radius sweep values must be positive");
  }
  spec.axis = SweepAxis::kRadius;
  spec.values = std::move(radii);
  return run_experiment(spec);
}

inline ExperimentResult sweep_proportion(ExperimentSpec spec, std::vector<double> rhos) {
  for (double r : rhos) {
    if (!(r >= 0.0)) throw ParameterError("proportion sweep values must be non-negative");
  }
  spec.axis = SweepAxis::kProportion;
  spec.values = std::move(rhos);
  return run_experiment(spec);
}

inline constexpr const char* kRowHeader =
    "scenario,learner,m,n0,n1,jumps,radius_T,proportion,bag_N,rep,seed,mse,status";
inline constexpr const char* kAggregateHeader =
    "scenario,learner,m,n0,n1,jumps,radius_T,proportion,bag_N,n_ok,n_failed,mse,mse_std,mse_se";

inline void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kRowHeader << '\n';
  for (const ResultRow& r : rows) {
    out << r.scenario << ',' << r.learner << ',' << r.m << ',' << r.n0 << ',' << r.n1 << ','
        << r.jumps << ',' << format_double(r.radius) << ',' << format_double(r.proportion) << ','
        << r.bag_n << ',' << r.rep << ',' << r.seed << ',' << (r.ok ? format_double(r.mse) : "")
        << ',' << (r.ok ? "ok" : "failed") << '\n';
  }
}

inline void write_aggregates_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << kAggregateHeader << '\n';
  for (const AggregateRow& a : rows) {
    out << a.scenario << ',' << a.learner << ',' << a.m << ',' << a.n0 << ',' << a.n1 << ','
        << a.jumps << ',' << format_double(a.radius) << ',' << format_double(a.proportion) << ','
        << a.bag_n << ',' << a.n_ok << ',' << a.n_failed << ',' << format_double(a.mse_mean) << ','
        << format_double(a.mse_std) << ',' << format_double(a.mse_se) << '\n';
  }
}

}  // namespace colearn
