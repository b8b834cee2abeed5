#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "colearn/core_data.hpp"
#include "colearn/csv.hpp"
#include "colearn/error.hpp"
#include "colearn/random.hpp"

namespace colearn {

enum class ScenarioKind { kSim1, kSim2, kSim3 };

inline std::string scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kSim1: return "sim1";
    case ScenarioKind::kSim2: return "sim2";
    case ScenarioKind::kSim3: break;
  }
  return "sim3";
}

inline ScenarioKind parse_scenario(const std::string& name) {
  if (name == "sim1") return ScenarioKind::kSim1;
  if (name == "sim2") return ScenarioKind::kSim2;
  if (name == "sim3") return ScenarioKind::kSim3;
  throw ParameterError("unknown scenario '" + name + "' (expected sim1, sim2 or sim3)");
}

/// One realisation of a simulation: which features carry a treatment jump
/// and, for sim1, the linear coefficients of the baseline.
///
///   sim1: g0 = x·beta + 5·I(x_1 > 0.5),  g1 = g0 + 8·sum_{k in J} I(x_k > 0.1)
///   sim2: g0 = s(x_1)·s(x_2)/2,          g1 = g0 + 8·sum_{k in J} I(x_k > 0.1)
///   sim3: g0 = s(x_1)·s(x_2)/2,          g1 = -g0
///
/// with s(x) = 2 / (1 + exp(-12 (x - 0.5))).
struct Scenario {
  ScenarioKind kind = ScenarioKind::kSim1;
  std::size_t m = 0;
  std::vector<std::size_t> jump_indices;  // 0-based, distinct
  std::vector<double> beta;               // sim1 only
};

/// Smooth step rising from 0 to 2 around x = 0.5.
inline double smooth_step(double x) { return 2.0 / (1.0 + std::exp(-12.0 * (x - 0.5))); }

inline Scenario draw_scenario(ScenarioKind kind, std::size_t jumps, std::size_t m, Rng& rng) {
  Scenario s;
  s.kind = kind;
  s.m = m;
  if (kind != ScenarioKind::kSim1 && m < 2) {
    throw ParameterError(scenario_name(kind) + " needs at least two features");
  }
  if (m < 1) throw ParameterError("scenario needs at least one feature");
  if (kind == ScenarioKind::kSim3) return s;
  if (jumps < 1 || jumps > m) {
    throw ParameterError("jump count must lie in [1, m], got " + std::to_string(jumps));
  }
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i) idx[i] = i;
  for (std::size_t i = 0; i < jumps; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, m - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  s.jump_indices.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(jumps));
  if (kind == ScenarioKind::kSim1) {
    std::uniform_real_distribution<double> coef(-5.0, 5.0);
    s.beta.resize(m);
    for (double& b : s.beta) b = coef(rng);
  }
  return s;
}

namespace detail {

inline void check_scenario_width(const Scenario& s, std::span<const double> x) {
  if (x.size() != s.m) {
    throw DimensionError("scenario expects " + std::to_string(s.m) + " features, got " +
                         std::to_string(x.size()));
  }
}

inline double jump_sum(const Scenario& s, std::span<const double> x) {
  double n = 0.0;
  for (std::size_t k : s.jump_indices) n += x[k] > 0.1 ? 1.0 : 0.0;
  return 8.0 * n;
}

}  // namespace detail

inline double control_response(const Scenario& s, std::span<const double> x) {
  detail::check_scenario_width(s, x);
  if (s.kind == ScenarioKind::kSim1) {
    double lin = 0.0;
    for (std::size_t i = 0; i < s.m; ++i) lin += x[i] * s.beta[i];
    return lin + (x[0] > 0.5 ? 5.0 : 0.0);
  }
  return smooth_step(x[0]) * smooth_step(x[1]) / 2.0;
}

inline double true_cate(const Scenario& s, std::span<const double> x) {
  detail::check_scenario_width(s, x);
  if (s.kind == ScenarioKind::kSim3) return -smooth_step(x[0]) * smooth_step(x[1]);
  return detail::jump_sum(s, x);
}

inline double treatment_response(const Scenario& s, std::span<const double> x) {
  if (s.kind == ScenarioKind::kSim3) return -control_response(s, x);
  return control_response(s, x) + true_cate(s, x);
}

/// Random correlation matrix by the C-vine construction: partial
/// correlations drawn uniformly on (-1, 1), then converted layer by layer.
inline Eigen::MatrixXd random_correlation_matrix(std::size_t m, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(n, n);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    for (Eigen::Index i = k + 1; i < n; ++i) {
      double r = unif(rng);
      partial(k, i) = r;
      for (Eigen::Index l = k - 1; l >= 0; --l) {
        r = r * std::sqrt((1.0 - partial(l, i) * partial(l, i)) *
                          (1.0 - partial(l, k) * partial(l, k))) +
            partial(l, i) * partial(l, k);
      }
      corr(k, i) = r;
      corr(i, k) = r;
    }
  }
  return corr;
}

/// Cholesky factor of a correlation matrix, retrying with diagonal jitter up
/// to 1e-8 when the matrix is numerically singular.
inline Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& corr) {
  for (double jitter : {0.0, 1e-12, 1e-10, 1e-8}) {
    Eigen::MatrixXd a = corr;
    a.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NumericError("Cholesky factorisation failed on the correlation matrix");
}

/// n rows from N(0, corr).
inline Matrix sample_features(std::size_t n, const Eigen::MatrixXd& corr, Rng& rng) {
  const auto m = static_cast<std::size_t>(corr.rows());
  const Eigen::MatrixXd chol = correlation_factor(corr);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(n, m);
  Eigen::VectorXd z(static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < z.size(); ++c) z(c) = normal(rng);
    const Eigen::VectorXd x = chol.triangularView<Eigen::Lower>() * z;
    for (std::size_t c = 0; c < m; ++c) out(r, c) = x(static_cast<Eigen::Index>(c));
  }
  return out;
}

struct GenConfig {
  std::size_t m = 10;
  std::size_t n0 = 95;
  std::size_t n1 = 5;
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
  std::size_t n_test = 1000;
};

struct GeneratedData {
  Eigen::MatrixXd corr;
  Dataset train;
  Matrix test_xs;
  std::vector<double> test_tau;
};

/// Draws one training set and a held-out truth grid. The first n0 rows are
/// controls, the next n1 treated; assignment never looks at outcomes.
/// Correlation, training covariates, noise and test covariates each use
/// their own stream derived from `g.seed`.
inline GeneratedData generate_dataset(const Scenario& s, const GenConfig& g) {
  if (g.n0 < 1 || g.n1 < 1) throw ParameterError("both groups need at least one sample");
  if (!(g.noise_sigma >= 0.0)) throw ParameterError("noise sigma must be non-negative");
  if (g.m != s.m) throw DimensionError("scenario and generator disagree on m");
  enum : std::uint64_t { kCorr = 1, kTrain = 2, kNoise = 3, kTest = 4 };

  GeneratedData out;
  Rng corr_rng = make_stream(g.seed, {kCorr});
  out.corr = random_correlation_matrix(g.m, corr_rng);

  Rng train_rng = make_stream(g.seed, {kTrain});
  const Matrix xs = sample_features(g.n0 + g.n1, out.corr, train_rng);
  Rng noise_rng = make_stream(g.seed, {kNoise});
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<Sample> samples;
  samples.reserve(xs.rows());
  for (std::size_t r = 0; r < xs.rows(); ++r) {
    Sample smp;
    smp.features.assign(xs.row(r).begin(), xs.row(r).end());
    smp.treatment = r < g.n0 ? 0 : 1;
    const double mean = smp.treatment == 1 ? treatment_response(s, smp.features)
                                           : control_response(s, smp.features);
    const double eps = noise(noise_rng);
    smp.outcome = g.noise_sigma == 0.0 ? mean : mean + g.noise_sigma * eps;
    samples.push_back(std::move(smp));
  }
  out.train = Dataset(std::move(samples));

  Rng test_rng = make_stream(g.seed, {kTest});
  out.test_xs = sample_features(g.n_test, out.corr, test_rng);
  out.test_tau.reserve(g.n_test);
  for (std::size_t r = 0; r < g.n_test; ++r) out.test_tau.push_back(true_cate(s, out.test_xs.row(r)));
  return out;
}

/// Writes x1..xm,treatment,outcome with shortest round-trip decimals.
inline void write_dataset_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t c = 0; c < d.m(); ++c) out << 'x' << (c + 1) << ',';
  out << "treatment,outcome\n";
  for (const Sample& s : d.samples()) {
    for (double v : s.features) out << format_double(v) << ',';
    out << s.treatment << ',' << format_double(s.outcome) << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace colearn
