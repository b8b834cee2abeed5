#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "colearn/error.hpp"
#include "colearn/random.hpp"

namespace colearn {

/// Minkowski-family metric. Euclidean and Manhattan are the p = 2 and p = 1
/// members but get dedicated code paths.
class Metric {
 public:
  enum class Kind { kEuclidean, kManhattan, kMinkowski };

  Metric() = default;

  static Metric euclidean() { return Metric(Kind::kEuclidean, 2.0); }
  static Metric manhattan() { return Metric(Kind::kManhattan, 1.0); }
  static Metric minkowski(double p) {
    if (!(p >= 1.0) || !std::isfinite(p)) {
      throw ParameterError("Minkowski exponent must be finite and >= 1, got " + std::to_string(p));
    }
    return Metric(Kind::kMinkowski, p);
  }

  Kind kind() const noexcept { return kind_; }
  double p() const noexcept { return p_; }

  std::string name() const {
    switch (kind_) {
      case Kind::kEuclidean: return "euclidean";
      case Kind::kManhattan: return "manhattan";
      case Kind::kMinkowski: break;
    }
    return "minkowski";
  }

  friend bool operator==(const Metric&, const Metric&) = default;

 private:
  Metric(Kind kind, double p) : kind_(kind), p_(p) {}

  Kind kind_ = Kind::kEuclidean;
  double p_ = 2.0;
};

inline double dist(std::span<const double> a, std::span<const double> b,
                   const Metric& metric = Metric::euclidean()) {
  if (a.size() != b.size()) {
    throw DimensionError("distance between vectors of length " + std::to_string(a.size()) +
                         " and " + std::to_string(b.size()));
  }
  switch (metric.kind()) {
    case Metric::Kind::kEuclidean: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return std::sqrt(s);
    }
    case Metric::Kind::kManhattan: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
      return s;
    }
    case Metric::Kind::kMinkowski: break;
  }
  const double p = metric.p();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(std::abs(a[i] - b[i]), p);
  return std::pow(s, 1.0 / p);
}

/// Distance from the origin.
inline double norm(std::span<const double> v, const Metric& metric = Metric::euclidean()) {
  const std::vector<double> zero(v.size(), 0.0);
  return dist(v, zero, metric);
}

/// Indices j with dist(x, pool[j]) <= radius, ascending. Brute-force scan.
template <typename Pool>
std::vector<std::size_t> neighbors_within(std::span<const double> x, const Pool& pool,
                                          double radius, const Metric& metric = Metric::euclidean()) {
  if (!(radius > 0.0)) throw ParameterError("neighbour radius must be positive");
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < std::size(pool); ++j) {
    if (dist(x, std::span<const double>(pool[j]), metric) <= radius) out.push_back(j);
  }
  return out;
}

/// The k pool indices closest to x, ordered by (distance, index).
template <typename Pool>
std::vector<std::size_t> k_nearest(std::span<const double> x, const Pool& pool, std::size_t k,
                                   const Metric& metric = Metric::euclidean()) {
  const std::size_t n = std::size(pool);
  if (k == 0 || k > n) {
    throw ParameterError("k_nearest needs 1 <= k <= " + std::to_string(n) + ", got k=" +
                         std::to_string(k));
  }
  std::vector<double> d(n);
  for (std::size_t j = 0; j < n; ++j) d[j] = dist(x, std::span<const double>(pool[j]), metric);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto closer = [&](std::size_t a, std::size_t b) {
    return d[a] < d[b] || (d[a] == d[b] && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), closer);
  idx.resize(k);
  return idx;
}

/// Reciprocal-distance weight, with the distance clamped below at `floor`.
inline double weight_from_distance(double d, double floor = 1e-6) {
  if (!(floor > 0.0)) throw ParameterError("weight floor must be positive");
  return 1.0 / std::max(d, floor);
}

/// Uniform draw from the metric ball of the given radius centred at 0.
///
/// Euclidean: isotropic Gaussian direction scaled by radius * U^(1/m).
/// Other L_p balls: a vector of generalised-Gaussian coordinates
/// (density ~ exp(-|y|^p)) normalised by (||y||_p^p + E)^(1/p) with
/// E ~ Exp(1), which is exactly uniform in the unit L_p ball.
inline std::vector<double> sample_in_ball(std::size_t m, double radius, const Metric& metric,
                                          Rng& rng) {
  if (m == 0) throw DimensionError("sample_in_ball needs m >= 1");
  if (!(radius > 0.0)) throw ParameterError("ball radius must be positive");
  std::vector<double> v(m);
  if (metric.kind() == Metric::Kind::kEuclidean) {
    std::normal_distribution<double> normal(0.0, 1.0);
    double len = 0.0;
    do {
      len = 0.0;
      for (double& c : v) {
        c = normal(rng);
        len += c * c;
      }
    } while (len == 0.0);
    len = std::sqrt(len);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double r = radius * std::pow(unit(rng), 1.0 / static_cast<double>(m));
    for (double& c : v) c = c / len * r;
    return v;
  }

  const double p = metric.p();
  std::gamma_distribution<double> gamma(1.0 / p, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::exponential_distribution<double> expo(1.0);
  double sum_p = 0.0;
  for (double& c : v) {
    const double g = gamma(rng);  // |y|^p ~ Gamma(1/p, 1)
    sum_p += g;
    c = std::pow(g, 1.0 / p) * (sign(rng) ? 1.0 : -1.0);
  }
  const double scale = radius / std::pow(sum_p + expo(rng), 1.0 / p);
  for (double& c : v) c *= scale;
  return v;
}

}  // namespace colearn
