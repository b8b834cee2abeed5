#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "colearn/error.hpp"

namespace colearn {

/// Dense row-major matrix of doubles. Rows are feature vectors.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) {
      throw DimensionError("row length " + std::to_string(values.size()) +
                           " does not match matrix width " + std::to_string(cols_));
    }
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  void reserve_rows(std::size_t n) { data_.reserve(n * cols_); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// One observational record: covariates, binary treatment flag and the
/// outcome observed under that treatment.
struct Sample {
  std::vector<double> features;
  int treatment = 0;
  double outcome = 0.0;
};

/// Observational training set. Construction validates that every sample has
/// the same width, a {0,1} treatment flag and finite values. Group sizes are
/// checked by split_groups since some callers build partial sets.
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<Sample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw InvalidDatasetError("dataset has no samples");
    m_ = samples_.front().features.size();
    if (m_ == 0) throw InvalidDatasetError("samples must have at least one feature");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const Sample& s = samples_[i];
      if (s.features.size() != m_) {
        throw InvalidDatasetError("sample " + std::to_string(i) + " has " +
                                  std::to_string(s.features.size()) + " features, expected " +
                                  std::to_string(m_));
      }
      if (s.treatment != 0 && s.treatment != 1) {
        throw InvalidDatasetError("sample " + std::to_string(i) + " has treatment flag " +
                                  std::to_string(s.treatment));
      }
      if (!std::isfinite(s.outcome)) {
        throw InvalidDatasetError("sample " + std::to_string(i) + " has a non-finite outcome");
      }
      for (double v : s.features) {
        if (!std::isfinite(v)) {
          throw InvalidDatasetError("sample " + std::to_string(i) + " has a non-finite feature");
        }
      }
    }
  }

  const std::vector<Sample>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t m() const noexcept { return m_; }

  std::size_t count_treated() const noexcept {
    std::size_t n = 0;
    for (const Sample& s : samples_) n += static_cast<std::size_t>(s.treatment == 1);
    return n;
  }
  std::size_t count_controls() const noexcept { return size() - count_treated(); }

 private:
  std::vector<Sample> samples_;
  std::size_t m_ = 0;
};

/// Control and treatment groups, each in dataset order.
struct Groups {
  std::vector<Sample> controls;
  std::vector<Sample> treated;
};

inline Groups split_groups(const Dataset& d) {
  Groups g;
  for (const Sample& s : d.samples()) {
    (s.treatment == 1 ? g.treated : g.controls).push_back(s);
  }
  if (g.controls.empty()) throw InvalidDatasetError("control group is empty");
  if (g.treated.empty()) throw InvalidDatasetError("treatment group is empty");
  return g;
}

/// Stacks the feature vectors of a group into a matrix, one row per sample.
inline Matrix feature_matrix(std::span<const Sample> group) {
  Matrix out;
  for (const Sample& s : group) out.append_row(s.features);
  return out;
}

inline std::vector<double> outcomes(std::span<const Sample> group) {
  std::vector<double> ys;
  ys.reserve(group.size());
  for (const Sample& s : group) ys.push_back(s.outcome);
  return ys;
}

/// Treatment part first, control part second.
inline std::vector<double> concat(std::span<const double> x_treat, std::span<const double> x_ctrl) {
  if (x_treat.empty() || x_treat.size() != x_ctrl.size()) {
    throw DimensionError("concat needs two non-empty vectors of equal length, got " +
                         std::to_string(x_treat.size()) + " and " +
                         std::to_string(x_ctrl.size()));
  }
  std::vector<double> z;
  z.reserve(2 * x_treat.size());
  z.insert(z.end(), x_treat.begin(), x_treat.end());
  z.insert(z.end(), x_ctrl.begin(), x_ctrl.end());
  return z;
}

/// Where a concatenated example came from.
enum class ConcatOrigin {
  kSelf,       // X_l || X_l with the control model's residual
  kMatched,    // treated vector paired with a real control neighbour
  kSynthetic,  // treated vector paired with a generated nearby point
};

struct ConcatExample {
  std::vector<double> z;  // length 2m
  double target = 0.0;
  double weight = 1.0;
  ConcatOrigin origin = ConcatOrigin::kSelf;
  std::size_t treated_index = 0;
};

struct ConcatSet {
  std::vector<ConcatExample> examples;
  std::size_t m = 0;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
};

/// Rescales weights so that their mean is 1. Ratios are preserved.
inline ConcatSet normalize_weights(ConcatSet g) {
  if (g.empty()) throw EmptySetError("cannot normalize the weights of an empty set");
  double total = 0.0;
  for (const ConcatExample& e : g.examples) {
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
      throw InvalidDataError("concatenated example weights must be positive and finite");
    }
    total += e.weight;
  }
  const double scale = static_cast<double>(g.size()) / total;
  for (ConcatExample& e : g.examples) e.weight *= scale;
  return g;
}

}  // namespace colearn
