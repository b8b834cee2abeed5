#include "colearn/bench.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "gtest/gtest.h"

namespace colearn {
namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.scenario = ScenarioKind::kSim2;
  spec.jumps = 2;
  spec.gen.m = 4;
  spec.gen.n0 = 40;
  spec.gen.n1 = 8;
  spec.gen.n_test = 200;
  spec.learners = {LearnerKind::kT, LearnerKind::kX, LearnerKind::kCo};
  spec.repetitions = 3;
  spec.seed = 42;
  spec.co.forest.n_trees = 20;
  return spec;
}

std::string rows_csv(const ExperimentResult& r) {
  std::ostringstream out;
  write_rows_csv(out, r.rows);
  write_aggregates_csv(out, r.aggregates);
  return out.str();
}

TEST(Mse, Examples) {
  EXPECT_DOUBLE_EQ(mse(std::vector<double>{1, 2}, std::vector<double>{1, 4}), 2.0);
  EXPECT_EQ(mse(std::vector<double>{3}, std::vector<double>{3}), 0.0);
  EXPECT_THROW(mse(std::vector<double>{}, std::vector<double>{}), ParameterError);
  EXPECT_THROW(mse(std::vector<double>{1}, std::vector<double>{1, 2}), ParameterError);
}

TEST(Axis, NamesRoundTrip) {
  for (SweepAxis a : {SweepAxis::kJumps, SweepAxis::kM, SweepAxis::kRadius, SweepAxis::kProportion,
                      SweepAxis::kBagN}) {
    EXPECT_EQ(parse_axis(axis_name(a)), a);
  }
  EXPECT_THROW(parse_axis("depth"), ParameterError);
  EXPECT_EQ(parse_learner("cob"), LearnerKind::kCoBagged);
  EXPECT_THROW(parse_learner("r"), ParameterError);
}

TEST(RunExperiment, RowsInJobOrder) {
  const ExperimentResult r = run_experiment(small_spec());
  ASSERT_EQ(r.rows.size(), 9u);
  EXPECT_EQ(r.failures, 0u);
  const char* names[] = {"T", "X", "Co"};
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(r.rows[i].rep, i / 3);
    EXPECT_EQ(r.rows[i].learner, names[i % 3]);
    EXPECT_TRUE(r.rows[i].ok);
    EXPECT_TRUE(std::isfinite(r.rows[i].mse));
    EXPECT_GE(r.rows[i].mse, 0.0);
  }
  ASSERT_EQ(r.aggregates.size(), 3u);
}

TEST(RunExperiment, AggregateIsRowMean) {
  const ExperimentResult r = run_experiment(small_spec());
  for (const AggregateRow& a : r.aggregates) {
    std::vector<double> v;
    for (const ResultRow& row : r.rows) {
      if (row.learner == a.learner) v.push_back(row.mse);
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    EXPECT_EQ(a.n_ok, v.size());
    EXPECT_NEAR(a.mse_mean, mean, 1e-12 * mean);
    EXPECT_NEAR(a.mse_std, sd, 1e-12 * (1 + sd));
    EXPECT_NEAR(a.mse_se, sd / std::sqrt(static_cast<double>(v.size())), 1e-12 * (1 + sd));
  }
}

TEST(RunExperiment, SameSeedSameBytesAnyThreadCount) {
  ExperimentSpec one = small_spec(), three = small_spec();
  three.threads = 3;
  const std::string a = rows_csv(run_experiment(one));
  EXPECT_EQ(a, rows_csv(run_experiment(one)));
  EXPECT_EQ(a, rows_csv(run_experiment(three)));
  ExperimentSpec other = small_spec();
  other.seed = 43;
  EXPECT_NE(a, rows_csv(run_experiment(other)));
}

TEST(RunExperiment, FailedRowsFlaggedAndExcluded) {
  ExperimentSpec spec = small_spec();
  spec.learners = {LearnerKind::kT, LearnerKind::kCoBagged};
  spec.bag_l = 9;  // wider than m: every bagged fit fails
  const ExperimentResult r = run_experiment(spec);
  EXPECT_EQ(r.failures, 3u);
  for (const ResultRow& row : r.rows) {
    EXPECT_EQ(row.ok, row.learner == "T");
    if (!row.ok) {
      EXPECT_TRUE(std::isnan(row.mse));
      EXPECT_FALSE(row.error.empty());
    }
  }
  ASSERT_EQ(r.aggregates.size(), 2u);
  EXPECT_EQ(r.aggregates[1].learner, "CoB");
  EXPECT_EQ(r.aggregates[1].n_ok, 0u);
  EXPECT_EQ(r.aggregates[1].n_failed, 3u);
  EXPECT_TRUE(std::isnan(r.aggregates[1].mse_mean));
  EXPECT_EQ(r.aggregates[0].n_ok, 3u);

  std::ostringstream out;
  write_rows_csv(out, r.rows);
  EXPECT_NE(out.str().find(",failed"), std::string::npos);
}

TEST(Sweeps, RadiusGridShape) {
  ExperimentSpec spec = small_spec();
  spec.learners = {LearnerKind::kCo};
  spec.repetitions = 2;
  const ExperimentResult r = sweep_radius(spec, {0.5, 1.5, 3.0});
  ASSERT_EQ(r.aggregates.size(), 3u);
  EXPECT_EQ(r.aggregates[0].radius, 0.5);
  EXPECT_EQ(r.aggregates[2].radius, 3.0);
  // Paired cells share datasets across the radius grid.
  EXPECT_EQ(r.rows[0].seed, r.rows[2].seed);
  EXPECT_EQ(r.rows[0].seed, r.rows[4].seed);
  EXPECT_THROW(sweep_radius(spec, {1.0, 0.0}), ParameterError);
}

TEST(Sweeps, ZeroProportionDisablesAugmentation) {
  ExperimentSpec spec = small_spec();
  spec.learners = {LearnerKind::kCo};
  spec.repetitions = 2;
  const ExperimentResult r = sweep_proportion(spec, {0.0, 1.0});
  for (const ResultRow& row : r.rows) {
    if (row.proportion == 0.0) {
      EXPECT_EQ(row.synthetic_per_treated, 0);
    }
  }
  EXPECT_THROW(sweep_proportion(spec, {-1.0}), ParameterError);
}

TEST(Sweeps, JumpAxisGetsFreshData) {
  ExperimentSpec spec = small_spec();
  spec.learners = {LearnerKind::kT};
  spec.axis = SweepAxis::kJumps;
  spec.values = {1, 2, 3};
  const ExperimentResult r = run_experiment(spec);
  ASSERT_EQ(r.aggregates.size(), 3u);
  EXPECT_EQ(r.aggregates[2].jumps, 3u);
  EXPECT_NE(r.rows[0].seed, r.rows[3].seed);
}

TEST(Sweeps, MoreJumpsHurtWithoutSmoothing) {
  ExperimentSpec spec = small_spec();
  spec.learners = {LearnerKind::kT};
  spec.gen.m = 6;
  spec.repetitions = 6;
  spec.axis = SweepAxis::kJumps;
  spec.values = {1, 6};
  const ExperimentResult r = run_experiment(spec);
  EXPECT_LT(r.aggregates[0].mse_mean, r.aggregates[1].mse_mean);
}

TEST(ExperimentSpec, Validation) {
  ExperimentSpec spec = small_spec();
  spec.repetitions = 0;
  EXPECT_THROW(run_experiment(spec), ParameterError);
  spec = small_spec();
  spec.learners.clear();
  EXPECT_THROW(run_experiment(spec), ParameterError);
  spec = small_spec();
  spec.axis = SweepAxis::kJumps;
  EXPECT_THROW(run_experiment(spec), ParameterError);
  spec.values = {1.5};
  EXPECT_THROW(run_experiment(spec), ParameterError);
}

TEST(Csv, Headers) {
  std::ostringstream rows, aggs;
  write_rows_csv(rows, {});
  write_aggregates_csv(aggs, {});
  EXPECT_EQ(rows.str(), std::string(kRowHeader) + "\n");
  EXPECT_EQ(aggs.str(), std::string(kAggregateHeader) + "\n");
}

}  // namespace
}  // namespace colearn
