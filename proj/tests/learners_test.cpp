#include "colearn/learners.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "gtest/gtest.h"

namespace colearn {
namespace {

using Vec = std::vector<double>;

ForestConfig quick_forest(std::size_t trees = 40) {
  ForestConfig cfg;
  cfg.n_trees = trees;
  return cfg;
}

// Controls and treated drawn from N(0, I_m); outcomes from the given functions.
template <class F0, class F1>
Dataset synthetic(std::size_t n0, std::size_t n1, std::size_t m, std::uint64_t seed, F0 y0, F1 y1,
                  double noise = 0.0) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < n0 + n1; ++i) {
    Vec x(m);
    for (double& v : x) v = normal(rng);
    const int w = i < n0 ? 0 : 1;
    const double y = (w ? y1(x) : y0(x)) + noise * normal(rng);
    samples.push_back({std::move(x), w, y});
  }
  return Dataset(std::move(samples));
}

Dataset constant_effect(std::size_t n0, std::size_t n1, std::size_t m, std::uint64_t seed) {
  return synthetic(n0, n1, m, seed, [](const Vec&) { return 2.0; }, [](const Vec&) { return 5.0; });
}

std::vector<Vec> probes(std::size_t count, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vec> out(count, Vec(m));
  for (Vec& x : out) {
    for (double& v : x) v = normal(rng);
  }
  return out;
}

CoConfig quick_co() {
  CoConfig co;
  co.forest = quick_forest();
  return co;
}

TEST(TLearner, ConstantOutcomes) {
  const Dataset d = constant_effect(30, 10, 3, 1);
  const FittedLearner t = fit_t_learner(d, quick_forest(), 2);
  for (const Vec& x : probes(20, 3, 3)) EXPECT_DOUBLE_EQ(t.predict_cate(x), 3.0);
}

TEST(Learners, ZeroSignalGivesZeroEffect) {
  const auto zero = [](const Vec&) { return 0.0; };
  const Dataset d = synthetic(40, 10, 3, 4, zero, zero);
  const CoConfig co = quick_co();
  const std::vector<FittedLearner> fits{
      fit_t_learner(d, quick_forest(), 5), fit_s_learner(d, quick_forest(), 5),
      fit_x_learner(d, quick_forest(), std::nullopt, 5), fit_co_learner(d, co, 5),
      fit_co_bagged(d, co, BagConfig{2, 2, 3, 5})};
  for (const FittedLearner& f : fits) {
    for (const Vec& x : probes(20, 3, 6)) EXPECT_EQ(f.predict_cate(x), 0.0) << learner_name(f.kind());
  }
}

TEST(Learners, QueryWidthChecked) {
  const Dataset d = constant_effect(20, 5, 3, 7);
  const FittedLearner t = fit_t_learner(d, quick_forest(), 0);
  EXPECT_THROW(t.predict_cate(Vec{1.0, 2.0}), DimensionError);
}

TEST(Learners, NeedBothGroups) {
  std::vector<Sample> only_controls;
  for (int i = 0; i < 5; ++i) only_controls.push_back({{static_cast<double>(i)}, 0, 1.0});
  const Dataset d(std::move(only_controls));
  EXPECT_THROW(fit_t_learner(d, quick_forest(), 0), InvalidDatasetError);
  EXPECT_THROW(fit_co_learner(d, quick_co(), 0), InvalidDatasetError);
}

TEST(SLearner, FlagIsLastInput) {
  const Dataset d = constant_effect(20, 5, 3, 8);
  const FittedLearner s = fit_s_learner(d, quick_forest(), 0);
  const auto& model = std::get<SModel>(s.model());
  EXPECT_EQ(model.joint->n_inputs(), 4u);
}

TEST(XLearner, ImputedEffectsAndDefaultAlpha) {
  std::vector<Sample> samples;
  for (int i = 0; i < 19; ++i) samples.push_back({{static_cast<double>(i)}, 0, 2.0});
  samples.push_back({{3.0}, 1, 5.0});
  const FittedLearner x = fit_x_learner(Dataset(std::move(samples)), quick_forest(), std::nullopt, 1);
  const auto& model = std::get<XModel>(x.model());
  EXPECT_DOUBLE_EQ(model.alpha, 0.05);
  EXPECT_DOUBLE_EQ(model.tau1->predict(Vec{3.0}), 3.0);
  EXPECT_DOUBLE_EQ(model.tau0->predict(Vec{10.0}), 3.0);
  EXPECT_DOUBLE_EQ(x.predict_cate(Vec{7.0}), 3.0);
}

TEST(XLearner, AlphaEndpointsAndBlend) {
  const auto y0 = [](const Vec& x) { return x[0]; };
  const auto y1 = [](const Vec& x) { return 2.0 * x[0] + (x[1] > 0 ? 1.0 : 0.0); };
  const Dataset d = synthetic(60, 20, 2, 9, y0, y1, 0.2);
  const FittedLearner a0 = fit_x_learner(d, quick_forest(), 0.0, 10);
  const FittedLearner a1 = fit_x_learner(d, quick_forest(), 1.0, 10);
  const FittedLearner a3 = fit_x_learner(d, quick_forest(), 0.3, 10);
  const auto& m = std::get<XModel>(a3.model());
  for (const Vec& x : probes(30, 2, 11)) {
    EXPECT_DOUBLE_EQ(a0.predict_cate(x), m.tau1->predict(x));
    EXPECT_DOUBLE_EQ(a1.predict_cate(x), m.tau0->predict(x));
    EXPECT_NEAR(a3.predict_cate(x), 0.3 * a1.predict_cate(x) + 0.7 * a0.predict_cate(x), 1e-12);
  }
}

TEST(XLearner, AlphaOutOfRange) {
  const Dataset d = constant_effect(20, 5, 2, 12);
  EXPECT_THROW(fit_x_learner(d, quick_forest(), 1.5, 0), ParameterError);
  EXPECT_THROW(fit_x_learner(d, quick_forest(), -0.1, 0), ParameterError);
}

TEST(CoConfig, Validation) {
  const Dataset d = constant_effect(20, 5, 2, 13);
  CoConfig bad = quick_co();
  bad.radius = 0.0;
  EXPECT_THROW(fit_co_learner(d, bad, 0), ParameterError);
  bad = quick_co();
  bad.proportion = -1.0;
  EXPECT_THROW(fit_co_learner(d, bad, 0), ParameterError);
}

class ConcatSetTest : public ::testing::Test {
 protected:
  Dataset d = synthetic(
      60, 8, 3, 14, [](const Vec& x) { return x[0] + x[1]; },
      [](const Vec& x) { return 3.0 + x[0] * x[2]; }, 0.5);
  Groups g = split_groups(d);
};

TEST_F(ConcatSetTest, CardinalityMatchesBruteForce) {
  for (double radius : {0.5, 1.0, 1.5, 2.5}) {
    for (double rho : {0.0, 0.5, 1.0, 2.0}) {
      CoConfig co = quick_co();
      co.radius = radius;
      co.proportion = rho;
      const ConcatBuild b = build_concat_set(d, co, 15);

      std::size_t pairs = 0;
      for (const Sample& t : g.treated) {
        for (const Sample& c : g.controls) {
          double s = 0.0;
          for (std::size_t k = 0; k < 3; ++k) s += std::pow(t.features[k] - c.features[k], 2);
          pairs += std::sqrt(s) <= radius ? 1 : 0;
        }
      }
      const double n1 = static_cast<double>(g.treated.size());
      const std::size_t K = static_cast<std::size_t>(
          std::llround(rho * (pairs > 0 ? static_cast<double>(pairs) / n1 : n1)));
      EXPECT_EQ(b.synthetic_per_treated, K) << radius << " " << rho;
      EXPECT_EQ(b.set.size(), g.treated.size() + pairs + g.treated.size() * K);
      EXPECT_EQ(b.set.m, 3u);
    }
  }
}

TEST_F(ConcatSetTest, ExamplesAreWhatTheyClaim) {
  CoConfig co = quick_co();
  co.radius = 1.5;
  const ConcatBuild b = build_concat_set(d, co, 16);
  double weight_sum = 0.0;
  // Raw weights recomputed from the stored vectors, for the normalization check.
  std::vector<double> raw;
  for (const ConcatExample& e : b.set.examples) {
    ASSERT_EQ(e.z.size(), 6u);
    const Vec xt(e.z.begin(), e.z.begin() + 3), xc(e.z.begin() + 3, e.z.end());
    const Sample& t = g.treated[e.treated_index];
    EXPECT_EQ(xt, t.features);
    const double dd = dist(xt, xc);
    switch (e.origin) {
      case ConcatOrigin::kSelf:
        EXPECT_EQ(xc, t.features);
        EXPECT_DOUBLE_EQ(e.target, t.outcome - b.control_model->predict(xc));
        raw.push_back(1.0);
        break;
      case ConcatOrigin::kMatched: {
        EXPECT_LE(dd, 1.5);
        bool found = false;
        for (const Sample& c : g.controls) {
          if (c.features == xc) {
            found = true;
            EXPECT_DOUBLE_EQ(e.target, t.outcome - c.outcome);
          }
        }
        EXPECT_TRUE(found);
        raw.push_back(weight_from_distance(dd));
        break;
      }
      case ConcatOrigin::kSynthetic:
        EXPECT_LE(dd, 1.5 + 1e-12);
        EXPECT_DOUBLE_EQ(e.target, t.outcome - b.control_model->predict(xc));
        raw.push_back(weight_from_distance(dd));
        break;
    }
    weight_sum += e.weight;
  }
  EXPECT_NEAR(weight_sum / static_cast<double>(b.set.size()), 1.0, 1e-12);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_NEAR(b.set.examples[i].weight / b.set.examples[0].weight, raw[i] / raw[0],
                1e-9 * raw[i] / raw[0]);
  }
}

TEST_F(ConcatSetTest, NoAugmentationAtZeroProportion) {
  CoConfig co = quick_co();
  co.proportion = 0.0;
  const ConcatBuild b = build_concat_set(d, co, 17);
  EXPECT_EQ(b.synthetic_per_treated, 0u);
  for (const ConcatExample& e : b.set.examples) EXPECT_NE(e.origin, ConcatOrigin::kSynthetic);
}

TEST_F(ConcatSetTest, NothingMatchedFallsBackToTreatedCount) {
  CoConfig co = quick_co();
  co.radius = 1e-6;
  const ConcatBuild b = build_concat_set(d, co, 18);
  const std::size_t n1 = g.treated.size();
  EXPECT_EQ(b.synthetic_per_treated, n1);
  EXPECT_EQ(b.set.size(), (1 + n1) * n1);
}

TEST_F(ConcatSetTest, KnnRuleMatchesExactlyK) {
  CoConfig co = quick_co();
  co.neighbor_rule = NeighborRule::knn(4);
  const ConcatBuild b = build_concat_set(d, co, 19);
  for (std::size_t c : b.matched_counts) EXPECT_EQ(c, 4u);
  EXPECT_EQ(b.synthetic_per_treated, 4u);
}

TEST(CoLearner, PredictsConcatForestAtDoubledQuery) {
  const Dataset d = synthetic(
      50, 10, 2, 20, [](const Vec& x) { return x[0]; }, [](const Vec& x) { return 1.0 + x[0]; },
      0.3);
  const CoConfig co = quick_co();
  const FittedLearner f = fit_co_learner(d, co, 21);
  const auto& model = std::get<CoModel>(f.model());
  EXPECT_EQ(model.concat->n_inputs(), 4u);
  for (const Vec& x : probes(30, 2, 22)) {
    EXPECT_EQ(f.predict_cate(x), model.concat->predict(concat(x, x)));
  }
}

TEST(CoLearner, Deterministic) {
  const Dataset d = constant_effect(40, 8, 3, 23);
  const auto noisy = synthetic(
      40, 8, 3, 23, [](const Vec& x) { return x[0]; }, [](const Vec& x) { return x[1]; }, 1.0);
  const FittedLearner a = fit_co_learner(noisy, quick_co(), 24);
  const FittedLearner b = fit_co_learner(noisy, quick_co(), 24);
  for (const Vec& x : probes(30, 3, 25)) EXPECT_EQ(a.predict_cate(x), b.predict_cate(x));
  const FittedLearner c = fit_co_learner(d, quick_co(), 24);
  for (const Vec& x : probes(10, 3, 26)) EXPECT_DOUBLE_EQ(c.predict_cate(x), 3.0);
}

TEST(CoBagged, AverageOfDraws) {
  const Dataset d = synthetic(
      50, 10, 4, 27, [](const Vec& x) { return x[0] + x[3]; },
      [](const Vec& x) { return x[1] * 2.0; }, 0.5);
  const FittedLearner f = fit_co_bagged(d, quick_co(), BagConfig{3, 2, 4, 28});
  for (const Vec& x : probes(20, 4, 29)) {
    const Vec per = f.per_draw_cate(x);
    ASSERT_EQ(per.size(), 4u);
    double mean = 0.0;
    for (double v : per) mean += v;
    EXPECT_NEAR(f.predict_cate(x), mean / 4.0, 1e-12);
  }
  const auto& model = std::get<CoBaggedModel>(f.model());
  for (const CoModel& draw : model.draws) {
    EXPECT_EQ(draw.ctrl_idx.size(), 3u);
    EXPECT_EQ(draw.treat_idx.size(), 2u);
    EXPECT_TRUE(std::is_sorted(draw.ctrl_idx.begin(), draw.ctrl_idx.end()));
    EXPECT_EQ(draw.concat->n_inputs(), 5u);
  }
}

TEST(CoBagged, FullWidthSingleDrawEqualsPlainCo) {
  const Dataset d = synthetic(
      50, 10, 3, 30, [](const Vec& x) { return x[0]; }, [](const Vec& x) { return -x[0]; }, 0.5);
  const CoConfig co = quick_co();
  const FittedLearner plain = fit_co_learner(d, co, 31);
  const FittedLearner bagged = fit_co_bagged(d, co, BagConfig{3, 3, 1, 31});
  for (const Vec& x : probes(30, 3, 32)) EXPECT_EQ(plain.predict_cate(x), bagged.predict_cate(x));
}

TEST(CoBagged, ParameterErrors) {
  const Dataset d = constant_effect(20, 5, 3, 33);
  EXPECT_THROW(fit_co_bagged(d, quick_co(), BagConfig{0, 1, 2, 0}), ParameterError);
  EXPECT_THROW(fit_co_bagged(d, quick_co(), BagConfig{1, 4, 2, 0}), ParameterError);
  EXPECT_THROW(fit_co_bagged(d, quick_co(), BagConfig{1, 1, 0, 0}), ParameterError);
  const FittedLearner t = fit_t_learner(d, quick_forest(), 0);
  EXPECT_THROW(t.per_draw_cate(Vec{0, 0, 0}), ParameterError);
}

TEST(CoBagged, ThreadCountDoesNotChangeResult) {
  const Dataset d = synthetic(
      40, 8, 3, 34, [](const Vec& x) { return x[2]; }, [](const Vec& x) { return x[0]; }, 0.5);
  CoConfig one = quick_co(), three = quick_co();
  three.forest.n_threads = 3;
  const FittedLearner a = fit_co_bagged(d, one, BagConfig{2, 2, 5, 35});
  const FittedLearner b = fit_co_bagged(d, three, BagConfig{2, 2, 5, 35});
  for (const Vec& x : probes(20, 3, 36)) EXPECT_EQ(a.predict_cate(x), b.predict_cate(x));
}

}  // namespace
}  // namespace colearn
