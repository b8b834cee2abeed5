// Fits the four meta-learners on one simulated dataset and reports their
// test MSE against the known treatment effect.

#include <cstdio>
#include <vector>

#include "colearn/colearn.hpp"

int main() {
  using namespace colearn;

  Rng rng = make_stream(42, {0});
  const Scenario scenario = draw_scenario(ScenarioKind::kSim2, 2, 10, rng);
  GenConfig gen;
  gen.seed = 42;
  const GeneratedData data = generate_dataset(scenario, gen);

  ForestConfig forest;
  forest.n_trees = 300;
  CoConfig co;
  co.forest = forest;

  const std::vector<FittedLearner> learners = {
      fit_t_learner(data.train, forest, 1),
      fit_s_learner(data.train, forest, 1),
      fit_x_learner(data.train, forest, std::nullopt, 1),
      fit_co_learner(data.train, co, 1),
      fit_co_bagged(data.train, co, BagConfig{7, 7, 10, 1}),
  };
  for (const FittedLearner& fl : learners) {
    std::vector<double> est;
    for (std::size_t i = 0; i < data.test_xs.rows(); ++i) est.push_back(fl.predict_cate(data.test_xs.row(i)));
    std::printf("%-4s mse = %.3f\n", learner_name(fl.kind()).c_str(), mse(est, data.test_tau));
  }
}
