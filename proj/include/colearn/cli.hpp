#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "colearn/bench.hpp"
#include "colearn/csv.hpp"
#include "colearn/error.hpp"
#include "colearn/simgen.hpp"
#include "colearn/svg.hpp"

namespace colearn::cli {

// Flat JSON object whose keys are long flag names without the dashes. Keys
// are routed to the `section` subcommand.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::string section) : section_(std::move(section)) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json doc;
    try {
      input >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConfigError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      CLI::ConfigItem item;
      if (!section_.empty()) item.parents = {section_};
      item.name = key;
      if (value.is_array()) {
        std::string joined;
        for (const auto& v : value) {
          if (!joined.empty()) joined += ',';
          joined += scalar(key, v);
        }
        item.inputs.push_back(joined);
      } else {
        item.inputs.push_back(scalar(key, value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string scalar(const std::string& key, const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConfigError("config key '" + key + "' must be a string, number, boolean or list");
  }

  std::string section_;
};

struct RunOptions {
  std::string scenario;
  std::size_t m = 10;
  std::size_t n0 = 95;
  std::size_t n1 = 5;
  std::size_t jumps = 1;
  std::size_t reps = 100;
  std::string learners = "t,x,co";
  std::uint64_t seed = 0;
  double radius = 1.5;
  double proportion = 1.0;
  std::size_t bag_n = 10;
  std::size_t bag_l = 0;  // 0 selects round(2m/3)
  std::size_t bag_t = 0;
  double noise = 1.0;
  std::size_t n_test = 1000;
  std::string out;
  std::string agg_out;
  std::size_t threads = 1;
  std::size_t trees = 1000;
  std::size_t mtry = 0;
  std::size_t min_leaf = 1;
  std::size_t max_depth = 0;
  bool no_bootstrap = false;
  std::string metric = "euclidean";
  double minkowski_p = 3.0;
  std::string neighbor_rule = "radius";
  std::size_t knn_k = 5;
  double weight_floor = 1e-6;
  double alpha = -1.0;  // negative selects n1 / (n0 + n1)
  std::string axis;
  std::string values;
  bool verbose = false;
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (std::string& f : split_csv_line(s)) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(f.substr(b, e - b + 1));
  }
  return out;
}

inline ExperimentSpec to_spec(const RunOptions& o, bool sweep) {
  ExperimentSpec spec;
  spec.scenario = parse_scenario(o.scenario);
  spec.jumps = o.jumps;
  spec.gen.m = o.m;
  spec.gen.n0 = o.n0;
  spec.gen.n1 = o.n1;
  spec.gen.noise_sigma = o.noise;
  spec.gen.n_test = o.n_test;
  if (o.n_test < 1) throw ParameterError("--n-test must be >= 1");
  if (o.noise < 0.0) throw ParameterError("--noise must be >= 0");
  spec.learners.clear();
  for (const std::string& name : split_list(o.learners)) spec.learners.push_back(parse_learner(name));
  spec.repetitions = o.reps;
  spec.seed = o.seed;
  spec.co.radius = o.radius;
  spec.co.proportion = o.proportion;
  spec.co.weight_floor = o.weight_floor;
  if (o.metric == "euclidean") {
    spec.co.metric = Metric::euclidean();
  } else if (o.metric == "manhattan") {
    spec.co.metric = Metric::manhattan();
  } else if (o.metric == "minkowski") {
    spec.co.metric = Metric::minkowski(o.minkowski_p);
  } else {
    throw ParameterError("unknown metric '" + o.metric + "'");
  }
  if (o.neighbor_rule == "radius") {
    spec.co.neighbor_rule = NeighborRule::radius();
  } else if (o.neighbor_rule == "knn") {
    spec.co.neighbor_rule = NeighborRule::knn(o.knn_k);
  } else {
    throw ParameterError("unknown neighbour rule '" + o.neighbor_rule + "'");
  }
  spec.co.forest.n_trees = o.trees;
  spec.co.forest.mtry = o.mtry;
  spec.co.forest.min_leaf = o.min_leaf;
  spec.co.forest.max_depth = o.max_depth;
  spec.co.forest.bootstrap = !o.no_bootstrap;
  if (o.trees < 1) throw ParameterError("--trees must be >= 1");
  if (o.min_leaf < 1) throw ParameterError("--min-leaf must be >= 1");
  spec.bag_n = o.bag_n;
  if (o.bag_n < 1) throw ParameterError("--bag-n must be >= 1");
  if (o.bag_l != 0) spec.bag_l = o.bag_l;
  if (o.bag_t != 0) spec.bag_t = o.bag_t;
  if (o.alpha >= 0.0) spec.x_alpha = o.alpha;
  spec.threads = o.threads;
  if (sweep) {
    spec.axis = parse_axis(o.axis);
    for (const std::string& v : split_list(o.values)) {
      const auto d = parse_double(v);
      if (!d) throw ParameterError("sweep value '" + v + "' is not a number");
      spec.values.push_back(*d);
    }
    if (spec.values.empty()) throw ParameterError("--values needs at least one value");
  }
  spec.validate();
  return spec;
}

inline nlohmann::ordered_json echo(const RunOptions& o, bool sweep) {
  nlohmann::ordered_json j;
  j["scenario"] = o.scenario;
  j["m"] = o.m;
  j["n0"] = o.n0;
  j["n1"] = o.n1;
  j["jumps"] = o.jumps;
  j["reps"] = o.reps;
  j["learners"] = o.learners;
  j["seed"] = o.seed;
  j["radius"] = o.radius;
  j["proportion"] = o.proportion;
  j["bag-n"] = o.bag_n;
  j["bag-l"] = o.bag_l;
  j["bag-t"] = o.bag_t;
  j["noise"] = o.noise;
  j["n-test"] = o.n_test;
  j["out"] = o.out;
  j["agg-out"] = o.agg_out;
  j["threads"] = o.threads;
  j["trees"] = o.trees;
  j["mtry"] = o.mtry;
  j["min-leaf"] = o.min_leaf;
  j["max-depth"] = o.max_depth;
  j["no-bootstrap"] = o.no_bootstrap;
  j["metric"] = o.metric;
  j["minkowski-p"] = o.minkowski_p;
  j["neighbor-rule"] = o.neighbor_rule;
  j["knn-k"] = o.knn_k;
  j["weight-floor"] = o.weight_floor;
  j["alpha"] = o.alpha;
  if (sweep) {
    j["axis"] = o.axis;
    j["values"] = o.values;
  }
  return j;
}

inline std::string aggregate_path(const RunOptions& o) {
  if (!o.agg_out.empty()) return o.agg_out;
  const std::string& p = o.out;
  if (p.size() > 4 && p.compare(p.size() - 4, 4, ".csv") == 0) {
    return p.substr(0, p.size() - 4) + "_agg.csv";
  }
  return p + "_agg.csv";
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  return f;
}

inline void print_table(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << std::left << std::setw(6) << "scen" << std::setw(5) << "lrn" << std::right << std::setw(5)
      << "m" << std::setw(6) << "n0" << std::setw(5) << "n1" << std::setw(6) << "jumps"
      << std::setw(8) << "T" << std::setw(8) << "rho" << std::setw(6) << "N" << std::setw(6)
      << "ok" << std::setw(14) << "mse" << std::setw(12) << "se" << '\n';
  for (const AggregateRow& a : rows) {
    std::ostringstream mse_s, se_s;
    mse_s << std::setprecision(5) << a.mse_mean;
    se_s << std::setprecision(3) << a.mse_se;
    out << std::left << std::setw(6) << a.scenario << std::setw(5) << a.learner << std::right
        << std::setw(5) << a.m << std::setw(6) << a.n0 << std::setw(5) << a.n1 << std::setw(6)
        << a.jumps << std::setw(8) << format_double(a.radius) << std::setw(8)
        << format_double(a.proportion) << std::setw(6) << a.bag_n << std::setw(6) << a.n_ok
        << std::setw(14) << mse_s.str() << std::setw(12) << se_s.str() << '\n';
  }
}

inline int execute_experiment(const RunOptions& o, bool sweep, std::ostream& out, std::ostream& err) {
  ExperimentSpec spec;
  try {
    spec = to_spec(o, sweep);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << echo(o, sweep).dump() << '\n';

  const std::string agg_path = aggregate_path(o);
  std::ofstream rows_file, agg_file;
  try {
    rows_file = open_output(o.out);
    agg_file = open_output(agg_path);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  const ExperimentResult result = run_experiment(spec);
  write_rows_csv(rows_file, result.rows);
  write_aggregates_csv(agg_file, result.aggregates);
  rows_file.flush();
  agg_file.flush();
  if (!rows_file || !agg_file) {
    err << "error: failed writing results\n";
    return 1;
  }
  if (o.verbose) {
    for (const ResultRow& r : result.rows) {
      if (r.synthetic_per_treated >= 0) {
        err << r.learner << " rep=" << r.rep << " radius=" << format_double(r.radius)
            << " proportion=" << format_double(r.proportion) << " K=" << r.synthetic_per_treated
            << '\n';
      }
    }
  }
  for (const ResultRow& r : result.rows) {
    if (!r.ok) err << "failed: " << r.learner << " rep=" << r.rep << ": " << r.error << '\n';
  }
  print_table(out, result.aggregates);
  if (result.failures > 0) {
    err << result.failures << " learner fit(s) failed\n";
    return 2;
  }
  return 0;
}

inline void add_experiment_options(CLI::App* app, RunOptions& o) {
  app->add_option("--scenario", o.scenario, "sim1, sim2 or sim3")->required();
  app->add_option("--m", o.m, "number of features")->capture_default_str();
  app->add_option("--n0", o.n0, "control group size")->capture_default_str();
  app->add_option("--n1", o.n1, "treatment group size")->capture_default_str();
  app->add_option("--jumps", o.jumps, "treatment jump count (sim1, sim2)")->capture_default_str();
  app->add_option("--reps", o.reps, "repetitions")->capture_default_str();
  app->add_option("--learners", o.learners, "comma list of t,s,x,co,cob")->capture_default_str();
  app->add_option("--seed", o.seed, "master seed")->capture_default_str();
  app->add_option("--radius", o.radius, "largest pair distance T")->capture_default_str();
  app->add_option("--proportion", o.proportion, "synthetic-to-matched ratio")->capture_default_str();
  app->add_option("--bag-n", o.bag_n, "feature-bagging draws")->capture_default_str();
  app->add_option("--bag-l", o.bag_l, "control-side features per draw (0: round(2m/3))");
  app->add_option("--bag-t", o.bag_t, "treatment-side features per draw (0: round(2m/3))");
  app->add_option("--noise", o.noise, "outcome noise standard deviation")->capture_default_str();
  app->add_option("--n-test", o.n_test, "held-out points per repetition")->capture_default_str();
  app->add_option("--out", o.out, "per-repetition CSV path")->required();
  app->add_option("--agg-out", o.agg_out, "aggregate CSV path (default <out>_agg.csv)");
  app->add_option("--threads", o.threads, "worker threads")->capture_default_str();
  app->add_option("--trees", o.trees, "trees per forest")->capture_default_str();
  app->add_option("--mtry", o.mtry, "features tried per split (0: ceil(sqrt(p)))");
  app->add_option("--min-leaf", o.min_leaf, "minimum rows per leaf")->capture_default_str();
  app->add_option("--max-depth", o.max_depth, "maximum tree depth (0: unbounded)");
  app->add_flag("--no-bootstrap", o.no_bootstrap, "grow trees on the full sample");
  app->add_option("--metric", o.metric, "euclidean, manhattan or minkowski")->capture_default_str();
  app->add_option("--minkowski-p", o.minkowski_p, "exponent for --metric minkowski");
  app->add_option("--neighbor-rule", o.neighbor_rule, "radius or knn")->capture_default_str();
  app->add_option("--knn-k", o.knn_k, "neighbours per treated vector for knn");
  app->add_option("--weight-floor", o.weight_floor, "distance floor for 1/d weights");
  app->add_option("--alpha", o.alpha, "X-learner blend weight (default n1/(n0+n1))");
  app->add_flag("--verbose", o.verbose, "log per-repetition augmentation counts");
}

struct GenOptions {
  std::string scenario;
  std::size_t m = 10;
  std::size_t n0 = 95;
  std::size_t n1 = 5;
  std::size_t jumps = 1;
  double noise = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

inline int execute_gen(const GenOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const ScenarioKind kind = parse_scenario(o.scenario);
    Rng rng = make_stream(o.seed, {0});
    const Scenario s = draw_scenario(kind, o.jumps, o.m, rng);
    GenConfig g;
    g.m = o.m;
    g.n0 = o.n0;
    g.n1 = o.n1;
    g.noise_sigma = o.noise;
    g.seed = o.seed;
    g.n_test = 1;
    const GeneratedData data = generate_dataset(s, g);
    write_dataset_csv(data.train, o.out);
    out << "wrote " << data.train.size() << " samples to " << o.out << '\n';
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

struct PlotOptions {
  std::string in;
  std::string out;
  std::string x;
  std::string y = "mse";
  std::string series = "learner";
  std::string title;
};

inline int execute_plot(const PlotOptions& o, std::ostream& out, std::ostream& err) {
  try {
    const CsvTable table = read_csv(o.in);
    const std::vector<Series> series = series_from_table(table, o.x, o.y, o.series);
    const std::string svg = render_line_chart(series, o.x, o.y, o.title);
    std::ofstream f = open_output(o.out);
    f << svg;
    f.flush();
    if (!f) throw IoError("failed writing '" + o.out + "'");
    out << "wrote " << series.size() << " series to " << o.out << '\n';
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 1 usage, config, data or I/O error, 2 when some learner fits failed.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Co-learner CATE estimation experiments", "colearn"};
  app.require_subcommand(1);
  app.fallthrough();

  // CLI11 reads config files only at the top level, so the file is parsed
  // there and its keys are addressed to the selected subcommand.
  std::string section;
  for (int i = 1; i < argc && section.empty(); ++i) {
    const std::string_view a = argv[i];
    if (a == "run" || a == "sweep" || a == "plot" || a == "gen") section = a;
  }
  app.config_formatter(std::make_shared<JsonConfig>(section));
  app.set_config("--config", "", "flat JSON object of flag values; explicit flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);

  RunOptions run_opts, sweep_opts;
  CLI::App* run_cmd = app.add_subcommand("run", "repeat one experiment configuration");
  add_experiment_options(run_cmd, run_opts);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run an experiment over a parameter grid");
  add_experiment_options(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--axis", sweep_opts.axis, "jumps, m, radius, proportion or bag-n")
      ->required();
  sweep_cmd->add_option("--values", sweep_opts.values, "comma list of sweep values")->required();

  PlotOptions plot_opts;
  CLI::App* plot_cmd = app.add_subcommand("plot", "render a CSV as an SVG line chart");
  plot_cmd->add_option("--in", plot_opts.in, "input CSV")->required();
  plot_cmd->add_option("--out", plot_opts.out, "output SVG")->required();
  plot_cmd->add_option("--x", plot_opts.x, "x column")->required();
  plot_cmd->add_option("--y", plot_opts.y, "y column")->capture_default_str();
  plot_cmd->add_option("--series", plot_opts.series, "series column")->capture_default_str();
  plot_cmd->add_option("--title", plot_opts.title, "chart title");

  GenOptions gen_opts;
  CLI::App* gen_cmd = app.add_subcommand("gen", "write one simulated training set as CSV");
  gen_cmd->add_option("--scenario", gen_opts.scenario, "sim1, sim2 or sim3")->required();
  gen_cmd->add_option("--m", gen_opts.m)->capture_default_str();
  gen_cmd->add_option("--n0", gen_opts.n0)->capture_default_str();
  gen_cmd->add_option("--n1", gen_opts.n1)->capture_default_str();
  gen_cmd->add_option("--jumps", gen_opts.jumps)->capture_default_str();
  gen_cmd->add_option("--noise", gen_opts.noise)->capture_default_str();
  gen_cmd->add_option("--seed", gen_opts.seed)->capture_default_str();
  gen_cmd->add_option("--out", gen_opts.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  if (*run_cmd) return execute_experiment(run_opts, false, out, err);
  if (*sweep_cmd) return execute_experiment(sweep_opts, true, out, err);
  if (*plot_cmd) return execute_plot(plot_opts, out, err);
  return execute_gen(gen_opts, out, err);
}

}  // namespace colearn::cli
