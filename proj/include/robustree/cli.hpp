#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include "robustree/cart.hpp"
#include "robustree/config.hpp"
#include "robustree/dataset.hpp"
#include "robustree/engine.hpp"
#include "robustree/errors.hpp"
#include "robustree/metrics.hpp"
#include "robustree/nash.hpp"
#include "robustree/parallel.hpp"
#include "robustree/report.hpp"
#include "robustree/tree.hpp"

namespace robustree {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitInternal = 4 };

inline constexpr std::size_t kDefaultSamples = 100000;
inline constexpr std::uint64_t kDefaultEstimateSeed = 1;

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path + ": cannot write file");
  out << text;
  if (!out) throw DataError(path + ": write failed");
}

inline TreeGenotype load_tree(const std::string& path) {
  try {
    return deserialize_tree(read_file(path));
  } catch (const TreeFormatError& e) {
    throw TreeFormatError(path + ": " + e.path, e.what());
  }
}

struct LoadedData {
  Dataset data;
  FeatureScaling scaling;
  std::vector<std::string> feature_names;
};

inline LoadedData load_dataset(const DatasetSource& src, double epsilon) {
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  const auto raw = load_csv(src.path, {src.label_column, src.header});
  auto [data, scaling] = normalize(raw, epsilon, std::filesystem::path(src.path).stem().string());
  return {std::move(data), std::move(scaling), raw.feature_names};
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Shared dataset flags.
struct DataFlags {
  std::string path;
  std::optional<std::size_t> label_column;
  bool no_header = false;

  void add(CLI::App& app, bool required = true) {
    auto* opt = app.add_option("--data", path, "dataset CSV");
    if (required) opt->required();
    app.add_option("--label-column", label_column, "0-based label column (default: last)");
    app.add_flag("--no-header", no_header, "the CSV has no header row");
  }
  DatasetSource source() const { return {path, label_column, !no_header}; }
};

struct TrainArgs {
  DataFlags data;
  std::optional<double> epsilon;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::string config_file;
  std::vector<std::string> overrides;
  std::vector<std::string> init_trees;
  std::string out_tree;
  std::string report;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> estimate_seed;
  std::size_t threads = 0;
  std::string replay;
  bool progress = false;
};

inline int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  CoevolutionConfig config;
  DatasetSource source = args.data.source();
  double epsilon = 0.0;
  std::size_t samples = args.samples.value_or(kDefaultSamples);
  std::uint64_t estimate_seed = args.estimate_seed.value_or(kDefaultEstimateSeed);
  std::vector<TreeGenotype> warm;
  std::vector<std::string> warm_sources;

  if (!args.replay.empty()) {
    const auto rep = read_report(args.replay);
    if (rep.value("command", "") != "train") throw ConfigError(args.replay + ": not a train report");
    try {
      config = config_from_json(rep.at("config"));
      const auto& ds = rep.at("dataset");
      source.path = ds.at("path").get<std::string>();
      source.header = ds.at("header").get<bool>();
      if (!ds.at("label_column").is_null()) source.label_column = ds.at("label_column").get<std::size_t>();
      epsilon = ds.at("epsilon").get<double>();
      samples = rep.at("estimate").at("n_samples").get<std::size_t>();
      estimate_seed = rep.at("estimate").at("seed").get<std::uint64_t>();
      for (const auto& t : rep.at("warm_start").at("trees")) warm.push_back(deserialize_tree(t.dump()));
      warm_sources = rep.at("warm_start").at("sources").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(args.replay + ": malformed report: " + e.what());
    }
  } else {
    if (!args.epsilon) throw ConfigError("train: --epsilon is required");
    if (!args.mode) throw ConfigError("train: --mode is required");
    epsilon = *args.epsilon;
    if (!args.config_file.empty()) apply_config_file(config, args.config_file);
    for (const auto& kv : args.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_config_value(config, detail::trim(std::string_view(kv).substr(0, eq)),
                         detail::trim(std::string_view(kv).substr(eq + 1)));
    }
    apply_config_value(config, "mode", *args.mode);
    if (args.seed) config.seed = *args.seed;
    for (const auto& path : args.init_trees) {
      warm.push_back(load_tree(path));
      warm_sources.push_back(path);
    }
  }
  config.validate();
  if (samples == 0) throw ConfigError("--samples must be >= 1");

  const auto loaded = load_dataset(source, epsilon);
  ThreadPool pool(args.threads ? args.threads : default_thread_count());

  ProgressSink sink;
  if (args.progress) {
    sink = [&err](const ProgressEvent& e) {
      if (e.phase != Phase::Trees) return;
      err << "generation " << e.tree_generation << " best " << fmt(e.best_fitness) << " best-found "
          << fmt(e.best_found) << " mean " << fmt(e.mean_fitness) << " hof " << e.hof_trees << "/"
          << e.hof_perturbations << "\n";
    };
  }

  const auto started = std::chrono::steady_clock::now();
  const TrainResult result = evolve(loaded.data, config, warm, &pool, {samples, estimate_seed}, sink);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  nlohmann::json warm_json = nlohmann::json::array();
  for (const auto& t : warm) warm_json.push_back(tree_to_json(t));

  nlohmann::json rep;
  rep["format_version"] = kReportFormatVersion;
  rep["command"] = "train";
  rep["config"] = config_to_json(config);
  rep["dataset"] = dataset_to_json(loaded.data, loaded.scaling, source, loaded.feature_names);
  rep["warm_start"] = {{"sources", warm_sources}, {"trees", warm_json}};
  rep["estimate"] = {{"n_samples", samples}, {"seed", estimate_seed}};
  rep["result"] = {{"best_tree", tree_to_json(result.best_tree)},
                   {"fitness", result.best_fitness.value},
                   {"mode", std::string(to_string(result.best_fitness.mode))},
                   {"generations", result.generations_run},
                   {"stop_reason", std::string(to_string(result.stop_reason))},
                   {"tree_depth", result.best_tree.depth()},
                   {"tree_nodes", result.best_tree.size()}};
  rep["final_metrics"] = metrics_to_json(*result.final_metrics);
  rep["diagnostics"] = diagnostics_to_json(result.diagnostics);
  rep["wall_clock_seconds"] = seconds;

  if (!args.out_tree.empty()) write_file(args.out_tree, serialize_tree(result.best_tree));
  if (!args.report.empty()) write_file(args.report, dump_document(rep));

  const auto& m = *result.final_metrics;
  out << "dataset " << loaded.data.name() << " (" << loaded.data.size() << " x " << loaded.data.feature_count()
      << ", epsilon " << fmt(epsilon) << ")\n";
  out << "stop " << to_string(result.stop_reason) << " after " << result.generations_run << " tree generations\n";
  out << "fitness " << fmt(result.best_fitness.value) << " (" << to_string(config.mode) << ")\n";
  out << "adversarial_accuracy " << fmt(m.adversarial_accuracy) << "\n";
  out << "max_regret " << fmt(m.max_regret) << "\n";
  out << "clean_accuracy " << fmt(m.clean_accuracy) << "\n";
  out << "samples " << m.n_samples << " seed " << m.seed << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  DataFlags data;
  std::vector<std::string> trees;
  double epsilon = 0.0;
  std::size_t samples = kDefaultSamples;
  std::uint64_t seed = kDefaultEstimateSeed;
  std::size_t threads = 0;
  CartParams reference;
  std::string report;
};

inline int cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
  if (args.samples == 0) throw ConfigError("--samples must be >= 1");
  args.reference.validate();
  const auto loaded = load_dataset(args.data.source(), args.epsilon);
  std::vector<TreeGenotype> trees;
  for (const auto& path : args.trees) {
    trees.push_back(load_tree(path));
    check_compatible(trees.back(), loaded.data);
  }
  ThreadPool pool(args.threads ? args.threads : default_thread_count());
  const auto metrics = estimate_final_metrics(trees, loaded.data, args.samples, args.seed, args.reference, &pool);

  nlohmann::json rep;
  rep["format_version"] = kReportFormatVersion;
  rep["command"] = "evaluate";
  rep["dataset"] = dataset_to_json(loaded.data, loaded.scaling, args.data.source(), loaded.feature_names);
  rep["reference"] = {{"cart_max_depth", args.reference.max_depth},
                      {"cart_min_samples_split", args.reference.min_samples_split},
                      {"cart_min_impurity_decrease", args.reference.min_impurity_decrease}};
  nlohmann::json results = nlohmann::json::array();
  for (std::size_t t = 0; t < trees.size(); ++t) {
    auto m = metrics_to_json(metrics[t]);
    m["tree"] = args.trees[t];
    results.push_back(m);
    out << args.trees[t] << ": adversarial_accuracy " << fmt(metrics[t].adversarial_accuracy) << " max_regret "
        << fmt(metrics[t].max_regret) << " clean_accuracy " << fmt(metrics[t].clean_accuracy) << " (samples "
        << metrics[t].n_samples << ", seed " << metrics[t].seed << ")\n";
  }
  rep["results"] = results;
  if (!args.report.empty()) write_file(args.report, dump_document(rep));
  return kExitOk;
}

struct CartArgs {
  DataFlags data;
  double epsilon = 0.0;
  CartParams params;
  std::string out_tree;
};

inline int cmd_cart(const CartArgs& args, std::ostream& out) {
  args.params.validate();
  const auto loaded = load_dataset(args.data.source(), args.epsilon);
  const TreeGenotype tree = build_cart(loaded.data, args.params);
  write_file(args.out_tree, serialize_tree(tree));
  out << "cart depth " << tree.depth() << " nodes " << tree.size() << " training_accuracy "
      << fmt(accuracy(tree, loaded.data)) << "\n";
  return kExitOk;
}

struct NashArgs {
  std::string matrix = "-";
  int label = 0;
};

inline int cmd_nash_solve(const NashArgs& args, std::istream& in, std::ostream& out) {
  PayoffMatrix m;
  if (args.matrix == "-") {
    m = PayoffMatrix::parse(in);
  } else {
    std::ifstream file(args.matrix);
    if (!file) throw DataError(args.matrix + ": cannot open file");
    m = PayoffMatrix::parse(file);
  }
  NashDiagnostics diag;
  const auto eq = lemke_howson(m, args.label, &diag);
  auto line = [&](const char* name, const std::vector<double>& p) {
    out << name;
    for (double v : p) out << " " << fmt(v);
    out << "\n";
  };
  line("row", eq.row);
  line("column", eq.col);
  out << "value " << fmt(eq.value) << "\n";
  out << "method " << to_string(eq.method) << "\n";
  return kExitOk;
}

}  // namespace detail

// Entry point of the command-line tool; returns the process exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr,
                   std::istream& in = std::cin) {
  CLI::App app{"Coevolutionary training of decision trees robust to bounded input perturbations"};
  app.require_subcommand(1);

  detail::TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "evolve a robust tree");
  train.data.add(*train_cmd, false);
  train_cmd->add_option("--epsilon", train.epsilon, "L-infinity radius in normalized feature units");
  train_cmd->add_option("--mode", train.mode, "adversarial-accuracy or max-regret");
  train_cmd->add_option("--seed", train.seed, "master seed (default 0)");
  train_cmd->add_option("--config", train.config_file, "key = value config file");
  train_cmd->add_option("--set", train.overrides, "override one config key (key=value), repeatable");
  train_cmd->add_option("--init-trees", train.init_trees, "warm-start tree file, repeatable");
  train_cmd->add_option("--out-tree", train.out_tree, "write the best tree here");
  train_cmd->add_option("--report", train.report, "write the run report here");
  train_cmd->add_option("--samples", train.samples, "perturbations for the final estimate (default 100000)");
  train_cmd->add_option("--estimate-seed", train.estimate_seed, "seed of the estimation sample (default 1)");
  train_cmd->add_option("--threads", train.threads, "worker threads (default: all cores)");
  train_cmd->add_option("--replay", train.replay, "re-run the configuration recorded in a report");
  train_cmd->add_flag("--progress", train.progress, "print one line per tree generation to stderr");

  detail::EvaluateArgs evaluate;
  auto* eval_cmd = app.add_subcommand("evaluate", "estimate robustness metrics of tree files");
  evaluate.data.add(*eval_cmd);
  eval_cmd->add_option("--tree", evaluate.trees, "tree file, repeatable")->required();
  eval_cmd->add_option("--epsilon", evaluate.epsilon, "L-infinity radius in normalized feature units")->required();
  eval_cmd->add_option("--samples", evaluate.samples, "number of sampled perturbations (default 100000)");
  eval_cmd->add_option("--seed", evaluate.seed, "seed of the perturbation sample (default 1)");
  eval_cmd->add_option("--threads", evaluate.threads, "worker threads (default: all cores)");
  eval_cmd->add_option("--cart-max-depth", evaluate.reference.max_depth, "reference CART depth limit");
  eval_cmd->add_option("--cart-min-samples-split", evaluate.reference.min_samples_split);
  eval_cmd->add_option("--cart-min-impurity-decrease", evaluate.reference.min_impurity_decrease);
  eval_cmd->add_option("--report", evaluate.report, "write a JSON report here");

  detail::CartArgs cart;
  auto* cart_cmd = app.add_subcommand("cart", "fit the CART baseline");
  cart.data.add(*cart_cmd);
  cart_cmd->add_option("--epsilon", cart.epsilon, "recorded only; CART ignores it");
  cart_cmd->add_option("--max-depth", cart.params.max_depth);
  cart_cmd->add_option("--min-samples-split", cart.params.min_samples_split);
  cart_cmd->add_option("--min-impurity-decrease", cart.params.min_impurity_decrease);
  cart_cmd->add_option("--out-tree", cart.out_tree, "tree file to write")->required();

  detail::NashArgs nash;
  auto* nash_cmd = app.add_subcommand("nash-solve", "mixed equilibrium of a zero-sum matrix game");
  nash_cmd->add_option("matrix", nash.matrix, "matrix text file, '-' for stdin");
  nash_cmd->add_option("--label", nash.label, "initial Lemke-Howson label (default 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*train_cmd) {
      if (train.replay.empty() && train.data.path.empty()) throw ConfigError("train: --data is required");
      return detail::cmd_train(train, out, err);
    }
    if (*eval_cmd) return detail::cmd_evaluate(evaluate, out);
    if (*cart_cmd) return detail::cmd_cart(cart, out);
    if (*nash_cmd) return detail::cmd_nash_solve(nash, in, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const InternalFault& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitConfig;
}

}  // namespace robustree
