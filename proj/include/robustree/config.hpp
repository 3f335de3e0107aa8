#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "robustree/cart.hpp"
#include "robustree/errors.hpp"
#include "robustree/hof.hpp"
#include "robustree/metrics.hpp"
#include "robustree/tree.hpp"

namespace robustree {

// How a perturbation's adversary payoffs over the target trees are combined.
enum class TargetAggregation { Mean, Min };

inline std::string_view to_string(TargetAggregation a) { return a == TargetAggregation::Mean ? "mean" : "min"; }

struct CoevolutionConfig {
  std::size_t tree_population = 50;          // N_T
  std::size_t perturbation_population = 50;  // N_P
  double crossover_probability = 0.8;        // p_c
  double mutation_probability = 0.5;         // p_m
  double selection_pressure = 0.9;           // p_s
  std::size_t elite_count = 2;               // e
  std::size_t alternation_length = 20;       // l_c
  std::size_t max_generations = 1000;        // l_g
  std::size_t top_trees = 20;                // N_top
  ObjectiveMode mode = ObjectiveMode::AdversarialAccuracy;
  HofPolicy hof_policy = HofPolicy::NashMixed;
  std::optional<std::size_t> hof_max_size = 500;  // nullopt: unbounded
  DepthRange depth_interval{2, 10};
  int depth_cap = kDefaultDepthCap;
  int mutation_trials = 10;
  TargetAggregation target_aggregation = TargetAggregation::Mean;
  int perturbation_grid = 0;  // 0: continuous coordinates
  CartParams reference;
  std::uint64_t seed = 0;

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1]");
    };
    if (tree_population < 1) throw ConfigError("N_T must be >= 1");
    if (perturbation_population < 1) throw ConfigError("N_P must be >= 1");
    prob(crossover_probability, "p_c");
    prob(mutation_probability, "p_m");
    if (!(selection_pressure >= 0.5 && selection_pressure <= 1.0)) throw ConfigError("p_s must lie in [0.5,1]");
    if (elite_count >= std::min(tree_population, perturbation_population)) {
      throw ConfigError("e must be smaller than both population sizes");
    }
    if (alternation_length < 1) throw ConfigError("l_c must be >= 1");
    if (max_generations < alternation_length) throw ConfigError("l_g must be >= l_c");
    if (top_trees < 1) throw ConfigError("N_top must be >= 1");
    if (top_trees > tree_population) throw ConfigError("N_top must not exceed N_T");
    if (mutation_trials < 1) throw ConfigError("mutation_trials must be >= 1");
    if (perturbation_grid == 1 || perturbation_grid < 0) throw ConfigError("perturbation_grid must be 0 or >= 2");
    TreeSpace{{1, 2}, {}, depth_interval, depth_cap}.validate();
    reference.validate();
  }
};

namespace detail {

inline std::size_t parse_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

inline int parse_int(std::string_view key, std::string_view v) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

inline double parse_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(std::string(key) + ": expected a real number, got '" + std::string(v) + "'");
  }
  return out;
}

inline std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Sets one field by its config-file key. Unknown keys are errors.
inline void apply_config_value(CoevolutionConfig& c, std::string_view key, std::string_view value) {
  using namespace detail;
  if (key == "N_T") c.tree_population = parse_count(key, value);
  else if (key == "N_P") c.perturbation_population = parse_count(key, value);
  else if (key == "p_c") c.crossover_probability = parse_real(key, value);
  else if (key == "p_m") c.mutation_probability = parse_real(key, value);
  else if (key == "p_s") c.selection_pressure = parse_real(key, value);
  else if (key == "e") c.elite_count = parse_count(key, value);
  else if (key == "l_c") c.alternation_length = parse_count(key, value);
  else if (key == "l_g") c.max_generations = parse_count(key, value);
  else if (key == "N_top") c.top_trees = parse_count(key, value);
  else if (key == "mode") {
    auto m = parse_objective_mode(value);
    if (!m) throw ConfigError("mode: expected adversarial-accuracy or max-regret");
    c.mode = *m;
  } else if (key == "hof_policy") {
    auto p = parse_hof_policy(value);
    if (!p) throw ConfigError("hof_policy: expected nash-mixed, nash-singles, top-k-mixed, top-k or best");
    c.hof_policy = *p;
  } else if (key == "hof_max_size") {
    if (value == "inf") c.hof_max_size.reset();
    else c.hof_max_size = parse_count(key, value);
  } else if (key == "depth_min") c.depth_interval.min = parse_int(key, value);
  else if (key == "depth_max") c.depth_interval.max = parse_int(key, value);
  else if (key == "depth_cap") c.depth_cap = parse_int(key, value);
  else if (key == "mutation_trials") c.mutation_trials = parse_int(key, value);
  else if (key == "target_aggregation") {
    if (value == "mean") c.target_aggregation = TargetAggregation::Mean;
    else if (value == "min") c.target_aggregation = TargetAggregation::Min;
    else throw ConfigError("target_aggregation: expected mean or min");
  } else if (key == "perturbation_grid") c.perturbation_grid = parse_int(key, value);
  else if (key == "cart_max_depth") c.reference.max_depth = parse_int(key, value);
  else if (key == "cart_min_samples_split") c.reference.min_samples_split = parse_int(key, value);
  else if (key == "cart_min_impurity_decrease") c.reference.min_impurity_decrease = parse_real(key, value);
  else if (key == "seed") c.seed = parse_count(key, value);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

// Every field as (key, value) text, in a fixed order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const CoevolutionConfig& c) {
  using detail::format_real;
  return {
      {"N_T", std::to_string(c.tree_population)},
      {"N_P", std::to_string(c.perturbation_population)},
      {"p_c", format_real(c.crossover_probability)},
      {"p_m", format_real(c.mutation_probability)},
      {"p_s", format_real(c.selection_pressure)},
      {"e", std::to_string(c.elite_count)},
      {"l_c", std::to_string(c.alternation_length)},
      {"l_g", std::to_string(c.max_generations)},
      {"N_top", std::to_string(c.top_trees)},
      {"mode", std::string(to_string(c.mode))},
      {"hof_policy", std::string(to_string(c.hof_policy))},
      {"hof_max_size", c.hof_max_size ? std::to_string(*c.hof_max_size) : "inf"},
      {"depth_min", std::to_string(c.depth_interval.min)},
      {"depth_max", std::to_string(c.depth_interval.max)},
      {"depth_cap", std::to_string(c.depth_cap)},
      {"mutation_trials", std::to_string(c.mutation_trials)},
      {"target_aggregation", std::string(to_string(c.target_aggregation))},
      {"perturbation_grid", std::to_string(c.perturbation_grid)},
      {"cart_max_depth", std::to_string(c.reference.max_depth)},
      {"cart_min_samples_split", std::to_string(c.reference.min_samples_split)},
      {"cart_min_impurity_decrease", format_real(c.reference.min_impurity_decrease)},
      {"seed", std::to_string(c.seed)},
  };
}

// Flat `key = value` lines; '#' starts a comment.
inline void apply_config_text(CoevolutionConfig& c, std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + ": line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_config_value(c, detail::trim(text.substr(0, eq)), detail::trim(text.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void apply_config_file(CoevolutionConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  apply_config_text(c, in, path);
}

}  // namespace robustree
