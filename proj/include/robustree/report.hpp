#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "robustree/config.hpp"
#include "robustree/dataset.hpp"
#include "robustree/engine.hpp"
#include "robustree/errors.hpp"
#include "robustree/metrics.hpp"
#include "robustree/tree.hpp"

namespace robustree {

// Bumped on any change to the report layout.
inline constexpr int kReportFormatVersion = 1;

// Where a dataset came from and how it was read; enough to load it again.
struct DatasetSource {
  std::string path;
  std::optional<std::size_t> label_column;
  bool header = true;
};

inline nlohmann::json config_to_json(const CoevolutionConfig& c) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, text] : config_entries(c)) {
    // Numbers stay numbers; enum names and "inf" stay strings.
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == text.size() && text != "inf") {
      if (text.find_first_of(".eE") == std::string::npos) {
        out[key] = std::stoull(text);
      } else {
        out[key] = v;
      }
    } else {
      out[key] = text;
    }
  }
  return out;
}

inline CoevolutionConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("report: config must be an object");
  CoevolutionConfig c;
  for (const auto& [key, value] : j.items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_number_unsigned()) {
      text = std::to_string(value.get<unsigned long long>());
    } else if (value.is_number_integer()) {
      text = std::to_string(value.get<long long>());
    } else if (value.is_number()) {
      text = detail::format_real(value.get<double>());
    } else {
      throw ConfigError("report: config." + key + " has an unsupported type");
    }
    apply_config_value(c, key, text);
  }
  return c;
}

inline nlohmann::json tree_to_json(const TreeGenotype& tree) { return nlohmann::json::parse(serialize_tree(tree)); }

inline nlohmann::json metrics_to_json(const FinalMetrics& m) {
  return {{"adversarial_accuracy", m.adversarial_accuracy},
          {"max_regret", m.max_regret},
          {"clean_accuracy", m.clean_accuracy},
          {"n_samples", m.n_samples},
          {"seed", m.seed},
          {"clamped_regrets", m.clamped_regrets}};
}

inline nlohmann::json dataset_to_json(const Dataset& data, const FeatureScaling& scaling, const DatasetSource& src,
                                      const std::vector<std::string>& feature_names) {
  nlohmann::json j;
  j["name"] = data.name();
  j["path"] = src.path;
  j["header"] = src.header;
  j["label_column"] = src.label_column ? nlohmann::json(*src.label_column) : nlohmann::json(nullptr);
  j["instances"] = data.size();
  j["features"] = data.feature_count();
  j["classes"] = data.class_count();
  j["epsilon"] = data.epsilon();
  j["epsilon_units"] = "normalized";
  j["class_map"] = data.class_names();
  j["feature_names"] = feature_names;
  j["scaling"] = {{"min", scaling.min}, {"max", scaling.max}};
  return j;
}

inline nlohmann::json diagnostics_to_json(const TrainDiagnostics& d) {
  std::vector<std::string> hashes;
  for (auto h : d.warm_start_hashes) {
    std::ostringstream s;
    s << std::hex << h;
    hashes.push_back(s.str());
  }
  return {{"clamped_regrets", d.clamped_regrets},
          {"nash_solves", d.nash.solves},
          {"nash_support_fallbacks", d.nash.support_fallbacks},
          {"nash_lexicographic_fallbacks", d.nash.lexicographic_fallbacks},
          {"hof_trees", {{"size", d.hof_tree_size}, {"insertions", d.hof_tree_insertions},
                         {"evictions", d.hof_tree_evictions}}},
          {"hof_perturbations", {{"size", d.hof_perturbation_size}, {"insertions", d.hof_perturbation_insertions},
                                 {"evictions", d.hof_perturbation_evictions}}},
          {"subroutine_invocations", d.subroutine_invocations},
          {"subroutine_successes", d.subroutine_successes},
          {"subroutine_discoveries", d.subroutine_discoveries},
          {"warm_start_trees", d.warm_start_trees},
          {"warm_start_hashes", hashes},
          {"perturbation_generations", d.perturbation_generations}};
}

// nlohmann::json keeps object keys in a std::map, so they come out sorted.
inline std::string dump_document(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline nlohmann::json read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open report");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": not valid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("format_version") || !j["format_version"].is_number_integer()) {
    throw DataError(path + ": missing format_version");
  }
  if (j["format_version"].get<int>() != kReportFormatVersion) {
    throw DataError(path + ": unsupported report format_version " + j["format_version"].dump());
  }
  return j;
}

}  // namespace robustree
