#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "robustree/errors.hpp"
#include "robustree/random.hpp"

namespace robustree {

struct CsvSchema {
  std::optional<std::size_t> label_column;  // default: last column
  bool header = true;
};

// Parsed CSV before normalization. Labels are already dense class indices.
struct RawTable {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::vector<std::string> class_names;  // class index -> label text in the file
  std::size_t label_column = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.emplace_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.emplace_back(trim(cell));
  return cells;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

inline std::optional<long long> parse_integer(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace detail

// Reads a comma-separated table. Rows are numbered from 1 over data rows
// (the header does not count); error messages also carry the file line.
// Integral labels are indexed in ascending numeric order, any other labels in
// order of first appearance.
inline RawTable parse_csv(std::istream& in, const CsvSchema& schema,
                          std::string_view source = "<stream>") {
  RawTable table;
  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> line_numbers;
  std::optional<std::size_t> width;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = schema.header;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto row = detail::split_csv_line(line);
    if (!width) width = row.size();
    if (row.size() != *width) {
      std::ostringstream msg;
      msg << source << ": line " << line_no << " (row " << (line_numbers.size() + 1) << "): expected "
          << *width << " columns, found " << row.size();
      throw DataError(msg.str());
    }
    if (header_pending) {
      header_pending = false;
      table.feature_names = std::move(row);
      continue;
    }
    cells.push_back(std::move(row));
    line_numbers.push_back(line_no);
  }
  if (in.bad()) throw DataError(std::string(source) + ": read failure");
  if (cells.empty()) throw DataError(std::string(source) + ": no data rows");
  if (*width < 2) throw DataError(std::string(source) + ": need at least one feature and a label column");

  const std::size_t label_col = schema.label_column.value_or(*width - 1);
  if (label_col >= *width) {
    throw DataError(std::string(source) + ": label column " + std::to_string(label_col) +
                    " out of range (" + std::to_string(*width) + " columns)");
  }
  table.label_column = label_col;
  if (table.feature_names.empty()) {
    for (std::size_t c = 0; c < *width; ++c) table.feature_names.push_back("f" + std::to_string(c));
  }
  table.feature_names.erase(table.feature_names.begin() + static_cast<std::ptrdiff_t>(label_col));

  auto location = [&](std::size_t r, std::size_t c) {
    std::ostringstream msg;
    msg << source << ": line " << line_numbers[r] << " (row " << (r + 1) << "), column " << (c + 1);
    return msg.str();
  };

  bool integral_labels = true;
  for (const auto& row : cells) {
    if (detail::trim(row[label_col]).empty()) integral_labels = false;
    if (!detail::parse_integer(row[label_col])) integral_labels = false;
  }

  std::map<long long, int> numeric_classes;
  if (integral_labels) {
    for (const auto& row : cells) numeric_classes.emplace(*detail::parse_integer(row[label_col]), 0);
    int next = 0;
    for (auto& [value, index] : numeric_classes) {
      index = next++;
      table.class_names.push_back(std::to_string(value));
    }
  }
  std::map<std::string, int> text_classes;

  table.rows.reserve(cells.size());
  table.labels.reserve(cells.size());
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const auto& row = cells[r];
    std::vector<double> features;
    features.reserve(*width - 1);
    for (std::size_t c = 0; c < *width; ++c) {
      if (c == label_col) continue;
      if (detail::trim(row[c]).empty()) throw DataError(location(r, c) + ": missing value");
      const auto v = detail::parse_double(row[c]);
      if (!v) throw DataError(location(r, c) + ": non-numeric feature value '" + row[c] + "'");
      features.push_back(*v);
    }
    const std::string label_text(detail::trim(row[label_col]));
    if (label_text.empty()) throw DataError(location(r, label_col) + ": missing label");
    int label = 0;
    if (integral_labels) {
      label = numeric_classes.at(*detail::parse_integer(label_text));
    } else {
      auto [it, inserted] = text_classes.emplace(label_text, static_cast<int>(text_classes.size()));
      if (inserted) table.class_names.push_back(label_text);
      label = it->second;
    }
    table.rows.push_back(std::move(features));
    table.labels.push_back(label);
  }
  return table;
}

inline RawTable load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  return parse_csv(in, schema, path.string());
}

// Per-feature min/max of the raw data. Constant features map to 0.5.
struct FeatureScaling {
  std::vector<double> min;
  std::vector<double> max;

  bool is_constant(std::size_t j) const { return !(max[j] > min[j]); }

  double to_unit(std::size_t j, double raw) const {
    if (is_constant(j)) return 0.5;
    return std::clamp((raw - min[j]) / (max[j] - min[j]), 0.0, 1.0);
  }

  double to_raw(std::size_t j, double unit) const {
    if (is_constant(j)) return min[j];
    return min[j] + unit * (max[j] - min[j]);
  }
};

// Normalized classification data with the L-infinity radius all
// perturbations are confined to. Immutable after construction.
class Dataset {
 public:
  Dataset(std::string name, std::vector<double> values, std::size_t feature_count,
          std::vector<int> labels, std::size_t class_count, double epsilon,
          std::vector<bool> splittable = {}, std::vector<std::string> class_names = {})
      : name_(std::move(name)),
        values_(std::move(values)),
        labels_(std::move(labels)),
        splittable_(std::move(splittable)),
        class_names_(std::move(class_names)),
        feature_count_(feature_count),
        class_count_(class_count),
        epsilon_(epsilon) {
    if (feature_count_ == 0) throw DataError("dataset needs at least one feature");
    if (class_count_ < 2) throw DataError("dataset needs at least two classes");
    if (labels_.empty()) throw DataError("dataset is empty");
    if (values_.size() != labels_.size() * feature_count_) {
      throw DataError("instance matrix does not match label count");
    }
    if (!(epsilon_ >= 0.0) || !std::isfinite(epsilon_)) throw DataError("epsilon must be a finite value >= 0");
    for (double v : values_) {
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("feature values must lie in [0,1]");
    }
    for (int y : labels_) {
      if (y < 0 || static_cast<std::size_t>(y) >= class_count_) throw DataError("label out of range");
    }
    if (splittable_.empty()) splittable_.assign(feature_count_, true);
    if (splittable_.size() != feature_count_) throw DataError("splittable mask has wrong length");
    if (class_names_.empty()) {
      for (std::size_t c = 0; c < class_count_; ++c) class_names_.push_back(std::to_string(c));
    }
  }

  const std::string& name() const { return name_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t feature_count() const { return feature_count_; }
  std::size_t class_count() const { return class_count_; }
  double epsilon() const { return epsilon_; }
  std::span<const double> values() const { return values_; }
  std::span<const int> labels() const { return labels_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  std::span<const double> instance(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * feature_count_, feature_count_);
  }

  bool splittable(std::size_t j) const { return splittable_[j]; }
  std::vector<std::size_t> split_features() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < feature_count_; ++j)
      if (splittable_[j]) out.push_back(j);
    return out;
  }

  // Intersection of the epsilon-ball around coordinate (i, j) with [0, 1].
  std::pair<double, double> feasible_interval(std::size_t i, std::size_t j) const {
    const double x = values_[i * feature_count_ + j];
    return {std::max(0.0, x - epsilon_), std::min(1.0, x + epsilon_)};
  }

  Dataset with_epsilon(double epsilon) const {
    Dataset copy = *this;
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw DataError("epsilon must be a finite value >= 0");
    copy.epsilon_ = epsilon;
    return copy;
  }

  // Row subset in the given order.
  Dataset subset(std::span<const std::size_t> rows, std::string name) const {
    std::vector<double> values;
    std::vector<int> labels;
    values.reserve(rows.size() * feature_count_);
    for (std::size_t r : rows) {
      auto x = instance(r);
      values.insert(values.end(), x.begin(), x.end());
      labels.push_back(labels_[r]);
    }
    return Dataset(std::move(name), std::move(values), feature_count_, std::move(labels), class_count_,
                   epsilon_, splittable_, class_names_);
  }

 private:
  std::string name_;
  std::vector<double> values_;  // row-major, size() x feature_count()
  std::vector<int> labels_;
  std::vector<bool> splittable_;
  std::vector<std::string> class_names_;
  std::size_t feature_count_;
  std::size_t class_count_;
  double epsilon_;
};

// Min-max scales every feature into [0, 1]; epsilon is taken in these units.
inline std::pair<Dataset, FeatureScaling> normalize(const RawTable& raw, double epsilon,
                                                    std::string name = "dataset") {
  if (raw.rows.empty()) throw DataError("cannot normalize an empty table");
  const std::size_t d = raw.rows.front().size();
  FeatureScaling scaling;
  scaling.min.assign(d, 0.0);
  scaling.max.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double lo = raw.rows.front()[j];
    double hi = lo;
    for (const auto& row : raw.rows) {
      if (row.size() != d) throw DataError("ragged raw table");
      lo = std::min(lo, row[j]);
      hi = std::max(hi, row[j]);
    }
    scaling.min[j] = lo;
    scaling.max[j] = hi;
  }
  std::vector<double> values;
  values.reserve(raw.rows.size() * d);
  for (const auto& row : raw.rows)
    for (std::size_t j = 0; j < d; ++j) values.push_back(scaling.to_unit(j, row[j]));

  std::vector<bool> splittable(d);
  for (std::size_t j = 0; j < d; ++j) splittable[j] = !scaling.is_constant(j);

  std::size_t class_count = raw.class_names.size();
  for (int y : raw.labels) class_count = std::max(class_count, static_cast<std::size_t>(y) + 1);
  class_count = std::max<std::size_t>(class_count, 2);
  auto class_names = raw.class_names;
  while (class_names.size() < class_count) class_names.push_back(std::to_string(class_names.size()));

  Dataset dataset(std::move(name), std::move(values), d, raw.labels, class_count, epsilon,
                  std::move(splittable), std::move(class_names));
  return {std::move(dataset), std::move(scaling)};
}

inline std::vector<double> denormalize(const FeatureScaling& scaling, std::span<const double> unit_row) {
  std::vector<double> raw(unit_row.size());
  for (std::size_t j = 0; j < unit_row.size(); ++j) raw[j] = scaling.to_raw(j, unit_row[j]);
  return raw;
}

// Seeded random split; the test part gets round(test_fraction * size) rows.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                                    std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must be in (0,1)");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = derive_rng(seed, {0x5eed5u});
  shuffle(order, rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(data.size())));
  if (n_test == 0 || n_test >= data.size()) throw ConfigError("test fraction leaves an empty split");
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {data.subset(train, data.name() + ":train"), data.subset(test, data.name() + ":test")};
}

}  // namespace robustree
