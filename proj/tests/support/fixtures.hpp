#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "robustree/robustree.hpp"

namespace fixtures {

using namespace robustree;

inline std::string data_path(const std::string& name) { return std::string(ROBUSTREE_DATA_DIR) + "/" + name; }

// Loan applicants A1..A3 with (credit score, income) / 100.
inline Dataset loan_t1(double epsilon = 0.2) {
  return Dataset("T1", {0.50, 0.30, 0.60, 0.60, 0.80, 0.70}, 2, {0, 1, 1}, 2, epsilon);
}

inline PerturbationGenotype loan_t2() { return PerturbationGenotype({0.58, 0.36, 0.62, 0.56, 0.78, 0.66}, 2); }
// Every applicant moved onto the same point.
inline PerturbationGenotype loan_t3() { return PerturbationGenotype({0.60, 0.50, 0.60, 0.50, 0.60, 0.50}, 2); }

inline TreeGenotype stump(std::size_t attribute, double threshold, int below, int above) {
  NodeRecord root;
  root.left = 1;
  root.right = 2;
  root.op = SplitOp::Less;
  root.value = threshold;
  root.attribute = attribute;
  NodeRecord l;
  l.id = 1;
  l.parent = 0;
  l.label = below;
  NodeRecord r;
  r.id = 2;
  r.parent = 0;
  r.label = above;
  return TreeGenotype({2, 2}, {root, l, r});
}

// Accept when CS >= 55.
inline TreeGenotype loan_dt1() { return stump(0, 0.55, 0, 1); }
// Reject when income < 45.
inline TreeGenotype loan_dt2() { return stump(1, 0.45, 0, 1); }
// Accept everyone.
inline TreeGenotype loan_dt3() { return TreeGenotype::leaf({2, 2}, 1); }

// ---- exhaustive toy problem ------------------------------------------------

// Four instances on one feature, perturbations on a three-point grid.
inline Dataset toy_dataset() { return Dataset("toy", {0.25, 0.375, 0.5, 0.625}, 1, {0, 0, 1, 1}, 2, 0.125); }
inline constexpr int kToyGrid = 3;

// All 3^4 grid perturbations of the toy dataset.
inline std::vector<std::vector<double>> toy_grid_perturbations(const Dataset& data) {
  std::vector<std::vector<double>> out{{}};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto [lo, hi] = data.feasible_interval(i, 0);
    std::vector<std::vector<double>> next;
    for (const auto& prefix : out) {
      for (int k = 0; k < kToyGrid; ++k) {
        auto p = prefix;
        p.push_back(k == kToyGrid - 1 ? hi : lo + (hi - lo) * k / (kToyGrid - 1));
        next.push_back(p);
      }
    }
    out = std::move(next);
  }
  return out;
}

// Best accuracy any classifier reaches on a point set: the majority label
// of every distinct value.
inline double best_possible_accuracy(const std::vector<double>& xs, std::span<const int> labels) {
  std::map<double, std::map<int, int>> counts;
  for (std::size_t i = 0; i < xs.size(); ++i) ++counts[xs[i]][labels[i]];
  int hits = 0;
  for (const auto& [x, by_label] : counts) {
    int best = 0;
    for (const auto& [y, c] : by_label) best = std::max(best, c);
    hits += best;
  }
  return static_cast<double>(hits) / static_cast<double>(xs.size());
}

// A labeling of the sorted distinct grid values.
struct Labeling {
  std::vector<double> points;
  std::vector<int> labels;

  int at(double x) const {
    for (std::size_t k = 0; k < points.size(); ++k)
      if (points[k] == x) return labels[k];
    return -1;
  }
};

inline std::vector<double> toy_grid_points(const Dataset& data) {
  std::set<double> pts;
  for (const auto& z : toy_grid_perturbations(data)) pts.insert(z.begin(), z.end());
  return {pts.begin(), pts.end()};
}

// Labelings of the grid points realizable by a tree of depth <= 2 with the
// three split operators. Thresholds outside the grid's gaps realize the same
// partitions as the ones listed, so midpoints, grid values and the box ends
// are enough.
inline std::vector<Labeling> depth2_labelings(const std::vector<double>& pts) {
  std::vector<double> thresholds{0.0, 1.0};
  for (std::size_t k = 0; k < pts.size(); ++k) {
    thresholds.push_back(pts[k]);
    if (k + 1 < pts.size()) thresholds.push_back((pts[k] + pts[k + 1]) / 2);
  }
  // A split as a mask over the points: true goes left.
  std::set<std::vector<bool>> splits;
  for (double v : thresholds)
    for (auto op : {SplitOp::Less, SplitOp::Greater, SplitOp::Equal}) {
      std::vector<bool> mask;
      for (double x : pts) mask.push_back(split_test(op, x, v));
      splits.insert(mask);
    }
  std::set<std::vector<int>> depth1{std::vector<int>(pts.size(), 0), std::vector<int>(pts.size(), 1)};
  for (const auto& s : splits)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        std::vector<int> f;
        for (bool left : s) f.push_back(left ? a : b);
        depth1.insert(f);
      }
  std::set<std::vector<int>> depth2 = depth1;
  for (const auto& s : splits)
    for (const auto& fl : depth1)
      for (const auto& fr : depth1) {
        std::vector<int> f;
        for (std::size_t k = 0; k < pts.size(); ++k) f.push_back(s[k] ? fl[k] : fr[k]);
        depth2.insert(f);
      }
  std::vector<Labeling> out;
  for (const auto& f : depth2) out.push_back({pts, f});
  return out;
}

// Robust objective of a labeling over every grid perturbation: worst-case
// accuracy, or 1 - max regret against the best possible accuracy.
inline double toy_objective(const Labeling& f, const Dataset& data, ObjectiveMode mode) {
  double worst = std::numeric_limits<double>::infinity();
  const auto labels = data.labels();
  for (const auto& z : toy_grid_perturbations(data)) {
    int hits = 0;
    for (std::size_t i = 0; i < z.size(); ++i) hits += f.at(z[i]) == labels[i] ? 1 : 0;
    const double acc = static_cast<double>(hits) / static_cast<double>(z.size());
    const double payoff =
        mode == ObjectiveMode::AdversarialAccuracy ? acc : 1.0 - std::max(0.0, best_possible_accuracy(z, labels) - acc);
    worst = std::min(worst, payoff);
  }
  return worst;
}

inline double toy_optimum(const Dataset& data, ObjectiveMode mode) {
  double best = -1.0;
  for (const auto& f : depth2_labelings(toy_grid_points(data))) best = std::max(best, toy_objective(f, data, mode));
  return best;
}

inline Labeling labeling_of(const TreeGenotype& tree, const std::vector<double>& pts) {
  Labeling f{pts, {}};
  for (double x : pts) f.labels.push_back(tree.predict(std::span<const double>(&x, 1)));
  return f;
}

inline CoevolutionConfig toy_config(ObjectiveMode mode, std::uint64_t seed) {
  CoevolutionConfig c;
  c.tree_population = 30;
  c.perturbation_population = 30;
  c.top_trees = 10;
  c.alternation_length = 10;
  c.max_generations = 100;
  c.depth_interval = {1, 2};
  c.depth_cap = 2;
  c.perturbation_grid = kToyGrid;
  c.mode = mode;
  c.seed = seed;
  return c;
}

// Random labeled data in [0,1]^d.
inline Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t classes, double epsilon) {
  Rng rng = derive_rng(seed, {77});
  std::vector<double> values(n * d);
  for (auto& v : values) v = uniform01(rng);
  std::vector<int> labels(n);
  for (auto& y : labels) y = static_cast<int>(uniform_index(rng, classes));
  return Dataset("random", std::move(values), d, std::move(labels), classes, epsilon);
}

}  // namespace fixtures
