// Three loan applicants described by credit score (CS) and income (I), both
// divided by 100. T1 is the clean data, T2 a small perturbation of it, T3 a
// perturbation (radius 0.2) that makes all applicants identical. Prints the payoff matrix
// of three hand-written trees against the three datasets and its equilibrium.
#include <cstdio>
#include <memory>
#include <vector>

#include "robustree/robustree.hpp"

using namespace robustree;

namespace {

TreeGenotype stump(std::size_t attribute, double threshold) {
  std::vector<NodeRecord> nodes(3);
  nodes[0].left = 1;
  nodes[0].right = 2;
  nodes[0].attribute = attribute;
  nodes[0].value = threshold;
  nodes[0].op = SplitOp::Less;
  nodes[1].id = 1;
  nodes[1].parent = 0;
  nodes[1].label = 0;
  nodes[2].id = 2;
  nodes[2].parent = 0;
  nodes[2].label = 1;
  return TreeGenotype({2, 2}, nodes);
}

}  // namespace

int main() {
  const Dataset t1("T1", {0.50, 0.30, 0.60, 0.60, 0.80, 0.70}, 2, {0, 1, 1}, 2, 0.2);
  auto perturbed = [&](std::vector<double> v) { return std::make_shared<const PerturbationGenotype>(v, 2); };
  const std::vector<std::shared_ptr<const PerturbationGenotype>> datasets{
      perturbed({0.50, 0.30, 0.60, 0.60, 0.80, 0.70}),
      perturbed({0.58, 0.36, 0.62, 0.56, 0.78, 0.66}),
      perturbed({0.60, 0.50, 0.60, 0.50, 0.60, 0.50}),
  };
  const std::vector<std::shared_ptr<const TreeGenotype>> trees{
      std::make_shared<const TreeGenotype>(stump(0, 0.55)),   // DT1: CS < 55 -> reject
      std::make_shared<const TreeGenotype>(stump(1, 0.45)),   // DT2: I < 45 -> reject
      std::make_shared<const TreeGenotype>(TreeGenotype::leaf({2, 2}, 1)),  // DT3: accept all
  };

  for (auto mode : {ObjectiveMode::AdversarialAccuracy, ObjectiveMode::MaxRegret}) {
    Evaluator eval(t1, mode);
    const auto m = build_payoff_matrix(trees, datasets, eval);
    std::printf("%s payoffs (rows DT1..DT3, columns T1..T3)\n", std::string(to_string(mode)).c_str());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) std::printf("  %.3f", m.at(i, j));
      std::printf("\n");
    }
    const auto eq = lemke_howson(m);
    std::printf("  trees   %.3f %.3f %.3f\n", eq.row[0], eq.row[1], eq.row[2]);
    std::printf("  columns %.3f %.3f %.3f\n", eq.col[0], eq.col[1], eq.col[2]);
    std::printf("  value   %.3f\n\n", eq.value);
  }
}
