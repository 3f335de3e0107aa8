#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "robustree/robustree.hpp"
#include "support/fixtures.hpp"

namespace properties {

using namespace robustree;

struct Outcome {
  explicit Outcome(std::string n) : name(std::move(n)) {}

  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::string first_failure;

  bool ok() const { return failures == 0; }
  void fail(const std::string& what) {
    if (failures++ == 0) first_failure = what;
  }
};

// Longest root-to-leaf edge count, recomputed from the node list.
inline int recomputed_depth(const TreeGenotype& t, std::size_t id = 0) {
  const auto& n = t.node(id);
  if (n.is_leaf()) return 0;
  return 1 + std::max(recomputed_depth(t, *n.left), recomputed_depth(t, *n.right));
}

inline bool genotype_ok(const TreeGenotype& t, const TreeSpace& space, std::string* why) {
  if (t.depth() != recomputed_depth(t)) {
    *why = "cached depth differs from recomputed depth";
    return false;
  }
  if (t.depth() > space.depth_cap) {
    *why = "depth exceeds cap";
    return false;
  }
  try {
    const auto copy = deserialize_tree(serialize_tree(t));
    if (!(copy == t)) {
      *why = "serialization round trip changed the tree";
      return false;
    }
  } catch (const std::exception& e) {
    *why = std::string("validator rejected operator output: ") + e.what();
    return false;
  }
  return true;
}

// Every tree operator's output passes the validator, keeps a correct depth
// cache and respects the cap.
inline Outcome tree_operator_closure(std::size_t applications = 10000, std::uint64_t seed = 1) {
  Outcome out{"genotype validity closure under tree operators"};
  Rng rng = derive_rng(seed, {1});
  const std::vector<TreeSpace> spaces{
      {{3, 2}, {}, {1, 4}, 5},
      {{2, 3}, {}, {2, 6}, 6},
      {{5, 4}, {0, 2, 4}, {1, 1}, 3},
  };
  std::size_t s = 0;
  TreeGenotype a = random_tree(spaces[0], rng);
  TreeGenotype b = random_tree(spaces[0], rng);
  std::string why;
  auto check = [&](const TreeGenotype& t, const char* op) {
    ++out.cases;
    if (!genotype_ok(t, spaces[s], &why)) out.fail(std::string(op) + ": " + why);
  };
  while (out.cases < applications) {
    if (out.cases % 500 == 0) {
      s = (s + 1) % spaces.size();
      a = random_tree(spaces[s], rng);
      b = random_tree(spaces[s], rng);
    }
    const auto& space = spaces[s];
    switch (uniform_index(rng, 6)) {
      case 0:
        a = random_tree(space, rng);
        check(a, "random_tree");
        break;
      case 1: {
        auto [x, y] = crossover_trees(a, b, space, rng);
        check(x, "crossover");
        check(y, "crossover");
        a = std::move(x);
        b = std::move(y);
        break;
      }
      case 2:
        for (auto& m : mutate_candidates(a, space, rng, 3)) {
          check(m, "mutate_candidates");
          a = std::move(m);
        }
        break;
      case 3: {
        const auto action = static_cast<MutationAction>(uniform_index(rng, 3));
        b = mutate_tree_at(b, action, uniform_index(rng, b.size()), space, rng);
        check(b, "mutate_tree_at");
        break;
      }
      case 4: {
        TreeSpace wide = space;
        wide.depth_cap = space.depth_cap + 4;
        wide.init_depth = {space.depth_cap, space.depth_cap + 4};
        const auto deep = random_tree(wide, rng);
        const auto cut = truncate_to_cap(deep, space, rng);
        check(cut, "truncate_to_cap");
        break;
      }
      default: {
        auto [x, y] = crossover_trees_at(a, 0, b, 0, space, rng);
        check(x, "root crossover");
        check(y, "root crossover");
        if (!(x == b) || !(y == a)) out.fail("root crossover did not swap the parents");
        break;
      }
    }
  }
  return out;
}

// Ball and box membership after every perturbation operator.
inline Outcome perturbation_operator_membership(std::size_t applications = 10000, std::uint64_t seed = 2) {
  Outcome out{"epsilon-ball and box membership under perturbation operators"};
  Rng rng = derive_rng(seed, {2});
  std::vector<Dataset> sets;
  for (double eps : {0.0, 0.05, 0.3, 0.7})
    sets.push_back(fixtures::random_dataset(seed + sets.size(), 12, 3, 2, eps));
  for (std::size_t round = 0; out.cases < applications; ++round) {
    const Dataset& data = sets[round % sets.size()];
    const PerturbationSpace space{round % 3 == 0 ? 0 : static_cast<int>(2 + round % 4)};
    auto check = [&](const PerturbationGenotype& p, const char* op) {
      ++out.cases;
      if (!within_ball(p, data)) {
        std::ostringstream s;
        s << op << " left the ball (epsilon " << data.epsilon() << ")";
        out.fail(s.str());
      }
    };
    auto a = random_perturbation(data, rng, space);
    check(a, "random_perturbation");
    auto b = random_perturbation(data, rng, space);
    check(b, "random_perturbation");
    for (int k = 0; k < 10; ++k) {
      auto [x, y] = crossover_perturbations(a, b, rng);
      check(x, "crossover_perturbations");
      check(y, "crossover_perturbations");
      a = mutate_perturbation(x, data, rng, space);
      check(a, "mutate_perturbation");
      b = mutate_perturbation(y, data, rng, space, uniform01(rng));
      check(b, "mutate_perturbation");
    }
    check(sample_perturbation(data, round, round), "sample_perturbation");
  }
  return out;
}

inline MixedTree random_mixed_tree(const TreeSpace& space, Rng& rng, std::size_t members) {
  std::vector<std::shared_ptr<const TreeGenotype>> trees;
  std::vector<double> weights;
  for (std::size_t k = 0; k < members; ++k) {
    trees.push_back(std::make_shared<const TreeGenotype>(random_tree(space, rng)));
    weights.push_back(uniform01(rng) + 0.01);
  }
  return MixedTree::from_weights(trees, weights);
}

// The metric of a mixed strategy equals the probability-weighted sum of its
// members' metrics, in both modes and from both sides.
inline Outcome expected_metric_linearity(std::size_t cases = 10000, std::uint64_t seed = 3) {
  Outcome out{"expected-metric linearity"};
  const Dataset data = fixtures::random_dataset(seed, 20, 2, 2, 0.2);
  const TreeSpace space = TreeSpace::for_dataset(data, {1, 4}, 6);
  Rng rng = derive_rng(seed, {3});
  std::vector<std::shared_ptr<const PerturbationGenotype>> perts;
  for (int k = 0; k < 8; ++k) perts.push_back(std::make_shared<const PerturbationGenotype>(random_perturbation(data, rng)));
  for (auto mode : {ObjectiveMode::AdversarialAccuracy, ObjectiveMode::MaxRegret}) {
    Evaluator eval(data, mode);
    while (out.cases < (mode == ObjectiveMode::MaxRegret ? cases : cases / 2)) {
      ++out.cases;
      const auto h = random_mixed_tree(space, rng, 1 + uniform_index(rng, 4));
      std::vector<double> w(perts.size());
      for (auto& v : w) v = bernoulli(rng, 0.5) ? uniform01(rng) : 0.0;
      w[uniform_index(rng, w.size())] += 0.5;
      const auto z = MixedPerturbation::from_weights(perts, w);
      double direct = 0.0;
      for (const auto& a : h.members())
        for (const auto& b : z.members())
          direct += a.probability * b.probability * pair_payoff(*a.genotype, *b.genotype, data, mode);
      const double via_eval = eval.expected(h, z);
      const double via_free = expected_payoff(h, z, data, mode);
      if (std::abs(direct - via_eval) > 1e-12 || std::abs(direct - via_free) > 1e-12) {
        out.fail("mixed payoff differs from the weighted member sum");
      }
      if (mode == ObjectiveMode::AdversarialAccuracy) {
        const auto& zz = *perts[uniform_index(rng, perts.size())];
        double sum = 0.0;
        for (const auto& a : h.members()) sum += a.probability * accuracy(*a.genotype, zz, data);
        if (std::abs(sum - accuracy(h, zz.values(), data.labels())) > 1e-12) out.fail("mixed accuracy not linear");
      }
    }
  }
  return out;
}

// Adding perturbations to an evaluation set never raises a tree's fitness.
inline Outcome worst_case_monotonicity(std::size_t cases = 10000, std::uint64_t seed = 4) {
  Outcome out{"worst-case monotonicity under evaluation-set growth"};
  const Dataset data = fixtures::random_dataset(seed, 16, 2, 2, 0.25);
  const TreeSpace space = TreeSpace::for_dataset(data, {1, 3}, 4);
  Rng rng = derive_rng(seed, {4});
  std::vector<std::shared_ptr<const PerturbationGenotype>> pool;
  for (int k = 0; k < 40; ++k) pool.push_back(std::make_shared<const PerturbationGenotype>(random_perturbation(data, rng)));
  std::vector<std::shared_ptr<const TreeGenotype>> trees;
  for (int k = 0; k < 25; ++k) trees.push_back(std::make_shared<const TreeGenotype>(random_tree(space, rng)));
  for (auto mode : {ObjectiveMode::AdversarialAccuracy, ObjectiveMode::MaxRegret}) {
    Evaluator eval(data, mode);
    const std::size_t target = mode == ObjectiveMode::AdversarialAccuracy ? cases / 2 : cases;
    while (out.cases < target) {
      const auto h = MixedTree::pure(trees[uniform_index(rng, trees.size())]);
      std::vector<MixedPerturbation> set{MixedPerturbation::pure(pool[uniform_index(rng, pool.size())])};
      double previous = eval.worst_case(h, set);
      for (int grow = 0; grow < 9; ++grow) {
        ++out.cases;
        if (bernoulli(rng, 0.3)) {
          const std::vector<double> w{uniform01(rng) + 0.1, uniform01(rng) + 0.1};
          set.push_back(MixedPerturbation::from_weights(
              {pool[uniform_index(rng, pool.size())], pool[uniform_index(rng, pool.size())]}, w));
        } else {
          set.push_back(MixedPerturbation::pure(pool[uniform_index(rng, pool.size())]));
        }
        const double now = eval.worst_case(h, set);
        if (now > previous) out.fail("fitness rose after the evaluation set grew");
        previous = now;
      }
    }
  }
  return out;
}

// Capacity is never exceeded and evicted entries are never fitter than
// the survivors at the time of eviction.
inline Outcome hof_capacity_and_eviction(std::size_t insertions = 10000, std::uint64_t seed = 5) {
  Outcome out{"hall-of-fame capacity and eviction invariants"};
  Rng rng = derive_rng(seed, {5});
  const TreeSpace space{{2, 2}, {}, {1, 3}, 4};
  for (std::size_t cap : {1u, 7u, 50u, 500u}) {
    HallOfFame<TreeGenotype> hof(HofPolicy::NashMixed, cap);
    std::size_t evicted_before = 0;
    const std::size_t rounds = insertions / 4;
    for (std::size_t k = 0; k < rounds; ++k) {
      ++out.cases;
      const auto before = hof.entries();
      const std::size_t dup_before = hof.duplicates();
      const double f = std::floor(uniform01(rng) * 20.0) / 20.0;  // plenty of ties
      hof.insert(MixedTree::pure(std::make_shared<const TreeGenotype>(random_tree(space, rng))), f, k / 3);
      if (hof.size() > cap) out.fail("size exceeds max_size");
      if (hof.evictions() > evicted_before) {
        // The evicted entry is the one present before (or the new one) that is missing now.
        double survivors_min = std::numeric_limits<double>::infinity();
        for (const auto& e : hof.entries()) survivors_min = std::min(survivors_min, e.fitness);
        bool found = false;
        auto check_gone = [&](double fitness, std::size_t seq) {
          const bool kept = std::any_of(hof.entries().begin(), hof.entries().end(),
                                        [&](const auto& e) { return e.sequence == seq; });
          if (!kept) {
            found = true;
            if (fitness > survivors_min) out.fail("evicted entry was fitter than a survivor");
          }
        };
        for (const auto& e : before) check_gone(e.fitness, e.sequence);
        if (hof.duplicates() == dup_before) check_gone(f, hof.insertions() - 1);
        if (!found) out.fail("eviction counter moved but nothing was removed");
        evicted_before = hof.evictions();
      }
    }
    if (hof.size() != std::min(cap, hof.insertions())) out.fail("archive did not fill to capacity");
  }
  return out;
}

// Selection keeps the top elites and returns exactly N indices; the
// best-found fitness of a run never decreases.
inline Outcome elite_monotonicity(std::size_t cases = 10000, std::uint64_t seed = 6) {
  Outcome out{"elite-monotone best fitness"};
  Rng rng = derive_rng(seed, {6});
  while (out.cases < cases) {
    ++out.cases;
    const std::size_t size = 2 + uniform_index(rng, 30);
    const std::size_t n = 1 + uniform_index(rng, size);
    const std::size_t e = uniform_index(rng, n + 1);
    std::vector<double> fit(size);
    for (auto& f : fit) f = std::floor(uniform01(rng) * 10.0) / 10.0;
    const auto picked = select_next_generation(fit, n, e, 0.5 + 0.5 * uniform01(rng), rng);
    if (picked.size() != n) out.fail("selection size differs from N");
    if (e > 0) {
      const double best = *std::max_element(fit.begin(), fit.end());
      const double kept = *std::max_element(picked.begin(), picked.end(), [&](std::size_t a, std::size_t b) {
        return fit[a] < fit[b];
      });
      if (fit[kept] != best) out.fail("best individual lost despite elitism");
      std::vector<double> sorted = fit;
      std::sort(sorted.rbegin(), sorted.rend());
      for (std::size_t k = 0; k < e; ++k)
        if (fit[picked[k]] != sorted[k]) out.fail("elite slot does not hold the k-th best fitness");
    }
  }
  // Whole runs: the best-found trace is non-decreasing and the population
  // best never exceeds it.
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Dataset data = fixtures::random_dataset(seed + s, 30, 3, 2, 0.1);
    CoevolutionConfig c;
    c.tree_population = 12;
    c.perturbation_population = 12;
    c.top_trees = 4;
    c.alternation_length = 3;
    c.max_generations = 12;
    c.depth_interval = {1, 4};
    c.depth_cap = 6;
    c.seed = s;
    c.mode = s % 2 ? ObjectiveMode::MaxRegret : ObjectiveMode::AdversarialAccuracy;
    Coevolution run(data, c);
    double last = -1.0;
    for (int g = 0; g < 12; ++g) {
      run.tree_generation();
      ++out.cases;
      if (run.best_found() < last) out.fail("best-found fitness decreased");
      const double pop_best = *std::max_element(run.tree_fitness().begin(), run.tree_fitness().end());
      if (pop_best > run.best_found() + 1e-15) out.fail("population best above best-found");
      last = run.best_found();
      if (run.trees().size() != c.tree_population) out.fail("tree population size changed");
      if (g % 3 == 2) {
        for (int k = 0; k < 3; ++k) run.perturbation_generation();
        if (run.perturbations().size() != c.perturbation_population) out.fail("perturbation population size changed");
      }
    }
  }
  return out;
}

inline Outcome gini_identities(std::size_t cases = 10000) {
  Outcome out{"gini identities"};
  for (std::size_t k = 1; out.cases < cases; ++k) {
    out.cases += 4;
    const std::vector<std::size_t> pure{k, 0};
    const std::vector<std::size_t> pure_rev{0, k};
    const std::vector<std::size_t> half{k, k};
    if (gini(pure) != 0.0 || gini(pure_rev) != 0.0) out.fail("(k,0) is not 0");
    if (std::abs(gini(half) - 0.5) > 1e-15) out.fail("(n,n) is not 0.5");
    const std::vector<std::size_t> mixed{k, 2 * k + 1, k % 7};
    const std::vector<std::size_t> perm{k % 7, k, 2 * k + 1};
    const std::vector<std::size_t> scaled{3 * k, 3 * (2 * k + 1), 3 * (k % 7)};
    if (std::abs(gini(mixed) - gini(perm)) > 1e-12) out.fail("gini not permutation invariant");
    if (std::abs(gini(mixed) - gini(scaled)) > 1e-12) out.fail("gini not scale invariant");
  }
  return out;
}

inline std::vector<Outcome> all_suites() {
  return {tree_operator_closure(),   perturbation_operator_membership(), expected_metric_linearity(),
          worst_case_monotonicity(), hof_capacity_and_eviction(),        elite_monotonicity(),
          gini_identities()};
}

}  // namespace properties
