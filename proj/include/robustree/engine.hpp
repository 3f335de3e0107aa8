#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "robustree/config.hpp"
#include "robustree/dataset.hpp"
#include "robustree/hof.hpp"
#include "robustree/metrics.hpp"
#include "robustree/nash.hpp"
#include "robustree/parallel.hpp"
#include "robustree/perturbation.hpp"
#include "robustree/random.hpp"
#include "robustree/tree.hpp"

namespace robustree {

using TreePtr = std::shared_ptr<const TreeGenotype>;
using PerturbationPtr = std::shared_ptr<const PerturbationGenotype>;

inline constexpr double kImprovementTolerance = 1e-12;

enum class StopReason { GenerationLimit, NoImprovement };

inline std::string_view to_string(StopReason r) {
  return r == StopReason::GenerationLimit ? "generation-limit" : "no-improvement";
}

enum class Phase { Trees, Perturbations };

struct ProgressEvent {
  Phase phase;
  std::size_t generation;       // all generations so far, both phases
  std::size_t tree_generation;  // tree generations so far
  double best_fitness;          // current tree population
  double best_found;
  double mean_fitness;  // of the phase's population
  std::size_t hof_trees;
  std::size_t hof_perturbations;
};

using ProgressSink = std::function<void(const ProgressEvent&)>;

struct TrainDiagnostics {
  std::size_t clamped_regrets = 0;
  NashDiagnostics nash;
  std::size_t hof_tree_size = 0;
  std::size_t hof_tree_insertions = 0;
  std::size_t hof_tree_evictions = 0;
  std::size_t hof_perturbation_size = 0;
  std::size_t hof_perturbation_insertions = 0;
  std::size_t hof_perturbation_evictions = 0;
  std::size_t subroutine_invocations = 0;
  std::size_t subroutine_successes = 0;
  std::size_t subroutine_discoveries = 0;  // perturbations added to the population
  std::size_t warm_start_trees = 0;
  std::vector<std::uint64_t> warm_start_hashes;
  std::size_t perturbation_generations = 0;
};

struct TrainResult {
  TreeGenotype best_tree;
  Fitness best_fitness;
  std::size_t generations_run = 0;  // tree generations
  StopReason stop_reason = StopReason::GenerationLimit;
  std::optional<FinalMetrics> final_metrics;
  TrainDiagnostics diagnostics;
  std::vector<double> best_found_history;  // after each tree generation
};

// ---- population operations -------------------------------------------------

// Indices of the next generation: `elites` best by fitness (ties in
// population order), then binary tournaments with replacement whose better
// entrant wins with probability `pressure`.
inline std::vector<std::size_t> select_next_generation(std::span<const double> fitness, std::size_t n,
                                                       std::size_t elites, double pressure, Rng& rng) {
  if (fitness.empty() || fitness.size() < elites || elites > n) {
    throw InternalFault("selection: population smaller than the elite count");
  }
  std::vector<std::size_t> order(fitness.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fitness[a] > fitness[b]; });
  std::vector<std::size_t> out(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(elites));
  while (out.size() < n) {
    const std::size_t a = uniform_index(rng, fitness.size());
    const std::size_t b = uniform_index(rng, fitness.size());
    const bool a_better = fitness[a] >= fitness[b];
    const std::size_t better = a_better ? a : b;
    const std::size_t worse = a_better ? b : a;
    out.push_back(bernoulli(rng, pressure) ? better : worse);
  }
  return out;
}

// Tree fitness against the perturbation population merged with the archive.
inline std::vector<double> evaluate_tree_population(std::span<const TreePtr> trees,
                                                    std::span<const PerturbationPtr> perts,
                                                    const HallOfFame<PerturbationGenotype>& hof, Evaluator& eval) {
  const auto set = hof.evaluation_set(perts);
  std::vector<double> out(trees.size());
  eval.for_each(trees.size(), [&](std::size_t i) { out[i] = eval.worst_case(MixedTree::pure(trees[i]), set); });
  return out;
}

// The N_top fittest distinct trees merged with the tree archive.
inline std::vector<MixedTree> target_set(std::span<const TreePtr> trees, std::span<const double> fitness,
                                         std::size_t top, const HallOfFame<TreeGenotype>& hof) {
  std::vector<TreePtr> best;
  for (auto i : detail::top_indices(trees, fitness, top)) best.push_back(trees[i]);
  return hof.evaluation_set(best);
}

inline double aggregate_adversary(Evaluator& eval, const MixedPerturbation& z, std::span<const MixedTree> targets,
                                  TargetAggregation aggregation) {
  if (aggregation == TargetAggregation::Mean) return eval.adversary_mean(z, targets);
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& h : targets) worst = std::min(worst, 1.0 - eval.expected(h, z));
  return worst;
}

// Perturbation fitness: adversary payoff aggregated over the target set.
inline std::vector<double> evaluate_perturbation_population(std::span<const PerturbationPtr> perts,
                                                            std::span<const MixedTree> targets,
                                                            TargetAggregation aggregation, Evaluator& eval) {
  std::vector<double> out(perts.size());
  eval.for_each(perts.size(), [&](std::size_t i) {
    out[i] = aggregate_adversary(eval, MixedPerturbation::pure(perts[i]), targets, aggregation);
  });
  return out;
}

inline std::vector<double> evaluate_perturbation_population(std::span<const PerturbationPtr> perts,
                                                            std::span<const TreePtr> trees,
                                                            std::span<const double> tree_fitness,
                                                            const HallOfFame<TreeGenotype>& hof, std::size_t top,
                                                            TargetAggregation aggregation, Evaluator& eval) {
  const auto targets = target_set(trees, tree_fitness, top, hof);
  return evaluate_perturbation_population(perts, targets, aggregation, eval);
}

namespace detail {

// Stream tags for derive_rng; every random decision has a stable address.
enum Stream : std::uint64_t {
  kInitTrees = 1,
  kInitPerts,
  kTreeCrossoverPick,
  kTreeCrossover,
  kTreeMutationPick,
  kTreeMutation,
  kTreeSelection,
  kPertCrossoverPick,
  kPertCrossover,
  kPertMutationPick,
  kPertMutation,
  kPertSelection,
  kSubroutine,
};

// Bernoulli(p) inclusion in index order, then a shuffle and consecutive pairing.
inline std::vector<std::pair<std::size_t, std::size_t>> crossover_pairs(std::size_t n, double p, Rng& rng) {
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < n; ++i)
    if (bernoulli(rng, p)) picked.push_back(i);
  shuffle(picked, rng);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t k = 0; k + 1 < picked.size(); k += 2) pairs.emplace_back(picked[k], picked[k + 1]);
  return pairs;
}

inline std::vector<std::size_t> mutation_picks(std::size_t n, double p, Rng& rng) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (bernoulli(rng, p)) out.push_back(i);
  return out;
}

template <typename T>
std::vector<std::shared_ptr<const T>> distinct(std::span<const std::shared_ptr<const T>> pop) {
  std::vector<std::shared_ptr<const T>> out;
  for (const auto& g : pop) {
    const bool seen = std::any_of(out.begin(), out.end(), [&](const auto& o) {
      return o->structural_hash() == g->structural_hash() && *o == *g;
    });
    if (!seen) out.push_back(g);
  }
  return out;
}

}  // namespace detail

// ---- main loop ---------------------------------------------------------------

// State of one coevolutionary run. The step methods are public so tests can
// drive and inspect a run generation by generation; evolve() runs the whole
// loop.
class Coevolution {
 public:
  Coevolution(const Dataset& data, CoevolutionConfig config, std::vector<TreeGenotype> warm_start = {},
              ThreadPool* pool = nullptr)
      : data_(data),
        config_(std::move(config)),
        space_(TreeSpace::for_dataset(data, config_.depth_interval, config_.depth_cap)),
        pert_space_{config_.perturbation_grid},
        eval_(data, config_.mode, config_.reference, pool),
        hof_trees_(config_.hof_policy, config_.hof_max_size),
        hof_perts_(config_.hof_policy, config_.hof_max_size) {
    config_.validate();
    space_.validate();
    if (warm_start.size() > config_.tree_population) {
      throw ConfigError("more warm-start trees (" + std::to_string(warm_start.size()) + ") than N_T (" +
                        std::to_string(config_.tree_population) + ")");
    }
    for (const auto& t : warm_start) check_compatible(t, data_);
    warm_start_ = std::move(warm_start);
    initialize();
  }

  void set_progress_sink(ProgressSink sink) { sink_ = std::move(sink); }

  const CoevolutionConfig& config() const { return config_; }
  const std::vector<TreePtr>& trees() const { return trees_; }
  const std::vector<double>& tree_fitness() const { return tree_fit_; }
  const std::vector<PerturbationPtr>& perturbations() const { return perts_; }
  const std::vector<double>& perturbation_fitness() const { return pert_fit_; }
  const HallOfFame<TreeGenotype>& hof_trees() const { return hof_trees_; }
  const HallOfFame<PerturbationGenotype>& hof_perturbations() const { return hof_perts_; }
  Evaluator& evaluator() { return eval_; }
  std::size_t tree_generations() const { return tree_generations_; }
  std::size_t generations() const { return generations_; }
  double best_found() const { return best_found_; }
  std::size_t stale_generations() const { return stale_; }
  const TrainDiagnostics& diagnostics() const { return diag_; }
  const std::optional<Equilibrium>& last_equilibrium() const { return last_eq_; }

  // One generation of the tree population followed by equilibrium and
  // archive updates. Also advances the no-improvement counter.
  void tree_generation() {
    const std::size_t g = generations_;
    const auto eval_set = hof_perts_.evaluation_set(perts_);

    std::vector<TreePtr> pool = trees_;
    {
      Rng pick = derive_rng(config_.seed, {detail::kTreeCrossoverPick, g});
      const auto pairs = detail::crossover_pairs(pool.size(), config_.crossover_probability, pick);
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        Rng rng = derive_rng(config_.seed, {detail::kTreeCrossover, g, k});
        auto [a, b] = crossover_trees(*pool[pairs[k].first], *pool[pairs[k].second], space_, rng);
        pool.push_back(std::make_shared<const TreeGenotype>(std::move(a)));
        pool.push_back(std::make_shared<const TreeGenotype>(std::move(b)));
      }
    }
    {
      Rng pick = derive_rng(config_.seed, {detail::kTreeMutationPick, g});
      const auto picks = detail::mutation_picks(pool.size(), config_.mutation_probability, pick);
      std::vector<std::vector<TreeGenotype>> candidates(picks.size());
      for (std::size_t k = 0; k < picks.size(); ++k) {
        Rng rng = derive_rng(config_.seed, {detail::kTreeMutation, g, k});
        candidates[k] = mutate_candidates(*pool[picks[k]], space_, rng, config_.mutation_trials);
      }
      std::vector<std::size_t> winner(picks.size());
      eval_.for_each(picks.size(), [&](std::size_t k) { winner[k] = fittest_candidate(candidates[k], eval_set); });
      for (std::size_t k = 0; k < picks.size(); ++k) {
        pool.push_back(std::make_shared<const TreeGenotype>(std::move(candidates[k][winner[k]])));
      }
    }

    std::vector<double> fit(pool.size());
    eval_.for_each(pool.size(), [&](std::size_t i) { fit[i] = eval_.worst_case(MixedTree::pure(pool[i]), eval_set); });

    Rng sel = derive_rng(config_.seed, {detail::kTreeSelection, g});
    const auto keep =
        select_next_generation(fit, config_.tree_population, config_.elite_count, config_.selection_pressure, sel);
    std::vector<TreePtr> next;
    std::vector<double> next_fit;
    for (auto i : keep) {
      next.push_back(pool[i]);
      next_fit.push_back(fit[i]);
    }
    trees_ = std::move(next);
    tree_fit_ = std::move(next_fit);

    ++tree_generations_;
    const double best = *std::max_element(tree_fit_.begin(), tree_fit_.end());
    if (best > best_found_ + kImprovementTolerance) {
      best_found_ = best;
      stale_ = 0;
    } else {
      ++stale_;
    }
    best_history_.push_back(best_found_);

    record_equilibrium(eval_set);
    finish_generation(Phase::Trees, tree_fit_);
  }

  void perturbation_generation() {
    const std::size_t g = generations_;
    const auto targets = target_set(trees_, tree_fit_, config_.top_trees, hof_trees_);
    auto [next, next_fit] = evolve_perturbations(perts_, targets, config_.target_aggregation,
                                                 {detail::kPertCrossoverPick, g});
    perts_ = std::move(next);
    pert_fit_ = std::move(next_fit);
    ++diag_.perturbation_generations;
    record_equilibrium(hof_perts_.evaluation_set(perts_));
    finish_generation(Phase::Perturbations, pert_fit_);
  }

  // Focused search for a perturbation that lowers the fitness of every
  // tree tied at the current best. On success the discoveries replace the
  // weakest population members and the no-improvement counter resets.
  bool run_subroutine() {
    const std::size_t invocation = diag_.subroutine_invocations++;
    const double best = *std::max_element(tree_fit_.begin(), tree_fit_.end());
    std::vector<TreePtr> tied;
    std::vector<double> tied_fit;
    for (std::size_t i = 0; i < trees_.size(); ++i) {
      if (tree_fit_[i] < best - kImprovementTolerance) continue;
      const bool seen = std::any_of(tied.begin(), tied.end(), [&](const TreePtr& t) { return *t == *trees_[i]; });
      if (seen) continue;
      tied.push_back(trees_[i]);
      tied_fit.push_back(tree_fit_[i]);
    }

    std::vector<PerturbationPtr> found;
    for (std::size_t t = 0; t < tied.size(); ++t) {
      auto hit = search_against(tied[t], tied_fit[t], invocation, t);
      if (!hit) return false;
      const bool seen = std::any_of(found.begin(), found.end(), [&](const PerturbationPtr& p) { return *p == **hit; });
      if (!seen) found.push_back(*hit);
    }

    // Replace the weakest members, keeping |P_P| fixed.
    std::vector<std::size_t> order(perts_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pert_fit_[a] < pert_fit_[b]; });
    const auto targets = target_set(trees_, tree_fit_, config_.top_trees, hof_trees_);
    const std::size_t replace = std::min(found.size(), perts_.size());
    for (std::size_t k = 0; k < replace; ++k) {
      const std::size_t slot = order[k];
      perts_[slot] = found[k];
      pert_fit_[slot] =
          aggregate_adversary(eval_, MixedPerturbation::pure(found[k]), targets, config_.target_aggregation);
    }
    ++diag_.subroutine_successes;
    diag_.subroutine_discoveries += replace;
    stale_ = 0;
    return true;
  }

  TrainResult run() {
    StopReason reason = StopReason::GenerationLimit;
    for (;;) {
      bool stop = false;
      for (std::size_t k = 0; k < config_.alternation_length; ++k) {
        tree_generation();
        if (tree_generations_ >= config_.max_generations) {
          reason = StopReason::GenerationLimit;
          stop = true;
          break;
        }
        if (stale_ >= config_.alternation_length && !run_subroutine()) {
          reason = StopReason::NoImprovement;
          stop = true;
          break;
        }
      }
      if (stop) break;
      for (std::size_t k = 0; k < config_.alternation_length; ++k) perturbation_generation();
    }
    return result(reason);
  }

  TrainResult result(StopReason reason) const {
    const auto best = static_cast<std::size_t>(std::max_element(tree_fit_.begin(), tree_fit_.end()) - tree_fit_.begin());
    TrainResult r{*trees_[best], {tree_fit_[best], config_.mode}, tree_generations_, reason, std::nullopt, diag_,
                  best_history_};
    auto& d = r.diagnostics;
    d.clamped_regrets = eval_.clamp_count();
    d.hof_tree_size = hof_trees_.size();
    d.hof_tree_insertions = hof_trees_.insertions();
    d.hof_tree_evictions = hof_trees_.evictions();
    d.hof_perturbation_size = hof_perts_.size();
    d.hof_perturbation_insertions = hof_perts_.insertions();
    d.hof_perturbation_evictions = hof_perts_.evictions();
    return r;
  }

 private:
  void initialize() {
    const std::size_t warm = warm_start_.size();
    for (std::size_t i = 0; i < config_.tree_population; ++i) {
      Rng rng = derive_rng(config_.seed, {detail::kInitTrees, i});
      if (i < warm) {
        auto t = truncate_to_cap(warm_start_[i], space_, rng);
        diag_.warm_start_hashes.push_back(t.structural_hash());
        trees_.push_back(std::make_shared<const TreeGenotype>(std::move(t)));
      } else {
        trees_.push_back(std::make_shared<const TreeGenotype>(random_tree(space_, rng)));
      }
    }
    diag_.warm_start_trees = warm;
    for (std::size_t i = 0; i < config_.perturbation_population; ++i) {
      Rng rng = derive_rng(config_.seed, {detail::kInitPerts, i});
      perts_.push_back(std::make_shared<const PerturbationGenotype>(random_perturbation(data_, rng, pert_space_)));
    }
    tree_fit_ = evaluate_tree_population(trees_, perts_, hof_perts_, eval_);
    pert_fit_ = evaluate_perturbation_population(perts_, trees_, tree_fit_, hof_trees_, config_.top_trees,
                                                 config_.target_aggregation, eval_);
    best_found_ = *std::max_element(tree_fit_.begin(), tree_fit_.end());
  }

  // Index of the first candidate with the highest worst-case payoff.
  std::size_t fittest_candidate(const std::vector<TreeGenotype>& candidates,
                                std::span<const MixedPerturbation> eval_set) {
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      // Candidates are transient; aliasing them avoids a copy.
      const TreePtr view(std::shared_ptr<void>{}, &candidates[c]);
      const double v = eval_.worst_case(MixedTree::pure(view), eval_set, best_value);
      if (v > best_value) {
        best_value = v;
        best = c;
      }
    }
    return best;
  }

  // One generation of the perturbation operators against fixed targets.
  // `tag` = {stream base, generation[, extra...]} keeps the subroutine's
  // streams apart from the main loop's.
  std::pair<std::vector<PerturbationPtr>, std::vector<double>> evolve_perturbations(
      const std::vector<PerturbationPtr>& population, std::span<const MixedTree> targets,
      TargetAggregation aggregation, std::initializer_list<std::uint64_t> tag) {
    std::vector<std::uint64_t> base(tag);
    auto stream = [&](std::uint64_t purpose, std::uint64_t index) {
      std::uint64_t h = config_.seed;
      for (auto t : base) h = splitmix64(h ^ splitmix64(t));
      return derive_rng(h, {purpose, index});
    };
    std::vector<PerturbationPtr> pool = population;
    {
      Rng pick = stream(detail::kPertCrossoverPick, 0);
      const auto pairs = detail::crossover_pairs(pool.size(), config_.crossover_probability, pick);
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        Rng rng = stream(detail::kPertCrossover, k);
        auto [a, b] = crossover_perturbations(*pool[pairs[k].first], *pool[pairs[k].second], rng);
        pool.push_back(std::make_shared<const PerturbationGenotype>(std::move(a)));
        pool.push_back(std::make_shared<const PerturbationGenotype>(std::move(b)));
      }
    }
    {
      Rng pick = stream(detail::kPertMutationPick, 0);
      const auto picks = detail::mutation_picks(pool.size(), config_.mutation_probability, pick);
      for (std::size_t k = 0; k < picks.size(); ++k) {
        Rng rng = stream(detail::kPertMutation, k);
        pool.push_back(
            std::make_shared<const PerturbationGenotype>(mutate_perturbation(*pool[picks[k]], data_, rng, pert_space_)));
      }
    }
    auto fit = evaluate_perturbation_population(pool, targets, aggregation, eval_);
    Rng sel = stream(detail::kPertSelection, 0);
    const auto keep = select_next_generation(fit, population.size(), std::min(config_.elite_count, population.size()),
                                             config_.selection_pressure, sel);
    std::vector<PerturbationPtr> next;
    std::vector<double> next_fit;
    for (auto i : keep) {
      next.push_back(pool[i]);
      next_fit.push_back(fit[i]);
    }
    return {std::move(next), std::move(next_fit)};
  }

  // Evolves a copy of the perturbation population against `tree` alone for
  // up to l_c generations; returns the first perturbation that pushes the
  // tree's payoff below `fitness`.
  std::optional<PerturbationPtr> search_against(const TreePtr& tree, double fitness, std::size_t invocation,
                                                std::size_t index) {
    const std::vector<MixedTree> targets{MixedTree::pure(tree)};
    std::vector<PerturbationPtr> population = perts_;
    auto check = [&](const std::vector<PerturbationPtr>& pop) -> std::optional<PerturbationPtr> {
      std::optional<PerturbationPtr> hit;
      double lowest = fitness - kImprovementTolerance;
      for (const auto& z : pop) {
        const double v = eval_.payoff(*tree, *z);
        if (v < lowest) {
          lowest = v;
          hit = z;
        }
      }
      return hit;
    };
    if (auto hit = check(population)) return hit;
    for (std::size_t g = 0; g < config_.alternation_length; ++g) {
      population = evolve_perturbations(population, targets, TargetAggregation::Mean,
                                        {detail::kSubroutine, invocation, index, g})
                       .first;
      if (auto hit = check(population)) return hit;
    }
    return std::nullopt;
  }

  void record_equilibrium(const std::vector<MixedPerturbation>& pert_eval_set) {
    const auto rows = detail::distinct<TreeGenotype>(trees_);
    const auto cols = detail::distinct<PerturbationGenotype>(perts_);
    const auto matrix = build_payoff_matrix(rows, cols, eval_);
    Equilibrium eq = lemke_howson(matrix, 0, &diag_.nash);
    last_eq_ = eq;
    const auto mixed_tree = MixedTree::from_weights(rows, eq.row);
    const auto mixed_pert = MixedPerturbation::from_weights(cols, eq.col);

    const auto targets = target_set(trees_, tree_fit_, config_.top_trees, hof_trees_);
    record_generation<TreeGenotype>(hof_trees_, trees_, tree_fit_, mixed_tree, generations_,
                                    [&](const MixedTree& m) { return eval_.worst_case(m, pert_eval_set); });
    record_generation<PerturbationGenotype>(
        hof_perts_, perts_, pert_fit_, mixed_pert, generations_, [&](const MixedPerturbation& m) {
          return aggregate_adversary(eval_, m, targets, config_.target_aggregation);
        });
  }

  void finish_generation(Phase phase, const std::vector<double>& fit) {
    ++generations_;
    std::unordered_set<std::uint64_t> tree_ids;
    std::unordered_set<std::uint64_t> pert_ids;
    for (const auto& t : trees_) tree_ids.insert(t->uid());
    for (const auto& p : perts_) pert_ids.insert(p->uid());
    hof_trees_.collect_uids(tree_ids);
    hof_perts_.collect_uids(pert_ids);
    eval_.retain(tree_ids, pert_ids);
    if (sink_) {
      const double mean = std::accumulate(fit.begin(), fit.end(), 0.0) / static_cast<double>(fit.size());
      sink_({phase, generations_, tree_generations_, *std::max_element(tree_fit_.begin(), tree_fit_.end()),
             best_found_, mean, hof_trees_.size(), hof_perts_.size()});
    }
  }

  const Dataset& data_;
  CoevolutionConfig config_;
  TreeSpace space_;
  PerturbationSpace pert_space_;
  Evaluator eval_;
  HallOfFame<TreeGenotype> hof_trees_;
  HallOfFame<PerturbationGenotype> hof_perts_;
  std::vector<TreeGenotype> warm_start_;
  std::vector<TreePtr> trees_;
  std::vector<double> tree_fit_;
  std::vector<PerturbationPtr> perts_;
  std::vector<double> pert_fit_;
  std::size_t generations_ = 0;
  std::size_t tree_generations_ = 0;
  std::size_t stale_ = 0;
  double best_found_ = -std::numeric_limits<double>::infinity();
  std::vector<double> best_history_;
  std::optional<Equilibrium> last_eq_;
  TrainDiagnostics diag_;
  ProgressSink sink_;
};

struct EstimateSettings {
  std::size_t n_samples = 0;  // 0 skips the estimate
  std::uint64_t seed = 0;
};

inline TrainResult evolve(const Dataset& data, const CoevolutionConfig& config,
                          std::vector<TreeGenotype> warm_start = {}, ThreadPool* pool = nullptr,
                          EstimateSettings estimate = {}, ProgressSink sink = {}) {
  Coevolution run(data, config, std::move(warm_start), pool);
  if (sink) run.set_progress_sink(std::move(sink));
  TrainResult result = run.run();
  if (estimate.n_samples > 0) {
    result.final_metrics =
        estimate_final_metrics(result.best_tree, data, estimate.n_samples, estimate.seed, config.reference, pool);
  }
  return result;
}

}  // namespace robustree
