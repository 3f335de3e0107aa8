#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "robustree/cart.hpp"
#include "robustree/dataset.hpp"
#include "robustree/errors.hpp"
#include "robustree/mixed.hpp"
#include "robustree/parallel.hpp"
#include "robustree/perturbation.hpp"
#include "robustree/tree.hpp"

namespace robustree {

enum class ObjectiveMode { AdversarialAccuracy, MaxRegret };

inline std::string_view to_string(ObjectiveMode m) {
  return m == ObjectiveMode::AdversarialAccuracy ? "adversarial-accuracy" : "max-regret";
}

inline std::optional<ObjectiveMode> parse_objective_mode(std::string_view s) {
  if (s == "adversarial-accuracy") return ObjectiveMode::AdversarialAccuracy;
  if (s == "max-regret") return ObjectiveMode::MaxRegret;
  return std::nullopt;
}

// Tree-player fitness; higher is better in both modes. In regret mode the
// value is 1 - max regret.
struct Fitness {
  double value = 0.0;
  ObjectiveMode mode = ObjectiveMode::AdversarialAccuracy;

  double max_regret() const { return 1.0 - value; }
};

using MixedTree = MixedStrategy<TreeGenotype>;
using MixedPerturbation = MixedStrategy<PerturbationGenotype>;

// ---- pairwise metrics -------------------------------------------------------

inline double accuracy(const TreeGenotype& h, std::span<const double> values, std::span<const int> labels) {
  if (labels.empty()) throw InternalFault("accuracy of an empty instance list");
  return static_cast<double>(h.count_correct(values, labels)) / static_cast<double>(labels.size());
}

inline double accuracy(const MixedTree& h, std::span<const double> values, std::span<const int> labels) {
  double sum = 0.0;
  for (const auto& m : h.members()) sum += m.probability * accuracy(*m.genotype, values, labels);
  return sum;
}

inline double accuracy(const TreeGenotype& h, const Dataset& data) { return accuracy(h, data.values(), data.labels()); }

inline double accuracy(const TreeGenotype& h, const PerturbationGenotype& z, const Dataset& data) {
  detail::check_aligned(z, data);
  return accuracy(h, z.values(), data.labels());
}

// Reference accuracy minus the tree's accuracy on the perturbed data, before clamping.
inline double raw_regret(const TreeGenotype& h, const PerturbationGenotype& z, const Dataset& data,
                         const CartParams& reference = {}) {
  return reference_accuracy(z, data.labels(), data.class_count(), reference) - accuracy(h, z, data);
}

// Regret clamped at zero; `clamps` counts the clamped cases when given.
inline double regret(const TreeGenotype& h, const PerturbationGenotype& z, const Dataset& data,
                     const CartParams& reference = {}, std::size_t* clamps = nullptr) {
  const double r = raw_regret(h, z, data, reference);
  if (r < 0.0) {
    if (clamps) ++*clamps;
    return 0.0;
  }
  return r;
}

inline double regret(const MixedTree& h, const PerturbationGenotype& z, const Dataset& data,
                     const CartParams& reference = {}, std::size_t* clamps = nullptr) {
  double sum = 0.0;
  for (const auto& m : h.members()) sum += m.probability * regret(*m.genotype, z, data, reference, clamps);
  return sum;
}

// Tree-player payoff of one pure pair: accuracy, or 1 - clamped regret.
inline double pair_payoff(const TreeGenotype& h, const PerturbationGenotype& z, const Dataset& data,
                          ObjectiveMode mode, const CartParams& reference = {}, std::size_t* clamps = nullptr) {
  if (mode == ObjectiveMode::AdversarialAccuracy) return accuracy(h, z, data);
  return 1.0 - regret(h, z, data, reference, clamps);
}

inline double expected_payoff(const MixedTree& h, const MixedPerturbation& z, const Dataset& data,
                              ObjectiveMode mode, const CartParams& reference = {}) {
  double sum = 0.0;
  for (const auto& a : h.members())
    for (const auto& b : z.members())
      sum += a.probability * b.probability * pair_payoff(*a.genotype, *b.genotype, data, mode, reference);
  return sum;
}

// Worst case over a set whose elements are pure or mixed perturbations; a
// mixed element contributes its expected payoff.
inline Fitness worst_case_fitness(const MixedTree& h, std::span<const MixedPerturbation> set, const Dataset& data,
                                  ObjectiveMode mode, const CartParams& reference = {}) {
  if (set.empty()) throw InternalFault("worst-case fitness over an empty perturbation set");
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& z : set) worst = std::min(worst, expected_payoff(h, z, data, mode, reference));
  return {worst, mode};
}

inline Fitness worst_case_fitness(const TreeGenotype& h, std::span<const PerturbationGenotype> set,
                                  const Dataset& data, ObjectiveMode mode, const CartParams& reference = {}) {
  if (set.empty()) throw InternalFault("worst-case fitness over an empty perturbation set");
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& z : set) worst = std::min(worst, pair_payoff(h, z, data, mode, reference));
  return {worst, mode};
}

// ---- memoized evaluation ---------------------------------------------------

// Pairwise payoffs memoized by (tree uid, perturbation uid). Genotypes are
// immutable, so a uid pins down the pair's value for the lifetime of the
// evaluator. Safe to call from pool workers.
class Evaluator {
 public:
  Evaluator(const Dataset& data, ObjectiveMode mode, CartParams reference = {}, ThreadPool* pool = nullptr)
      : data_(data), mode_(mode), reference_(reference), pool_(pool) {
    reference_.validate();
  }

  const Dataset& data() const { return data_; }
  ObjectiveMode mode() const { return mode_; }
  const CartParams& reference() const { return reference_; }
  ThreadPool* pool() const { return pool_; }

  double payoff(const TreeGenotype& h, const PerturbationGenotype& z) {
    const Key key{h.uid(), z.uid()};
    auto& shard = shards_[shard_of(key)];
    {
      std::lock_guard lock(shard.mutex);
      if (auto it = shard.map.find(key); it != shard.map.end()) return it->second;
    }
    std::size_t clamped = 0;
    const double value = pair_payoff(h, z, data_, mode_, reference_, &clamped);
    std::lock_guard lock(shard.mutex);
    if (shard.map.emplace(key, value).second && clamped) clamps_.fetch_add(clamped, std::memory_order_relaxed);
    return value;
  }

  double expected(const MixedTree& h, const MixedPerturbation& z) {
    double sum = 0.0;
    for (const auto& a : h.members())
      for (const auto& b : z.members()) sum += a.probability * b.probability * payoff(*a.genotype, *b.genotype);
    return sum;
  }

  // Minimum expected payoff of `h` over `set`. Stops as soon as the running
  // minimum drops below `floor`; the returned value is then only an upper
  // bound that is already below `floor`.
  double worst_case(const MixedTree& h, std::span<const MixedPerturbation> set,
                    double floor = -std::numeric_limits<double>::infinity()) {
    if (set.empty()) throw InternalFault("worst-case fitness over an empty perturbation set");
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& z : set) {
      worst = std::min(worst, expected(h, z));
      if (worst < floor) break;
    }
    return worst;
  }

  // Mean adversary payoff of `z` over the target set (1 - tree payoff).
  double adversary_mean(const MixedPerturbation& z, std::span<const MixedTree> targets) {
    if (targets.empty()) throw InternalFault("perturbation evaluated against an empty target set");
    double sum = 0.0;
    for (const auto& h : targets) sum += 1.0 - expected(h, z);
    return sum / static_cast<double>(targets.size());
  }

  // Runs fn(i) for i in [0, n) on the pool when one is attached.
  void for_each(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (pool_) {
      pool_->for_each_index(n, fn);
    } else {
      for (std::size_t i = 0; i < n; ++i) fn(i);
    }
  }

  // Drops memo entries whose tree or perturbation is no longer alive.
  void retain(const std::unordered_set<std::uint64_t>& trees, const std::unordered_set<std::uint64_t>& perts) {
    for (auto& shard : shards_) {
      std::lock_guard lock(shard.mutex);
      std::erase_if(shard.map, [&](const auto& kv) {
        return !trees.contains(kv.first.tree) || !perts.contains(kv.first.pert);
      });
    }
  }

  std::size_t clamp_count() const { return clamps_.load(); }

  std::size_t memo_size() {
    std::size_t n = 0;
    for (auto& shard : shards_) {
      std::lock_guard lock(shard.mutex);
      n += shard.map.size();
    }
    return n;
  }

 private:
  struct Key {
    std::uint64_t tree;
    std::uint64_t pert;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const { return static_cast<std::size_t>(detail::hash_mix(k.tree, k.pert)); }
  };
  struct Shard {
    std::mutex mutex;
    std::unordered_map<Key, double, KeyHash> map;
  };
  static constexpr std::size_t kShards = 32;

  static std::size_t shard_of(const Key& k) { return KeyHash{}(k) % kShards; }

  const Dataset& data_;
  ObjectiveMode mode_;
  CartParams reference_;
  ThreadPool* pool_;
  std::array<Shard, kShards> shards_;
  std::atomic<std::size_t> clamps_{0};
};

// ---- sampled final metrics -------------------------------------------------

struct FinalMetrics {
  double clean_accuracy = 0.0;
  // Fraction of instances classified correctly at the clean point and at
  // every sampled perturbed copy.
  double adversarial_accuracy = 0.0;
  // Largest clamped regret over the identity and every sampled perturbation.
  double max_regret = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::size_t clamped_regrets = 0;
};

// Scores several trees on one seeded sample of perturbations, fitting the
// reference CART once per sample. The result does not depend on the pool
// size: every reduction is a min, max, logical and, or integer sum.
inline std::vector<FinalMetrics> estimate_final_metrics(std::span<const TreeGenotype> trees, const Dataset& data,
                                                        std::size_t n_samples, std::uint64_t seed,
                                                        const CartParams& reference = {}, ThreadPool* pool = nullptr) {
  if (n_samples == 0) throw ConfigError("sample size must be >= 1");
  for (const auto& t : trees) check_compatible(t, data);
  const std::size_t n = data.size();
  const std::size_t d = data.feature_count();
  const auto labels = data.labels();

  struct Partial {
    std::vector<std::vector<char>> robust;  // per tree, per instance
    std::vector<double> worst_regret;
    std::vector<std::size_t> clamped;
  };
  auto fresh = [&] {
    Partial p;
    p.robust.assign(trees.size(), std::vector<char>(n, 1));
    p.worst_regret.assign(trees.size(), 0.0);
    p.clamped.assign(trees.size(), 0);
    return p;
  };
  auto absorb = [&](Partial& part, std::span<const double> values) {
    const double ref = cart_training_accuracy(values, d, labels, data.class_count(), reference);
    for (std::size_t t = 0; t < trees.size(); ++t) {
      std::size_t hits = 0;
      auto& robust = part.robust[t];
      for (std::size_t i = 0; i < n; ++i) {
        const bool ok = trees[t].predict_unchecked(values.data() + i * d) == labels[i];
        hits += ok ? 1 : 0;
        if (!ok) robust[i] = 0;
      }
      const double r = ref - static_cast<double>(hits) / static_cast<double>(n);
      if (r < 0.0) ++part.clamped[t];
      part.worst_regret[t] = std::max(part.worst_regret[t], std::max(r, 0.0));
    }
  };

  constexpr std::size_t kChunks = 64;
  const std::size_t chunks = std::min(kChunks, n_samples);
  std::vector<Partial> partials(chunks);
  auto run_chunk = [&](std::size_t c) {
    Partial part = fresh();
    const std::size_t lo = n_samples * c / chunks;
    const std::size_t hi = n_samples * (c + 1) / chunks;
    for (std::size_t s = lo; s < hi; ++s) absorb(part, sample_perturbation(data, seed, s).values());
    partials[c] = std::move(part);
  };
  if (pool) {
    pool->for_each_index(chunks, run_chunk);
  } else {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  }

  Partial total = fresh();
  absorb(total, data.values());  // identity perturbation
  for (const auto& part : partials) {
    for (std::size_t t = 0; t < trees.size(); ++t) {
      for (std::size_t i = 0; i < n; ++i) total.robust[t][i] &= part.robust[t][i];
      total.worst_regret[t] = std::max(total.worst_regret[t], part.worst_regret[t]);
      total.clamped[t] += part.clamped[t];
    }
  }

  std::vector<FinalMetrics> out;
  for (std::size_t t = 0; t < trees.size(); ++t) {
    FinalMetrics m;
    m.clean_accuracy = accuracy(trees[t], data);
    std::size_t robust = 0;
    for (char r : total.robust[t]) robust += r ? 1 : 0;
    m.adversarial_accuracy = static_cast<double>(robust) / static_cast<double>(n);
    m.max_regret = total.worst_regret[t];
    m.n_samples = n_samples;
    m.seed = seed;
    m.clamped_regrets = total.clamped[t];
    out.push_back(m);
  }
  return out;
}

inline FinalMetrics estimate_final_metrics(const TreeGenotype& tree, const Dataset& data, std::size_t n_samples,
                                           std::uint64_t seed, const CartParams& reference = {},
                                           ThreadPool* pool = nullptr) {
  return estimate_final_metrics(std::span<const TreeGenotype>(&tree, 1), data, n_samples, seed, reference, pool)
      .front();
}

}  // namespace robustree
