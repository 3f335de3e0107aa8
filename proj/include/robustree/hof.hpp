#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "robustree/errors.hpp"
#include "robustree/mixed.hpp"

namespace robustree {

enum class HofPolicy { NashMixed, NashSingles, TopKMixed, TopK, BestOnly };

inline std::string_view to_string(HofPolicy p) {
  switch (p) {
    case HofPolicy::NashMixed: return "nash-mixed";
    case HofPolicy::NashSingles: return "nash-singles";
    case HofPolicy::TopKMixed: return "top-k-mixed";
    case HofPolicy::TopK: return "top-k";
    case HofPolicy::BestOnly: return "best";
  }
  return "?";
}

inline std::optional<HofPolicy> parse_hof_policy(std::string_view s) {
  for (auto p : {HofPolicy::NashMixed, HofPolicy::NashSingles, HofPolicy::TopKMixed, HofPolicy::TopK,
                 HofPolicy::BestOnly}) {
    if (s == to_string(p)) return p;
  }
  return std::nullopt;
}

// Archive of pure or mixed strategies with insertion-time fitness. A
// missing max_size means unbounded; max_size 0 keeps the archive empty.
template <typename T>
class HallOfFame {
 public:
  struct Entry {
    MixedStrategy<T> mixed;
    double fitness;
    std::size_t generation;
    std::size_t sequence;
  };

  explicit HallOfFame(HofPolicy policy = HofPolicy::NashMixed, std::optional<std::size_t> max_size = 500)
      : policy_(policy), max_size_(max_size) {}

  HofPolicy policy() const { return policy_; }
  std::optional<std::size_t> max_size() const { return max_size_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t insertions() const { return insertions_; }
  std::size_t evictions() const { return evictions_; }
  std::size_t duplicates() const { return duplicates_; }

  void set_max_size(std::optional<std::size_t> max_size) {
    max_size_ = max_size;
    evict_if_needed();
  }

  // Adds an entry unless an equivalent one is archived; returns whether the
  // entry is present after capacity enforcement.
  bool insert(MixedStrategy<T> mixed, double fitness, std::size_t generation) {
    if (max_size_ && *max_size_ == 0) return false;
    const std::uint64_t key = mixed.key();
    for (const auto& e : entries_) {
      if (e.mixed.key() == key && e.mixed.equivalent(mixed)) {
        ++duplicates_;
        return false;
      }
    }
    const std::size_t seq = next_sequence_++;
    entries_.push_back({std::move(mixed), fitness, generation, seq});
    ++insertions_;
    evict_if_needed();
    return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.sequence == seq; });
  }

  // Removes minimum-fitness entries, oldest first among ties, until the
  // archive fits.
  void evict_if_needed() {
    if (!max_size_) return;
    while (entries_.size() > *max_size_) {
      auto worst = std::min_element(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        if (a.fitness != b.fitness) return a.fitness < b.fitness;
        if (a.generation != b.generation) return a.generation < b.generation;
        return a.sequence < b.sequence;
      });
      entries_.erase(worst);
      ++evictions_;
    }
  }

  // The opposing population as pure strategies followed by the archive
  // entries, without repeats.
  std::vector<MixedStrategy<T>> evaluation_set(std::span<const std::shared_ptr<const T>> population) const {
    std::vector<MixedStrategy<T>> out;
    out.reserve(population.size() + entries_.size());
    for (const auto& g : population) {
      auto pure = MixedStrategy<T>::pure(g);
      if (!contains(out, pure)) out.push_back(std::move(pure));
    }
    for (const auto& e : entries_) {
      if (!contains(out, e.mixed)) out.push_back(e.mixed);
    }
    return out;
  }

  void collect_uids(std::unordered_set<std::uint64_t>& out) const {
    for (const auto& e : entries_)
      for (const auto& m : e.mixed.members()) out.insert(m.genotype->uid());
  }

 private:
  static bool contains(const std::vector<MixedStrategy<T>>& set, const MixedStrategy<T>& m) {
    const auto key = m.key();
    return std::any_of(set.begin(), set.end(), [&](const MixedStrategy<T>& s) {
      return s.key() == key && s.equivalent(m);
    });
  }

  HofPolicy policy_;
  std::optional<std::size_t> max_size_;
  std::vector<Entry> entries_;
  std::size_t insertions_ = 0;
  std::size_t evictions_ = 0;
  std::size_t duplicates_ = 0;
  std::size_t next_sequence_ = 0;
};

namespace detail {

// Indices of the k fittest distinct genotypes, fitness descending, ties in
// population order.
template <typename T>
std::vector<std::size_t> top_indices(std::span<const std::shared_ptr<const T>> pop, std::span<const double> fitness,
                                     std::size_t k) {
  std::vector<std::size_t> order(pop.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fitness[a] > fitness[b]; });
  std::vector<std::size_t> out;
  for (std::size_t i : order) {
    if (out.size() == k) break;
    const bool repeat = std::any_of(out.begin(), out.end(), [&](std::size_t j) { return *pop[j] == *pop[i]; });
    if (!repeat) out.push_back(i);
  }
  return out;
}

}  // namespace detail

// Adds one generation's contribution to an archive. `equilibrium` is this
// side's equilibrium strategy over the population (used by the Nash
// policies, and for K in the Top-K policies); `score` gives the
// insertion-time fitness of a candidate entry.
template <typename T>
void record_generation(HallOfFame<T>& hof, std::span<const std::shared_ptr<const T>> population,
                       std::span<const double> fitness, const MixedStrategy<T>& equilibrium, std::size_t generation,
                       const std::function<double(const MixedStrategy<T>&)>& score) {
  if (population.size() != fitness.size()) throw InternalFault("record_generation: fitness does not match population");
  if (hof.max_size() && *hof.max_size() == 0) return;
  auto add = [&](MixedStrategy<T> m) {
    const double f = score(m);
    hof.insert(std::move(m), f, generation);
  };
  const std::size_t k = equilibrium.size();
  switch (hof.policy()) {
    case HofPolicy::NashMixed:
      add(equilibrium);
      break;
    case HofPolicy::NashSingles:
      for (const auto& m : equilibrium.members()) add(MixedStrategy<T>::pure(m.genotype));
      break;
    case HofPolicy::TopKMixed: {
      const auto top = detail::top_indices(population, fitness, k);
      std::vector<std::shared_ptr<const T>> members;
      for (auto i : top) members.push_back(population[i]);
      const std::vector<double> weights(members.size(), 1.0 / static_cast<double>(members.size()));
      add(MixedStrategy<T>::from_weights(std::move(members), weights));
      break;
    }
    case HofPolicy::TopK:
      for (auto i : detail::top_indices(population, fitness, k)) add(MixedStrategy<T>::pure(population[i]));
      break;
    case HofPolicy::BestOnly:
      for (auto i : detail::top_indices(population, fitness, 1)) add(MixedStrategy<T>::pure(population[i]));
      break;
  }
}

}  // namespace robustree
