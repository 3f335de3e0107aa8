#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "robustree/dataset.hpp"
#include "robustree/errors.hpp"
#include "robustree/random.hpp"
#include "robustree/tree.hpp"

namespace robustree {

namespace detail {

inline std::uint64_t next_perturbation_uid() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

// Reference-accuracy slot shared by all copies of one genotype.
struct ReferenceCell {
  std::mutex mutex;
  std::optional<std::uint64_t> oracle;
  double value = 0.0;
  std::size_t computations = 0;
};

}  // namespace detail

// One perturbed copy of every training instance, aligned row for row with
// the dataset. Coordinates are immutable; copies share storage and the
// reference-accuracy cache.
class PerturbationGenotype {
 public:
  PerturbationGenotype(std::vector<double> values, std::size_t feature_count)
      : values_(std::make_shared<const std::vector<double>>(std::move(values))),
        cache_(std::make_shared<detail::ReferenceCell>()),
        feature_count_(feature_count) {
    if (feature_count_ == 0 || values_->size() % feature_count_ != 0) {
      throw InternalFault("perturbation matrix does not match feature count");
    }
    std::uint64_t h = splitmix64(values_->size());
    for (double v : *values_) h = detail::hash_mix(h, std::bit_cast<std::uint64_t>(v));
    hash_ = h;
  }

  std::size_t size() const { return values_->size() / feature_count_; }
  std::size_t feature_count() const { return feature_count_; }
  std::span<const double> values() const { return *values_; }
  std::span<const double> instance(std::size_t i) const {
    return std::span<const double>(*values_).subspan(i * feature_count_, feature_count_);
  }
  std::uint64_t uid() const { return uid_; }
  std::uint64_t structural_hash() const { return hash_; }

  std::optional<double> cached_reference_accuracy() const {
    std::lock_guard lock(cache_->mutex);
    if (!cache_->oracle) return std::nullopt;
    return cache_->value;
  }

  // Number of times the reference oracle actually ran for this genotype.
  std::size_t reference_computations() const {
    std::lock_guard lock(cache_->mutex);
    return cache_->computations;
  }

  // Compute-once access keyed by an oracle fingerprint: the first caller runs
  // `compute`, later callers with the same oracle read the stored value. A
  // different oracle bypasses the cache.
  template <typename Compute>
  double reference_accuracy(std::uint64_t oracle, Compute&& compute) const {
    std::lock_guard lock(cache_->mutex);
    if (cache_->oracle && *cache_->oracle == oracle) return cache_->value;
    const double value = compute();
    ++cache_->computations;
    if (!cache_->oracle) {
      cache_->oracle = oracle;
      cache_->value = value;
    }
    return value;
  }

  bool operator==(const PerturbationGenotype& other) const {
    return hash_ == other.hash_ && feature_count_ == other.feature_count_ && *values_ == *other.values_;
  }

 private:
  std::shared_ptr<const std::vector<double>> values_;
  std::shared_ptr<detail::ReferenceCell> cache_;
  std::size_t feature_count_;
  std::uint64_t uid_ = detail::next_perturbation_uid();
  std::uint64_t hash_ = 0;
};

// How a coordinate is redrawn inside its feasible interval: uniformly on the
// continuum (grid_points == 0) or uniformly over `grid_points` evenly spaced
// values including both ends.
struct PerturbationSpace {
  int grid_points = 0;
  bool operator==(const PerturbationSpace&) const = default;
};

namespace detail {

inline double draw_coordinate(const Dataset& data, std::size_t i, std::size_t j, const PerturbationSpace& space,
                              Rng& rng) {
  const auto [lo, hi] = data.feasible_interval(i, j);
  if (space.grid_points >= 2) {
    const auto k = uniform_index(rng, static_cast<std::size_t>(space.grid_points));
    if (k + 1 == static_cast<std::size_t>(space.grid_points)) return hi;
    return lo + (hi - lo) * (static_cast<double>(k) / static_cast<double>(space.grid_points - 1));
  }
  return uniform_real(rng, lo, hi);
}

inline void check_aligned(const PerturbationGenotype& p, const Dataset& data) {
  if (p.size() != data.size() || p.feature_count() != data.feature_count()) {
    throw InternalFault("perturbation is not aligned with the dataset");
  }
}

}  // namespace detail

inline PerturbationGenotype identity_perturbation(const Dataset& data) {
  return PerturbationGenotype(std::vector<double>(data.values().begin(), data.values().end()), data.feature_count());
}

inline PerturbationGenotype random_perturbation(const Dataset& data, Rng& rng, const PerturbationSpace& space = {}) {
  std::vector<double> values(data.values().size());
  const std::size_t d = data.feature_count();
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) values[i * d + j] = detail::draw_coordinate(data, i, j, space, rng);
  return PerturbationGenotype(std::move(values), d);
}

// Instance-wise uniform crossover; the second child is the complement of the first.
inline std::pair<PerturbationGenotype, PerturbationGenotype> crossover_perturbations(const PerturbationGenotype& a,
                                                                                    const PerturbationGenotype& b,
                                                                                    Rng& rng) {
  if (a.size() != b.size() || a.feature_count() != b.feature_count()) {
    throw InternalFault("crossover of misaligned perturbations");
  }
  const std::size_t d = a.feature_count();
  std::vector<double> first(a.values().size());
  std::vector<double> second(a.values().size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool swap = bernoulli(rng, 0.5);
    const auto x = swap ? b.instance(i) : a.instance(i);
    const auto y = swap ? a.instance(i) : b.instance(i);
    std::copy(x.begin(), x.end(), first.begin() + static_cast<std::ptrdiff_t>(i * d));
    std::copy(y.begin(), y.end(), second.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return {PerturbationGenotype(std::move(first), d), PerturbationGenotype(std::move(second), d)};
}

// Redraws each coordinate independently with probability `rate`.
inline PerturbationGenotype mutate_perturbation(const PerturbationGenotype& p, const Dataset& data, Rng& rng,
                                                const PerturbationSpace& space = {}, double rate = 0.5) {
  detail::check_aligned(p, data);
  std::vector<double> values(p.values().begin(), p.values().end());
  const std::size_t d = data.feature_count();
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (bernoulli(rng, rate)) values[i * d + j] = detail::draw_coordinate(data, i, j, space, rng);
  return PerturbationGenotype(std::move(values), d);
}

// The `index`-th member of the seeded evaluation sample. Each member has its
// own stream, so the sample can be generated lazily and in any order.
inline PerturbationGenotype sample_perturbation(const Dataset& data, std::uint64_t seed, std::size_t index) {
  Rng rng = derive_rng(seed, {0x5a3b1e5u, index});
  return random_perturbation(data, rng);
}

inline std::vector<PerturbationGenotype> sample_perturbation_set(const Dataset& data, std::size_t n,
                                                                 std::uint64_t seed) {
  if (n == 0) throw ConfigError("sample size must be >= 1");
  std::vector<PerturbationGenotype> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_perturbation(data, seed, i));
  return out;
}

// Box and epsilon-ball membership of every coordinate.
inline bool within_ball(const PerturbationGenotype& p, const Dataset& data, double tol = 1e-12) {
  if (p.size() != data.size() || p.feature_count() != data.feature_count()) return false;
  const auto xs = data.values();
  const auto zs = p.values();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (!(zs[k] >= 0.0 && zs[k] <= 1.0)) return false;
    if (std::abs(zs[k] - xs[k]) > data.epsilon() + tol) return false;
  }
  return true;
}

}  // namespace robustree
