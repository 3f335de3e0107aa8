#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "robustree/errors.hpp"
#include "robustree/tree.hpp"

namespace robustree {

inline constexpr double kProbabilityFloor = 1e-12;

// Probability-weighted finite set of distinct genotypes. Members are held by
// shared pointer so archives and evaluation sets can reference them cheaply.
template <typename T>
class MixedStrategy {
 public:
  struct Member {
    std::shared_ptr<const T> genotype;
    double probability;
  };

  MixedStrategy() = default;

  static MixedStrategy pure(std::shared_ptr<const T> g) {
    MixedStrategy m;
    m.members_.push_back({std::move(g), 1.0});
    return m;
  }

  // Drops weights below the floor, merges structurally equal genotypes and
  // renormalizes. Throws when nothing survives.
  static MixedStrategy from_weights(std::vector<std::shared_ptr<const T>> genotypes, std::span<const double> weights) {
    if (genotypes.size() != weights.size()) throw InternalFault("mixed strategy: weights do not match members");
    MixedStrategy m;
    for (std::size_t k = 0; k < genotypes.size(); ++k) {
      if (!(weights[k] >= kProbabilityFloor)) continue;
      bool merged = false;
      for (auto& existing : m.members_) {
        if (*existing.genotype == *genotypes[k]) {
          existing.probability += weights[k];
          merged = true;
          break;
        }
      }
      if (!merged) m.members_.push_back({genotypes[k], weights[k]});
    }
    double total = 0.0;
    for (const auto& mem : m.members_) total += mem.probability;
    if (m.members_.empty() || !(total > 0.0)) throw InternalFault("mixed strategy has no positive weight");
    for (auto& mem : m.members_) mem.probability /= total;
    return m;
  }

  const std::vector<Member>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool is_pure() const { return members_.size() == 1; }

  // Order-insensitive identity: member hashes combined with probabilities
  // quantized to a 1e-9 grid.
  std::uint64_t key() const {
    std::uint64_t acc = 0x3177u + members_.size();
    for (const auto& mem : members_) {
      const auto q = static_cast<std::uint64_t>(std::llround(mem.probability * 1e9));
      acc += splitmix64(detail::hash_mix(mem.genotype->structural_hash(), q));
    }
    return splitmix64(acc);
  }

  // Same members (by structure) with probabilities within 1e-9.
  bool equivalent(const MixedStrategy& other) const {
    if (members_.size() != other.members_.size()) return false;
    for (const auto& mem : members_) {
      bool found = false;
      for (const auto& o : other.members_) {
        if (*o.genotype == *mem.genotype && std::abs(o.probability - mem.probability) <= 1e-9) {
          found = true;
          break;
        }
      }
      if (!found) return false;
    }
    return true;
  }

 private:
  std::vector<Member> members_;
};

}  // namespace robustree
