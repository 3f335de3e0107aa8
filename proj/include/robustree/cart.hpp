#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "robustree/errors.hpp"
#include "robustree/perturbation.hpp"
#include "robustree/random.hpp"
#include "robustree/tree.hpp"

namespace robustree {

struct CartParams {
  int max_depth = 10;
  int min_samples_split = 2;
  double min_impurity_decrease = 0.0;

  void validate() const {
    if (max_depth < 1) throw ConfigError("cart max_depth must be >= 1");
    if (min_samples_split < 2) throw ConfigError("cart min_samples_split must be >= 2");
    if (!(min_impurity_decrease >= 0.0)) throw ConfigError("cart min_impurity_decrease must be >= 0");
  }

  // Identifies the oracle in per-perturbation caches.
  std::uint64_t fingerprint() const {
    std::uint64_t h = splitmix64(0xca27u);
    h = detail::hash_mix(h, static_cast<std::uint64_t>(max_depth));
    h = detail::hash_mix(h, static_cast<std::uint64_t>(min_samples_split));
    return detail::hash_mix(h, std::bit_cast<std::uint64_t>(min_impurity_decrease));
  }

  bool operator==(const CartParams&) const = default;
};

inline double gini(std::span<const std::size_t> counts) {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  if (n == 0) throw InternalFault("gini of an empty node");
  double sum = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    sum += p * p;
  }
  return 1.0 - sum;
}

namespace detail {

// Greedy Gini induction over presorted feature columns. Every node owns the
// same index range [lo, hi) in each column's order array; splitting
// stable-partitions that range in every column.
class CartGrower {
 public:
  CartGrower(std::span<const double> values, std::size_t d, std::span<const int> labels, std::size_t classes,
             const CartParams& params)
      : x_(values), y_(labels), d_(d), k_(classes), n_(labels.size()), params_(params) {
    if (n_ == 0) throw InternalFault("cart on empty data");
    if (values.size() != n_ * d_) throw InternalFault("cart data is not aligned with labels");
    order_.resize(d_ * n_);
    for (std::size_t j = 0; j < d_; ++j) {
      auto col = column(j);
      std::iota(col.begin(), col.end(), std::size_t{0});
      std::stable_sort(col.begin(), col.end(), [&](std::size_t a, std::size_t b) { return at(a, j) < at(b, j); });
    }
    goes_left_.resize(n_);
    scratch_.resize(n_);
    left_counts_.resize(k_);
    node_counts_.resize(k_);
  }

  // Returns the number of training instances the grown tree classifies correctly.
  std::size_t grow(TreeBuilder* builder) { return node(builder, std::nullopt, 0, n_, 0); }

 private:
  struct Split {
    std::size_t feature;
    std::size_t position;  // first index of the right part within the node range
    double threshold;
    double gain;
  };

  double at(std::size_t row, std::size_t j) const { return x_[row * d_ + j]; }
  std::span<std::size_t> column(std::size_t j) { return std::span<std::size_t>(order_).subspan(j * n_, n_); }

  std::size_t node(TreeBuilder* b, std::optional<std::size_t> parent, std::size_t lo, std::size_t hi, int depth) {
    std::fill(node_counts_.begin(), node_counts_.end(), 0);
    for (std::size_t k = lo; k < hi; ++k) ++node_counts_[static_cast<std::size_t>(y_[order_[k]])];
    std::size_t majority = 0;
    for (std::size_t c = 1; c < k_; ++c)
      if (node_counts_[c] > node_counts_[majority]) majority = c;
    const std::size_t correct = node_counts_[majority];
    const std::size_t size = hi - lo;

    std::optional<Split> split;
    if (correct < size && depth < params_.max_depth && size >= static_cast<std::size_t>(params_.min_samples_split)) {
      split = best_split(lo, hi);
    }
    if (!split) {
      if (b) {
        NodeRecord rec;
        rec.label = static_cast<int>(majority);
        b->add(rec, parent);
      }
      return correct;
    }

    std::optional<std::size_t> id;
    if (b) {
      NodeRecord rec;
      rec.op = SplitOp::Less;
      rec.attribute = split->feature;
      rec.value = split->threshold;
      id = b->add(rec, parent);
    }
    partition(lo, hi, *split);
    const std::size_t mid = lo + split->position;
    const std::size_t left_id = b ? b->size() : 0;
    const std::size_t left = node(b, id, lo, mid, depth + 1);
    const std::size_t right_id = b ? b->size() : 0;
    const std::size_t right = node(b, id, mid, hi, depth + 1);
    if (b) b->link(*id, left_id, right_id);
    return left + right;
  }

  std::optional<Split> best_split(std::size_t lo, std::size_t hi) {
    const std::size_t size = hi - lo;
    const double parent_impurity = gini(node_counts_);
    const double weight = static_cast<double>(size) / static_cast<double>(n_);
    std::optional<Split> best;
    for (std::size_t j = 0; j < d_; ++j) {
      const auto col = column(j);
      std::fill(left_counts_.begin(), left_counts_.end(), 0);
      for (std::size_t k = lo; k + 1 < hi; ++k) {
        ++left_counts_[static_cast<std::size_t>(y_[col[k]])];
        const double a = at(col[k], j);
        const double c = at(col[k + 1], j);
        if (!(a < c)) continue;
        const std::size_t nl = k + 1 - lo;
        const std::size_t nr = size - nl;
        double sl = 0.0;
        double sr = 0.0;
        for (std::size_t cls = 0; cls < k_; ++cls) {
          const double l = static_cast<double>(left_counts_[cls]);
          const double r = static_cast<double>(node_counts_[cls] - left_counts_[cls]);
          sl += l * l;
          sr += r * r;
        }
        const double gl = 1.0 - sl / (static_cast<double>(nl) * static_cast<double>(nl));
        const double gr = 1.0 - sr / (static_cast<double>(nr) * static_cast<double>(nr));
        const double child = (static_cast<double>(nl) * gl + static_cast<double>(nr) * gr) / static_cast<double>(size);
        const double gain = parent_impurity - child;
        if (!best || gain > best->gain + 1e-12) {
          double t = 0.5 * (a + c);
          if (!(t > a)) t = c;
          best = Split{j, nl, t, gain};
        }
      }
    }
    if (best && weight * best->gain + 1e-12 < params_.min_impurity_decrease) return std::nullopt;
    return best;
  }

  void partition(std::size_t lo, std::size_t hi, const Split& s) {
    const auto chosen = column(s.feature);
    for (std::size_t k = lo; k < hi; ++k) goes_left_[chosen[k]] = (k - lo) < s.position;
    for (std::size_t j = 0; j < d_; ++j) {
      if (j == s.feature) continue;
      auto col = column(j);
      std::size_t l = lo;
      std::size_t r = 0;
      for (std::size_t k = lo; k < hi; ++k) {
        if (goes_left_[col[k]]) {
          col[l++] = col[k];
        } else {
          scratch_[r++] = col[k];
        }
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(r),
                col.begin() + static_cast<std::ptrdiff_t>(l));
    }
  }

  std::span<const double> x_;
  std::span<const int> y_;
  std::size_t d_;
  std::size_t k_;
  std::size_t n_;
  CartParams params_;
  std::vector<std::size_t> order_;
  std::vector<char> goes_left_;
  std::vector<std::size_t> scratch_;
  std::vector<std::size_t> left_counts_;
  std::vector<std::size_t> node_counts_;
};

}  // namespace detail

// Fits a CART tree (splits `x[a] < v`) on a row-major instance matrix.
inline TreeGenotype build_cart(std::span<const double> values, std::size_t feature_count, std::span<const int> labels,
                               std::size_t class_count, const CartParams& params = {}) {
  params.validate();
  detail::CartGrower grower(values, feature_count, labels, class_count, params);
  detail::TreeBuilder builder;
  grower.grow(&builder);
  return TreeGenotype({feature_count, class_count}, builder.take());
}

inline TreeGenotype build_cart(const Dataset& data, const CartParams& params = {}) {
  return build_cart(data.values(), data.feature_count(), data.labels(), data.class_count(), params);
}

// Training accuracy of the tree build_cart would produce, without materializing it.
inline double cart_training_accuracy(std::span<const double> values, std::size_t feature_count,
                                     std::span<const int> labels, std::size_t class_count,
                                     const CartParams& params = {}) {
  detail::CartGrower grower(values, feature_count, labels, class_count, params);
  return static_cast<double>(grower.grow(nullptr)) / static_cast<double>(labels.size());
}

// Accuracy of CART fit on the perturbed instances with the true labels,
// cached in the perturbation after the first call.
inline double reference_accuracy(const PerturbationGenotype& p, std::span<const int> labels, std::size_t class_count,
                                 const CartParams& params = {}) {
  if (p.size() != labels.size()) throw InternalFault("perturbation is not aligned with labels");
  return p.reference_accuracy(params.fingerprint(), [&] {
    return cart_training_accuracy(p.values(), p.feature_count(), labels, class_count, params);
  });
}

}  // namespace robustree
