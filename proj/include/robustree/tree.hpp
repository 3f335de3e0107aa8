#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "robustree/dataset.hpp"
#include "robustree/errors.hpp"
#include "robustree/random.hpp"

namespace robustree {

enum class SplitOp : std::uint8_t { Less, Greater, Equal };

inline constexpr double kEqualTolerance = 1e-9;
inline constexpr int kDefaultDepthCap = 25;

inline bool split_test(SplitOp op, double x, double v) {
  switch (op) {
    case SplitOp::Less: return x < v;
    case SplitOp::Greater: return x > v;
    case SplitOp::Equal: return std::abs(x - v) <= kEqualTolerance;
  }
  return false;
}

inline std::string_view to_string(SplitOp op) {
  switch (op) {
    case SplitOp::Less: return "<";
    case SplitOp::Greater: return ">";
    case SplitOp::Equal: return "=";
  }
  return "?";
}

inline std::optional<SplitOp> parse_split_op(std::string_view s) {
  if (s == "<") return SplitOp::Less;
  if (s == ">") return SplitOp::Greater;
  if (s == "=") return SplitOp::Equal;
  return std::nullopt;
}

struct TreeMeta {
  std::size_t feature_count = 1;
  std::size_t class_count = 2;
  bool operator==(const TreeMeta&) const = default;
};

// One entry of the node list. `label` is meaningful at leaves only; `op`,
// `value` and `attribute` at internal nodes only. A true test goes left.
struct NodeRecord {
  std::size_t id = 0;
  int label = 0;
  std::optional<std::size_t> parent;
  std::optional<std::size_t> left;
  std::optional<std::size_t> right;
  SplitOp op = SplitOp::Less;
  double value = 0.0;
  std::size_t attribute = 0;

  bool is_leaf() const { return !left && !right; }
  bool operator==(const NodeRecord&) const = default;
};

namespace detail {

inline std::uint64_t next_tree_uid() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

struct FlatNode {
  double value;
  std::uint32_t attribute;
  std::int32_t left;  // -1 at leaves
  std::int32_t right;
  int label;
  SplitOp op;
};

}  // namespace detail

// Decision tree encoded as a list of nodes with node 0 as root. Immutable;
// construction validates every structural invariant and throws
// TreeFormatError naming the offending node.
class TreeGenotype {
 public:
  TreeGenotype(TreeMeta meta, std::vector<NodeRecord> nodes) : meta_(meta), nodes_(std::move(nodes)) {
    depth_ = validate();
    flat_.reserve(nodes_.size());
    std::uint64_t h = hash_mix(0x7ee5u, meta_.feature_count * 1315423911u + meta_.class_count);
    for (const auto& n : nodes_) {
      flat_.push_back({n.value, static_cast<std::uint32_t>(n.attribute),
                       n.left ? static_cast<std::int32_t>(*n.left) : -1,
                       n.right ? static_cast<std::int32_t>(*n.right) : -1, n.label, n.op});
      h = hash_mix(h, static_cast<std::uint64_t>(n.label));
      h = hash_mix(h, n.left ? *n.left : ~0ULL);
      h = hash_mix(h, n.right ? *n.right : ~0ULL);
      h = hash_mix(h, static_cast<std::uint64_t>(n.op));
      h = hash_mix(h, std::bit_cast<std::uint64_t>(n.value));
      h = hash_mix(h, n.attribute);
    }
    hash_ = h;
  }

  static TreeGenotype leaf(TreeMeta meta, int label) {
    NodeRecord root;
    root.label = label;
    return TreeGenotype(meta, {root});
  }

  const TreeMeta& meta() const { return meta_; }
  const std::vector<NodeRecord>& nodes() const { return nodes_; }
  const NodeRecord& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  // Edges on the longest root-to-leaf path; a single leaf has depth 0.
  int depth() const { return depth_; }
  std::uint64_t uid() const { return uid_; }
  std::uint64_t structural_hash() const { return hash_; }

  int predict(std::span<const double> x) const {
    if (x.size() != meta_.feature_count) {
      throw InternalFault("predict: instance has " + std::to_string(x.size()) + " features, tree expects " +
                          std::to_string(meta_.feature_count));
    }
    return predict_unchecked(x.data());
  }

  int predict_unchecked(const double* x) const {
    const detail::FlatNode* n = flat_.data();
    while (n->left >= 0) {
      n = flat_.data() + (split_test(n->op, x[n->attribute], n->value) ? n->left : n->right);
    }
    return n->label;
  }

  // Correct predictions over a row-major instance matrix.
  std::size_t count_correct(std::span<const double> values, std::span<const int> labels) const {
    const std::size_t d = meta_.feature_count;
    if (values.size() != labels.size() * d) throw InternalFault("count_correct: matrix/label size mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      hits += predict_unchecked(values.data() + i * d) == labels[i] ? 1 : 0;
    }
    return hits;
  }

  bool operator==(const TreeGenotype& other) const {
    return hash_ == other.hash_ && meta_ == other.meta_ && nodes_ == other.nodes_;
  }

 private:
  static std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) { return detail::hash_mix(h, v); }

  int validate() const {
    auto where = [](std::size_t k, const char* field) {
      return "nodes[" + std::to_string(k) + "]." + field;
    };
    if (meta_.feature_count == 0) throw TreeFormatError("feature_count", "must be positive");
    if (meta_.class_count < 2) throw TreeFormatError("class_count", "must be at least 2");
    if (nodes_.empty()) throw TreeFormatError("nodes", "tree has no nodes");
    const std::size_t n = nodes_.size();
    for (std::size_t k = 0; k < n; ++k) {
      const auto& node = nodes_[k];
      if (node.id != k) throw TreeFormatError(where(k, "t"), "node id must equal its position " + std::to_string(k));
      if (node.left.has_value() != node.right.has_value()) {
        throw TreeFormatError(where(k, node.left ? "R" : "L"), "internal nodes need both children");
      }
      if (k == 0 && node.parent) throw TreeFormatError(where(k, "P"), "root must not have a parent");
      if (k != 0 && !node.parent) throw TreeFormatError(where(k, "P"), "non-root node without parent");
      if (node.parent) {
        const std::size_t p = *node.parent;
        if (p >= n) throw TreeFormatError(where(k, "P"), "references missing node " + std::to_string(p));
        if (nodes_[p].left != k && nodes_[p].right != k) {
          throw TreeFormatError(where(k, "P"), "parent " + std::to_string(p) + " does not link back");
        }
      }
      for (auto [child, field] : {std::pair{node.left, "L"}, std::pair{node.right, "R"}}) {
        if (!child) continue;
        if (*child >= n) throw TreeFormatError(where(k, field), "references missing node " + std::to_string(*child));
        if (*child == 0 || *child == k) throw TreeFormatError(where(k, field), "invalid child link");
        if (nodes_[*child].parent != k) {
          throw TreeFormatError(where(k, field), "child " + std::to_string(*child) + " names another parent");
        }
      }
      if (node.left && node.left == node.right) throw TreeFormatError(where(k, "R"), "both children are the same node");
      if (node.label < 0 || static_cast<std::size_t>(node.label) >= meta_.class_count) {
        throw TreeFormatError(where(k, "c"), "class label out of range");
      }
      if (node.attribute >= meta_.feature_count) throw TreeFormatError(where(k, "a"), "attribute out of range");
      if (!(node.value >= 0.0 && node.value <= 1.0)) throw TreeFormatError(where(k, "v"), "split value outside [0,1]");
    }
    // Reachability and depth; parent links are consistent, so a repeated
    // visit can only come from a cycle.
    std::vector<int> depth_of(n, -1);
    std::vector<std::size_t> stack{0};
    depth_of[0] = 0;
    std::size_t visited = 0;
    int depth = 0;
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      ++visited;
      depth = std::max(depth, depth_of[k]);
      for (auto child : {nodes_[k].left, nodes_[k].right}) {
        if (!child) continue;
        if (depth_of[*child] >= 0) throw TreeFormatError(where(*child, "P"), "node reached twice");
        depth_of[*child] = depth_of[k] + 1;
        stack.push_back(*child);
      }
    }
    if (visited != n) {
      for (std::size_t k = 0; k < n; ++k) {
        if (depth_of[k] < 0) throw TreeFormatError(where(k, "t"), "node is not reachable from the root");
      }
    }
    return depth;
  }

  TreeMeta meta_;
  std::vector<NodeRecord> nodes_;
  std::vector<detail::FlatNode> flat_;
  int depth_ = 0;
  std::uint64_t uid_ = detail::next_tree_uid();
  std::uint64_t hash_ = 0;
};

struct DepthRange {
  int min = 2;
  int max = 10;
  bool operator==(const DepthRange&) const = default;
};

// Everything the random operators need to know about the search space.
struct TreeSpace {
  TreeMeta meta;
  std::vector<std::size_t> split_features;  // empty: all features
  DepthRange init_depth{2, 10};
  int depth_cap = kDefaultDepthCap;

  static TreeSpace for_dataset(const Dataset& data, DepthRange init_depth = {2, 10},
                               int depth_cap = kDefaultDepthCap) {
    TreeSpace space{{data.feature_count(), data.class_count()}, data.split_features(), init_depth, depth_cap};
    return space;
  }

  void validate() const {
    if (depth_cap < 1) throw ConfigError("depth cap must be >= 1");
    if (init_depth.min < 1 || init_depth.max < init_depth.min || init_depth.max > depth_cap) {
      throw ConfigError("depth interval must satisfy 1 <= min <= max <= depth cap");
    }
  }
};

namespace detail {

class TreeBuilder {
 public:
  std::size_t add(NodeRecord rec, std::optional<std::size_t> parent) {
    rec.id = nodes_.size();
    rec.parent = parent;
    rec.left.reset();
    rec.right.reset();
    nodes_.push_back(rec);
    return rec.id;
  }
  void link(std::size_t parent, std::size_t left, std::size_t right) {
    nodes_[parent].left = left;
    nodes_[parent].right = right;
  }
  std::size_t size() const { return nodes_.size(); }
  std::vector<NodeRecord> take() { return std::move(nodes_); }

 private:
  std::vector<NodeRecord> nodes_;
};

inline int random_label(const TreeSpace& space, Rng& rng) {
  return static_cast<int>(uniform_index(rng, space.meta.class_count));
}

inline NodeRecord random_split(const TreeSpace& space, Rng& rng) {
  NodeRecord rec;
  rec.attribute = space.split_features.empty()
                      ? uniform_index(rng, space.meta.feature_count)
                      : space.split_features[uniform_index(rng, space.split_features.size())];
  rec.value = uniform01(rng);
  rec.op = static_cast<SplitOp>(uniform_index(rng, 3));
  return rec;
}

inline NodeRecord random_leaf(const TreeSpace& space, Rng& rng) {
  NodeRecord rec;
  rec.label = random_label(space, rng);
  return rec;
}

// Full binary subtree whose leaves sit at depth `target` (absolute depth).
inline std::size_t grow(TreeBuilder& b, std::optional<std::size_t> parent, int depth, int target,
                        const TreeSpace& space, Rng& rng) {
  if (depth >= target) return b.add(random_leaf(space, rng), parent);
  const std::size_t id = b.add(random_split(space, rng), parent);
  const std::size_t l = grow(b, id, depth + 1, target, space, rng);
  const std::size_t r = grow(b, id, depth + 1, target, space, rng);
  b.link(id, l, r);
  return id;
}

using Graft = std::function<std::size_t(TreeBuilder&, std::optional<std::size_t>, int)>;

// Preorder copy of `src` below `id`. The node `graft_at` is replaced by
// whatever `graft` emits; internal nodes that would sit at the depth cap
// become random leaves.
inline std::size_t copy_subtree(TreeBuilder& b, const TreeGenotype& src, std::size_t id,
                                std::optional<std::size_t> parent, int depth,
                                std::optional<std::size_t> graft_at, const Graft& graft,
                                const TreeSpace& space, Rng& rng) {
  if (graft_at && *graft_at == id) return graft(b, parent, depth);
  const NodeRecord& n = src.node(id);
  if (n.is_leaf()) return b.add(n, parent);
  if (depth >= space.depth_cap) return b.add(random_leaf(space, rng), parent);
  const std::size_t out = b.add(n, parent);
  const std::size_t l = copy_subtree(b, src, *n.left, out, depth + 1, graft_at, graft, space, rng);
  const std::size_t r = copy_subtree(b, src, *n.right, out, depth + 1, graft_at, graft, space, rng);
  b.link(out, l, r);
  return out;
}

inline TreeGenotype rebuild(const TreeGenotype& src, std::optional<std::size_t> graft_at, const Graft& graft,
                            const TreeSpace& space, Rng& rng) {
  TreeBuilder b;
  copy_subtree(b, src, 0, std::nullopt, 0, graft_at, graft, space, rng);
  return TreeGenotype(src.meta(), b.take());
}

inline std::vector<std::size_t> internal_nodes(const TreeGenotype& tree) {
  std::vector<std::size_t> out;
  for (const auto& n : tree.nodes())
    if (!n.is_leaf()) out.push_back(n.id);
  return out;
}

}  // namespace detail

// Full tree of a depth drawn uniformly from the space's init interval.
inline TreeGenotype random_tree(const TreeSpace& space, Rng& rng) {
  const int target = std::min(uniform_int(rng, space.init_depth.min, space.init_depth.max), space.depth_cap);
  detail::TreeBuilder b;
  detail::grow(b, std::nullopt, 0, target, space, rng);
  return TreeGenotype(space.meta, b.take());
}

// Re-emits `tree` in canonical preorder, truncating below the depth cap.
inline TreeGenotype truncate_to_cap(const TreeGenotype& tree, const TreeSpace& space, Rng& rng) {
  if (tree.depth() <= space.depth_cap) return tree;
  return detail::rebuild(tree, std::nullopt, {}, space, rng);
}

inline std::pair<TreeGenotype, TreeGenotype> crossover_trees_at(const TreeGenotype& a, std::size_t at_a,
                                                                const TreeGenotype& b, std::size_t at_b,
                                                                const TreeSpace& space, Rng& rng) {
  auto from = [&](const TreeGenotype& src, std::size_t root) -> detail::Graft {
    return [&src, root, &space, &rng](detail::TreeBuilder& builder, std::optional<std::size_t> parent, int depth) {
      return detail::copy_subtree(builder, src, root, parent, depth, std::nullopt, {}, space, rng);
    };
  };
  TreeGenotype first = detail::rebuild(a, at_a, from(b, at_b), space, rng);
  TreeGenotype second = detail::rebuild(b, at_b, from(a, at_a), space, rng);
  return {std::move(first), std::move(second)};
}

// Swaps uniformly chosen subtrees of `a` and `b`. Parents are untouched.
inline std::pair<TreeGenotype, TreeGenotype> crossover_trees(const TreeGenotype& a, const TreeGenotype& b,
                                                             const TreeSpace& space, Rng& rng) {
  const std::size_t at_a = uniform_index(rng, a.size());
  const std::size_t at_b = uniform_index(rng, b.size());
  return crossover_trees_at(a, at_a, b, at_b, space, rng);
}

enum class MutationAction { ReplaceSubtree, ResampleNode, PruneSubtree };

// Applies one mutation action at `node`. ResampleNode and PruneSubtree act on
// internal nodes; on a leaf they redraw its class label instead.
inline TreeGenotype mutate_tree_at(const TreeGenotype& tree, MutationAction action, std::size_t node,
                                   const TreeSpace& space, Rng& rng) {
  if (node >= tree.size()) throw InternalFault("mutate_tree_at: node out of range");
  const NodeRecord& target = tree.node(node);

  if (action == MutationAction::ReplaceSubtree) {
    const int sub_depth = uniform_int(rng, 1, std::max(1, space.init_depth.max));
    detail::Graft fresh = [&](detail::TreeBuilder& b, std::optional<std::size_t> parent, int depth) {
      return detail::grow(b, parent, depth, std::min(depth + sub_depth, space.depth_cap), space, rng);
    };
    return detail::rebuild(tree, node, fresh, space, rng);
  }

  if (target.is_leaf()) {
    std::vector<NodeRecord> nodes = tree.nodes();
    const auto classes = tree.meta().class_count;
    nodes[node].label = static_cast<int>((static_cast<std::size_t>(target.label) + 1 +
                                          uniform_index(rng, classes - 1)) % classes);
    return TreeGenotype(tree.meta(), std::move(nodes));
  }

  if (action == MutationAction::ResampleNode) {
    std::vector<NodeRecord> nodes = tree.nodes();
    if (bernoulli(rng, 0.5)) {
      nodes[node].value = uniform01(rng);
    } else {
      const auto current = static_cast<std::size_t>(target.op);
      nodes[node].op = static_cast<SplitOp>((current + 1 + uniform_index(rng, 2)) % 3);
    }
    return TreeGenotype(tree.meta(), std::move(nodes));
  }

  detail::Graft leaf = [&](detail::TreeBuilder& b, std::optional<std::size_t> parent, int) {
    return b.add(detail::random_leaf(space, rng), parent);
  };
  return detail::rebuild(tree, node, leaf, space, rng);
}

inline TreeGenotype mutate_tree(const TreeGenotype& tree, const TreeSpace& space, Rng& rng) {
  const auto action = static_cast<MutationAction>(uniform_index(rng, 3));
  std::size_t node = 0;
  if (action == MutationAction::ReplaceSubtree) {
    node = uniform_index(rng, tree.size());
  } else {
    const auto internal = detail::internal_nodes(tree);
    node = internal.empty() ? 0 : internal[uniform_index(rng, internal.size())];
  }
  return mutate_tree_at(tree, action, node, space, rng);
}

// `trials` independent single-action mutants; picking the fittest is up to
// the caller.
inline std::vector<TreeGenotype> mutate_candidates(const TreeGenotype& tree, const TreeSpace& space, Rng& rng,
                                                   int trials = 10) {
  if (trials < 1) throw ConfigError("mutation trials must be >= 1");
  std::vector<TreeGenotype> out;
  out.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) out.push_back(mutate_tree(tree, space, rng));
  return out;
}

// ---- tree documents -------------------------------------------------------

inline std::string serialize_tree(const TreeGenotype& tree) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["feature_count"] = tree.meta().feature_count;
  doc["class_count"] = tree.meta().class_count;
  ordered_json nodes = ordered_json::array();
  auto link = [](const std::optional<std::size_t>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  for (const auto& n : tree.nodes()) {
    ordered_json node;
    node["t"] = n.id;
    node["c"] = n.label;
    node["P"] = link(n.parent);
    node["L"] = link(n.left);
    node["R"] = link(n.right);
    node["o"] = std::string(to_string(n.op));
    node["v"] = n.value;
    node["a"] = n.attribute;
    nodes.push_back(std::move(node));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(2) + "\n";
}

inline TreeGenotype deserialize_tree(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw TreeFormatError("document", std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw TreeFormatError("document", "expected an object");

  auto unsigned_field = [](const json& obj, const char* key, const std::string& path) -> std::size_t {
    if (!obj.contains(key)) throw TreeFormatError(path, "missing field");
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) throw TreeFormatError(path, "expected a non-negative integer");
    return v.get<std::size_t>();
  };
  auto link_field = [](const json& obj, const char* key, const std::string& path) -> std::optional<std::size_t> {
    if (!obj.contains(key)) throw TreeFormatError(path, "missing field");
    const auto& v = obj.at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_number_integer() || v.get<long long>() < 0) throw TreeFormatError(path, "expected null or a node index");
    return v.get<std::size_t>();
  };

  TreeMeta meta{unsigned_field(doc, "feature_count", "feature_count"),
                unsigned_field(doc, "class_count", "class_count")};
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw TreeFormatError("nodes", "expected an array");
  std::vector<NodeRecord> nodes;
  const auto& list = doc["nodes"];
  for (std::size_t k = 0; k < list.size(); ++k) {
    const std::string base = "nodes[" + std::to_string(k) + "]";
    const auto& obj = list[k];
    if (!obj.is_object()) throw TreeFormatError(base, "expected an object");
    NodeRecord n;
    n.id = unsigned_field(obj, "t", base + ".t");
    if (!obj.contains("c") || !obj["c"].is_number_integer()) throw TreeFormatError(base + ".c", "expected an integer");
    n.label = obj["c"].get<int>();
    n.parent = link_field(obj, "P", base + ".P");
    n.left = link_field(obj, "L", base + ".L");
    n.right = link_field(obj, "R", base + ".R");
    if (!obj.contains("o") || !obj["o"].is_string()) throw TreeFormatError(base + ".o", "expected one of \"<\", \">\", \"=\"");
    const auto op = parse_split_op(obj["o"].get<std::string>());
    if (!op) throw TreeFormatError(base + ".o", "expected one of \"<\", \">\", \"=\"");
    n.op = *op;
    if (!obj.contains("v") || !obj["v"].is_number()) throw TreeFormatError(base + ".v", "expected a number");
    n.value = obj["v"].get<double>();
    n.attribute = unsigned_field(obj, "a", base + ".a");
    nodes.push_back(n);
  }
  return TreeGenotype(meta, std::move(nodes));
}

// Throws DataError when a tree cannot be applied to `data`.
inline void check_compatible(const TreeGenotype& tree, const Dataset& data) {
  if (tree.meta().feature_count != data.feature_count() || tree.meta().class_count != data.class_count()) {
    throw DataError("tree expects " + std::to_string(tree.meta().feature_count) + " features and " +
                    std::to_string(tree.meta().class_count) + " classes; dataset has " +
                    std::to_string(data.feature_count()) + " and " + std::to_string(data.class_count()));
  }
}

}  // namespace robustree
