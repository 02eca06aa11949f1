#include "tnad/ttn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "tnad/errors.hpp"
#include "tnad/mps.hpp"

namespace tnad {

namespace {

struct Blueprint {
  std::vector<std::vector<AxisLabel>> axes;
  std::vector<std::size_t> parent_bond;  // bond extent toward the parent (1 for the root)
};

}  // namespace

TtnModel::TtnModel(TensorTree tree, std::size_t num_features) : tree_(std::move(tree)), num_features_(num_features) {
  const std::size_t slots = tree_.num_slots();
  if (slots < 2 || slots % 2 != 0) throw ArgumentError("a tree network carries an even number of slots");
  if (num_features_ + 1 < slots || num_features_ > slots) throw ArgumentError("padding must be zero or one slot");
  for (std::size_t s = num_features_; s < slots; ++s) {
    if (!tree_.fixed_slot(s)) throw ArgumentError("padding slot is not pinned");
  }
  index_topology();
}

void TtnModel::index_topology() {
  const int n = static_cast<int>(tree_.num_nodes());
  parents_.assign(n, -1);
  children_.assign(n, {});
  leaves_.clear();
  for (int i = 0; i < n; ++i) {
    const auto& axes = tree_.node(i).axes;
    std::size_t a = 0;
    if (i != 0) {
      if (axes.empty() || axes[0].kind != AxisKind::bond || axes[0].target >= i) {
        throw ArgumentError("node " + std::to_string(i) + " must start with a bond to an earlier parent");
      }
      parents_[i] = axes[0].target;
      a = 1;
    }
    if (axes.size() != a + 2) throw ArgumentError("node " + std::to_string(i) + " is not binary");
    if (axes[a].kind == AxisKind::physical) {
      const int k = static_cast<int>(leaves_.size());
      if (axes[a] != AxisLabel::physical(2 * k) || axes[a + 1] != AxisLabel::physical(2 * k + 1)) {
        throw ArgumentError("leaf " + std::to_string(k) + " must carry slots in order");
      }
      leaves_.push_back(i);
    } else {
      for (std::size_t c = a; c < a + 2; ++c) {
        if (axes[c].kind != AxisKind::bond || axes[c].target <= i) {
          throw ArgumentError("internal node " + std::to_string(i) + " must list later children");
        }
        children_[i].push_back(axes[c].target);
      }
    }
  }
  for (int i = 1; i < n; ++i) {
    const auto& siblings = children_[parents_[i]];
    if (std::find(siblings.begin(), siblings.end(), i) == siblings.end()) {
      throw ArgumentError("parent of node " + std::to_string(i) + " does not list it as child");
    }
  }
  if (leaves_.size() * 2 != tree_.num_slots()) throw ArgumentError("leaf count does not match slot count");
}

TtnModel TtnModel::random(std::size_t num_features, std::size_t phys_dim, std::size_t init_bond, std::uint64_t seed) {
  if (num_features < 2) throw ArgumentError("a tree network needs at least two features");
  if (phys_dim < 1 || init_bond < 1) throw ArgumentError("physical and initial bond dimensions must be positive");
  const std::size_t slots = num_features + num_features % 2;
  const std::size_t num_leaves = slots / 2;

  Blueprint bp;
  std::function<int(std::size_t, std::size_t, int)> build = [&](std::size_t lo, std::size_t hi, int parent) {
    const int id = static_cast<int>(bp.axes.size());
    bp.axes.emplace_back();
    bp.parent_bond.push_back(1);
    const std::size_t sub_slots = 2 * (hi - lo);
    if (parent >= 0) {
      bp.axes[id].push_back(AxisLabel::bond(parent));
      bp.parent_bond[id] = exact_bond_cap(phys_dim, sub_slots, slots - sub_slots, init_bond);
    }
    if (hi - lo == 1) {
      bp.axes[id].push_back(AxisLabel::physical(static_cast<int>(2 * lo)));
      bp.axes[id].push_back(AxisLabel::physical(static_cast<int>(2 * lo + 1)));
    } else {
      const std::size_t left = (hi - lo + 1) / 2;
      const int c0 = build(lo, lo + left, id);
      bp.axes[id].push_back(AxisLabel::bond(c0));
      const int c1 = build(lo + left, hi, id);
      bp.axes[id].push_back(AxisLabel::bond(c1));
    }
    return id;
  };
  build(0, num_leaves, -1);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<TreeNode> nodes;
  nodes.reserve(bp.axes.size());
  for (std::size_t i = 0; i < bp.axes.size(); ++i) {
    Shape shape;
    for (const auto& ax : bp.axes[i]) {
      if (ax.kind == AxisKind::physical) {
        shape.push_back(phys_dim);
      } else if (ax.target < static_cast<int>(i)) {
        shape.push_back(bp.parent_bond[i]);
      } else {
        shape.push_back(bp.parent_bond[ax.target]);
      }
    }
    DenseTensor t(shape);
    const double scale = 1.0 / std::sqrt(static_cast<double>(t.size()));
    for (double& x : t.data()) x = scale * normal(rng);
    nodes.push_back({std::move(t), bp.axes[i]});
  }
  TensorTree tree(std::move(nodes), phys_dim, slots, 0);
  if (slots != num_features) tree.fix_slot(slots - 1, legendre_basis(phys_dim, 0.5));
  TtnModel model(std::move(tree), num_features);
  model.tree_.orthogonalize(model.rightmost_leaf());
  model.tree_.normalize();
  return model;
}

MergedTensor TtnModel::merge_edge(int u, int v) const {
  if (tree_.center() != u && tree_.center() != v) throw ArgumentError("canonical center must sit on the merged edge");
  return tree_.merge(u, v);
}

SplitStats TtnModel::split_edge(const MergedTensor& merged, int new_center, double rel_threshold,
                                std::size_t max_rank) {
  return tree_.split(merged, new_center, rel_threshold, max_rank);
}

std::vector<DirectedEdge> TtnModel::traversal_schedule() const {
  std::vector<DirectedEdge> out;
  std::function<void(int, int)> visit = [&](int node, int from) {
    std::vector<int> order = children_[node];
    if (parents_[node] >= 0) order.push_back(parents_[node]);
    for (int next : order) {
      if (next == from) continue;
      out.push_back({node, next});
      visit(next, node);
      out.push_back({next, node});
    }
  };
  visit(rightmost_leaf(), -1);
  return out;
}

}  // namespace tnad
