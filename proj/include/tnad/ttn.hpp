#pragma once

#include <cstdint>
#include <vector>

#include "tnad/tree_network.hpp"

namespace tnad {

/// Binary tree tensor network with two physical legs per leaf.
///
/// Nodes are stored in pre-order with the root at index 0. Axis layouts:
///   root      (D_child0, D_child1)
///   internal  (D_parent, D_child0, D_child1)
///   leaf      (D_parent, N, N)   carrying slots 2k and 2k+1 for the k-th leaf
/// A tree over a single leaf has that leaf as root with axes (N, N). Odd feature counts
/// are padded with one trailing slot pinned to the encoding of 0.5.
class TtnModel {
 public:
  TtnModel() = default;
  TtnModel(TensorTree tree, std::size_t num_features);

  /// Seeded random tree over ceil(L/2) leaves, split as evenly as possible at every
  /// internal node (left subtree takes the larger half), bonds capped at the exact rank of
  /// each cut, canonical toward the right-most leaf, unit norm.
  static TtnModel random(std::size_t num_features, std::size_t phys_dim, std::size_t init_bond, std::uint64_t seed);

  std::size_t num_features() const noexcept { return num_features_; }
  std::size_t padding() const noexcept { return tree_.num_slots() - num_features_; }
  std::size_t phys_dim() const noexcept { return tree_.phys_dim(); }
  std::size_t num_leaves() const noexcept { return leaves_.size(); }
  int root() const noexcept { return 0; }
  int leaf(std::size_t k) const { return leaves_.at(k); }
  int rightmost_leaf() const { return leaves_.back(); }
  int parent(int node) const { return parents_.at(static_cast<std::size_t>(node)); }
  const std::vector<int>& children(int node) const { return children_.at(static_cast<std::size_t>(node)); }
  const std::vector<int>& parents() const noexcept { return parents_; }
  int center() const noexcept { return tree_.center(); }

  void canonicalize(int node) { tree_.canonicalize(node); }
  /// Merged tensor over edge (u, v); the center must sit on u or v.
  MergedTensor merge_edge(int u, int v) const;
  SplitStats split_edge(const MergedTensor& merged, int new_center, double rel_threshold, std::size_t max_rank);

  LogAmplitude log_amplitude(const EncodedSample& sample) const { return tree_.log_amplitude(sample); }

  /// Depth-first closed walk from the right-most leaf: at every node the children are
  /// explored left to right before the parent, so each leaf other than the start is
  /// entered once and immediately left upward.
  std::vector<DirectedEdge> traversal_schedule() const;

  const TensorTree& tree() const noexcept { return tree_; }
  TensorTree& tree() noexcept { return tree_; }

 private:
  void index_topology();

  TensorTree tree_;
  std::size_t num_features_ = 0;
  std::vector<int> parents_;
  std::vector<std::vector<int>> children_;
  std::vector<int> leaves_;
};

}  // namespace tnad
