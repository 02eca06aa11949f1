#pragma once

#include <cstdint>
#include <vector>

#include "tnad/tree_network.hpp"

namespace tnad {

enum class Direction { left, right };

/// Open-boundary matrix product state. Core i has axes (D_{i-1}, N, D_i) with
/// D_0 = D_L = 1; node i of the underlying tree is site i.
class MpsModel {
 public:
  MpsModel() = default;
  /// Wraps a tree that must be a chain with the MPS axis layout.
  explicit MpsModel(TensorTree tree);

  /// Seeded random cores (normal entries scaled by 1/sqrt(D_l N D_r)), interior bonds
  /// capped at min(init_bond, N^j, N^(L-j)), left-canonical with center 0 and unit norm.
  static MpsModel random(std::size_t length, std::size_t phys_dim, std::size_t init_bond, std::uint64_t seed);

  std::size_t length() const noexcept { return tree_.num_nodes(); }
  std::size_t phys_dim() const noexcept { return tree_.phys_dim(); }
  std::size_t center() const noexcept { return static_cast<std::size_t>(tree_.center()); }
  const DenseTensor& core(std::size_t site) const { return tree_.node(static_cast<int>(site)).tensor; }
  /// Interior bond dimensions D_1 ... D_{L-1}.
  std::vector<std::size_t> bond_dims() const;

  void canonicalize(std::size_t new_center) { tree_.canonicalize(static_cast<int>(new_center)); }
  /// Two-site tensor of sites (site, site+1) with shape (D_left, N, N, D_right). The
  /// center must sit on one of the two sites.
  MergedTensor merge_bond(std::size_t site) const;
  /// Truncated-SVD split of `merged` back onto sites (site, site+1); the center moves to
  /// the neighbor in the traversal direction.
  SplitStats split_bond(const MergedTensor& merged, Direction direction, double rel_threshold, std::size_t max_rank);

  LogAmplitude log_amplitude(const EncodedSample& sample) const { return tree_.log_amplitude(sample); }

  /// Left-right-left sweep starting and ending at site 0.
  std::vector<DirectedEdge> traversal_schedule() const;

  const TensorTree& tree() const noexcept { return tree_; }
  TensorTree& tree() noexcept { return tree_; }

 private:
  TensorTree tree_;
};

/// Exact bond cap at the cut between sites j-1 and j: min(N^j, N^(L-j)), saturating.
std::size_t exact_bond_cap(std::size_t phys_dim, std::size_t left_sites, std::size_t right_sites, std::size_t limit);

}  // namespace tnad
