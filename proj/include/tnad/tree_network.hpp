#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "tnad/legendre.hpp"
#include "tnad/tensor.hpp"

namespace tnad {

enum class AxisKind : std::uint8_t { bond, physical, dummy };

/// Role of one tensor axis: a bond to another node, a physical feature slot, or a
/// trivial extent-1 boundary axis.
struct AxisLabel {
  AxisKind kind = AxisKind::dummy;
  int target = -1;  // neighbor node for bonds, slot index for physical axes

  static AxisLabel bond(int node) { return {AxisKind::bond, node}; }
  static AxisLabel physical(int slot) { return {AxisKind::physical, slot}; }
  static AxisLabel dummy() { return {AxisKind::dummy, -1}; }
  friend bool operator==(const AxisLabel&, const AxisLabel&) = default;
};

struct TreeNode {
  DenseTensor tensor;
  std::vector<AxisLabel> axes;
};

struct DirectedEdge {
  int from = 0;
  int to = 0;
  friend bool operator==(const DirectedEdge&, const DirectedEdge&) = default;
};

/// log|Psi(x)| and sign(Psi(x)); log_abs is -infinity for an exactly vanishing amplitude.
struct LogAmplitude {
  double log_abs = 0.0;
  int sign = 1;
};

/// Two neighboring nodes contracted over their shared bond. Axes are the non-shared
/// axes of `u` in order followed by the non-shared axes of `v`.
struct MergedTensor {
  int u = 0;
  int v = 0;
  std::size_t u_rank = 0;
  DenseTensor tensor;
  std::vector<AxisLabel> axes;
};

struct SplitStats {
  std::size_t bond_dim = 0;
  double discarded_weight = 0.0;
};

/// Tensor network on a tree graph. Matrix product states are paths, tree tensor
/// networks are binary trees; both share the canonical-form machinery here.
class TensorTree {
 public:
  TensorTree() = default;
  TensorTree(std::vector<TreeNode> nodes, std::size_t phys_dim, std::size_t num_slots, int center);

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  const TreeNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  /// Replaces a node tensor; the shape must agree with the existing axes' neighbors.
  void set_node_tensor(int i, DenseTensor tensor);

  std::size_t phys_dim() const noexcept { return phys_dim_; }
  std::size_t num_slots() const noexcept { return num_slots_; }
  int center() const noexcept { return center_; }
  /// Marks `node` as the canonical center without changing any tensor.
  void set_center_unchecked(int node);

  const std::vector<int>& neighbors(int node) const { return adjacency_.at(static_cast<std::size_t>(node)); }
  std::size_t axis_toward(int node, int neighbor) const;
  std::size_t slot_axis(int node, std::size_t slot) const;
  int slot_node(std::size_t slot) const { return slot_nodes_.at(slot); }
  std::size_t bond_dim(int a, int b) const;
  bool adjacent(int a, int b) const;
  /// Node sequence from `from` to `to`, both included.
  std::vector<int> path(int from, int to) const;
  /// Undirected edges as (a, b) with a < b.
  std::vector<std::pair<int, int>> edges() const;

  /// Pins a physical slot to a fixed encoded vector (padding features).
  void fix_slot(std::size_t slot, std::vector<double> vec);
  const std::optional<std::vector<double>>& fixed_slot(std::size_t slot) const { return fixed_.at(slot); }
  /// Number of leading slots fed by data; trailing fixed slots need no input.
  std::size_t num_input_slots() const noexcept { return num_input_slots_; }

  /// Restores canonical form from scratch (arbitrary tensors) with the given center.
  void orthogonalize(int center);
  /// Moves the canonical center one edge by a thin QR step.
  void move_center(int neighbor);
  /// Moves the canonical center along the path to `target`.
  void canonicalize(int target);

  /// State norm, valid in canonical form (Frobenius norm of the center tensor).
  double norm() const;
  void normalize();

  MergedTensor merge(int u, int v) const;
  /// Splits `merged` (shape as produced by merge(u, v)) with a truncated SVD; singular
  /// values are absorbed into `new_center`, which must be u or v. The center is renormalized.
  SplitStats split(const MergedTensor& merged, int new_center, double rel_threshold, std::size_t max_rank);

  LogAmplitude log_amplitude(const EncodedSample& sample) const;

  /// max |Q^T Q - I| of the node reshaped with its `toward` axis as columns.
  double isometry_defect(int node, int toward) const;
  /// Largest isometry defect over all non-center nodes, each toward the center.
  double canonical_defect() const;
  /// Throws DimensionError if any bond extents disagree across an edge.
  void check_consistency() const;

 private:
  void build_index();
  void qr_toward(int node, int neighbor);

  std::vector<TreeNode> nodes_;
  std::size_t phys_dim_ = 0;
  std::size_t num_slots_ = 0;
  std::size_t num_input_slots_ = 0;
  int center_ = 0;
  std::vector<std::vector<int>> adjacency_;
  std::vector<int> slot_nodes_;
  std::vector<std::optional<std::vector<double>>> fixed_;
};

/// Per-sample vectors on one tensor axis for a whole data set, with per-row log scales.
struct BatchMessage {
  RowMatrix vec;
  Eigen::VectorXd log_scale;
};

/// Contracts `tensor` with per-sample vectors on every axis except `keep` (or on all axes
/// when keep is empty, yielding one column). Rows are renormalized to unit 2-norm with
/// the log of the norm accumulated into log_scale.
BatchMessage contract_batch(const DenseTensor& tensor, std::span<const BatchMessage* const> inputs,
                            std::optional<std::size_t> keep, std::size_t num_samples, bool normalize = true);

/// Lazily computed, invalidation-tracked bond messages of a tree network over a data set.
/// Message (a -> b) summarizes the subtree on a's side of edge (a, b) for every sample.
class EnvironmentCache {
 public:
  EnvironmentCache(const TensorTree& tree, const EncodedDataset& data);

  const TensorTree& tree() const noexcept { return *tree_; }
  std::size_t num_samples() const noexcept { return num_samples_; }

  const BatchMessage& message(int from, int to);
  /// Per-sample input on one axis of `node`: incoming message, encoded feature or ones.
  const BatchMessage& axis_input(int node, const AxisLabel& axis);
  /// Drops every cached message whose source subtree contains `node`.
  void invalidate(int node);
  void invalidate_all() { messages_.clear(); }

  /// log|Psi| and sign for every sample, contracted at the current center.
  std::vector<LogAmplitude> log_amplitudes();

 private:
  const TensorTree* tree_;
  std::size_t num_samples_;
  std::vector<BatchMessage> slots_;
  BatchMessage ones_;
  std::map<std::pair<int, int>, BatchMessage> messages_;
};

/// Batched log amplitudes of `tree` over `data`.
std::vector<LogAmplitude> log_amplitudes(const TensorTree& tree, const EncodedDataset& data);

}  // namespace tnad
