#include "tnad/tree_network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

#include "tnad/errors.hpp"

namespace tnad {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Permutation that moves axis `pos` to the end.
std::vector<std::size_t> axis_last(std::size_t rank, std::size_t pos) {
  std::vector<std::size_t> perm;
  for (std::size_t j = 0; j < rank; ++j) {
    if (j != pos) perm.push_back(j);
  }
  perm.push_back(pos);
  return perm;
}

// Inverse of axis_last: the last axis returns to position `pos`.
std::vector<std::size_t> last_to(std::size_t rank, std::size_t pos) {
  std::vector<std::size_t> perm(rank);
  for (std::size_t j = 0; j < rank; ++j) perm[j] = j < pos ? j : (j == pos ? rank - 1 : j - 1);
  return perm;
}

// The first axis moves to position `pos`.
std::vector<std::size_t> first_to(std::size_t rank, std::size_t pos) {
  std::vector<std::size_t> perm(rank);
  for (std::size_t j = 0; j < rank; ++j) perm[j] = j < pos ? j + 1 : (j == pos ? 0 : j);
  return perm;
}

// Reshapes a tensor whose last axis is `pos`-moved to a (rows x cols) matrix tensor.
DenseTensor as_column_matrix(const DenseTensor& t, std::size_t pos) {
  const DenseTensor p = reorder_axes(t, axis_last(t.rank(), pos));
  const std::size_t cols = t.extent(pos);
  return p.reshaped({p.size() / cols, cols});
}

}  // namespace

TensorTree::TensorTree(std::vector<TreeNode> nodes, std::size_t phys_dim, std::size_t num_slots, int center)
    : nodes_(std::move(nodes)), phys_dim_(phys_dim), num_slots_(num_slots), center_(center) {
  if (nodes_.empty()) throw ArgumentError("tensor tree needs at least one node");
  if (phys_dim_ < 1) throw ArgumentError("physical dimension must be positive");
  if (center_ < 0 || static_cast<std::size_t>(center_) >= nodes_.size()) throw ArgumentError("center out of range");
  fixed_.assign(num_slots_, std::nullopt);
  num_input_slots_ = num_slots_;
  build_index();
  check_consistency();
}

void TensorTree::build_index() {
  const int n = static_cast<int>(nodes_.size());
  adjacency_.assign(nodes_.size(), {});
  slot_nodes_.assign(num_slots_, -1);
  std::size_t edge_ends = 0;
  for (int i = 0; i < n; ++i) {
    const auto& node = nodes_[i];
    if (node.axes.size() != node.tensor.rank()) {
      throw DimensionError("node " + std::to_string(i) + " has " + std::to_string(node.axes.size()) +
                           " axis labels for a rank-" + std::to_string(node.tensor.rank()) + " tensor");
    }
    for (std::size_t a = 0; a < node.axes.size(); ++a) {
      const auto& ax = node.axes[a];
      switch (ax.kind) {
        case AxisKind::bond:
          if (ax.target < 0 || ax.target >= n || ax.target == i) throw ArgumentError("invalid bond target");
          if (std::find(adjacency_[i].begin(), adjacency_[i].end(), ax.target) != adjacency_[i].end()) {
            throw ArgumentError("duplicate bond between nodes");
          }
          adjacency_[i].push_back(ax.target);
          ++edge_ends;
          break;
        case AxisKind::physical:
          if (ax.target < 0 || static_cast<std::size_t>(ax.target) >= num_slots_) {
            throw ArgumentError("physical slot out of range");
          }
          if (slot_nodes_[ax.target] != -1) throw ArgumentError("physical slot attached twice");
          if (node.tensor.extent(a) != phys_dim_) throw DimensionError("physical axis extent differs from N");
          slot_nodes_[ax.target] = i;
          break;
        case AxisKind::dummy:
          if (node.tensor.extent(a) != 1) throw DimensionError("boundary axis must have extent 1");
          break;
      }
    }
  }
  for (std::size_t s = 0; s < num_slots_; ++s) {
    if (slot_nodes_[s] == -1) throw ArgumentError("physical slot " + std::to_string(s) + " is not attached");
  }
  if (edge_ends != 2 * (nodes_.size() - 1)) throw ArgumentError("node graph is not a tree");
  for (int i = 0; i < n; ++i) {
    for (int j : adjacency_[i]) {
      const auto& back = adjacency_[j];
      if (std::find(back.begin(), back.end(), i) == back.end()) throw ArgumentError("bond is not symmetric");
    }
  }
  // connectivity
  std::vector<bool> seen(nodes_.size(), false);
  std::deque<int> queue{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!queue.empty()) {
    const int a = queue.front();
    queue.pop_front();
    for (int b : adjacency_[a]) {
      if (!seen[b]) {
        seen[b] = true;
        ++count;
        queue.push_back(b);
      }
    }
  }
  if (count != nodes_.size()) throw ArgumentError("node graph is not connected");
}

void TensorTree::check_consistency() const {
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
    for (int j : adjacency_[i]) {
      if (nodes_[i].tensor.extent(axis_toward(i, j)) != nodes_[j].tensor.extent(axis_toward(j, i))) {
        throw DimensionError("bond extents disagree between nodes " + std::to_string(i) + " and " +
                             std::to_string(j));
      }
    }
  }
}

void TensorTree::set_node_tensor(int i, DenseTensor tensor) {
  auto& node = nodes_.at(static_cast<std::size_t>(i));
  if (tensor.rank() != node.axes.size()) throw DimensionError("replacement tensor has the wrong rank");
  for (std::size_t a = 0; a < node.axes.size(); ++a) {
    const auto kind = node.axes[a].kind;
    if (kind != AxisKind::bond && tensor.extent(a) != node.tensor.extent(a)) {
      throw DimensionError("replacement tensor changes a non-bond extent");
    }
  }
  node.tensor = std::move(tensor);
}

void TensorTree::set_center_unchecked(int node) {
  if (node < 0 || static_cast<std::size_t>(node) >= nodes_.size()) throw ArgumentError("center out of range");
  center_ = node;
}

std::size_t TensorTree::axis_toward(int node, int neighbor) const {
  const auto& axes = nodes_.at(static_cast<std::size_t>(node)).axes;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    if (axes[a].kind == AxisKind::bond && axes[a].target == neighbor) return a;
  }
  throw ArgumentError("nodes " + std::to_string(node) + " and " + std::to_string(neighbor) + " are not adjacent");
}

std::size_t TensorTree::slot_axis(int node, std::size_t slot) const {
  const auto& axes = nodes_.at(static_cast<std::size_t>(node)).axes;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    if (axes[a].kind == AxisKind::physical && axes[a].target == static_cast<int>(slot)) return a;
  }
  throw ArgumentError("slot not attached to node");
}

std::size_t TensorTree::bond_dim(int a, int b) const { return nodes_.at(a).tensor.extent(axis_toward(a, b)); }

bool TensorTree::adjacent(int a, int b) const {
  const auto& adj = adjacency_.at(static_cast<std::size_t>(a));
  return std::find(adj.begin(), adj.end(), b) != adj.end();
}

std::vector<int> TensorTree::path(int from, int to) const {
  std::vector<int> parent(nodes_.size(), -1);
  std::vector<bool> seen(nodes_.size(), false);
  std::deque<int> queue{to};
  seen.at(to) = true;
  while (!queue.empty()) {
    const int a = queue.front();
    queue.pop_front();
    for (int b : adjacency_[a]) {
      if (!seen[b]) {
        seen[b] = true;
        parent[b] = a;
        queue.push_back(b);
      }
    }
  }
  std::vector<int> out{from};
  for (int x = from; x != to;) {
    x = parent.at(x);
    out.push_back(x);
  }
  return out;
}

std::vector<std::pair<int, int>> TensorTree::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
    for (int j : adjacency_[i]) {
      if (i < j) out.emplace_back(i, j);
    }
  }
  return out;
}

void TensorTree::fix_slot(std::size_t slot, std::vector<double> vec) {
  if (vec.size() != phys_dim_) throw DimensionError("fixed slot vector length differs from N");
  fixed_.at(slot) = std::move(vec);
  std::size_t first = num_slots_;
  while (first > 0 && fixed_[first - 1].has_value()) --first;
  for (std::size_t s = 0; s < first; ++s) {
    if (fixed_[s].has_value()) throw ArgumentError("fixed slots must be the trailing slots");
  }
  num_input_slots_ = first;
}

void TensorTree::qr_toward(int node, int neighbor) {
  auto& a = nodes_[node];
  auto& b = nodes_[neighbor];
  const std::size_t ab = axis_toward(node, neighbor);
  const std::size_t ba = axis_toward(neighbor, node);
  auto [q, r] = thin_qr(as_column_matrix(a.tensor, ab));
  const std::size_t k = q.extent(1);

  Shape q_shape;
  for (std::size_t j = 0; j < a.tensor.rank(); ++j) {
    if (j != ab) q_shape.push_back(a.tensor.extent(j));
  }
  q_shape.push_back(k);
  a.tensor = reorder_axes(q.reshaped(q_shape), last_to(a.tensor.rank(), ab));

  const DenseTensor rb = contract_pair(r, b.tensor, {{1, ba}});
  b.tensor = reorder_axes(rb, first_to(b.tensor.rank(), ba));
}

void TensorTree::orthogonalize(int center) {
  const int n = static_cast<int>(nodes_.size());
  if (center < 0 || center >= n) throw ArgumentError("center out of range");
  std::vector<int> order{center};
  std::vector<int> parent(nodes_.size(), -1);
  std::vector<bool> seen(nodes_.size(), false);
  seen[center] = true;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (int b : adjacency_[order[i]]) {
      if (!seen[b]) {
        seen[b] = true;
        parent[b] = order[i];
        order.push_back(b);
      }
    }
  }
  for (std::size_t i = order.size(); i-- > 1;) qr_toward(order[i], parent[order[i]]);
  center_ = center;
}

void TensorTree::move_center(int neighbor) {
  if (!adjacent(center_, neighbor)) throw ArgumentError("center can only move to an adjacent node");
  qr_toward(center_, neighbor);
  center_ = neighbor;
}

void TensorTree::canonicalize(int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= nodes_.size()) throw ArgumentError("center out of range");
  const auto p = path(center_, target);
  for (std::size_t i = 1; i < p.size(); ++i) move_center(p[i]);
}

double TensorTree::norm() const { return nodes_[center_].tensor.frobenius_norm(); }

void TensorTree::normalize() {
  const double nrm = norm();
  if (!(nrm > 0.0)) throw DegenerateInputError("cannot normalize a zero state");
  nodes_[center_].tensor *= 1.0 / nrm;
}

MergedTensor TensorTree::merge(int u, int v) const {
  const std::size_t uv = axis_toward(u, v);
  const std::size_t vu = axis_toward(v, u);
  MergedTensor m;
  m.u = u;
  m.v = v;
  m.u_rank = nodes_[u].axes.size() - 1;
  m.tensor = contract_pair(nodes_[u].tensor, nodes_[v].tensor, {{uv, vu}});
  for (std::size_t j = 0; j < nodes_[u].axes.size(); ++j) {
    if (j != uv) m.axes.push_back(nodes_[u].axes[j]);
  }
  for (std::size_t j = 0; j < nodes_[v].axes.size(); ++j) {
    if (j != vu) m.axes.push_back(nodes_[v].axes[j]);
  }
  return m;
}

SplitStats TensorTree::split(const MergedTensor& merged, int new_center, double rel_threshold,
                             std::size_t max_rank) {
  const int u = merged.u, v = merged.v;
  if (new_center != u && new_center != v) throw ArgumentError("new center must be an endpoint of the split edge");
  const std::size_t uv = axis_toward(u, v);
  const std::size_t vu = axis_toward(v, u);
  Shape u_shape, v_shape;
  for (std::size_t j = 0; j < nodes_[u].axes.size(); ++j) {
    if (j != uv) u_shape.push_back(nodes_[u].tensor.extent(j));
  }
  for (std::size_t j = 0; j < nodes_[v].axes.size(); ++j) {
    if (j != vu) v_shape.push_back(nodes_[v].tensor.extent(j));
  }
  Shape expected = u_shape;
  expected.insert(expected.end(), v_shape.begin(), v_shape.end());
  if (merged.tensor.shape() != expected) throw DimensionError("merged tensor shape does not match the edge");

  const std::size_t rows = shape_size(u_shape);
  const std::size_t cols = shape_size(v_shape);
  SvdResult svd = truncated_svd(merged.tensor.reshaped({rows, cols}), rel_threshold, max_rank);
  const std::size_t k = svd.rank();

  auto left = svd.left_isometry.as_matrix();
  auto right = svd.right_isometry.as_matrix();
  if (new_center == v) {
    for (std::size_t i = 0; i < k; ++i) right.row(i) *= svd.singular_values[i];
  } else {
    for (std::size_t i = 0; i < k; ++i) left.col(i) *= svd.singular_values[i];
  }
  u_shape.push_back(k);
  v_shape.insert(v_shape.begin(), k);
  nodes_[u].tensor = reorder_axes(svd.left_isometry.reshaped(u_shape), last_to(nodes_[u].axes.size(), uv));
  nodes_[v].tensor = reorder_axes(svd.right_isometry.reshaped(v_shape), first_to(nodes_[v].axes.size(), vu));
  center_ = new_center;
  normalize();
  return {k, svd.discarded_weight};
}

LogAmplitude TensorTree::log_amplitude(const EncodedSample& sample) const {
  EncodedSample copy = sample;
  const EncodedDataset one = EncodedDataset::from_samples(std::span<const EncodedSample>(&copy, 1));
  return log_amplitudes(*this, one).front();
}

double TensorTree::isometry_defect(int node, int toward) const {
  const DenseTensor m = as_column_matrix(nodes_.at(node).tensor, axis_toward(node, toward));
  const auto mat = m.as_matrix();
  const Eigen::MatrixXd gram = mat.transpose() * mat;
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

double TensorTree::canonical_defect() const {
  double worst = 0.0;
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
    if (i == center_) continue;
    const auto p = path(i, center_);
    worst = std::max(worst, isometry_defect(i, p[1]));
  }
  return worst;
}

BatchMessage contract_batch(const DenseTensor& tensor, std::span<const BatchMessage* const> inputs,
                            std::optional<std::size_t> keep, std::size_t num_samples, bool normalize) {
  const std::size_t r = tensor.rank();
  if (inputs.size() != r) throw ArgumentError("one input per tensor axis required");
  std::vector<std::size_t> perm;
  for (std::size_t a = 0; a < r; ++a) {
    if (!keep || a != *keep) perm.push_back(a);
  }
  if (keep) perm.push_back(*keep);
  const DenseTensor t = reorder_axes(tensor, perm);
  const std::size_t others = keep ? r - 1 : r;
  const auto n = static_cast<Eigen::Index>(num_samples);

  BatchMessage out;
  out.log_scale = Eigen::VectorXd::Zero(n);
  RowMatrix x;
  std::size_t rest = t.size();
  if (others == 0) {
    x = RowMatrix(n, static_cast<Eigen::Index>(rest));
    for (Eigen::Index s = 0; s < n; ++s) {
      x.row(s) = Eigen::Map<const Eigen::RowVectorXd>(t.data().data(), static_cast<Eigen::Index>(rest));
    }
  }
  for (std::size_t k = 0; k < others; ++k) {
    const BatchMessage& in = *inputs[perm[k]];
    const auto d = static_cast<Eigen::Index>(t.extent(k));
    if (in.vec.cols() != d || in.vec.rows() != n) throw DimensionError("batched input does not match tensor axis");
    out.log_scale += in.log_scale;
    rest /= static_cast<std::size_t>(d);
    const auto rc = static_cast<Eigen::Index>(rest);
    if (k == 0) {
      Eigen::Map<const RowMatrix> tm(t.data().data(), d, rc);
      x.noalias() = in.vec * tm;
    } else {
      RowMatrix y(n, rc);
      for (Eigen::Index s = 0; s < n; ++s) {
        Eigen::Map<const RowMatrix> xs(x.row(s).data(), d, rc);
        y.row(s).noalias() = in.vec.row(s) * xs;
      }
      x = std::move(y);
    }
  }
  if (normalize) {
    for (Eigen::Index s = 0; s < n; ++s) {
      const double nrm = x.row(s).norm();
      if (nrm > 0.0 && std::isfinite(out.log_scale(s))) {
        x.row(s) /= nrm;
        out.log_scale(s) += std::log(nrm);
      } else {
        x.row(s).setZero();
        out.log_scale(s) = kNegInf;
      }
    }
  }
  out.vec = std::move(x);
  return out;
}

EnvironmentCache::EnvironmentCache(const TensorTree& tree, const EncodedDataset& data)
    : tree_(&tree), num_samples_(data.num_samples()) {
  const std::size_t given = data.num_features();
  if (given != tree.num_input_slots() && given != tree.num_slots()) {
    throw ArgumentError("data has " + std::to_string(given) + " features, model expects " +
                        std::to_string(tree.num_input_slots()));
  }
  if (data.phys_dim() != tree.phys_dim() && num_samples_ > 0) {
    throw ArgumentError("encoding dimension " + std::to_string(data.phys_dim()) + " differs from model N " +
                        std::to_string(tree.phys_dim()));
  }
  const auto n = static_cast<Eigen::Index>(num_samples_);
  slots_.resize(tree.num_slots());
  for (std::size_t s = 0; s < tree.num_slots(); ++s) {
    const auto& fixed = tree.fixed_slot(s);
    if (fixed) {
      slots_[s].vec = RowMatrix(n, static_cast<Eigen::Index>(fixed->size()));
      for (Eigen::Index i = 0; i < n; ++i) {
        slots_[s].vec.row(i) = Eigen::Map<const Eigen::RowVectorXd>(fixed->data(), static_cast<Eigen::Index>(fixed->size()));
      }
    } else {
      slots_[s].vec = data.features[s];
    }
    slots_[s].log_scale = Eigen::VectorXd::Zero(n);
  }
  ones_.vec = RowMatrix::Ones(n, 1);
  ones_.log_scale = Eigen::VectorXd::Zero(n);
}

const BatchMessage& EnvironmentCache::axis_input(int node, const AxisLabel& axis) {
  switch (axis.kind) {
    case AxisKind::bond:
      return message(axis.target, node);
    case AxisKind::physical:
      return slots_.at(static_cast<std::size_t>(axis.target));
    case AxisKind::dummy:
      break;
  }
  return ones_;
}

const BatchMessage& EnvironmentCache::message(int from, int to) {
  const auto key = std::make_pair(from, to);
  if (auto it = messages_.find(key); it != messages_.end()) return it->second;
  const auto& node = tree_->node(from);
  const std::size_t keep = tree_->axis_toward(from, to);
  std::vector<const BatchMessage*> inputs(node.axes.size(), nullptr);
  for (std::size_t a = 0; a < node.axes.size(); ++a) {
    if (a != keep) inputs[a] = &axis_input(from, node.axes[a]);
  }
  auto msg = contract_batch(node.tensor, inputs, keep, num_samples_);
  return messages_.emplace(key, std::move(msg)).first->second;
}

void EnvironmentCache::invalidate(int node) {
  std::vector<std::pair<int, int>> stack;
  for (int b : tree_->neighbors(node)) stack.emplace_back(node, b);
  while (!stack.empty()) {
    auto [a, b] = stack.back();
    stack.pop_back();
    messages_.erase({a, b});
    for (int c : tree_->neighbors(b)) {
      if (c != a) stack.emplace_back(b, c);
    }
  }
}

std::vector<LogAmplitude> EnvironmentCache::log_amplitudes() {
  const int c = tree_->center();
  const auto& node = tree_->node(c);
  std::vector<const BatchMessage*> inputs(node.axes.size());
  for (std::size_t a = 0; a < node.axes.size(); ++a) inputs[a] = &axis_input(c, node.axes[a]);
  const BatchMessage full = contract_batch(node.tensor, inputs, std::nullopt, num_samples_, false);
  std::vector<LogAmplitude> out(num_samples_);
  for (std::size_t s = 0; s < num_samples_; ++s) {
    const double v = full.vec(static_cast<Eigen::Index>(s), 0);
    const double ls = full.log_scale(static_cast<Eigen::Index>(s));
    if (v == 0.0 || !std::isfinite(ls)) {
      out[s] = {kNegInf, 1};
    } else {
      out[s] = {std::log(std::abs(v)) + ls, v < 0.0 ? -1 : 1};
    }
  }
  return out;
}

std::vector<LogAmplitude> log_amplitudes(const TensorTree& tree, const EncodedDataset& data) {
  EnvironmentCache cache(tree, data);
  return cache.log_amplitudes();
}

}  // namespace tnad
