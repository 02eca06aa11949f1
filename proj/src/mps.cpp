#include "tnad/mps.hpp"

#include <cmath>
#include <random>
#include <string>

#include "tnad/errors.hpp"

namespace tnad {

std::size_t exact_bond_cap(std::size_t phys_dim, std::size_t left_sites, std::size_t right_sites, std::size_t limit) {
  const std::size_t sites = std::min(left_sites, right_sites);
  std::size_t cap = 1;
  for (std::size_t i = 0; i < sites && cap < limit; ++i) cap *= phys_dim;
  return std::min(cap, limit);
}

MpsModel::MpsModel(TensorTree tree) : tree_(std::move(tree)) {
  const int length = static_cast<int>(tree_.num_nodes());
  if (length < 2) throw ArgumentError("an MPS needs at least two sites");
  if (tree_.num_slots() != tree_.num_nodes()) throw ArgumentError("an MPS carries one physical slot per site");
  for (int i = 0; i < length; ++i) {
    const auto& axes = tree_.node(i).axes;
    const AxisLabel left = i == 0 ? AxisLabel::dummy() : AxisLabel::bond(i - 1);
    const AxisLabel right = i == length - 1 ? AxisLabel::dummy() : AxisLabel::bond(i + 1);
    if (axes.size() != 3 || axes[0] != left || axes[1] != AxisLabel::physical(i) || axes[2] != right) {
      throw ArgumentError("node " + std::to_string(i) + " does not follow the MPS axis layout");
    }
  }
}

MpsModel MpsModel::random(std::size_t length, std::size_t phys_dim, std::size_t init_bond, std::uint64_t seed) {
  if (length < 2) throw ArgumentError("an MPS needs at least two sites");
  if (phys_dim < 1 || init_bond < 1) throw ArgumentError("physical and initial bond dimensions must be positive");
  std::vector<std::size_t> bonds(length + 1, 1);
  for (std::size_t j = 1; j < length; ++j) bonds[j] = exact_bond_cap(phys_dim, j, length - j, init_bond);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<TreeNode> nodes;
  nodes.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    DenseTensor core({bonds[i], phys_dim, bonds[i + 1]});
    const double scale = 1.0 / std::sqrt(static_cast<double>(core.size()));
    for (double& x : core.data()) x = scale * normal(rng);
    const int si = static_cast<int>(i);
    nodes.push_back({std::move(core),
                     {i == 0 ? AxisLabel::dummy() : AxisLabel::bond(si - 1), AxisLabel::physical(si),
                      i + 1 == length ? AxisLabel::dummy() : AxisLabel::bond(si + 1)}});
  }
  TensorTree tree(std::move(nodes), phys_dim, length, 0);
  tree.orthogonalize(0);
  tree.normalize();
  return MpsModel(std::move(tree));
}

std::vector<std::size_t> MpsModel::bond_dims() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < length(); ++i) out.push_back(core(i).extent(2));
  return out;
}

MergedTensor MpsModel::merge_bond(std::size_t site) const {
  if (site + 1 >= length()) throw ArgumentError("bond index out of range");
  if (center() != site && center() != site + 1) {
    throw ArgumentError("canonical center must sit on site " + std::to_string(site) + " or " +
                        std::to_string(site + 1));
  }
  return tree_.merge(static_cast<int>(site), static_cast<int>(site + 1));
}

SplitStats MpsModel::split_bond(const MergedTensor& merged, Direction direction, double rel_threshold,
                                std::size_t max_rank) {
  if (merged.v != merged.u + 1) throw ArgumentError("merged tensor does not span adjacent sites left to right");
  return tree_.split(merged, direction == Direction::right ? merged.v : merged.u, rel_threshold, max_rank);
}

std::vector<DirectedEdge> MpsModel::traversal_schedule() const {
  std::vector<DirectedEdge> out;
  const int last = static_cast<int>(length()) - 1;
  for (int i = 0; i < last; ++i) out.push_back({i, i + 1});
  for (int i = last; i > 0; --i) out.push_back({i, i - 1});
  return out;
}

}  // namespace tnad
