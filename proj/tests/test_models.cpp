#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracle.hpp"
#include "tnad/errors.hpp"
#include "tnad/mps.hpp"
#include "tnad/ttn.hpp"

using namespace tnad;

namespace {

EncodedSample sample_from_unit(const std::vector<double>& x, std::size_t n, std::size_t slots) {
  EncodedSample s(slots, n);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto v = legendre_basis(n, x[i]);
    std::copy(v.begin(), v.end(), s.feature(i).begin());
  }
  return s;
}

double amplitude(const TensorTree& tree, const std::vector<double>& x) {
  const LogAmplitude a = tree.log_amplitude(sample_from_unit(x, tree.phys_dim(), tree.num_input_slots()));
  return a.sign * std::exp(a.log_abs);
}

double oracle_norm_sq(const TensorTree& tree) {
  double s = 0.0;
  for (double c : oracle::coefficient_tensor(tree)) s += c * c;
  return s;
}

}  // namespace

TEST(MpsModel, RandomIsCanonicalAndNormalized) {
  const MpsModel mps = MpsModel::random(5, 3, 4, 7);
  EXPECT_EQ(mps.length(), 5u);
  EXPECT_EQ(mps.center(), 0u);
  EXPECT_LT(mps.tree().canonical_defect(), 1e-12);
  EXPECT_NEAR(mps.tree().norm(), 1.0, 1e-12);
  EXPECT_NEAR(oracle_norm_sq(mps.tree()), 1.0, 1e-10);
  // caps: min(init, N^j, N^(L-j))
  EXPECT_EQ(mps.bond_dims(), (std::vector<std::size_t>{3, 4, 4, 3}));
  EXPECT_EQ(mps.core(0).shape(), (Shape{1, 3, 3}));
  EXPECT_EQ(mps.core(4).shape(), (Shape{3, 3, 1}));
}

TEST(MpsModel, SameSeedSameModel) {
  const MpsModel a = MpsModel::random(4, 2, 3, 11);
  const MpsModel b = MpsModel::random(4, 2, 3, 11);
  const MpsModel c = MpsModel::random(4, 2, 3, 12);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.core(i), b.core(i));
  EXPECT_NE(a.core(1), c.core(1));
}

TEST(MpsModel, AmplitudeMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MpsModel mps = MpsModel::random(4, 2, 3, seed);
    const auto c = oracle::coefficient_tensor(mps.tree());
    const auto pts = oracle::uniform_unit(5, 4, 100 + seed);
    for (Eigen::Index r = 0; r < pts.rows(); ++r) {
      std::vector<double> x;
      for (Eigen::Index j = 0; j < 4; ++j) x.push_back(pts(r, j));
      EXPECT_NEAR(amplitude(mps.tree(), x), oracle::amplitude(c, 2, x), 1e-10);
    }
  }
}

TEST(MpsModel, GaugeInvarianceUnderCenterMoves) {
  MpsModel mps = MpsModel::random(6, 3, 5, 3);
  const std::vector<double> x{0.1, 0.4, 0.5, 0.9, 0.33, 0.71};
  const double before = amplitude(mps.tree(), x);
  for (std::size_t target : {3u, 5u, 1u, 0u, 4u}) {
    mps.canonicalize(target);
    EXPECT_EQ(mps.center(), target);
    EXPECT_LT(mps.tree().canonical_defect(), 1e-10);
    EXPECT_NEAR(amplitude(mps.tree(), x), before, 1e-10);
    EXPECT_NEAR(mps.tree().norm(), 1.0, 1e-10);
  }
}

TEST(MpsModel, OrthogonalizeFromArbitraryTensors) {
  MpsModel mps = MpsModel::random(5, 2, 3, 4);
  oracle::scramble(mps.tree(), 99);
  const std::vector<double> x{0.2, 0.8, 0.6, 0.1, 0.5};
  const double before = amplitude(mps.tree(), x);
  const double norm_sq = oracle_norm_sq(mps.tree());
  mps.tree().orthogonalize(2);
  EXPECT_LT(mps.tree().canonical_defect(), 1e-10);
  EXPECT_NEAR(amplitude(mps.tree(), x), before, 1e-10 * std::max(1.0, std::abs(before)));
  EXPECT_NEAR(mps.tree().norm() * mps.tree().norm(), norm_sq, 1e-10 * norm_sq);
}

TEST(MpsModel, MergeSplitRoundTripWithoutTruncation) {
  MpsModel mps = MpsModel::random(5, 2, 4, 5);
  mps.canonicalize(2);
  const std::vector<double> x{0.3, 0.6, 0.9, 0.2, 0.45};
  const double before = amplitude(mps.tree(), x);
  const MergedTensor merged = mps.merge_bond(2);
  EXPECT_EQ(merged.tensor.shape(), (Shape{4, 2, 2, 2}));
  const SplitStats st = mps.split_bond(merged, Direction::right, 0.0, 100);
  EXPECT_EQ(mps.center(), 3u);
  EXPECT_NEAR(st.discarded_weight, 0.0, 1e-20);
  EXPECT_LT(mps.tree().canonical_defect(), 1e-10);
  EXPECT_NEAR(amplitude(mps.tree(), x), before, 1e-10);

  const MergedTensor back = mps.merge_bond(2);
  mps.split_bond(back, Direction::left, 0.0, 100);
  EXPECT_EQ(mps.center(), 2u);
  EXPECT_NEAR(amplitude(mps.tree(), x), before, 1e-10);
  EXPECT_THROW(mps.merge_bond(0), ArgumentError);
}

TEST(MpsModel, TruncatedSplitCapsBondAndReportsWeight) {
  MpsModel mps = MpsModel::random(4, 3, 9, 6);
  mps.canonicalize(1);
  const MergedTensor merged = mps.merge_bond(1);
  const SplitStats st = mps.split_bond(merged, Direction::right, 0.0, 2);
  EXPECT_EQ(st.bond_dim, 2u);
  EXPECT_EQ(mps.bond_dims()[1], 2u);
  EXPECT_GT(st.discarded_weight, 0.0);
  EXPECT_NEAR(mps.tree().norm(), 1.0, 1e-12);
  EXPECT_LT(mps.tree().canonical_defect(), 1e-10);
}

TEST(MpsModel, ScheduleIsLeftRightLeft) {
  const MpsModel mps = MpsModel::random(4, 2, 2, 0);
  const auto s = mps.traversal_schedule();
  const std::vector<DirectedEdge> expected{{0, 1}, {1, 2}, {2, 3}, {3, 2}, {2, 1}, {1, 0}};
  EXPECT_EQ(s, expected);
  EXPECT_THROW(MpsModel::random(1, 2, 2, 0), ArgumentError);
}

TEST(ExactBondCap, Saturates) {
  EXPECT_EQ(exact_bond_cap(2, 1, 5, 100), 2u);
  EXPECT_EQ(exact_bond_cap(2, 3, 3, 100), 8u);
  EXPECT_EQ(exact_bond_cap(10, 40, 40, 7), 7u);
}

TEST(TtnModel, TopologyAndPadding) {
  const TtnModel even = TtnModel::random(8, 2, 3, 1);
  EXPECT_EQ(even.num_leaves(), 4u);
  EXPECT_EQ(even.padding(), 0u);
  EXPECT_EQ(even.parent(even.root()), -1);
  EXPECT_EQ(even.center(), even.rightmost_leaf());
  EXPECT_LT(even.tree().canonical_defect(), 1e-12);
  EXPECT_NEAR(oracle_norm_sq(even.tree()), 1.0, 1e-10);

  const TtnModel odd = TtnModel::random(57, 3, 4, 1);
  EXPECT_EQ(odd.num_leaves(), 29u);
  EXPECT_EQ(odd.padding(), 1u);
  EXPECT_EQ(odd.tree().num_input_slots(), 57u);
  const auto pad = legendre_basis(3, 0.5);
  ASSERT_TRUE(odd.tree().fixed_slot(57).has_value());
  EXPECT_EQ(*odd.tree().fixed_slot(57), pad);
  // left subtree takes the larger half
  const auto& kids = odd.children(odd.root());
  ASSERT_EQ(kids.size(), 2u);
  std::function<std::size_t(int)> leaves = [&](int node) -> std::size_t {
    if (odd.children(node).empty()) return 1;
    std::size_t c = 0;
    for (int k : odd.children(node)) c += leaves(k);
    return c;
  };
  EXPECT_EQ(leaves(kids[0]), 15u);
  EXPECT_EQ(leaves(kids[1]), 14u);

  const TtnModel single = TtnModel::random(2, 2, 2, 0);
  EXPECT_EQ(single.num_leaves(), 1u);
  EXPECT_EQ(single.tree().num_nodes(), 1u);
  EXPECT_THROW(TtnModel::random(1, 2, 2, 0), ArgumentError);
}

TEST(TtnModel, AmplitudeMatchesBruteForceWithPadding) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const std::size_t l = 3 + seed % 2;
    const TtnModel ttn = TtnModel::random(l, 2, 3, seed);
    EXPECT_EQ(ttn.padding(), l % 2);
    const auto c = oracle::effective_tensor(ttn.tree());
    const auto pts = oracle::uniform_unit(4, l, 300 + seed);
    for (Eigen::Index r = 0; r < pts.rows(); ++r) {
      std::vector<double> x;
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(l); ++j) x.push_back(pts(r, j));
      EXPECT_NEAR(amplitude(ttn.tree(), x), oracle::amplitude(c, 2, x), 1e-10);
    }
  }
}

TEST(TtnModel, GaugeInvarianceAndEdgeRoundTrip) {
  TtnModel ttn = TtnModel::random(8, 2, 4, 9);
  const std::vector<double> x{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  const double before = amplitude(ttn.tree(), x);
  for (int node = 0; node < static_cast<int>(ttn.tree().num_nodes()); ++node) {
    ttn.canonicalize(node);
    EXPECT_LT(ttn.tree().canonical_defect(), 1e-10);
    EXPECT_NEAR(amplitude(ttn.tree(), x), before, 1e-10);
  }
  ttn.canonicalize(ttn.root());
  const int child = ttn.children(ttn.root())[0];
  const MergedTensor m = ttn.merge_edge(ttn.root(), child);
  ttn.split_edge(m, child, 0.0, 100);
  EXPECT_EQ(ttn.center(), child);
  EXPECT_LT(ttn.tree().canonical_defect(), 1e-10);
  EXPECT_NEAR(amplitude(ttn.tree(), x), before, 1e-10);
  EXPECT_THROW(ttn.merge_edge(ttn.root(), ttn.children(ttn.root())[1]), ArgumentError);
}

TEST(TtnModel, ScheduleVisitsEveryEdgeTwice) {
  const TtnModel ttn = TtnModel::random(12, 2, 2, 0);
  const auto s = ttn.traversal_schedule();
  const auto edges = ttn.tree().edges();
  EXPECT_EQ(s.size(), 2 * edges.size());
  EXPECT_EQ(s.front().from, ttn.rightmost_leaf());
  EXPECT_EQ(s.back().to, ttn.rightmost_leaf());
  std::multiset<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_TRUE(ttn.tree().adjacent(s[i].from, s[i].to));
    if (i > 0) EXPECT_EQ(s[i].from, s[i - 1].to);  // the center walks edge by edge
    seen.insert({std::min(s[i].from, s[i].to), std::max(s[i].from, s[i].to)});
  }
  for (const auto& e : edges) EXPECT_EQ(seen.count(e), 2u);
}

TEST(TtnModel, PadSlotChangesNothingForUniformPad) {
  // The fixed pad vector enters the amplitude exactly like an observed value of 0.5.
  const TtnModel ttn = TtnModel::random(3, 3, 3, 21);
  const auto full = oracle::coefficient_tensor(ttn.tree());
  const std::vector<double> x{0.2, 0.7, 0.4};
  const std::vector<double> x_pad{0.2, 0.7, 0.4, 0.5};
  EXPECT_NEAR(amplitude(ttn.tree(), x), oracle::amplitude(full, 3, x_pad), 1e-12);
}

TEST(TensorTree, SetNodeTensorChecksShape) {
  MpsModel mps = MpsModel::random(3, 2, 2, 0);
  EXPECT_THROW(mps.tree().set_node_tensor(0, DenseTensor({1, 3, 2})), DimensionError);
  EXPECT_THROW(mps.tree().move_center(2), ArgumentError);
}
