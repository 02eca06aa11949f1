#include <gtest/gtest.h>

#include <random>

#include "tnad/errors.hpp"
#include "tnad/tensor.hpp"

using namespace tnad;

namespace {

DenseTensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseTensor t(std::move(shape));
  for (double& x : t.data()) x = normal(rng);
  return t;
}

}  // namespace

TEST(DenseTensor, ShapeAndIndexing) {
  DenseTensor t({2, 3, 4});
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.size(), 24u);
  t.at({1, 2, 3}) = 5.0;
  EXPECT_EQ(t[23], 5.0);
  EXPECT_THROW(t.at({2, 0, 0}), std::exception);
  EXPECT_THROW(DenseTensor({2, 2}, std::vector<double>(3)), DimensionError);
}

TEST(DenseTensor, ScalarDefault) {
  DenseTensor s;
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(DenseTensor::scalar(2.5)[0], 2.5);
}

TEST(DenseTensor, ReshapeKeepsData) {
  const DenseTensor t = random_tensor({2, 3, 4}, 1);
  const DenseTensor r = t.reshaped({6, 4});
  EXPECT_EQ(r.shape(), (Shape{6, 4}));
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i], r[i]);
  EXPECT_THROW(t.reshaped({5, 5}), DimensionError);
}

TEST(ContractPair, MatchesExplicitLoops) {
  const DenseTensor a = random_tensor({2, 3, 4}, 2);
  const DenseTensor b = random_tensor({4, 5, 3}, 3);
  // c[i, k] = sum_{j, l} a[i, j, l] b[l, k, j]
  const DenseTensor c = contract_pair(a, b, {{1, 2}, {2, 0}});
  ASSERT_EQ(c.shape(), (Shape{2, 5}));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t k = 0; k < 5; ++k) {
      double ref = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t l = 0; l < 4; ++l) ref += a.at({i, j, l}) * b.at({l, k, j});
      }
      EXPECT_NEAR(c.at({i, k}), ref, 1e-12);
    }
  }
}

TEST(ContractPair, OuterProductAndFullContraction) {
  const DenseTensor a = random_tensor({2, 3}, 4);
  const DenseTensor b = random_tensor({4}, 5);
  const DenseTensor outer = contract_pair(a, b, {});
  ASSERT_EQ(outer.shape(), (Shape{2, 3, 4}));
  EXPECT_NEAR(outer.at({1, 2, 3}), a.at({1, 2}) * b.at({3}), 1e-14);

  const DenseTensor full = contract_pair(a, a, {{0, 0}, {1, 1}});
  EXPECT_EQ(full.rank(), 0u);
  EXPECT_NEAR(full[0], a.frobenius_norm() * a.frobenius_norm(), 1e-12);
}

TEST(ContractPair, ExtentMismatchNamesAxes) {
  const DenseTensor a({2, 3});
  const DenseTensor b({4, 2});
  try {
    contract_pair(a, b, {{1, 0}});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("a axis 1"), std::string::npos);
    EXPECT_NE(msg.find("b axis 0"), std::string::npos);
  }
  EXPECT_THROW(contract_pair(a, b, {{0, 1}, {0, 1}}), ArgumentError);
}

TEST(ReorderAxes, TransposeSemantics) {
  const DenseTensor t = random_tensor({2, 3, 4}, 6);
  const DenseTensor p = reorder_axes(t, {2, 0, 1});
  ASSERT_EQ(p.shape(), (Shape{4, 2, 3}));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(p.at({k, i, j}), t.at({i, j, k}));
    }
  }
  EXPECT_THROW(reorder_axes(t, {0, 0, 1}), ArgumentError);
  EXPECT_THROW(reorder_axes(t, {0, 1}), ArgumentError);
}

TEST(TruncatedSvd, SingularValuesMatchGramSpectrum) {
  const DenseTensor m = random_tensor({7, 5}, 7);
  const SvdResult svd = truncated_svd(m, 0.0, 100);
  ASSERT_EQ(svd.rank(), 5u);
  const Eigen::MatrixXd gram = m.as_matrix().transpose() * m.as_matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(svd.singular_values[i], std::sqrt(es.eigenvalues()(4 - static_cast<Eigen::Index>(i))), 1e-10);
  }
  EXPECT_NEAR(svd.discarded_weight, 0.0, 1e-15);
}

TEST(TruncatedSvd, ReconstructionErrorEqualsDiscardedWeight) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DenseTensor m = random_tensor({6, 8}, 100 + seed);
    const SvdResult svd = truncated_svd(m, 0.0, 3);
    ASSERT_EQ(svd.rank(), 3u);
    const auto u = svd.left_isometry.as_matrix();
    const auto v = svd.right_isometry.as_matrix();
    Eigen::VectorXd s(3);
    for (int i = 0; i < 3; ++i) s(i) = svd.singular_values[i];
    const Eigen::MatrixXd approx = u * s.asDiagonal() * v;
    const double err = (m.as_matrix() - approx).squaredNorm();
    EXPECT_NEAR(err, svd.discarded_weight, 1e-10);
    EXPECT_LT((u.transpose() * u - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((v * v.transpose() - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(TruncatedSvd, RelativeThresholdAndRankFloor) {
  DenseTensor m({3, 3});
  m.at({0, 0}) = 1.0;
  m.at({1, 1}) = 0.5;
  m.at({2, 2}) = 1e-6;
  EXPECT_EQ(truncated_svd(m, 1e-4, 10).rank(), 2u);
  EXPECT_EQ(truncated_svd(m, 0.5, 10).rank(), 2u);
  EXPECT_EQ(truncated_svd(m, 0.6, 10).rank(), 1u);
  EXPECT_EQ(truncated_svd(m, 0.0, 1).rank(), 1u);
  EXPECT_NEAR(truncated_svd(m, 0.6, 10).discarded_weight, 0.25 + 1e-12, 1e-14);

  DenseTensor rank_one({2, 2});
  rank_one.at({0, 0}) = 3.0;
  EXPECT_EQ(truncated_svd(rank_one, 0.0, 10).rank(), 1u);  // exact zeros are dropped

  EXPECT_THROW(truncated_svd(DenseTensor({2, 2}), 0.0, 2), DegenerateInputError);
  EXPECT_THROW(truncated_svd(m, 1.0, 2), ArgumentError);
  EXPECT_THROW(truncated_svd(m, 0.1, 0), ArgumentError);
  EXPECT_THROW(truncated_svd(DenseTensor({2, 2, 2}), 0.1, 2), ArgumentError);
}

TEST(ThinQr, IsometryAndReconstruction) {
  for (const Shape& shape : {Shape{6, 3}, Shape{3, 6}, Shape{4, 4}}) {
    const DenseTensor m = random_tensor(shape, 11);
    const QrResult qr = thin_qr(m);
    const auto q = qr.q.as_matrix();
    const auto r = qr.r.as_matrix();
    const auto k = std::min(shape[0], shape[1]);
    EXPECT_EQ(qr.q.shape(), (Shape{shape[0], k}));
    EXPECT_LT((q.transpose() * q - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((q * r - m.as_matrix()).cwiseAbs().maxCoeff(), 1e-12);
  }
}
