#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tnad/legendre.hpp"
#include "tnad/tree_network.hpp"

namespace tnad {

/// Per-sample anomaly score -2 log|Psi(x)|. Vanishing amplitudes map to the largest
/// finite score plus one.
std::vector<double> score_samples(const TensorTree& tree, const EncodedDataset& data);

/// Probability that a random anomaly (label 1) outscores a random regular sample
/// (label 0), ties counted one half.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

struct EerResult {
  double threshold = 0.0;  // samples with score >= threshold are called anomalous
  double tpr = 0.0;
  double tnr = 0.0;
};

/// Grid threshold over the finite scores minimizing |TPR - TNR|; ties prefer higher TPR,
/// then the lower threshold.
EerResult eer_threshold(std::span<const double> scores, std::span<const int> labels);

/// Bins per axis for n samples: round(xi/6 + 2/(3 xi) + 1/3),
/// xi = (8 + 324 n + 12 sqrt(36 n + 729 n^2))^(1/3).
std::size_t histogram_bins(std::size_t n);

/// Plug-in mutual information (nats) of columns i and j from an equal-width 2-D
/// histogram. A constant column yields 0 and sets *degenerate when given.
double histogram_mi(const Eigen::MatrixXd& data, std::size_t i, std::size_t j, bool* degenerate = nullptr);

/// All pairs of histogram_mi with a zero diagonal.
Eigen::MatrixXd histogram_mi_matrix(const Eigen::MatrixXd& data);

/// Indices (i, j), i < j, of the `count` largest off-diagonal entries of a symmetric matrix.
std::vector<std::pair<std::size_t, std::size_t>> top_pairs(const Eigen::MatrixXd& m, std::size_t count);

}  // namespace tnad
