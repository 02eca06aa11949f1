#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tnad/tensor.hpp"

namespace tnad {

/// Shifted Legendre polynomial on [0, 1] via the three-term recurrence.
/// Throws RangeError if x lies outside [0, 1].
double shifted_legendre_eval(std::size_t n, double x);

/// Gauss-Legendre nodes and weights mapped onto [0, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// `n` point rule, exact for polynomials of degree <= 2n - 1.
QuadratureRule gauss_legendre_unit(std::size_t n);

/// Per-feature affine map onto the unit interval.
class FeatureRescaler {
 public:
  FeatureRescaler() = default;
  FeatureRescaler(std::vector<double> mins, std::vector<double> maxs);

  bool fitted() const noexcept { return !mins_.empty(); }
  std::size_t num_features() const noexcept { return mins_.size(); }
  double min(std::size_t i) const { return mins_.at(i); }
  double max(std::size_t i) const { return maxs_.at(i); }

  /// Affine image of `raw`; not clamped.
  double rescale(std::size_t feature, double raw) const;
  /// Affine image clamped to [0, 1]; unseen values outside the fitted range stay scorable.
  double rescale_clamped(std::size_t feature, double raw) const;
  double inverse(std::size_t feature, double unit) const;
  /// Scale factor d(raw)/d(unit) of the inverse map.
  double span(std::size_t feature) const { return maxs_.at(feature) - mins_.at(feature); }

 private:
  std::vector<double> mins_;
  std::vector<double> maxs_;
};

/// Fits per-feature ranges on a samples x features matrix and widens them so training
/// values land in [margin, 1 - margin]. Throws FitError naming a constant feature.
FeatureRescaler fit_rescaler(const Eigen::MatrixXd& data, double margin = 0.0);

/// Encoded sample: L vectors of N reals stored contiguously.
class EncodedSample {
 public:
  EncodedSample() = default;
  EncodedSample(std::size_t num_features, std::size_t phys_dim)
      : num_features_(num_features), phys_dim_(phys_dim), values_(num_features * phys_dim, 0.0) {}

  std::size_t num_features() const noexcept { return num_features_; }
  std::size_t phys_dim() const noexcept { return phys_dim_; }
  std::span<const double> feature(std::size_t i) const { return {values_.data() + i * phys_dim_, phys_dim_}; }
  std::span<double> feature(std::size_t i) { return {values_.data() + i * phys_dim_, phys_dim_}; }

  friend bool operator==(const EncodedSample&, const EncodedSample&) = default;

 private:
  std::size_t num_features_ = 0;
  std::size_t phys_dim_ = 0;
  std::vector<double> values_;
};

/// Column-batched encoding of a data set: one (samples x N) matrix per feature.
struct EncodedDataset {
  std::vector<RowMatrix> features;

  std::size_t num_samples() const { return features.empty() ? 0 : static_cast<std::size_t>(features[0].rows()); }
  std::size_t num_features() const { return features.size(); }
  std::size_t phys_dim() const { return features.empty() ? 0 : static_cast<std::size_t>(features[0].cols()); }

  EncodedSample sample(std::size_t row) const;
  EncodedDataset subset(std::span<const std::size_t> rows) const;
  static EncodedDataset from_samples(std::span<const EncodedSample> samples);
};

/// Orthonormal shifted-Legendre feature map xi: [0,1] -> R^N, g_n(x) = sqrt(2n+1) P_n(x).
class LegendreFeatureMap {
 public:
  LegendreFeatureMap() = default;
  LegendreFeatureMap(std::size_t n_functions, FeatureRescaler rescaler);

  std::size_t n_functions() const noexcept { return n_functions_; }
  std::size_t num_features() const noexcept { return rescaler_.num_features(); }
  const FeatureRescaler& rescaler() const noexcept { return rescaler_; }

  /// Encoding of an already rescaled value in [0, 1].
  std::vector<double> encode_unit(double x) const;
  void encode_unit(double x, std::span<double> out) const;

  /// Rescales (with clamping) and encodes one raw feature value.
  std::vector<double> encode_value(std::size_t feature_index, double raw) const;
  EncodedSample encode_sample(std::span<const double> raw_sample) const;
  EncodedDataset encode_dataset(const Eigen::MatrixXd& raw) const;

 private:
  std::size_t n_functions_ = 0;
  FeatureRescaler rescaler_;
};

/// Basis vector evaluation without a rescaler; used for padding slots and quadrature.
std::vector<double> legendre_basis(std::size_t n_functions, double x);
void legendre_basis(double x, std::span<double> out);

}  // namespace tnad
