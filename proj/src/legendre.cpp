#include "tnad/legendre.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "tnad/errors.hpp"

namespace tnad {

double shifted_legendre_eval(std::size_t n, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw RangeError("shifted Legendre argument outside [0, 1]: " + std::to_string(x));
  const double t = 2.0 * x - 1.0;
  double prev = 1.0;
  if (n == 0) return prev;
  double cur = t;
  for (std::size_t k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0) * t * cur - static_cast<double>(k) * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

void legendre_basis(double x, std::span<double> out) {
  if (!(x >= 0.0 && x <= 1.0)) throw RangeError("encoding argument outside [0, 1]: " + std::to_string(x));
  const double t = 2.0 * x - 1.0;
  double prev = 0.0, cur = 1.0;
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = std::sqrt(2.0 * n + 1.0) * cur;
    const double next = ((2.0 * n + 1.0) * t * cur - static_cast<double>(n) * prev) / (n + 1.0);
    prev = cur;
    cur = next;
  }
}

std::vector<double> legendre_basis(std::size_t n_functions, double x) {
  std::vector<double> out(n_functions);
  legendre_basis(x, out);
  return out;
}

QuadratureRule gauss_legendre_unit(std::size_t n) {
  if (n == 0) throw ArgumentError("quadrature needs at least one node");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration on P_n over [-1, 1] from the Chebyshev-like initial guess
    double z = std::cos(std::numbers::pi * (i + 0.75) / (nd + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = z;
      for (std::size_t k = 1; k < n; ++k) {
        const double p2 = ((2.0 * k + 1.0) * z * p1 - static_cast<double>(k) * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = z;
        p0 = 1.0;
      }
      dp = nd * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = z;
    for (std::size_t k = 1; k < n; ++k) {
      const double p2 = ((2.0 * k + 1.0) * z * p1 - static_cast<double>(k) * p0) / (k + 1.0);
      p0 = p1;
      p1 = p2;
    }
    dp = n == 1 ? 1.0 : nd * (z * p1 - p0) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = 0.5 * (1.0 - z);
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + z);
    rule.weights[i] = rule.weights[n - 1 - i] = 0.5 * w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.5;
  return rule;
}

FeatureRescaler::FeatureRescaler(std::vector<double> mins, std::vector<double> maxs)
    : mins_(std::move(mins)), maxs_(std::move(maxs)) {
  if (mins_.size() != maxs_.size()) throw ArgumentError("rescaler min/max lengths differ");
  for (std::size_t i = 0; i < mins_.size(); ++i) {
    if (!(maxs_[i] > mins_[i])) throw FitError("rescaler range of feature " + std::to_string(i) + " is empty");
  }
}

double FeatureRescaler::rescale(std::size_t feature, double raw) const {
  if (!fitted()) throw StateError("feature rescaler used before fitting");
  return (raw - mins_.at(feature)) / (maxs_.at(feature) - mins_.at(feature));
}

double FeatureRescaler::rescale_clamped(std::size_t feature, double raw) const {
  const double u = rescale(feature, raw);
  if (std::isnan(u)) throw RangeError("feature " + std::to_string(feature) + " is not a number");
  return std::clamp(u, 0.0, 1.0);
}

double FeatureRescaler::inverse(std::size_t feature, double unit) const {
  if (!fitted()) throw StateError("feature rescaler used before fitting");
  return mins_.at(feature) + unit * (maxs_.at(feature) - mins_.at(feature));
}

FeatureRescaler fit_rescaler(const Eigen::MatrixXd& data, double margin) {
  if (data.rows() < 2) throw ArgumentError("fit_rescaler needs at least two samples");
  if (!(margin >= 0.0 && margin <= 0.1)) throw ArgumentError("rescaler margin must lie in [0, 0.1]");
  std::vector<double> mins(data.cols()), maxs(data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    const double lo = data.col(j).minCoeff();
    const double hi = data.col(j).maxCoeff();
    if (!(hi > lo)) throw FitError("feature " + std::to_string(j) + " is constant");
    const double width = (hi - lo) / (1.0 - 2.0 * margin);
    mins[j] = lo - margin * width;
    maxs[j] = mins[j] + width;
  }
  return FeatureRescaler(std::move(mins), std::move(maxs));
}

EncodedSample EncodedDataset::sample(std::size_t row) const {
  EncodedSample s(num_features(), phys_dim());
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto dst = s.feature(i);
    for (std::size_t n = 0; n < dst.size(); ++n) dst[n] = features[i](static_cast<Eigen::Index>(row), n);
  }
  return s;
}

EncodedDataset EncodedDataset::subset(std::span<const std::size_t> rows) const {
  EncodedDataset out;
  out.features.reserve(features.size());
  for (const auto& f : features) {
    RowMatrix m(rows.size(), f.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) m.row(r) = f.row(static_cast<Eigen::Index>(rows[r]));
    out.features.push_back(std::move(m));
  }
  return out;
}

EncodedDataset EncodedDataset::from_samples(std::span<const EncodedSample> samples) {
  EncodedDataset out;
  if (samples.empty()) return out;
  const std::size_t length = samples[0].num_features();
  const std::size_t n = samples[0].phys_dim();
  out.features.assign(length, RowMatrix(samples.size(), n));
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (samples[s].num_features() != length || samples[s].phys_dim() != n) {
      throw DimensionError("encoded samples have inconsistent shapes");
    }
    for (std::size_t i = 0; i < length; ++i) {
      auto v = samples[s].feature(i);
      for (std::size_t k = 0; k < n; ++k) out.features[i](s, k) = v[k];
    }
  }
  return out;
}

LegendreFeatureMap::LegendreFeatureMap(std::size_t n_functions, FeatureRescaler rescaler)
    : n_functions_(n_functions), rescaler_(std::move(rescaler)) {
  if (n_functions_ < 1) throw ArgumentError("feature map needs at least one function");
}

std::vector<double> LegendreFeatureMap::encode_unit(double x) const { return legendre_basis(n_functions_, x); }

void LegendreFeatureMap::encode_unit(double x, std::span<double> out) const { legendre_basis(x, out); }

std::vector<double> LegendreFeatureMap::encode_value(std::size_t feature_index, double raw) const {
  if (!rescaler_.fitted()) throw StateError("feature map used before its rescaler was fitted");
  if (feature_index >= rescaler_.num_features()) throw ArgumentError("feature index out of range");
  return encode_unit(rescaler_.rescale_clamped(feature_index, raw));
}

EncodedSample LegendreFeatureMap::encode_sample(std::span<const double> raw_sample) const {
  if (!rescaler_.fitted()) throw StateError("feature map used before its rescaler was fitted");
  if (raw_sample.size() != rescaler_.num_features()) {
    throw ArgumentError("sample has " + std::to_string(raw_sample.size()) + " features, encoder expects " +
                        std::to_string(rescaler_.num_features()));
  }
  EncodedSample s(raw_sample.size(), n_functions_);
  for (std::size_t i = 0; i < raw_sample.size(); ++i) {
    legendre_basis(rescaler_.rescale_clamped(i, raw_sample[i]), s.feature(i));
  }
  return s;
}

EncodedDataset LegendreFeatureMap::encode_dataset(const Eigen::MatrixXd& raw) const {
  if (!rescaler_.fitted()) throw StateError("feature map used before its rescaler was fitted");
  if (static_cast<std::size_t>(raw.cols()) != rescaler_.num_features()) {
    throw ArgumentError("data has " + std::to_string(raw.cols()) + " features, encoder expects " +
                        std::to_string(rescaler_.num_features()));
  }
  EncodedDataset out;
  out.features.assign(raw.cols(), RowMatrix(raw.rows(), n_functions_));
  std::vector<double> buf(n_functions_);
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    for (Eigen::Index r = 0; r < raw.rows(); ++r) {
      legendre_basis(rescaler_.rescale_clamped(j, raw(r, j)), buf);
      for (std::size_t k = 0; k < n_functions_; ++k) out.features[j](r, k) = buf[k];
    }
  }
  return out;
}

}  // namespace tnad
