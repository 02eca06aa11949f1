#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace tnad {

using Shape = std::vector<std::size_t>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense real tensor with row-major storage. A rank-0 tensor holds one element.
class DenseTensor {
 public:
  DenseTensor() : data_(1, 0.0) {}
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<double> data);

  static DenseTensor scalar(double value);
  static DenseTensor vector(std::span<const double> values);
  static DenseTensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static DenseTensor identity(std::size_t n);
  static DenseTensor from_matrix(const Eigen::Ref<const RowMatrix>& m);

  std::size_t rank() const noexcept { return shape_.size(); }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double operator[](std::size_t flat) const { return data_[flat]; }
  double& operator[](std::size_t flat) { return data_[flat]; }

  double at(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);

  /// Same data, new shape; total size must match.
  DenseTensor reshaped(Shape new_shape) const;

  /// Rank-2 view; fails for any other rank.
  Eigen::Map<const RowMatrix> as_matrix() const;
  Eigen::Map<RowMatrix> as_matrix();

  double frobenius_norm() const;
  DenseTensor& operator*=(double s);
  DenseTensor& operator+=(const DenseTensor& other);
  DenseTensor& operator-=(const DenseTensor& other);

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  std::size_t flat_index(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

DenseTensor operator*(double s, DenseTensor t);

std::size_t shape_size(const Shape& shape);

/// Contracts `a` with `b` over the given (a-axis, b-axis) pairs. Result axes are the
/// unpaired axes of `a` in order followed by the unpaired axes of `b`.
DenseTensor contract_pair(const DenseTensor& a, const DenseTensor& b,
                          std::span<const std::pair<std::size_t, std::size_t>> axis_pairs);

inline DenseTensor contract_pair(const DenseTensor& a, const DenseTensor& b,
                                 std::initializer_list<std::pair<std::size_t, std::size_t>> pairs) {
  return contract_pair(a, b, std::span<const std::pair<std::size_t, std::size_t>>(pairs.begin(), pairs.size()));
}

/// result[i_{p(0)}, ..., i_{p(r-1)}] = a[i_0, ..., i_{r-1}], i.e. result axis k is input axis p[k].
DenseTensor reorder_axes(const DenseTensor& a, std::span<const std::size_t> permutation);

inline DenseTensor reorder_axes(const DenseTensor& a, std::initializer_list<std::size_t> permutation) {
  return reorder_axes(a, std::span<const std::size_t>(permutation.begin(), permutation.size()));
}

struct SvdResult {
  DenseTensor left_isometry;   // rows x k, orthonormal columns
  std::vector<double> singular_values;
  DenseTensor right_isometry;  // k x cols, orthonormal rows
  double discarded_weight = 0.0;

  std::size_t rank() const noexcept { return singular_values.size(); }
};

/// Keeps the largest k singular values, k = min(max_rank, #{sigma_j >= rel_threshold * sigma_max}),
/// never fewer than one. Exactly vanishing values are always dropped.
SvdResult truncated_svd(const DenseTensor& m, double rel_threshold, std::size_t max_rank);

struct QrResult {
  DenseTensor q;  // rows x k isometry, k = min(rows, cols)
  DenseTensor r;  // k x cols
};

/// Thin Householder QR of a matrix.
QrResult thin_qr(const DenseTensor& m);

}  // namespace tnad
