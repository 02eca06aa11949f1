#include "tnad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tnad/errors.hpp"

namespace tnad {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_extents(const Shape& shape) {
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0) throw DimensionError("tensor axis " + std::to_string(i) + " has zero extent");
  }
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

}  // namespace

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape size " + std::to_string(shape_size(shape_)));
  }
}

DenseTensor DenseTensor::scalar(double value) { return DenseTensor({}, {value}); }

DenseTensor DenseTensor::vector(std::span<const double> values) {
  return DenseTensor({values.size()}, std::vector<double>(values.begin(), values.end()));
}

DenseTensor DenseTensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return DenseTensor({rows, cols}, std::move(data));
}

DenseTensor DenseTensor::identity(std::size_t n) {
  DenseTensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
  return t;
}

DenseTensor DenseTensor::from_matrix(const Eigen::Ref<const RowMatrix>& m) {
  DenseTensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<RowMatrix>(t.data_.data(), m.rows(), m.cols()) = m;
  return t;
}

std::size_t DenseTensor::flat_index(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) throw ArgumentError("index rank does not match tensor rank");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw ArgumentError("index out of range on axis " + std::to_string(axis));
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

double DenseTensor::at(std::initializer_list<std::size_t> index) const { return data_[flat_index(index)]; }
double& DenseTensor::at(std::initializer_list<std::size_t> index) { return data_[flat_index(index)]; }

DenseTensor DenseTensor::reshaped(Shape new_shape) const {
  if (shape_size(new_shape) != data_.size()) {
    throw DimensionError("cannot reshape " + std::to_string(data_.size()) + " elements into shape of size " +
                         std::to_string(shape_size(new_shape)));
  }
  return DenseTensor(std::move(new_shape), data_);
}

Eigen::Map<const RowMatrix> DenseTensor::as_matrix() const {
  if (rank() != 2) throw ArgumentError("matrix view requires a rank-2 tensor");
  return {data_.data(), static_cast<Eigen::Index>(shape_[0]), static_cast<Eigen::Index>(shape_[1])};
}

Eigen::Map<RowMatrix> DenseTensor::as_matrix() {
  if (rank() != 2) throw ArgumentError("matrix view requires a rank-2 tensor");
  return {data_.data(), static_cast<Eigen::Index>(shape_[0]), static_cast<Eigen::Index>(shape_[1])};
}

double DenseTensor::frobenius_norm() const {
  return Eigen::Map<const Eigen::VectorXd>(data_.data(), static_cast<Eigen::Index>(data_.size())).norm();
}

DenseTensor& DenseTensor::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
  if (other.shape_ != shape_) throw DimensionError("tensor shapes differ in addition");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& other) {
  if (other.shape_ != shape_) throw DimensionError("tensor shapes differ in subtraction");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

DenseTensor operator*(double s, DenseTensor t) {
  t *= s;
  return t;
}

DenseTensor reorder_axes(const DenseTensor& a, std::span<const std::size_t> permutation) {
  const std::size_t r = a.rank();
  if (permutation.size() != r) throw ArgumentError("permutation length does not match tensor rank");
  std::vector<bool> seen(r, false);
  for (std::size_t p : permutation) {
    if (p >= r || seen[p]) throw ArgumentError("axis permutation is not a bijection");
    seen[p] = true;
  }
  bool identity = true;
  for (std::size_t k = 0; k < r; ++k) identity = identity && permutation[k] == k;
  if (identity) return a;

  Shape out_shape(r);
  for (std::size_t k = 0; k < r; ++k) out_shape[k] = a.extent(permutation[k]);
  const auto in_strides = strides_of(a.shape());
  // stride in the source for each output axis
  std::vector<std::size_t> src_stride(r);
  for (std::size_t k = 0; k < r; ++k) src_stride[k] = in_strides[permutation[k]];

  DenseTensor out(out_shape);
  auto dst = out.data();
  auto src = a.data();
  std::vector<std::size_t> idx(r, 0);
  std::size_t src_off = 0;
  const std::size_t inner = out_shape[r - 1];
  const std::size_t inner_stride = src_stride[r - 1];
  for (std::size_t flat = 0; flat < dst.size(); flat += inner) {
    for (std::size_t i = 0; i < inner; ++i) dst[flat + i] = src[src_off + i * inner_stride];
    // advance the outer multi-index (all axes except the last)
    for (std::size_t k = r - 1; k-- > 0;) {
      ++idx[k];
      src_off += src_stride[k];
      if (idx[k] < out_shape[k]) break;
      src_off -= src_stride[k] * out_shape[k];
      idx[k] = 0;
    }
  }
  return out;
}

DenseTensor contract_pair(const DenseTensor& a, const DenseTensor& b,
                          std::span<const std::pair<std::size_t, std::size_t>> axis_pairs) {
  std::vector<bool> a_used(a.rank(), false), b_used(b.rank(), false);
  for (const auto& [ia, ib] : axis_pairs) {
    if (ia >= a.rank() || ib >= b.rank()) throw ArgumentError("contraction axis out of range");
    if (a_used[ia] || b_used[ib]) throw ArgumentError("axis listed twice in contraction pairs");
    a_used[ia] = b_used[ib] = true;
    if (a.extent(ia) != b.extent(ib)) {
      throw DimensionError("contraction extent mismatch: a axis " + std::to_string(ia) + " (" +
                           std::to_string(a.extent(ia)) + ") vs b axis " + std::to_string(ib) + " (" +
                           std::to_string(b.extent(ib)) + ")");
    }
  }

  std::vector<std::size_t> a_perm, b_perm;
  Shape out_shape;
  std::size_t free_a = 1, free_b = 1, shared = 1;
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (!a_used[i]) {
      a_perm.push_back(i);
      out_shape.push_back(a.extent(i));
      free_a *= a.extent(i);
    }
  }
  for (const auto& [ia, ib] : axis_pairs) {
    a_perm.push_back(ia);
    b_perm.push_back(ib);
    shared *= a.extent(ia);
  }
  for (std::size_t i = 0; i < b.rank(); ++i) {
    if (!b_used[i]) {
      b_perm.push_back(i);
      out_shape.push_back(b.extent(i));
      free_b *= b.extent(i);
    }
  }

  const DenseTensor ap = reorder_axes(a, a_perm);
  const DenseTensor bp = reorder_axes(b, b_perm);
  Eigen::Map<const RowMatrix> am(ap.data().data(), static_cast<Eigen::Index>(free_a),
                                 static_cast<Eigen::Index>(shared));
  Eigen::Map<const RowMatrix> bm(bp.data().data(), static_cast<Eigen::Index>(shared),
                                 static_cast<Eigen::Index>(free_b));
  DenseTensor out(out_shape);
  Eigen::Map<RowMatrix>(out.data().data(), static_cast<Eigen::Index>(free_a),
                        static_cast<Eigen::Index>(free_b))
      .noalias() = am * bm;
  return out;
}

SvdResult truncated_svd(const DenseTensor& m, double rel_threshold, std::size_t max_rank) {
  if (m.rank() != 2) throw ArgumentError("truncated_svd requires a matrix");
  if (!(rel_threshold >= 0.0 && rel_threshold < 1.0)) throw ArgumentError("rel_threshold must lie in [0, 1)");
  if (max_rank < 1) throw ArgumentError("max_rank must be at least 1");
  const auto mat = m.as_matrix();
  if (mat.cwiseAbs().maxCoeff() == 0.0) throw DegenerateInputError("truncated_svd of an all-zero matrix");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = rel_threshold * s(0);
  std::size_t keep = 0;
  while (keep < static_cast<std::size_t>(s.size()) && s(keep) > 0.0 && s(keep) >= cutoff) ++keep;
  keep = std::max<std::size_t>(1, std::min(keep, max_rank));

  SvdResult res;
  const auto k = static_cast<Eigen::Index>(keep);
  res.singular_values.assign(s.data(), s.data() + keep);
  for (Eigen::Index j = k; j < s.size(); ++j) res.discarded_weight += s(j) * s(j);
  res.left_isometry = DenseTensor::from_matrix(svd.matrixU().leftCols(k));
  res.right_isometry = DenseTensor::from_matrix(svd.matrixV().leftCols(k).transpose());
  return res;
}

QrResult thin_qr(const DenseTensor& m) {
  const auto mat = m.as_matrix();
  const Eigen::Index k = std::min(mat.rows(), mat.cols());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(mat);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(mat.rows(), k);
  Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return {DenseTensor::from_matrix(q), DenseTensor::from_matrix(r)};
}

}  // namespace tnad
