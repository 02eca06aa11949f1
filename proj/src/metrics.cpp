#include "tnad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tnad/errors.hpp"

namespace tnad {

namespace {

void check_binary(std::span<const double> scores, std::span<const int> labels, std::size_t& pos, std::size_t& neg) {
  if (scores.size() != labels.size()) throw ArgumentError("scores and labels differ in length");
  pos = neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (std::isnan(scores[i])) throw ArgumentError("score " + std::to_string(i) + " is NaN");
    if (labels[i] == 1) {
      ++pos;
    } else if (labels[i] == 0) {
      ++neg;
    } else {
      throw ArgumentError("labels must be 0 or 1");
    }
  }
  if (pos == 0 || neg == 0) throw ArgumentError("both classes must be present");
}

}  // namespace

std::vector<double> score_samples(const TensorTree& tree, const EncodedDataset& data) {
  const auto amps = log_amplitudes(tree, data);
  std::vector<double> out(amps.size());
  double top = -std::numeric_limits<double>::infinity();
  bool vanishing = false;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    if (std::isfinite(amps[i].log_abs)) {
      out[i] = -2.0 * amps[i].log_abs;
      top = std::max(top, out[i]);
    } else {
      vanishing = true;
    }
  }
  if (vanishing) {
    const double sentinel = std::isfinite(top) ? top + 1.0 : 1.0;
    for (std::size_t i = 0; i < amps.size(); ++i) {
      if (!std::isfinite(amps[i].log_abs)) out[i] = sentinel;
    }
  }
  return out;
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t pos = 0, neg = 0;
  check_binary(scores, labels, pos, neg);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the concordance count stays an exact integer.
  std::uint64_t twice = 0;
  std::uint64_t neg_below = 0;
  for (std::size_t g = 0; g < order.size();) {
    std::size_t e = g;
    std::uint64_t p = 0, n = 0;
    while (e < order.size() && scores[order[e]] == scores[order[g]]) {
      (labels[order[e]] == 1 ? p : n) += 1;
      ++e;
    }
    twice += 2 * p * neg_below + p * n;
    neg_below += n;
    g = e;
  }
  return 0.5 * static_cast<double>(twice) / (static_cast<double>(pos) * static_cast<double>(neg));
}

EerResult eer_threshold(std::span<const double> scores, std::span<const int> labels) {
  std::size_t pos = 0, neg = 0;
  check_binary(scores, labels, pos, neg);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isfinite(scores[i])) order.push_back(i);
  }
  if (order.empty()) throw ArgumentError("no finite scores");
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Samples at -inf are always below every grid threshold; +inf always above.
  std::size_t neg_below = 0, pos_below = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] == -std::numeric_limits<double>::infinity()) (labels[i] == 1 ? pos_below : neg_below) += 1;
  }
  // Compare |tp/pos - tn/neg| exactly as |tp*neg - tn*pos|.
  bool have = false;
  std::uint64_t best_gap = 0, best_tp = 0;
  EerResult best;
  for (std::size_t g = 0; g < order.size();) {
    const double t = scores[order[g]];
    const std::uint64_t tp = pos - pos_below;
    const std::uint64_t tn = neg_below;
    const std::uint64_t a = tp * neg, b = tn * pos;
    const std::uint64_t gap = a > b ? a - b : b - a;
    if (!have || gap < best_gap || (gap == best_gap && tp > best_tp)) {
      have = true;
      best_gap = gap;
      best_tp = tp;
      best = {t, static_cast<double>(tp) / static_cast<double>(pos), static_cast<double>(tn) / static_cast<double>(neg)};
    }
    std::size_t e = g;
    while (e < order.size() && scores[order[e]] == t) {
      (labels[order[e]] == 1 ? pos_below : neg_below) += 1;
      ++e;
    }
    g = e;
  }
  return best;
}

std::size_t histogram_bins(std::size_t n) {
  const double nn = static_cast<double>(n);
  const double xi = std::cbrt(8.0 + 324.0 * nn + 12.0 * std::sqrt(36.0 * nn + 729.0 * nn * nn));
  return static_cast<std::size_t>(std::max(1.0, std::round(xi / 6.0 + 2.0 / (3.0 * xi) + 1.0 / 3.0)));
}

double histogram_mi(const Eigen::MatrixXd& data, std::size_t i, std::size_t j, bool* degenerate) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (n < 30) throw ArgumentError("histogram MI needs at least 30 samples");
  if (i >= static_cast<std::size_t>(data.cols()) || j >= static_cast<std::size_t>(data.cols())) {
    throw ArgumentError("column index out of range");
  }
  if (i > j) std::swap(i, j);
  if (degenerate != nullptr) *degenerate = false;
  const std::size_t k = histogram_bins(n);
  auto bin_column = [&](std::size_t c, std::vector<std::size_t>& out) {
    const auto col = data.col(static_cast<Eigen::Index>(c));
    const double lo = col.minCoeff(), hi = col.maxCoeff();
    if (!(hi > lo)) return false;
    out.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      const double u = (col(static_cast<Eigen::Index>(r)) - lo) / (hi - lo);
      out[r] = std::min(k - 1, static_cast<std::size_t>(u * static_cast<double>(k)));
    }
    return true;
  };
  std::vector<std::size_t> bx, by;
  if (!bin_column(i, bx) || !bin_column(j, by)) {
    if (degenerate != nullptr) *degenerate = true;
    return 0.0;
  }
  std::vector<double> joint(k * k, 0.0), px(k, 0.0), py(k, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    joint[bx[r] * k + by[r]] += 1.0;
    px[bx[r]] += 1.0;
    py[by[r]] += 1.0;
  }
  const double total = static_cast<double>(n);
  double mi = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      const double c = joint[a * k + b];
      if (c > 0.0) mi += c / total * std::log(c * total / (px[a] * py[b]));
    }
  }
  return std::max(0.0, mi);
}

Eigen::MatrixXd histogram_mi_matrix(const Eigen::MatrixXd& data) {
  const auto l = data.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(l, l);
  for (Eigen::Index i = 0; i < l; ++i) {
    for (Eigen::Index j = i + 1; j < l; ++j) {
      out(i, j) = out(j, i) = histogram_mi(data, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> top_pairs(const Eigen::MatrixXd& m, std::size_t count) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) pairs.emplace_back(i, j);
  }
  std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
    return m(static_cast<Eigen::Index>(a.first), static_cast<Eigen::Index>(a.second)) >
           m(static_cast<Eigen::Index>(b.first), static_cast<Eigen::Index>(b.second));
  });
  if (pairs.size() > count) pairs.resize(count);
  return pairs;
}

}  // namespace tnad
