#include "tnad/explainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "tnad/errors.hpp"

namespace tnad {

namespace {

constexpr double kTraceFloor = 1e-30;
constexpr double kEigenDrop = 1e-14;
constexpr double kEigenClip = 1e-10;

struct Labeled {
  DenseTensor t;
  std::vector<int> labels;
};

Labeled contract(const Labeled& a, const Labeled& b) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<bool> b_used(b.labels.size(), false);
  std::vector<int> labels;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const auto it = std::find(b.labels.begin(), b.labels.end(), a.labels[i]);
    if (it == b.labels.end()) {
      labels.push_back(a.labels[i]);
    } else {
      const auto j = static_cast<std::size_t>(it - b.labels.begin());
      pairs.emplace_back(i, j);
      b_used[j] = true;
    }
  }
  for (std::size_t j = 0; j < b.labels.size(); ++j) {
    if (!b_used[j]) labels.push_back(b.labels[j]);
  }
  return {contract_pair(a.t, b.t, pairs), std::move(labels)};
}

enum class Mode { traced, open, conditioned };

struct SlotMode {
  Mode mode = Mode::traced;
  bool fixed = false;
  std::vector<double> vec;
};

using SharedCache = std::map<std::pair<int, int>, Labeled>;

// Contraction of the network with its transpose, one slot mode per physical slot.
// Messages (a -> b) carry the a-side subtree: the ket and bra bond of edge (a, b) plus
// the ket and bra legs of every open slot inside it.
class DoubleLayer {
 public:
  DoubleLayer(const TensorTree& tree, std::vector<SlotMode> modes, SharedCache* shared = nullptr)
      : tree_(tree), modes_(std::move(modes)), shared_(shared) {
    const auto edges = tree_.edges();
    num_edges_ = static_cast<int>(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) edge_ids_[edges[e]] = static_cast<int>(e);
  }

  int ket_slot(std::size_t s) const { return 2 * (num_edges_ + static_cast<int>(s)); }
  int bra_slot(std::size_t s) const { return 2 * (num_edges_ + static_cast<int>(s)) + 1; }

  /// Contracts everything at `root`; slots in `extra_open` (all on root) stay open.
  Labeled close_at(int root, std::span<const std::size_t> extra_open) {
    Labeled k = side(root, false, extra_open);
    for (int c : tree_.neighbors(root)) k = contract(k, message(c, root).msg);
    return contract(k, side(root, true, extra_open));
  }

 private:
  struct Entry {
    Labeled msg;
    bool shareable = true;  // only traced or fixed slots in the subtree
    bool has_fixed = false;
  };

  int edge_id(int a, int b) const { return edge_ids_.at({std::min(a, b), std::max(a, b)}); }

  Labeled side(int node, bool bra, std::span<const std::size_t> extra_open) const {
    const auto& n = tree_.node(node);
    Labeled out;
    Shape shape;
    std::vector<std::pair<std::size_t, const std::vector<double>*>> conditioned;
    for (std::size_t a = 0; a < n.axes.size(); ++a) {
      const auto& ax = n.axes[a];
      if (ax.kind == AxisKind::dummy) continue;
      shape.push_back(n.tensor.extent(a));
      if (ax.kind == AxisKind::bond) {
        out.labels.push_back(2 * edge_id(node, ax.target) + (bra ? 1 : 0));
        continue;
      }
      const auto s = static_cast<std::size_t>(ax.target);
      const SlotMode& m = modes_[s];
      const bool open = m.mode == Mode::open ||
                        std::find(extra_open.begin(), extra_open.end(), s) != extra_open.end();
      if (open) {
        out.labels.push_back(bra ? bra_slot(s) : ket_slot(s));
      } else if (m.mode == Mode::conditioned) {
        out.labels.push_back(-1 - static_cast<int>(s));
        conditioned.emplace_back(s, &m.vec);
      } else {
        out.labels.push_back(ket_slot(s));
      }
    }
    out.t = n.tensor.reshaped(shape);
    for (const auto& [s, vec] : conditioned) {
      const int label = -1 - static_cast<int>(s);
      const auto pos = static_cast<std::size_t>(std::find(out.labels.begin(), out.labels.end(), label) -
                                                out.labels.begin());
      out.t = contract_pair(out.t, DenseTensor::vector(*vec), {{pos, 0}});
      out.labels.erase(out.labels.begin() + static_cast<std::ptrdiff_t>(pos));
    }
    return out;
  }

  bool center_on_side(int a, int b) const {
    const int c = tree_.center();
    if (c == b) return false;
    const auto p = tree_.path(c, b);
    return p[p.size() - 2] == a;
  }

  const Entry& message(int a, int b) {
    const auto key = std::make_pair(a, b);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    Entry entry;
    std::vector<const Entry*> children;
    for (int c : tree_.neighbors(a)) {
      if (c == b) continue;
      const Entry& ce = message(c, a);
      entry.shareable = entry.shareable && ce.shareable;
      entry.has_fixed = entry.has_fixed || ce.has_fixed;
      children.push_back(&ce);
    }
    for (const auto& ax : tree_.node(a).axes) {
      if (ax.kind != AxisKind::physical) continue;
      const SlotMode& m = modes_[static_cast<std::size_t>(ax.target)];
      if (m.fixed) {
        entry.has_fixed = true;
      } else if (m.mode != Mode::traced) {
        entry.shareable = false;
      }
    }

    if (entry.shareable && shared_ != nullptr) {
      if (auto it = shared_->find(key); it != shared_->end()) {
        entry.msg = it->second;
        return memo_.emplace(key, std::move(entry)).first->second;
      }
    }
    const int e = edge_id(a, b);
    if (entry.shareable && !entry.has_fixed && !center_on_side(a, b)) {
      entry.msg = {DenseTensor::identity(tree_.bond_dim(a, b)), {2 * e, 2 * e + 1}};
    } else {
      Labeled k = side(a, false, {});
      for (const Entry* ce : children) k = contract(k, ce->msg);
      entry.msg = contract(k, side(a, true, {}));
    }
    if (entry.shareable && shared_ != nullptr) shared_->emplace(key, entry.msg);
    return memo_.emplace(key, std::move(entry)).first->second;
  }

  const TensorTree& tree_;
  std::vector<SlotMode> modes_;
  SharedCache* shared_;
  int num_edges_ = 0;
  std::map<std::pair<int, int>, int> edge_ids_;
  std::map<std::pair<int, int>, Entry> memo_;
};

std::vector<SlotMode> base_modes(const TensorTree& tree) {
  std::vector<SlotMode> modes(tree.num_slots());
  for (std::size_t s = 0; s < tree.num_slots(); ++s) {
    if (const auto& f = tree.fixed_slot(s)) {
      modes[s].mode = Mode::conditioned;
      modes[s].fixed = true;
      modes[s].vec = *f;
    }
  }
  return modes;
}

void check_sites(const TensorTree& tree, std::span<const std::size_t> sites, const char* what) {
  std::set<std::size_t> seen;
  for (std::size_t s : sites) {
    if (s >= tree.num_input_slots()) {
      throw ArgumentError(std::string(what) + " site " + std::to_string(s) + " out of range");
    }
    if (!seen.insert(s).second) throw ArgumentError(std::string(what) + " site " + std::to_string(s) + " repeated");
  }
}

void check_budget(std::size_t phys_dim, std::size_t k, std::size_t budget) {
  std::size_t entries = 1;
  for (std::size_t i = 0; i < 2 * k; ++i) {
    if (entries > budget / phys_dim) {
      throw ResourceError("density matrix over " + std::to_string(k) + " sites exceeds the budget of " +
                          std::to_string(budget) + " entries");
    }
    entries *= phys_dim;
  }
}

// Orders the open legs as (ket sites..., bra sites...) and flattens to a matrix.
Eigen::MatrixXd to_matrix(const DoubleLayer& dl, const Labeled& lab, std::span<const std::size_t> sites,
                          std::size_t phys_dim) {
  std::vector<int> want;
  for (std::size_t s : sites) want.push_back(dl.ket_slot(s));
  for (std::size_t s : sites) want.push_back(dl.bra_slot(s));
  if (want.size() != lab.labels.size()) throw IntegrityError("open legs of the contraction do not match the sites");
  std::vector<std::size_t> perm;
  for (int w : want) {
    const auto it = std::find(lab.labels.begin(), lab.labels.end(), w);
    if (it == lab.labels.end()) throw IntegrityError("missing open leg in density contraction");
    perm.push_back(static_cast<std::size_t>(it - lab.labels.begin()));
  }
  const DenseTensor t = reorder_axes(lab.t, perm);
  std::size_t dim = 1;
  for (std::size_t i = 0; i < sites.size(); ++i) dim *= phys_dim;
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd m = Eigen::Map<const RowMatrix>(t.data().data(), d, d);
  return 0.5 * (m + m.transpose());
}

ReducedDensityMatrix finish(Eigen::MatrixXd m, std::span<const std::size_t> sites, std::size_t phys_dim,
                            bool conditioned) {
  ReducedDensityMatrix out;
  out.sites.assign(sites.begin(), sites.end());
  out.phys_dim = phys_dim;
  out.trace_before_normalization = m.trace();
  if (!(out.trace_before_normalization >= kTraceFloor)) {
    if (conditioned) {
      throw ConditioningError("conditioning event has vanishing probability (trace " +
                                  std::to_string(out.trace_before_normalization) + ")",
                              out.trace_before_normalization);
    }
    throw DegenerateInputError("density matrix of a vanishing state");
  }
  out.matrix = m / out.trace_before_normalization;
  return out;
}

ReducedDensityMatrix rdm_impl(const TensorTree& tree, std::span<const std::size_t> targets,
                              const std::map<std::size_t, double>& conditions, std::size_t budget) {
  if (targets.empty()) throw ArgumentError("subsystem must contain at least one site");
  check_sites(tree, targets, "subsystem");
  check_budget(tree.phys_dim(), targets.size(), budget);
  std::vector<SlotMode> modes = base_modes(tree);
  for (std::size_t s : targets) modes[s].mode = Mode::open;
  for (const auto& [s, value] : conditions) {
    if (s >= tree.num_input_slots()) throw ArgumentError("condition site " + std::to_string(s) + " out of range");
    if (modes[s].mode == Mode::open) {
      throw ArgumentError("site " + std::to_string(s) + " is both a target and a condition");
    }
    if (!(value >= 0.0 && value <= 1.0)) throw RangeError("condition value must lie in [0, 1]");
    modes[s].mode = Mode::conditioned;
    modes[s].vec = legendre_basis(tree.phys_dim(), value);
  }
  const int root = tree.slot_node(targets.front());
  TensorTree copy = tree;
  copy.orthogonalize(root);
  DoubleLayer dl(copy, std::move(modes));
  const Labeled lab = dl.close_at(root, {});
  return finish(to_matrix(dl, lab, targets, tree.phys_dim()), targets, tree.phys_dim(), !conditions.empty());
}

// sum_{a,b} rho(a,b) prod_i K_i(a_i, b_i) with the first site most significant.
double weighted_trace(const Eigen::MatrixXd& rho, const std::vector<const Eigen::MatrixXd*>& kernels,
                      std::size_t n) {
  const std::size_t k = kernels.size();
  const auto dim = rho.rows();
  std::vector<std::size_t> da(k), db(k);
  double total = 0.0;
  for (Eigen::Index a = 0; a < dim; ++a) {
    std::size_t x = static_cast<std::size_t>(a);
    for (std::size_t i = k; i-- > 0;) {
      da[i] = x % n;
      x /= n;
    }
    for (Eigen::Index b = 0; b < dim; ++b) {
      std::size_t y = static_cast<std::size_t>(b);
      double w = 1.0;
      for (std::size_t i = k; i-- > 0;) {
        db[i] = y % n;
        y /= n;
        w *= (*kernels[i])(static_cast<Eigen::Index>(da[i]), static_cast<Eigen::Index>(db[i]));
      }
      total += rho(a, b) * w;
    }
  }
  return total;
}

// Gram matrices sum_q w_q x_q^p xi(x_q) xi(x_q)^T for p = 0, 1, 2.
std::array<Eigen::MatrixXd, 3> moment_kernels(std::size_t n) {
  const QuadratureRule rule = gauss_legendre_unit(2 * n);
  std::array<Eigen::MatrixXd, 3> out;
  for (auto& m : out) m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    const auto v = legendre_basis(n, rule.nodes[q]);
    const Eigen::Map<const Eigen::VectorXd> xi(v.data(), static_cast<Eigen::Index>(n));
    const Eigen::MatrixXd outer = xi * xi.transpose();
    double p = rule.weights[q];
    for (auto& m : out) {
      m += p * outer;
      p *= rule.nodes[q];
    }
  }
  return out;
}

std::size_t subsystem_size(const ReducedDensityMatrix& rdm) {
  std::size_t dim = 1;
  for (std::size_t i = 0; i < rdm.sites.size(); ++i) dim *= rdm.phys_dim;
  if (rdm.matrix.rows() != static_cast<Eigen::Index>(dim) || rdm.matrix.cols() != rdm.matrix.rows()) {
    throw DimensionError("density matrix shape does not match its sites");
  }
  return rdm.sites.size();
}

}  // namespace

ReducedDensityMatrix reduced_density_matrix(const TensorTree& tree, std::span<const std::size_t> sites,
                                            std::size_t budget) {
  return rdm_impl(tree, sites, {}, budget);
}

ReducedDensityMatrix conditional_rdm(const TensorTree& tree, std::span<const std::size_t> targets,
                                     const std::map<std::size_t, double>& conditions, std::size_t budget) {
  return rdm_impl(tree, targets, conditions, budget);
}

double quasi_density_integral(const ReducedDensityMatrix& rdm) {
  const std::size_t k = subsystem_size(rdm);
  const auto kernels = moment_kernels(rdm.phys_dim);
  return weighted_trace(rdm.matrix, std::vector<const Eigen::MatrixXd*>(k, &kernels[0]), rdm.phys_dim);
}

double quasi_density(const ReducedDensityMatrix& rdm, std::span<const double> point) {
  const std::size_t k = subsystem_size(rdm);
  if (point.size() != k) throw ArgumentError("point length differs from subsystem size");
  Eigen::VectorXd phi = Eigen::VectorXd::Ones(1);
  for (double x : point) {
    if (!(x >= 0.0 && x <= 1.0)) throw RangeError("quasi-density point must lie in [0, 1]");
    const auto v = legendre_basis(rdm.phys_dim, x);
    const Eigen::Map<const Eigen::VectorXd> xi(v.data(), static_cast<Eigen::Index>(v.size()));
    Eigen::VectorXd next(phi.size() * xi.size());
    for (Eigen::Index i = 0; i < phi.size(); ++i) next.segment(i * xi.size(), xi.size()) = phi(i) * xi;
    phi = std::move(next);
  }
  const double z = quasi_density_integral(rdm);
  if (!(z > 0.0)) throw DegenerateInputError("quasi-density has zero integral");
  return phi.dot(rdm.matrix * phi) / z;
}

MarginalStats marginal_moments(const ReducedDensityMatrix& rdm, const FeatureRescaler* rescaler,
                               std::size_t max_sites) {
  const std::size_t k = subsystem_size(rdm);
  if (k > max_sites) {
    throw ResourceError("moment quadrature over " + std::to_string(k) + " sites exceeds the limit of " +
                        std::to_string(max_sites));
  }
  const auto kernels = moment_kernels(rdm.phys_dim);
  const std::size_t n = rdm.phys_dim;
  std::vector<const Eigen::MatrixXd*> ks(k, &kernels[0]);
  const double z = weighted_trace(rdm.matrix, ks, n);
  if (!(z > 0.0)) throw DegenerateInputError("quasi-density has zero integral");

  const auto kk = static_cast<Eigen::Index>(k);
  MarginalStats out;
  out.sites = rdm.sites;
  out.mean.resize(kk);
  for (std::size_t m = 0; m < k; ++m) {
    ks.assign(k, &kernels[0]);
    ks[m] = &kernels[1];
    out.mean(static_cast<Eigen::Index>(m)) = weighted_trace(rdm.matrix, ks, n) / z;
  }
  out.covariance.resize(kk, kk);
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t p = m; p < k; ++p) {
      ks.assign(k, &kernels[0]);
      if (m == p) {
        ks[m] = &kernels[2];
      } else {
        ks[m] = &kernels[1];
        ks[p] = &kernels[1];
      }
      const auto im = static_cast<Eigen::Index>(m), ip = static_cast<Eigen::Index>(p);
      const double c = weighted_trace(rdm.matrix, ks, n) / z - out.mean(im) * out.mean(ip);
      out.covariance(im, ip) = out.covariance(ip, im) = c;
    }
  }
  out.std = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  if (rescaler != nullptr) {
    out.raw_mean.resize(kk);
    out.raw_covariance.resize(kk, kk);
    for (std::size_t m = 0; m < k; ++m) {
      const auto im = static_cast<Eigen::Index>(m);
      out.raw_mean(im) = rescaler->inverse(rdm.sites[m], out.mean(im));
      for (std::size_t p = 0; p < k; ++p) {
        const auto ip = static_cast<Eigen::Index>(p);
        out.raw_covariance(im, ip) =
            out.covariance(im, ip) * rescaler->span(rdm.sites[m]) * rescaler->span(rdm.sites[p]);
      }
    }
    out.raw_std = out.raw_covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  }
  return out;
}

std::vector<MarginalStats> single_site_marginals(const TensorTree& tree, const FeatureRescaler* rescaler) {
  TensorTree copy = tree;
  copy.orthogonalize(tree.center());
  DoubleLayer dl(copy, base_modes(copy));
  std::vector<MarginalStats> out;
  for (std::size_t s = 0; s < copy.num_input_slots(); ++s) {
    const std::size_t site[1] = {s};
    const Labeled lab = dl.close_at(copy.slot_node(s), site);
    const auto rdm = finish(to_matrix(dl, lab, site, copy.phys_dim()), site, copy.phys_dim(), false);
    out.push_back(marginal_moments(rdm, rescaler));
  }
  return out;
}

double von_neumann_entropy(const Eigen::MatrixXd& rho) {
  if (rho.rows() != rho.cols() || rho.rows() == 0) throw DimensionError("density matrix must be square");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (rho + rho.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw IntegrityError("eigen decomposition of density matrix failed");
  double s = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double l = es.eigenvalues()(i);
    if (l < -kEigenClip) {
      throw IntegrityError("density matrix eigenvalue " + std::to_string(l) + " is negative beyond tolerance");
    }
    if (l >= kEigenDrop) s -= l * std::log(l);
  }
  return s;
}

double mutual_information(const TensorTree& tree, std::span<const std::size_t> x, std::span<const std::size_t> y,
                          std::size_t budget) {
  for (std::size_t a : x) {
    if (std::find(y.begin(), y.end(), a) != y.end()) {
      throw ArgumentError("subsystems overlap at site " + std::to_string(a));
    }
  }
  std::vector<std::size_t> xy(x.begin(), x.end());
  xy.insert(xy.end(), y.begin(), y.end());
  const double sx = von_neumann_entropy(reduced_density_matrix(tree, x, budget));
  const double sy = von_neumann_entropy(reduced_density_matrix(tree, y, budget));
  const double sxy = von_neumann_entropy(reduced_density_matrix(tree, xy, budget));
  return sx + sy - sxy;
}

Eigen::MatrixXd scale_for_display(const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd out = raw;
  out.diagonal().setZero();
  double top = 0.0;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      if (i != j) top = std::max(top, out(i, j));
    }
  }
  if (top > 0.0) out /= top;
  return out;
}

MiMatrix all_to_all_mi(const TensorTree& tree) {
  TensorTree copy = tree;
  copy.orthogonalize(tree.center());
  const std::size_t l = copy.num_input_slots();
  const std::size_t n = copy.phys_dim();
  SharedCache shared;

  std::vector<double> single(l);
  {
    DoubleLayer dl(copy, base_modes(copy), &shared);
    for (std::size_t i = 0; i < l; ++i) {
      const std::size_t site[1] = {i};
      const Labeled lab = dl.close_at(copy.slot_node(i), site);
      single[i] = von_neumann_entropy(finish(to_matrix(dl, lab, site, n), site, n, false));
    }
  }
  MiMatrix out;
  const auto ll = static_cast<Eigen::Index>(l);
  out.raw = Eigen::MatrixXd::Zero(ll, ll);
  for (std::size_t i = 0; i + 1 < l; ++i) {
    auto modes = base_modes(copy);
    modes[i].mode = Mode::open;
    DoubleLayer dl(copy, std::move(modes), &shared);
    for (std::size_t j = i + 1; j < l; ++j) {
      const std::size_t extra[1] = {j};
      const std::size_t pair[2] = {i, j};
      const Labeled lab = dl.close_at(copy.slot_node(j), extra);
      const double sij = von_neumann_entropy(finish(to_matrix(dl, lab, pair, n), pair, n, false));
      const double mi = single[i] + single[j] - sij;
      out.raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mi;
      out.raw(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = mi;
    }
  }
  out.display = scale_for_display(out.raw);
  return out;
}

AnomalyExplanation flag_features(std::span<const MarginalStats> marginals, const FeatureRescaler& rescaler,
                                 std::span<const double> raw_sample, double k_sigma) {
  if (!(k_sigma > 0.0)) throw ArgumentError("k_sigma must be positive");
  if (raw_sample.size() != marginals.size()) {
    throw ArgumentError("sample has " + std::to_string(raw_sample.size()) + " features, model has " +
                        std::to_string(marginals.size()));
  }
  AnomalyExplanation out;
  out.k_sigma = k_sigma;
  for (std::size_t i = 0; i < raw_sample.size(); ++i) {
    const MarginalStats& m = marginals[i];
    FeatureExplanation f;
    f.index = i;
    f.observed = raw_sample[i];
    f.observed_rescaled = rescaler.rescale_clamped(i, raw_sample[i]);
    f.mean = m.mean(0);
    f.std = m.std(0);
    f.raw_mean = rescaler.inverse(i, f.mean);
    f.raw_std = f.std * rescaler.span(i);
    f.flagged = std::abs(f.observed_rescaled - f.mean) > k_sigma * f.std;
    out.features.push_back(f);
  }
  return out;
}

AnomalyExplanation flag_features(const TensorTree& tree, const LegendreFeatureMap& encoder,
                                 std::span<const double> raw_sample, double k_sigma) {
  const auto marginals = single_site_marginals(tree, &encoder.rescaler());
  return flag_features(marginals, encoder.rescaler(), raw_sample, k_sigma);
}

ConditionalExpectations conditional_expectations(const TensorTree& tree, const LegendreFeatureMap& encoder,
                                                 std::span<const double> raw_sample,
                                                 std::span<const std::size_t> flagged) {
  if (flagged.empty()) throw ArgumentError("no flagged features to explain");
  const std::size_t l = tree.num_input_slots();
  if (raw_sample.size() != l) throw ArgumentError("sample length differs from the model");
  check_sites(tree, flagged, "flagged");
  std::map<std::size_t, double> conditions;
  for (std::size_t i = 0; i < l; ++i) {
    if (std::find(flagged.begin(), flagged.end(), i) == flagged.end()) {
      conditions[i] = encoder.rescaler().rescale_clamped(i, raw_sample[i]);
    }
  }
  ConditionalExpectations out;
  for (std::size_t f : flagged) {
    const std::size_t target[1] = {f};
    try {
      const auto rdm = conditional_rdm(tree, target, conditions);
      const auto stats = marginal_moments(rdm, &encoder.rescaler());
      out.values[f] = stats.raw_mean(0);
    } catch (const ConditioningError& e) {
      out.errors[f] = e.what();
    }
  }
  return out;
}

AnomalyExplanation explain_sample(const TensorTree& tree, const LegendreFeatureMap& encoder,
                                  std::span<const MarginalStats> marginals, std::span<const double> raw_sample,
                                  double k_sigma) {
  AnomalyExplanation out = flag_features(marginals, encoder.rescaler(), raw_sample, k_sigma);
  const LogAmplitude amp = tree.log_amplitude(encoder.encode_sample(raw_sample));
  out.nll = -2.0 * amp.log_abs;
  std::vector<std::size_t> flagged;
  for (const auto& f : out.features) {
    if (f.flagged) flagged.push_back(f.index);
  }
  if (!flagged.empty()) {
    const auto cond = conditional_expectations(tree, encoder, raw_sample, flagged);
    for (auto& f : out.features) {
      if (auto it = cond.values.find(f.index); it != cond.values.end()) f.conditional_expected = it->second;
      if (auto it = cond.errors.find(f.index); it != cond.errors.end()) f.conditional_error = it->second;
    }
  }
  return out;
}

}  // namespace tnad
