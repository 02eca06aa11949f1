#include "tnad/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "tnad/errors.hpp"

namespace tnad {

namespace {

struct AxisSource {
  int node;
  AxisLabel axis;
};

// Per-sample inputs on the axes of a tensor being optimized, split into a row group
// (leading axes) and a column group.
struct LocalEnv {
  RowMatrix row_kr;
  RowMatrix col_kr;
  Eigen::VectorXd log_scale;
};

struct Evaluation {
  double loss = std::numeric_limits<double>::infinity();
  std::size_t zeros = 0;
  RowMatrix grad;
};

// Row-wise Kronecker product of the selected rows; the first factor is most significant.
RowMatrix khatri_rao(const std::vector<const BatchMessage*>& parts, std::span<const std::size_t> rows) {
  const auto b = static_cast<Eigen::Index>(rows.size());
  RowMatrix out = RowMatrix::Ones(b, 1);
  for (const BatchMessage* p : parts) {
    const Eigen::Index d = p->vec.cols();
    RowMatrix next(b, out.cols() * d);
    for (Eigen::Index s = 0; s < b; ++s) {
      const auto src = p->vec.row(static_cast<Eigen::Index>(rows[s]));
      for (Eigen::Index i = 0; i < out.cols(); ++i) next.row(s).segment(i * d, d) = out(s, i) * src;
    }
    out = std::move(next);
  }
  return out;
}

LocalEnv gather(EnvironmentCache& cache, const std::vector<AxisSource>& sources, std::size_t split,
                std::span<const std::size_t> rows) {
  std::vector<const BatchMessage*> left, right;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const BatchMessage* m = &cache.axis_input(sources[i].node, sources[i].axis);
    (i < split ? left : right).push_back(m);
  }
  LocalEnv env;
  env.row_kr = khatri_rao(left, rows);
  env.col_kr = khatri_rao(right, rows);
  env.log_scale = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t s = 0; s < rows.size(); ++s) {
    double ls = 0.0;
    for (const BatchMessage* m : left) ls += m->log_scale(static_cast<Eigen::Index>(rows[s]));
    for (const BatchMessage* m : right) ls += m->log_scale(static_cast<Eigen::Index>(rows[s]));
    env.log_scale(static_cast<Eigen::Index>(s)) = ls;
  }
  return env;
}

Evaluation evaluate(const LocalEnv& env, const DenseTensor& core, ZeroAmplitudePolicy policy, bool want_grad) {
  const Eigen::Index rows = env.row_kr.cols();
  const Eigen::Index cols = env.col_kr.cols();
  if (static_cast<std::size_t>(rows * cols) != core.size()) throw DimensionError("environment does not match tensor");
  Eigen::Map<const RowMatrix> c(core.data().data(), rows, cols);
  const RowMatrix projected = env.row_kr * c;
  const Eigen::Index b = env.row_kr.rows();

  Eigen::VectorXd weight = Eigen::VectorXd::Zero(b);
  double sum = 0.0;
  std::size_t count = 0;
  Evaluation out;
  for (Eigen::Index s = 0; s < b; ++s) {
    const double psi = projected.row(s).dot(env.col_kr.row(s));
    const double ls = env.log_scale(s);
    const bool vanishing = psi == 0.0 || !std::isfinite(ls);
    const double log_abs = vanishing ? -std::numeric_limits<double>::infinity() : std::log(std::abs(psi)) + ls;
    if (vanishing) ++out.zeros;
    if (policy == ZeroAmplitudePolicy::skip) {
      if (vanishing) continue;
      sum += log_abs;
      weight(s) = 1.0 / psi;
    } else if (log_abs < kClampLogAmplitude) {
      sum += kClampLogAmplitude;  // floored: no gradient
    } else {
      sum += log_abs;
      weight(s) = 1.0 / psi;
    }
    ++count;
  }
  if (count == 0) {
    if (want_grad) out.grad = RowMatrix::Zero(rows, cols);
    return out;
  }
  out.loss = -2.0 * sum / static_cast<double>(count);
  if (want_grad) {
    out.grad.noalias() = env.row_kr.transpose() * (weight.asDiagonal() * env.col_kr);
    out.grad *= -2.0 / static_cast<double>(count);
  }
  return out;
}

std::vector<AxisSource> merged_sources(const MergedTensor& merged) {
  std::vector<AxisSource> out;
  for (std::size_t a = 0; a < merged.axes.size(); ++a) {
    out.push_back({a < merged.u_rank ? merged.u : merged.v, merged.axes[a]});
  }
  return out;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

// Applies config.inner_steps projected gradient steps to `core` in place.
void descend(const LocalEnv& env, DenseTensor& core, const TrainConfig& config, double lr) {
  for (std::size_t it = 0; it < config.inner_steps; ++it) {
    const Evaluation ev = evaluate(env, core, config.zero_amplitude_policy, true);
    auto data = core.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr * ev.grad.data()[i];
    const double nrm = core.frobenius_norm();
    if (!(nrm > 0.0) || !std::isfinite(nrm)) throw DegenerateInputError("gradient step produced a degenerate tensor");
    core *= 1.0 / nrm;
  }
}

NllResult summarize(const std::vector<LogAmplitude>& amps, ZeroAmplitudePolicy policy) {
  NllResult out;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& a : amps) {
    const bool vanishing = !std::isfinite(a.log_abs);
    if (vanishing) ++out.zero_amplitudes;
    if (policy == ZeroAmplitudePolicy::skip) {
      if (vanishing) continue;
      sum += a.log_abs;
    } else {
      sum += std::max(a.log_abs, kClampLogAmplitude);
    }
    ++count;
  }
  out.loss = count == 0 ? std::numeric_limits<double>::infinity() : -2.0 * sum / static_cast<double>(count);
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0 && learning_rate <= 0.5)) throw ArgumentError("learning rate must lie in [0, 0.5]");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ArgumentError("learning rate decay must lie in (0, 1]");
  if (inner_steps < 1) throw ArgumentError("inner_steps must be positive");
  if (!(svd_rel_threshold >= 0.0 && svd_rel_threshold < 1.0)) {
    throw ArgumentError("SVD threshold must lie in [0, 1)");
  }
  if (max_bond < 1) throw ArgumentError("max_bond must be positive");
}

NllResult nll_loss_detailed(const TensorTree& tree, const EncodedDataset& data, ZeroAmplitudePolicy policy) {
  if (data.num_samples() == 0) throw ArgumentError("empty data set");
  return summarize(log_amplitudes(tree, data), policy);
}

double nll_loss(const TensorTree& tree, const EncodedDataset& data, ZeroAmplitudePolicy policy) {
  return nll_loss_detailed(tree, data, policy).loss;
}

DenseTensor two_site_gradient(const TensorTree& tree, const MergedTensor& merged, const EncodedDataset& batch,
                              ZeroAmplitudePolicy policy) {
  if (batch.num_samples() == 0) throw ArgumentError("empty batch");
  EnvironmentCache cache(tree, batch);
  const auto rows = all_rows(batch.num_samples());
  const LocalEnv env = gather(cache, merged_sources(merged), merged.u_rank, rows);
  Evaluation ev = evaluate(env, merged.tensor, policy, true);
  return DenseTensor(merged.tensor.shape(), std::vector<double>(ev.grad.data(), ev.grad.data() + ev.grad.size()));
}

double merged_loss(const TensorTree& tree, const MergedTensor& merged, const EncodedDataset& batch,
                   ZeroAmplitudePolicy policy) {
  if (batch.num_samples() == 0) throw ArgumentError("empty batch");
  EnvironmentCache cache(tree, batch);
  const auto rows = all_rows(batch.num_samples());
  const LocalEnv env = gather(cache, merged_sources(merged), merged.u_rank, rows);
  return evaluate(env, merged.tensor, policy, false).loss;
}

StepStats two_site_step(TensorTree& tree, DirectedEdge edge, const EncodedDataset& batch, const TrainConfig& config) {
  config.validate();
  if (batch.num_samples() == 0) throw ArgumentError("empty batch");
  Trainer trainer(tree, batch, config);
  const auto rows = all_rows(batch.num_samples());
  return trainer.step(edge, rows, config.learning_rate);
}

Trainer::Trainer(TensorTree& tree, const EncodedDataset& data, TrainConfig config)
    : tree_(&tree), data_(&data), config_(config), cache_(tree, data) {}

StepStats Trainer::step(DirectedEdge edge, std::span<const std::size_t> batch_rows, double learning_rate) {
  TensorTree& tree = *tree_;
  if (tree.center() != edge.from) {
    throw StateError("step " + std::to_string(edge.from) + "->" + std::to_string(edge.to) +
                     " requires the center at node " + std::to_string(edge.from));
  }
  if (!tree.adjacent(edge.from, edge.to)) throw ArgumentError("step edge joins non-adjacent nodes");
  if (batch_rows.empty()) throw ArgumentError("empty batch");

  StepStats stats;
  stats.edge = edge;
  MergedTensor merged = tree.merge(edge.from, edge.to);
  const LocalEnv env = gather(cache_, merged_sources(merged), merged.u_rank, batch_rows);
  const Evaluation before = evaluate(env, merged.tensor, config_.zero_amplitude_policy, false);
  stats.loss_before = before.loss;
  stats.zero_amplitudes = before.zeros;

  const DenseTensor saved_u = tree.node(edge.from).tensor;
  const DenseTensor saved_v = tree.node(edge.to).tensor;
  try {
    descend(env, merged.tensor, config_, learning_rate);
    stats.loss_after = evaluate(env, merged.tensor, config_.zero_amplitude_policy, false).loss;
    const SplitStats split = tree.split(merged, edge.to, config_.svd_rel_threshold, config_.max_bond);
    stats.bond_dim = split.bond_dim;
    stats.discarded_weight = split.discarded_weight;
  } catch (const DegenerateInputError& e) {
    tree.set_node_tensor(edge.from, saved_u);
    tree.set_node_tensor(edge.to, saved_v);
    tree.set_center_unchecked(edge.from);
    stats.aborted = true;
    stats.error = e.what();
    stats.loss_after = stats.loss_before;
    stats.bond_dim = tree.bond_dim(edge.from, edge.to);
  }
  cache_.invalidate(edge.from);
  cache_.invalidate(edge.to);
  return stats;
}

StepStats Trainer::single_node_step(std::span<const std::size_t> batch_rows, double learning_rate) {
  TensorTree& tree = *tree_;
  if (tree.num_nodes() != 1) throw StateError("single-node update on a multi-node network");
  if (batch_rows.empty()) throw ArgumentError("empty batch");
  const auto& node = tree.node(0);
  std::vector<AxisSource> sources;
  for (const auto& ax : node.axes) sources.push_back({0, ax});
  const LocalEnv env = gather(cache_, sources, 1, batch_rows);

  StepStats stats;
  DenseTensor core = node.tensor;
  const Evaluation before = evaluate(env, core, config_.zero_amplitude_policy, false);
  stats.loss_before = before.loss;
  stats.zero_amplitudes = before.zeros;
  try {
    descend(env, core, config_, learning_rate);
    stats.loss_after = evaluate(env, core, config_.zero_amplitude_policy, false).loss;
    tree.set_node_tensor(0, std::move(core));
  } catch (const DegenerateInputError& e) {
    stats.aborted = true;
    stats.error = e.what();
    stats.loss_after = stats.loss_before;
  }
  cache_.invalidate_all();
  return stats;
}

NllResult Trainer::full_nll() { return summarize(cache_.log_amplitudes(), config_.zero_amplitude_policy); }

TrainReport fit(TensorTree& tree, std::span<const DirectedEdge> schedule, const EncodedDataset& data,
                const TrainConfig& config) {
  config.validate();
  if (data.num_samples() == 0) throw ArgumentError("empty training set");
  TrainReport report;
  if (config.sweeps == 0) {
    report.initial_nll = nll_loss(tree, data, config.zero_amplitude_policy);
    for (auto [a, b] : tree.edges()) report.bond_profile.push_back({{a, b}, tree.bond_dim(a, b)});
    return report;
  }
  if (schedule.empty() && tree.num_nodes() != 1) throw ArgumentError("empty traversal schedule");
  if (!schedule.empty()) tree.canonicalize(schedule.front().from);
  tree.normalize();

  Trainer trainer(tree, data, config);
  report.initial_nll = trainer.full_nll().loss;

  const std::size_t n = data.num_samples();
  const bool full_batch = config.batch_size == 0 || config.batch_size >= n;
  const std::size_t b = full_batch ? n : config.batch_size;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> perm = all_rows(n);
  auto draw = [&]() -> std::span<const std::size_t> {
    if (!full_batch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = 0; i < b; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(perm[i], perm[pick(rng)]);
      }
    }
    return {perm.data(), b};
  };

  double lr = config.learning_rate;
  for (std::size_t sweep = 0; sweep < config.sweeps; ++sweep) {
    const auto start = std::chrono::steady_clock::now();
    if (schedule.empty()) {
      const StepStats stats = trainer.single_node_step(draw(), lr);
      if (stats.aborted) throw IntegrityError("sweep " + std::to_string(sweep) + ": " + stats.error);
    }
    for (std::size_t k = 0; k < schedule.size(); ++k) {
      StepStats stats;
      try {
        stats = trainer.step(schedule[k], draw(), lr);
      } catch (const Error& e) {
        throw IntegrityError("sweep " + std::to_string(sweep) + " step " + std::to_string(k) + ": " + e.what());
      }
      if (stats.aborted) {
        throw IntegrityError("sweep " + std::to_string(sweep) + " step " + std::to_string(k) + " (" +
                             std::to_string(schedule[k].from) + "->" + std::to_string(schedule[k].to) +
                             "): " + stats.error);
      }
      report.discarded_weights.push_back(stats.discarded_weight);
    }
    const NllResult nll = trainer.full_nll();
    if (std::isnan(nll.loss)) throw IntegrityError("training loss became NaN in sweep " + std::to_string(sweep));
    report.nll_trace.push_back(nll.loss);
    report.zero_amplitude_samples = nll.zero_amplitudes;
    report.sweep_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    lr *= config.lr_decay;
  }
  for (auto [a, b2] : tree.edges()) report.bond_profile.push_back({{a, b2}, tree.bond_dim(a, b2)});
  return report;
}

TrainReport fit(MpsModel& model, const EncodedDataset& data, const TrainConfig& config) {
  const auto schedule = model.traversal_schedule();
  return fit(model.tree(), schedule, data, config);
}

TrainReport fit(TtnModel& model, const EncodedDataset& data, const TrainConfig& config) {
  const auto schedule = model.traversal_schedule();
  return fit(model.tree(), schedule, data, config);
}

}  // namespace tnad
