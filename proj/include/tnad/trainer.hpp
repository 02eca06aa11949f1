#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tnad/mps.hpp"
#include "tnad/tree_network.hpp"
#include "tnad/ttn.hpp"

namespace tnad {

enum class ZeroAmplitudePolicy { skip, clamp };

/// log|Psi| floor applied by the clamp policy.
inline constexpr double kClampLogAmplitude = -700.0;

struct TrainConfig {
  double learning_rate = 1e-2;
  double lr_decay = 0.9;  // multiplicative, applied after every sweep
  std::size_t inner_steps = 5;
  std::size_t batch_size = 256;  // 0 selects full-batch descent
  std::size_t sweeps = 10;
  double svd_rel_threshold = 1e-4;
  std::size_t max_bond = 40;
  std::uint64_t seed = 0;
  ZeroAmplitudePolicy zero_amplitude_policy = ZeroAmplitudePolicy::skip;

  /// Throws ArgumentError on out-of-range values (learning rate must lie in [0, 0.5]).
  void validate() const;
};

struct StepStats {
  DirectedEdge edge;
  double loss_before = 0.0;
  double loss_after = 0.0;
  double discarded_weight = 0.0;
  std::size_t bond_dim = 0;
  std::size_t zero_amplitudes = 0;
  bool aborted = false;
  std::string error;
};

struct TrainReport {
  double initial_nll = 0.0;
  std::vector<double> nll_trace;  // full-data NLL after every sweep
  std::vector<double> discarded_weights;
  std::vector<std::pair<std::pair<int, int>, std::size_t>> bond_profile;
  std::vector<double> sweep_seconds;
  std::size_t zero_amplitude_samples = 0;
};

struct NllResult {
  double loss = 0.0;
  std::size_t zero_amplitudes = 0;
};

/// Mean negative log-likelihood -(1/|D|) sum 2 log|Psi(x)| of a unit-norm model.
NllResult nll_loss_detailed(const TensorTree& tree, const EncodedDataset& data,
                            ZeroAmplitudePolicy policy = ZeroAmplitudePolicy::skip);
double nll_loss(const TensorTree& tree, const EncodedDataset& data,
                ZeroAmplitudePolicy policy = ZeroAmplitudePolicy::skip);

/// Gradient -(2/|B|) sum grad_C Psi(x) / Psi(x) of the batch loss with respect to the
/// merged two-site tensor, holding all other tensors fixed. Shape equals merged.tensor.
DenseTensor two_site_gradient(const TensorTree& tree, const MergedTensor& merged, const EncodedDataset& batch,
                              ZeroAmplitudePolicy policy = ZeroAmplitudePolicy::skip);

/// Local batch loss of the network with `merged.tensor` substituted for its two nodes.
double merged_loss(const TensorTree& tree, const MergedTensor& merged, const EncodedDataset& batch,
                   ZeroAmplitudePolicy policy = ZeroAmplitudePolicy::skip);

/// Merge along `edge` (center must be edge.from), take config.inner_steps projected
/// gradient steps on the batch, then split with truncation moving the center to edge.to.
StepStats two_site_step(TensorTree& tree, DirectedEdge edge, const EncodedDataset& batch, const TrainConfig& config);

/// Sweep-based trainer keeping full-data environments cached across steps.
class Trainer {
 public:
  Trainer(TensorTree& tree, const EncodedDataset& data, TrainConfig config);

  StepStats step(DirectedEdge edge, std::span<const std::size_t> batch_rows, double learning_rate);
  /// Gradient steps on a network consisting of a single node (no edges to traverse).
  StepStats single_node_step(std::span<const std::size_t> batch_rows, double learning_rate);
  NllResult full_nll();

 private:
  TensorTree* tree_;
  const EncodedDataset* data_;
  TrainConfig config_;
  EnvironmentCache cache_;
};

/// Runs config.sweeps traversals of `schedule` (a closed walk starting at its first
/// edge's source). Deterministic given the config seed.
TrainReport fit(TensorTree& tree, std::span<const DirectedEdge> schedule, const EncodedDataset& data,
                const TrainConfig& config);
TrainReport fit(MpsModel& model, const EncodedDataset& data, const TrainConfig& config);
TrainReport fit(TtnModel& model, const EncodedDataset& data, const TrainConfig& config);

}  // namespace tnad
