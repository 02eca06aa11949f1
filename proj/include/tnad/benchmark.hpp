#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tnad/data.hpp"
#include "tnad/metrics.hpp"
#include "tnad/model_io.hpp"
#include "tnad/trainer.hpp"

namespace tnad {

struct EncoderConfig {
  std::size_t n_functions = 4;
  double margin = 0.0;
};

/// Everything that determines a training run, mirrored by the JSON config file.
struct RunConfig {
  TrainConfig train;
  std::size_t init_bond = 2;
  EncoderConfig encoder;
  PollutionPlan pollution;
  CsvSpec dataset;  // path is filled in from the command line
  std::size_t folds = 10;
  std::vector<std::size_t> folds_to_run;  // empty runs every fold
};

/// Parses a JSON config; unknown keys raise DataError. Absent keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunConfig& config);
RunConfig load_run_config(const std::string& path, RunConfig base = {});

/// Fits an encoder on `raw`, trains a fresh seeded network and returns both.
AnomalyModel train_model(const Eigen::MatrixXd& raw, ModelKind kind, const RunConfig& config, std::uint64_t seed,
                         TrainReport* report = nullptr);

/// Scores raw samples with a model's own encoder (values outside the fitted range are clamped).
std::vector<double> score_raw(const AnomalyModel& model, const Eigen::MatrixXd& raw);

struct FoldResult {
  std::size_t fold = 0;
  double separation_auc = 0.0;
  double inductive_auc = 0.0;
  EerResult eer;  // on the training folds
  double inductive_tpr = 0.0;  // held-out rates at the training threshold
  double inductive_tnr = 0.0;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  double train_seconds = 0.0;
  TrainReport report;
  std::string model_path;
};

struct BenchmarkResult {
  ModelKind kind = ModelKind::mps;
  std::vector<FoldResult> folds;
  double separation_mean = 0.0;
  double separation_std = 0.0;
  double inductive_mean = 0.0;
  double inductive_std = 0.0;
  RunConfig config;
  std::uint64_t seed = 0;
};

/// Pollutes `data`, splits into stratified folds and for each selected fold trains on the
/// remaining folds without labels, then scores both the training folds (separation) and
/// the held-out fold (inductive). Models are written to `model_dir` when non-empty.
BenchmarkResult run_benchmark(const LabeledData& data, ModelKind kind, const RunConfig& config, std::uint64_t seed,
                              const std::string& model_dir = {});

nlohmann::json to_json(const BenchmarkResult& result);
nlohmann::json to_json(const TrainReport& report);

/// Population mean and standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& values);

}  // namespace tnad
