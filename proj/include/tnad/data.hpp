#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tnad {

struct CsvSpec {
  std::string path;
  bool has_header = false;
  /// Column name (requires a header) or zero-based index; negative indices count from the end.
  std::optional<std::string> label_column;
  /// Label values marking anomalies. When empty, `regular_values` marks the regular class
  /// and everything else is anomalous.
  std::vector<std::string> anomaly_values;
  std::vector<std::string> regular_values;
  /// 0 detects comma, tab or whitespace from the first line.
  char delimiter = 0;
};

struct LabeledData {
  Eigen::MatrixXd features;  // samples x features
  std::vector<int> labels;   // 1 anomaly, 0 regular; empty without a label column
  std::vector<std::string> feature_names;

  bool has_labels() const noexcept { return !labels.empty(); }
  std::size_t count(int label) const;
};

/// Throws DataError naming the data row (1-based, header excluded) of a malformed cell.
LabeledData load_csv(const CsvSpec& spec);

enum class AnomalyKind { global, local, dependency };

const char* to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(const std::string& name);

struct GeneratorParams {
  double alpha = 1.1;            // global: range inflation factor
  double beta = 3.0;             // local: noise scale in empirical std units
  double subset_fraction = 0.3;  // local: share of perturbed features
};

/// Synthetic anomalies derived from a matrix of regular samples; deterministic per seed.
Eigen::MatrixXd generate_anomalies(const Eigen::MatrixXd& regular, AnomalyKind kind, std::size_t count,
                                   std::uint64_t seed, const GeneratorParams& params = {});

struct PollutionPlan {
  double regular_fraction = 0.95;
  double native_fraction = 0.5;  // share of anomalies drawn from labeled anomalies
  /// Total size of the polluted set; 0 uses the number of available regular samples.
  std::size_t total_samples = 0;
  std::vector<AnomalyKind> generators{AnomalyKind::global, AnomalyKind::local, AnomalyKind::dependency};
  GeneratorParams params;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class SampleOrigin : std::uint8_t { regular, native, generated_global, generated_local, generated_dependency };

struct PollutedData {
  Eigen::MatrixXd features;
  std::vector<int> labels;  // hidden, for evaluation only
  std::vector<SampleOrigin> origin;
};

/// Seeded subsample to the planned regular/anomaly composition, rows shuffled.
PollutedData build_pollution(const LabeledData& data, const PollutionPlan& plan);

/// Stratified partition into k folds: each class is shuffled and dealt round-robin.
std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels, std::size_t k,
                                                       std::uint64_t seed);

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows);

/// Seeded toy data set with two constructed correlated feature pairs (0, 1) and (4, 6).
Eigen::MatrixXd toy_correlated_dataset(std::size_t samples, std::uint64_t seed);

}  // namespace tnad
