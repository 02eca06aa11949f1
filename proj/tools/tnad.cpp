#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tnad/benchmark.hpp"
#include "tnad/errors.hpp"
#include "tnad/explainer.hpp"

namespace {

using nlohmann::json;
using namespace tnad;

struct Options {
  std::string model = "mps";
  std::string data;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string in;
  std::string report;
  std::string model_dir;
  std::string from = "model";
  std::optional<std::string> label_column;
  bool no_labels = false;
  bool header = false;
  double k_sigma = 1.0;
  std::optional<double> threshold;
  std::vector<std::size_t> rows;
  std::vector<std::size_t> folds_to_run;
  bool display = false;
};

RunConfig resolve_config(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  c.dataset.path = o.data;
  if (o.header) c.dataset.has_header = true;
  if (o.label_column) c.dataset.label_column = *o.label_column;
  if (o.no_labels) c.dataset.label_column.reset();
  if (o.seed) c.train.seed = *o.seed;
  if (!o.folds_to_run.empty()) c.folds_to_run = o.folds_to_run;
  return c;
}

LabeledData read_data(const RunConfig& c) {
  if (c.dataset.path.empty()) throw ArgumentError("--data is required");
  return load_csv(c.dataset);
}

std::ostream& output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw DataError("cannot write " + path);
  return file;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream file;
  output(path, file) << j.dump(2) << "\n";
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream file;
  std::ostream& os = output(path, file);
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << m(i, j);
    os << "\n";
  }
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_train(const Options& o) {
  const RunConfig c = resolve_config(o);
  const LabeledData data = read_data(c);
  if (o.out.empty()) throw ArgumentError("--out is required");
  TrainReport report;
  const AnomalyModel model = train_model(data.features, model_kind_from_string(o.model), c, c.train.seed, &report);
  save_model(model, o.out);
  json j = to_json(report);
  j["model"] = o.model;
  j["samples"] = data.features.rows();
  j["features"] = data.features.cols();
  j["model_path"] = o.out;
  if (!o.report.empty()) write_json(j, o.report);
  std::cerr << "trained " << o.model << " on " << data.features.rows() << " samples, final NLL "
            << (report.nll_trace.empty() ? report.initial_nll : report.nll_trace.back()) << "\n";
  return 0;
}

int cmd_score(const Options& o) {
  const RunConfig c = resolve_config(o);
  const LabeledData data = read_data(c);
  if (o.in.empty()) throw ArgumentError("--in (model file) is required");
  const AnomalyModel model = load_model(o.in);
  const auto scores = score_raw(model, data.features);
  std::ofstream file;
  std::ostream& os = output(o.out, file);
  os << std::setprecision(17) << (data.has_labels() ? "sample_id,nll,label\n" : "sample_id,nll\n");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    os << i << "," << scores[i];
    if (data.has_labels()) os << "," << data.labels[i];
    os << "\n";
  }
  return 0;
}

json explanation_json(const AnomalyExplanation& e, std::optional<double> threshold) {
  json features = json::array();
  for (const auto& f : e.features) {
    json jf = {{"index", f.index},
               {"observed", f.observed},
               {"mean", f.raw_mean},
               {"std", f.raw_std},
               {"flagged", f.flagged},
               {"conditional_expected", f.conditional_expected ? json(*f.conditional_expected) : json(nullptr)}};
    if (!f.conditional_error.empty()) jf["conditional_error"] = f.conditional_error;
    features.push_back(jf);
  }
  return {{"sample_id", e.sample_id},
          {"nll", finite_or_null(e.nll)},
          {"threshold", threshold ? json(*threshold) : json(nullptr)},
          {"k_sigma", e.k_sigma},
          {"features", features}};
}

int cmd_explain(const Options& o) {
  const RunConfig c = resolve_config(o);
  const LabeledData data = read_data(c);
  if (o.in.empty()) throw ArgumentError("--in (model file) is required");
  const AnomalyModel model = load_model(o.in);
  std::vector<std::size_t> rows = o.rows;
  if (rows.empty()) {
    if (!o.threshold) throw ArgumentError("explain needs --row or --threshold");
    const auto scores = score_raw(model, data.features);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= *o.threshold) rows.push_back(i);
    }
  }
  const auto marginals = single_site_marginals(model.tree(), &model.encoder.rescaler());
  json out = json::array();
  for (std::size_t r : rows) {
    if (r >= static_cast<std::size_t>(data.features.rows())) throw ArgumentError("row " + std::to_string(r) + " out of range");
    const Eigen::VectorXd x = data.features.row(static_cast<Eigen::Index>(r)).transpose();
    AnomalyExplanation e =
        explain_sample(model.tree(), model.encoder, marginals, std::span<const double>(x.data(), x.size()), o.k_sigma);
    e.sample_id = std::to_string(r);
    out.push_back(explanation_json(e, o.threshold));
  }
  write_json(out.size() == 1 && !o.rows.empty() ? out[0] : out, o.out);
  return 0;
}

int cmd_mi(const Options& o) {
  Eigen::MatrixXd raw;
  if (o.from == "model") {
    if (o.in.empty()) throw ArgumentError("--in (model file) is required with --from model");
    const AnomalyModel model = load_model(o.in);
    const MiMatrix mi = all_to_all_mi(model.tree());
    raw = o.display ? mi.display : mi.raw;
  } else if (o.from == "data") {
    const RunConfig c = resolve_config(o);
    const LabeledData data = read_data(c);
    raw = histogram_mi_matrix(data.features);
    if (o.display) raw = scale_for_display(raw);
  } else {
    throw ArgumentError("--from must be 'model' or 'data'");
  }
  write_matrix_csv(raw, o.out);
  return 0;
}

int cmd_benchmark(const Options& o) {
  const RunConfig c = resolve_config(o);
  const LabeledData data = read_data(c);
  const BenchmarkResult result =
      run_benchmark(data, model_kind_from_string(o.model), c, c.train.seed, o.model_dir);
  write_json(to_json(result), o.out);
  std::cerr << o.model << " separation AUCROC " << result.separation_mean << " +- " << result.separation_std
            << ", inductive " << result.inductive_mean << " +- " << result.inductive_std << "\n";
  return 0;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const IntegrityError*>(&e) || dynamic_cast<const DegenerateInputError*>(&e) ||
      dynamic_cast<const ConditioningError*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const FitError*>(&e)) return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-network density models for anomaly detection"};
  app.require_subcommand(1);
  Options o;

  auto data_flags = [&](CLI::App* sub) {
    sub->add_option("--data", o.data, "CSV data file");
    sub->add_option("--config", o.config, "JSON config file");
    sub->add_option("--label-column", o.label_column, "label column name or index");
    sub->add_flag("--no-labels", o.no_labels, "ignore any configured label column");
    sub->add_flag("--header", o.header, "CSV has a header row");
    sub->add_option("--out", o.out, "output path (stdout when omitted)");
  };

  auto* train = app.add_subcommand("train", "fit a model on unlabeled data");
  data_flags(train);
  train->add_option("--model", o.model, "mps or ttn")->check(CLI::IsMember({"mps", "ttn"}));
  train->add_option("--seed", o.seed, "random seed");
  train->add_option("--report", o.report, "training report JSON");

  auto* score = app.add_subcommand("score", "write per-sample NLL scores");
  data_flags(score);
  score->add_option("--in", o.in, "model file")->required();

  auto* explain = app.add_subcommand("explain", "flag features and conditional expectations");
  data_flags(explain);
  explain->add_option("--in", o.in, "model file")->required();
  explain->add_option("--row", o.rows, "row index to explain (repeatable)");
  explain->add_option("--threshold", o.threshold, "explain every row scoring at or above this NLL");
  explain->add_option("--k-sigma", o.k_sigma, "flag deviations beyond k standard deviations");

  auto* mi = app.add_subcommand("mi", "all-to-all mutual information matrix");
  data_flags(mi);
  mi->add_option("--from", o.from, "model or data")->check(CLI::IsMember({"model", "data"}));
  mi->add_option("--in", o.in, "model file (with --from model)");
  mi->add_flag("--display", o.display, "scale to [0, 1] with zero diagonal");

  auto* bench = app.add_subcommand("benchmark", "separation and inductive AUCROC over stratified folds");
  data_flags(bench);
  bench->add_option("--model", o.model, "mps or ttn")->check(CLI::IsMember({"mps", "ttn"}));
  bench->add_option("--seed", o.seed, "random seed");
  bench->add_option("--model-dir", o.model_dir, "directory for per-fold model files");
  bench->add_option("--fold", o.folds_to_run, "fold to run (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return cmd_train(o);
    if (score->parsed()) return cmd_score(o);
    if (explain->parsed()) return cmd_explain(o);
    if (mi->parsed()) return cmd_mi(o);
    if (bench->parsed()) return cmd_benchmark(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  }
  return 1;
}
