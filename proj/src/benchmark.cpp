#include "tnad/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "tnad/errors.hpp"

namespace tnad {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw DataError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw DataError("unknown config key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError("config key '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

ZeroAmplitudePolicy policy_from_string(const std::string& s) {
  if (s == "skip") return ZeroAmplitudePolicy::skip;
  if (s == "clamp") return ZeroAmplitudePolicy::clamp;
  throw DataError("zero_amplitude_policy must be 'skip' or 'clamp'");
}

}  // namespace

RunConfig run_config_from_json(const json& j, RunConfig c) {
  const std::string top = "config";
  reject_unknown(j,
                 {"learning_rate", "lr_decay", "inner_steps", "batch_size", "sweeps", "svd_rel_threshold", "max_bond",
                  "init_bond", "seed", "zero_amplitude_policy", "encoder", "pollution", "dataset", "folds",
                  "folds_to_run"},
                 top);
  read(j, "learning_rate", c.train.learning_rate, top);
  read(j, "lr_decay", c.train.lr_decay, top);
  read(j, "inner_steps", c.train.inner_steps, top);
  read(j, "batch_size", c.train.batch_size, top);
  read(j, "sweeps", c.train.sweeps, top);
  read(j, "svd_rel_threshold", c.train.svd_rel_threshold, top);
  read(j, "max_bond", c.train.max_bond, top);
  read(j, "init_bond", c.init_bond, top);
  read(j, "seed", c.train.seed, top);
  if (j.contains("zero_amplitude_policy")) {
    std::string p;
    read(j, "zero_amplitude_policy", p, top);
    c.train.zero_amplitude_policy = policy_from_string(p);
  }
  read(j, "folds", c.folds, top);
  read(j, "folds_to_run", c.folds_to_run, top);

  if (j.contains("encoder")) {
    const json& e = j.at("encoder");
    reject_unknown(e, {"n_functions", "margin"}, "encoder");
    read(e, "n_functions", c.encoder.n_functions, "encoder");
    read(e, "margin", c.encoder.margin, "encoder");
  }
  if (j.contains("pollution")) {
    const json& p = j.at("pollution");
    reject_unknown(p,
                   {"regular_fraction", "native_fraction", "total_samples", "generators", "alpha", "beta",
                    "subset_fraction"},
                   "pollution");
    read(p, "regular_fraction", c.pollution.regular_fraction, "pollution");
    read(p, "native_fraction", c.pollution.native_fraction, "pollution");
    read(p, "total_samples", c.pollution.total_samples, "pollution");
    read(p, "alpha", c.pollution.params.alpha, "pollution");
    read(p, "beta", c.pollution.params.beta, "pollution");
    read(p, "subset_fraction", c.pollution.params.subset_fraction, "pollution");
    if (p.contains("generators")) {
      std::vector<std::string> names;
      read(p, "generators", names, "pollution");
      c.pollution.generators.clear();
      try {
        for (const auto& n : names) c.pollution.generators.push_back(anomaly_kind_from_string(n));
      } catch (const ArgumentError& e) {
        throw DataError(e.what());
      }
    }
  }
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown(d, {"label_column", "anomaly_values", "regular_values", "has_header", "delimiter"}, "dataset");
    if (d.contains("label_column")) {
      const json& lc = d.at("label_column");
      if (lc.is_null()) {
        c.dataset.label_column.reset();
      } else if (lc.is_number_integer()) {
        c.dataset.label_column = std::to_string(lc.get<long long>());
      } else if (lc.is_string()) {
        c.dataset.label_column = lc.get<std::string>();
      } else {
        throw DataError("dataset.label_column must be a name, an index or null");
      }
    }
    auto read_values = [&](const char* key, std::vector<std::string>& out) {
      if (!d.contains(key)) return;
      out.clear();
      for (const auto& v : d.at(key)) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    };
    read_values("anomaly_values", c.dataset.anomaly_values);
    read_values("regular_values", c.dataset.regular_values);
    read(d, "has_header", c.dataset.has_header, "dataset");
    if (d.contains("delimiter")) {
      std::string delim;
      read(d, "delimiter", delim, "dataset");
      if (delim.size() > 1) throw DataError("dataset.delimiter must be a single character");
      c.dataset.delimiter = delim.empty() ? 0 : delim[0];
    }
  }
  try {
    c.train.validate();
    c.pollution.validate();
  } catch (const ArgumentError& e) {
    throw DataError(std::string("invalid config: ") + e.what());
  }
  if (c.init_bond < 1) throw DataError("init_bond must be positive");
  if (c.encoder.n_functions < 1) throw DataError("encoder.n_functions must be positive");
  return c;
}

json to_json(const RunConfig& c) {
  json gens = json::array();
  for (auto g : c.pollution.generators) gens.push_back(to_string(g));
  json dataset = {{"has_header", c.dataset.has_header},
                  {"anomaly_values", c.dataset.anomaly_values},
                  {"regular_values", c.dataset.regular_values}};
  dataset["label_column"] = c.dataset.label_column ? json(*c.dataset.label_column) : json(nullptr);
  return {{"learning_rate", c.train.learning_rate},
          {"lr_decay", c.train.lr_decay},
          {"inner_steps", c.train.inner_steps},
          {"batch_size", c.train.batch_size},
          {"sweeps", c.train.sweeps},
          {"svd_rel_threshold", c.train.svd_rel_threshold},
          {"max_bond", c.train.max_bond},
          {"init_bond", c.init_bond},
          {"seed", c.train.seed},
          {"zero_amplitude_policy", c.train.zero_amplitude_policy == ZeroAmplitudePolicy::skip ? "skip" : "clamp"},
          {"encoder", {{"n_functions", c.encoder.n_functions}, {"margin", c.encoder.margin}}},
          {"pollution",
           {{"regular_fraction", c.pollution.regular_fraction},
            {"native_fraction", c.pollution.native_fraction},
            {"total_samples", c.pollution.total_samples},
            {"generators", gens},
            {"alpha", c.pollution.params.alpha},
            {"beta", c.pollution.params.beta},
            {"subset_fraction", c.pollution.params.subset_fraction}}},
          {"dataset", dataset},
          {"folds", c.folds},
          {"folds_to_run", c.folds_to_run}};
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("config " + path + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, std::move(base));
}

AnomalyModel train_model(const Eigen::MatrixXd& raw, ModelKind kind, const RunConfig& config, std::uint64_t seed,
                         TrainReport* report) {
  const auto l = static_cast<std::size_t>(raw.cols());
  AnomalyModel model;
  model.encoder = LegendreFeatureMap(config.encoder.n_functions, fit_rescaler(raw, config.encoder.margin));
  const EncodedDataset encoded = model.encoder.encode_dataset(raw);
  TrainConfig train = config.train;
  train.seed = seed;
  TrainReport r;
  if (kind == ModelKind::mps) {
    MpsModel mps = MpsModel::random(l, config.encoder.n_functions, config.init_bond, seed);
    r = fit(mps, encoded, train);
    model.network = std::move(mps);
  } else {
    TtnModel ttn = TtnModel::random(l, config.encoder.n_functions, config.init_bond, seed);
    r = fit(ttn, encoded, train);
    model.network = std::move(ttn);
  }
  if (report != nullptr) *report = std::move(r);
  return model;
}

std::vector<double> score_raw(const AnomalyModel& model, const Eigen::MatrixXd& raw) {
  return score_samples(model.tree(), model.encoder.encode_dataset(raw));
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

BenchmarkResult run_benchmark(const LabeledData& data, ModelKind kind, const RunConfig& config, std::uint64_t seed,
                              const std::string& model_dir) {
  if (!data.has_labels()) throw DataError("benchmark data needs a label column");
  PollutionPlan plan = config.pollution;
  plan.seed = seed;
  const PollutedData polluted = build_pollution(data, plan);
  const auto folds = stratified_folds(polluted.labels, config.folds, seed);

  std::vector<std::size_t> selected = config.folds_to_run;
  if (selected.empty()) {
    for (std::size_t f = 0; f < config.folds; ++f) selected.push_back(f);
  }
  if (!model_dir.empty()) std::filesystem::create_directories(model_dir);

  BenchmarkResult result;
  result.kind = kind;
  result.config = config;
  result.seed = seed;
  for (std::size_t f : selected) {
    if (f >= folds.size()) throw DataError("fold " + std::to_string(f) + " out of range");
    std::vector<std::size_t> train_idx, test_idx = folds[f];
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    const Eigen::MatrixXd train_x = select_rows(polluted.features, train_idx);
    const Eigen::MatrixXd test_x = select_rows(polluted.features, test_idx);
    std::vector<int> train_y, test_y;
    for (std::size_t i : train_idx) train_y.push_back(polluted.labels[i]);
    for (std::size_t i : test_idx) test_y.push_back(polluted.labels[i]);

    FoldResult fr;
    fr.fold = f;
    fr.train_samples = train_idx.size();
    fr.test_samples = test_idx.size();
    const auto start = std::chrono::steady_clock::now();
    AnomalyModel model;
    try {
      model = train_model(train_x, kind, config, seed + f, &fr.report);
    } catch (const IntegrityError& e) {
      throw IntegrityError("fold " + std::to_string(f) + ": " + e.what());
    } catch (const Error& e) {
      throw FitError("fold " + std::to_string(f) + ": " + e.what());
    }
    fr.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const auto train_scores = score_raw(model, train_x);
    const auto test_scores = score_raw(model, test_x);
    fr.separation_auc = auc_roc(train_scores, train_y);
    fr.inductive_auc = auc_roc(test_scores, test_y);
    fr.eer = eer_threshold(train_scores, train_y);
    std::size_t tp = 0, tn = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < test_scores.size(); ++i) {
      const bool flagged = test_scores[i] >= fr.eer.threshold;
      if (test_y[i] == 1) {
        ++pos;
        tp += flagged;
      } else {
        ++neg;
        tn += !flagged;
      }
    }
    fr.inductive_tpr = pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0;
    fr.inductive_tnr = neg ? static_cast<double>(tn) / static_cast<double>(neg) : 0.0;
    if (!model_dir.empty()) {
      fr.model_path = (std::filesystem::path(model_dir) /
                       (std::string(to_string(kind)) + "_fold" + std::to_string(f) + ".tnad"))
                          .string();
      save_model(model, fr.model_path);
    }
    result.folds.push_back(std::move(fr));
  }
  std::vector<double> sep, ind;
  for (const auto& fr : result.folds) {
    sep.push_back(fr.separation_auc);
    ind.push_back(fr.inductive_auc);
  }
  std::tie(result.separation_mean, result.separation_std) = mean_std(sep);
  std::tie(result.inductive_mean, result.inductive_std) = mean_std(ind);
  return result;
}

json to_json(const TrainReport& r) {
  json profile = json::array();
  for (const auto& [edge, dim] : r.bond_profile) profile.push_back({edge.first, edge.second, dim});
  double max_discarded = 0.0;
  for (double d : r.discarded_weights) max_discarded = std::max(max_discarded, d);
  return {{"initial_nll", r.initial_nll},
          {"nll_trace", r.nll_trace},
          {"sweep_seconds", r.sweep_seconds},
          {"bond_profile", profile},
          {"max_discarded_weight", max_discarded},
          {"zero_amplitude_samples", r.zero_amplitude_samples}};
}

json to_json(const BenchmarkResult& result) {
  json folds = json::array();
  for (const auto& f : result.folds) {
    folds.push_back({{"fold", f.fold},
                     {"separation_auc", f.separation_auc},
                     {"inductive_auc", f.inductive_auc},
                     {"eer", {{"threshold", f.eer.threshold}, {"tpr", f.eer.tpr}, {"tnr", f.eer.tnr}}},
                     {"inductive_tpr", f.inductive_tpr},
                     {"inductive_tnr", f.inductive_tnr},
                     {"train_samples", f.train_samples},
                     {"test_samples", f.test_samples},
                     {"train_seconds", f.train_seconds},
                     {"training", to_json(f.report)},
                     {"model_path", f.model_path}});
  }
  return {{"model", to_string(result.kind)},
          {"seed", result.seed},
          {"folds", folds},
          {"separation", {{"mean", result.separation_mean}, {"std", result.separation_std}}},
          {"inductive", {{"mean", result.inductive_mean}, {"std", result.inductive_std}}},
          {"config", to_json(result.config)}};
}

}  // namespace tnad
