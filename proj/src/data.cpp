#include "tnad/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "tnad/errors.hpp"

namespace tnad {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  if (delim == ' ') {
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
  }
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, delim)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

char detect_delimiter(const std::string& line) {
  if (line.find(',') != std::string::npos) return ',';
  if (line.find('\t') != std::string::npos) return '\t';
  return ' ';
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

// Canonical text of a label cell so "1", "1.0" and "1e0" compare equal.
std::string label_key(const std::string& s) {
  double v = 0.0;
  if (parse_double(s, v)) {
    std::ostringstream os;
    os << v;
    return os.str();
  }
  return s;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

}  // namespace

std::size_t LabeledData::count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

LabeledData load_csv(const CsvSpec& spec) {
  std::ifstream in(spec.path);
  if (!in) throw DataError("cannot open " + spec.path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  if (lines.empty()) throw DataError(spec.path + ": no data");
  const char delim = spec.delimiter != 0 ? spec.delimiter : detect_delimiter(lines.front());

  std::vector<std::string> header;
  std::size_t first = 0;
  if (spec.has_header) {
    header = split_line(lines.front(), delim);
    first = 1;
  }
  if (first >= lines.size()) throw DataError(spec.path + ": header without data rows");
  const std::size_t width = split_line(lines[first], delim).size();
  if (spec.has_header && header.size() != width) throw DataError(spec.path + ": header width differs from rows");

  std::optional<std::size_t> label_col;
  if (spec.label_column) {
    const std::string& key = *spec.label_column;
    const auto it = std::find(header.begin(), header.end(), key);
    long long idx = 0;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
    if (it != header.end()) {
      label_col = static_cast<std::size_t>(it - header.begin());
    } else if (ec == std::errc() && ptr == key.data() + key.size()) {
      if (idx < 0) idx += static_cast<long long>(width);
      if (idx < 0 || idx >= static_cast<long long>(width)) throw DataError("label column index out of range");
      label_col = static_cast<std::size_t>(idx);
    } else {
      throw DataError(spec.path + ": missing label column '" + key + "'");
    }
  }

  std::vector<std::string> anomaly, regular;
  for (const auto& v : spec.anomaly_values) anomaly.push_back(label_key(v));
  for (const auto& v : spec.regular_values) regular.push_back(label_key(v));
  if (label_col && anomaly.empty() && regular.empty()) anomaly.push_back("1");

  const std::size_t rows = lines.size() - first;
  const std::size_t cols = width - (label_col ? 1 : 0);
  if (cols == 0) throw DataError(spec.path + ": no feature columns");
  LabeledData out;
  out.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t c = 0; c < width; ++c) {
    if (label_col && c == *label_col) continue;
    out.feature_names.push_back(spec.has_header ? header[c] : "f" + std::to_string(out.feature_names.size()));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const auto cells = split_line(lines[first + r], delim);
    const std::string where = spec.path + ": row " + std::to_string(r + 1);
    if (cells.size() != width) {
      throw DataError(where + " has " + std::to_string(cells.size()) + " cells, expected " + std::to_string(width));
    }
    std::size_t f = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (label_col && c == *label_col) {
        const std::string key = label_key(cells[c]);
        const bool is_anomaly = !anomaly.empty()
                                    ? std::find(anomaly.begin(), anomaly.end(), key) != anomaly.end()
                                    : std::find(regular.begin(), regular.end(), key) == regular.end();
        out.labels.push_back(is_anomaly ? 1 : 0);
        continue;
      }
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw DataError(where + ", column " + std::to_string(c + 1) + ": non-numeric cell '" + cells[c] + "'");
      }
      out.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f++)) = v;
    }
  }
  return out;
}

const char* to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::global:
      return "global";
    case AnomalyKind::local:
      return "local";
    case AnomalyKind::dependency:
      return "dependency";
  }
  return "unknown";
}

AnomalyKind anomaly_kind_from_string(const std::string& name) {
  if (name == "global") return AnomalyKind::global;
  if (name == "local") return AnomalyKind::local;
  if (name == "dependency") return AnomalyKind::dependency;
  throw ArgumentError("unknown anomaly generator '" + name + "'");
}

Eigen::MatrixXd generate_anomalies(const Eigen::MatrixXd& regular, AnomalyKind kind, std::size_t count,
                                   std::uint64_t seed, const GeneratorParams& params) {
  const auto n = regular.rows();
  const auto f = regular.cols();
  if (count < 1) throw ArgumentError("anomaly count must be positive");
  if (n < 1 || f < 1) throw ArgumentError("generators need a non-empty regular sample");
  std::mt19937_64 rng(seed);
  const auto m = static_cast<Eigen::Index>(count);
  Eigen::MatrixXd out(m, f);

  switch (kind) {
    case AnomalyKind::global: {
      for (Eigen::Index j = 0; j < f; ++j) {
        const double lo = regular.col(j).minCoeff(), hi = regular.col(j).maxCoeff();
        const double mid = 0.5 * (lo + hi), half = 0.5 * params.alpha * (hi - lo);
        std::uniform_real_distribution<double> u(mid - half, mid + half);
        for (Eigen::Index i = 0; i < m; ++i) out(i, j) = half > 0.0 ? u(rng) : mid;
      }
      break;
    }
    case AnomalyKind::local: {
      Eigen::VectorXd sd(f);
      for (Eigen::Index j = 0; j < f; ++j) {
        const double mu = regular.col(j).mean();
        sd(j) = std::sqrt((regular.col(j).array() - mu).square().mean());
      }
      const auto subset = static_cast<std::size_t>(
          std::max<long>(1, std::lround(params.subset_fraction * static_cast<double>(f))));
      std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Eigen::Index i = 0; i < m; ++i) {
        out.row(i) = regular.row(pick(rng));
        const auto cols = shuffled_indices(static_cast<std::size_t>(f), rng);
        for (std::size_t c = 0; c < std::min(subset, cols.size()); ++c) {
          const auto j = static_cast<Eigen::Index>(cols[c]);
          out(i, j) += params.beta * sd(j) * normal(rng);
        }
      }
      break;
    }
    case AnomalyKind::dependency: {
      for (Eigen::Index j = 0; j < f; ++j) {
        std::vector<std::size_t> order;
        while (order.size() < count) {
          const auto p = shuffled_indices(static_cast<std::size_t>(n), rng);
          order.insert(order.end(), p.begin(), p.end());
        }
        for (Eigen::Index i = 0; i < m; ++i) out(i, j) = regular(static_cast<Eigen::Index>(order[i]), j);
      }
      break;
    }
  }
  return out;
}

void PollutionPlan::validate() const {
  if (!(regular_fraction > 0.0 && regular_fraction < 1.0)) throw ArgumentError("regular fraction must lie in (0, 1)");
  if (!(native_fraction >= 0.0 && native_fraction <= 1.0)) throw ArgumentError("native fraction must lie in [0, 1]");
  if (native_fraction < 1.0 && generators.empty()) throw ArgumentError("generated anomalies need a generator");
}

PollutedData build_pollution(const LabeledData& data, const PollutionPlan& plan) {
  plan.validate();
  if (!data.has_labels()) throw DataError("pollution requires labels");
  std::vector<std::size_t> reg_idx, anom_idx;
  for (std::size_t i = 0; i < data.labels.size(); ++i) (data.labels[i] == 1 ? anom_idx : reg_idx).push_back(i);

  const std::size_t total = plan.total_samples == 0 ? reg_idx.size() : plan.total_samples;
  const auto n_reg = static_cast<std::size_t>(std::llround(plan.regular_fraction * static_cast<double>(total)));
  const std::size_t n_anom = total - n_reg;
  const auto n_native = static_cast<std::size_t>(std::floor(plan.native_fraction * static_cast<double>(n_anom)));
  const std::size_t n_generated = n_anom - n_native;
  if (n_reg > reg_idx.size()) {
    throw DataError("pollution needs " + std::to_string(n_reg) + " regular samples, " +
                    std::to_string(reg_idx.size()) + " available");
  }
  if (n_native > anom_idx.size()) {
    throw DataError("pollution needs " + std::to_string(n_native) + " native anomalies, " +
                    std::to_string(anom_idx.size()) + " available");
  }
  if (n_reg == 0) throw DataError("pollution plan selects no regular samples");

  std::mt19937_64 rng(plan.seed);
  std::shuffle(reg_idx.begin(), reg_idx.end(), rng);
  std::shuffle(anom_idx.begin(), anom_idx.end(), rng);
  reg_idx.resize(n_reg);
  anom_idx.resize(n_native);

  const Eigen::MatrixXd regular = select_rows(data.features, reg_idx);
  std::vector<Eigen::MatrixXd> blocks{regular, select_rows(data.features, anom_idx)};
  std::vector<SampleOrigin> origin(n_reg, SampleOrigin::regular);
  origin.insert(origin.end(), n_native, SampleOrigin::native);
  for (std::size_t g = 0; g < plan.generators.size() && n_generated > 0; ++g) {
    const std::size_t share = n_generated / plan.generators.size() + (g < n_generated % plan.generators.size());
    if (share == 0) continue;
    const AnomalyKind kind = plan.generators[g];
    blocks.push_back(generate_anomalies(regular, kind, share, rng(), plan.params));
    const SampleOrigin o = kind == AnomalyKind::global  ? SampleOrigin::generated_global
                           : kind == AnomalyKind::local ? SampleOrigin::generated_local
                                                        : SampleOrigin::generated_dependency;
    origin.insert(origin.end(), share, o);
  }

  const auto f = data.features.cols();
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(total), f);
  Eigen::Index row = 0;
  for (const auto& b : blocks) {
    if (b.rows() == 0) continue;
    stacked.middleRows(row, b.rows()) = b;
    row += b.rows();
  }
  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  PollutedData out;
  out.features = select_rows(stacked, perm);
  for (std::size_t p : perm) {
    out.origin.push_back(origin[p]);
    out.labels.push_back(origin[p] == SampleOrigin::regular ? 0 : 1);
  }
  return out;
}

std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels, std::size_t k,
                                                       std::uint64_t seed) {
  if (k < 2) throw ArgumentError("at least two folds required");
  std::vector<std::size_t> reg, anom;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? anom : reg).push_back(i);
  if (reg.size() < k || anom.size() < k) {
    throw DataError("each class needs at least " + std::to_string(k) + " members for stratified folds");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(reg.begin(), reg.end(), rng);
  std::shuffle(anom.begin(), anom.end(), rng);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t j = 0; j < reg.size(); ++j) folds[j % k].push_back(reg[j]);
  for (std::size_t j = 0; j < anom.size(); ++j) folds[(reg.size() + j) % k].push_back(anom[j]);
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::MatrixXd toy_correlated_dataset(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples), 8);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j : {2, 3, 5, 7}) out(i, j) = 0.5 * (u(rng) + u(rng));
    out(i, 0) = u(rng);
    out(i, 1) = out(i, 0) + noise(rng);
    out(i, 4) = u(rng);
    out(i, 6) = 1.0 - out(i, 4) + noise(rng);
  }
  return out;
}

}  // namespace tnad
