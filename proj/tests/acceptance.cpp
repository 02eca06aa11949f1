// Acceptance checks, one PASS/FAIL/SKIP line per criterion.
//   acceptance            criteria 1-5, 7, 8 (6 reported as SKIP, run it with --only 6)
//   acceptance --only N   a single criterion; exit 77 when it was skipped

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "oracle.hpp"
#include "tnad/benchmark.hpp"
#include "tnad/explainer.hpp"
#include "tnad/metrics.hpp"

using namespace tnad;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::pass;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Outcome verdict(bool ok, const std::string& detail) { return {ok ? Status::pass : Status::fail, detail}; }

EncodedSample encode_point(const std::vector<double>& x, std::size_t n, std::size_t slots) {
  EncodedSample s(slots, n);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto v = legendre_basis(n, x[i]);
    std::copy(v.begin(), v.end(), s.feature(i).begin());
  }
  return s;
}

double amplitude(const TensorTree& tree, const std::vector<double>& x) {
  const LogAmplitude a = tree.log_amplitude(encode_point(x, tree.phys_dim(), tree.num_input_slots()));
  return a.sign * std::exp(a.log_abs);
}

std::vector<double> random_point(std::size_t l, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(l);
  for (double& v : x) v = u(rng);
  return x;
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  return (a - b).cwiseAbs().maxCoeff();
}

// ---- 1 ----

Outcome encoder_exactness() {
  double worst = 0.0;
  for (std::size_t n = 1; n <= 8; ++n) {
    const QuadratureRule q = gauss_legendre_unit(n + 1);
    // orthonormality from the scalar polynomials g_m = sqrt(2m+1) P~_m, identity resolution
    // from the feature map xi(x) = (g_0(x), ..., g_{N-1}(x))
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd resolution = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
      const double x = q.nodes[k], w = q.weights[k];
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
          gram(a, b) += w * std::sqrt((2.0 * a + 1) * (2.0 * b + 1)) * shifted_legendre_eval(a, x) *
                        shifted_legendre_eval(b, x);
        }
      }
      const auto xi = legendre_basis(n, x);
      const Eigen::Map<const Eigen::VectorXd> v(xi.data(), static_cast<Eigen::Index>(n));
      resolution += w * v * v.transpose();
    }
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    worst = std::max({worst, max_abs_diff(gram, id), max_abs_diff(resolution, id)});
  }
  return verdict(worst <= 1e-10, "N=1..8, max entrywise deviation " + fmt(worst));
}

// ---- 2 ----

Outcome oracle_equivalence() {
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  std::string where;
  auto note = [&](double err, const std::string& what, int inst) {
    if (err > worst) {
      worst = err;
      where = what + " in instance " + std::to_string(inst);
    }
  };
  for (int inst = 0; inst < 50; ++inst) {
    const bool ttn = inst % 2 == 1;
    const std::size_t l = 2 + rng() % 3;
    const std::size_t n = 1 + rng() % 2;
    const std::size_t bond = 1 + rng() % 3;
    TensorTree tree;
    if (ttn) {
      tree = TtnModel::random(l, n, bond, rng()).tree();
    } else {
      tree = MpsModel::random(l, n, bond, rng()).tree();
    }
    if (inst % 4 >= 2) oracle::scramble(tree, rng());
    const auto c = oracle::effective_tensor(tree);

    for (int p = 0; p < 5; ++p) {
      const auto x = random_point(l, rng);
      note(std::abs(amplitude(tree, x) - oracle::amplitude(c, n, x)), "amplitude", inst);
    }
    const Eigen::MatrixXd unit = oracle::uniform_unit(16, l, rng());
    note(std::abs(nll_loss(tree, oracle::encode_unit(unit, n)) - oracle::loss(tree, unit)), "NLL", inst);

    for (std::size_t i = 0; i < l; ++i) {
      const std::vector<std::size_t> si{i};
      const Eigen::MatrixXd ri = oracle::rdm(c, n, l, si);
      note(max_abs_diff(reduced_density_matrix(tree, si).matrix, ri), "1-site RDM", inst);
      note(std::abs(von_neumann_entropy(reduced_density_matrix(tree, si)) - oracle::entropy(ri)), "entropy", inst);
      for (std::size_t j = 0; j < l; ++j) {
        if (j == i) continue;
        const std::vector<std::size_t> sij{i, j}, sj{j};
        const Eigen::MatrixXd rij = oracle::rdm(c, n, l, sij);
        note(max_abs_diff(reduced_density_matrix(tree, sij).matrix, rij), "2-site RDM", inst);
        note(std::abs(von_neumann_entropy(reduced_density_matrix(tree, sij)) - oracle::entropy(rij)), "entropy", inst);
        const double mi_ref = oracle::entropy(ri) + oracle::entropy(oracle::rdm(c, n, l, sj)) - oracle::entropy(rij);
        note(std::abs(mutual_information(tree, si, sj) - mi_ref), "MI", inst);

        const std::map<std::size_t, double> cond{{j, std::uniform_real_distribution<double>(0.0, 1.0)(rng)}};
        note(max_abs_diff(conditional_rdm(tree, si, cond).matrix, oracle::rdm(c, n, l, si, cond)), "conditional RDM",
             inst);
      }
    }
    const MiMatrix all = all_to_all_mi(tree);
    for (std::size_t i = 0; i < l; ++i) {
      for (std::size_t j = i + 1; j < l; ++j) {
        const double ref = oracle::entropy(oracle::rdm(c, n, l, {i})) + oracle::entropy(oracle::rdm(c, n, l, {j})) -
                           oracle::entropy(oracle::rdm(c, n, l, {i, j}));
        note(std::abs(all.raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - ref), "all-to-all MI",
             inst);
      }
    }
    if (l >= 3) {
      // all sites together, conditioned on nothing, and a target conditioned on two others
      std::vector<std::size_t> every(l);
      for (std::size_t i = 0; i < l; ++i) every[i] = i;
      note(max_abs_diff(reduced_density_matrix(tree, every).matrix, oracle::rdm(c, n, l, every)), "full RDM", inst);
      const std::map<std::size_t, double> cond{{0, 0.3}, {l - 1, 0.8}};
      const std::vector<std::size_t> target{1};
      note(max_abs_diff(conditional_rdm(tree, target, cond).matrix, oracle::rdm(c, n, l, target, cond)),
           "conditional RDM", inst);
    }
  }
  return verdict(worst <= 1e-8, "50 instances, max abs error " + fmt(worst) + (where.empty() ? "" : " (" + where + ")"));
}

// ---- 3 ----

Outcome gradient_correctness() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  std::size_t coords = 0;
  double smallest_grad = INFINITY, zero_fd = 0.0;
  std::size_t zeros = 0;
  bool enough = true;
  for (int inst = 0; inst < 20; ++inst) {
    const bool ttn = inst % 2 == 1;
    const std::size_t l = 3 + rng() % 2;
    const std::size_t n = 2;
    TensorTree tree = ttn ? TtnModel::random(l, n, 3, rng()).tree() : MpsModel::random(l, n, 3, rng()).tree();
    oracle::scramble(tree, rng());
    const auto edges = tree.edges();
    const auto [a, b] = edges[rng() % edges.size()];
    const int u = rng() % 2 ? a : b;
    const int v = u == a ? b : a;
    tree.orthogonalize(u);
    tree.normalize();

    // probe points where the Born density is not small; log|Psi| is singular at the nodes of Psi
    Eigen::MatrixXd unit(8, static_cast<Eigen::Index>(l));
    for (Eigen::Index r = 0; r < unit.rows();) {
      const auto x = random_point(l, rng);
      const double psi = amplitude(tree, x);
      if (psi * psi < 0.05) continue;
      for (std::size_t j = 0; j < l; ++j) unit(r, static_cast<Eigen::Index>(j)) = x[j];
      ++r;
    }
    const EncodedDataset batch = oracle::encode_unit(unit, n);
    const MergedTensor merged = tree.merge(u, v);
    const DenseTensor grad = two_site_gradient(tree, merged, batch);

    const double h = 1e-5;
    int informative = 0;
    for (int tries = 0; informative < 24 && tries < 1000; ++tries) {
      const std::size_t i = rng() % grad.size();
      auto f = [&](double step) {
        MergedTensor m = merged;
        m.tensor[i] += step;
        return oracle::loss(oracle::merged_tree(tree, m), unit);
      };
      const double fd = (f(h) - f(-h)) / (2 * h);
      if (grad[i] == 0.0) {
        // entries paired with a vanishing component of the pad vector xi(0.5)
        zero_fd = std::max(zero_fd, std::abs(fd));
        ++zeros;
        continue;
      }
      const double scale = std::max(std::abs(fd), std::abs(grad[i]));
      smallest_grad = std::min(smallest_grad, scale);
      worst = std::max(worst, std::abs(fd - grad[i]) / scale);
      ++informative;
      ++coords;
    }
    enough = enough && informative >= 20;
  }
  return verdict(enough && worst <= 1e-6 && zero_fd <= 1e-9,
                 "20 instances, " + std::to_string(coords) + " coordinates, max relative error " + fmt(worst) +
                     ", smallest |grad| " + fmt(smallest_grad) + ", " + std::to_string(zeros) +
                     " structural zeros with max |fd| " + fmt(zero_fd));
}

// ---- 4 ----

Outcome canonical_integrity() {
  std::mt19937_64 rng(4242);
  double iso = 0.0, svd = 0.0, gauge = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const bool ttn = inst % 2 == 1;
    const std::size_t l = 3 + rng() % 6;
    const std::size_t n = 2 + rng() % 3;
    const std::size_t bond = 2 + rng() % 5;
    TensorTree tree = ttn ? TtnModel::random(l, n, bond, rng()).tree() : MpsModel::random(l, n, bond, rng()).tree();
    iso = std::max(iso, tree.canonical_defect());

    std::vector<std::vector<double>> points;
    for (int p = 0; p < 4; ++p) points.push_back(random_point(l, rng));
    std::vector<double> ref;
    for (const auto& x : points) ref.push_back(amplitude(tree, x));
    const int nodes = static_cast<int>(tree.num_nodes());
    for (int step = 0; step < 4; ++step) {
      tree.canonicalize(static_cast<int>(rng() % nodes));
      iso = std::max(iso, tree.canonical_defect());
      for (std::size_t p = 0; p < points.size(); ++p) gauge = std::max(gauge, std::abs(amplitude(tree, points[p]) - ref[p]));
    }

    // arbitrary tensors brought to canonical form: same amplitudes up to the scale of Psi
    oracle::scramble(tree, rng());
    std::vector<double> raw;
    for (const auto& x : points) raw.push_back(amplitude(tree, x));
    tree.orthogonalize(static_cast<int>(rng() % nodes));
    iso = std::max(iso, tree.canonical_defect());
    const double norm = std::sqrt(std::inner_product(raw.begin(), raw.end(), raw.begin(), 1.0));
    for (std::size_t p = 0; p < points.size(); ++p) {
      gauge = std::max(gauge, std::abs(amplitude(tree, points[p]) - raw[p]) / norm);
    }

    // truncated SVD of the merged tensor at the center: ||M - U S V||^2 equals the discarded weight
    const int center = tree.center();
    const int other = tree.neighbors(center)[rng() % tree.neighbors(center).size()];
    MergedTensor merged = tree.merge(center, other);
    merged.tensor *= 1.0 / merged.tensor.frobenius_norm();
    std::size_t rows = 1;
    for (std::size_t a = 0; a < merged.u_rank; ++a) rows *= merged.tensor.extent(a);
    const DenseTensor m = merged.tensor.reshaped({rows, merged.tensor.size() / rows});
    const double thr = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
    const SvdResult r = truncated_svd(m, thr, 1 + rng() % 6);
    RowMatrix us = r.left_isometry.as_matrix();
    for (std::size_t k = 0; k < r.rank(); ++k) us.col(static_cast<Eigen::Index>(k)) *= r.singular_values[k];
    const double err = (m.as_matrix() - us * r.right_isometry.as_matrix()).squaredNorm();
    svd = std::max(svd, std::abs(err - r.discarded_weight));
    const auto isometry_err = [](const RowMatrix& q) {
      return (q.transpose() * q - Eigen::MatrixXd::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
    };
    iso = std::max({iso, isometry_err(r.left_isometry.as_matrix()), isometry_err(r.right_isometry.as_matrix().transpose())});

    tree.split(merged, other, thr, 1 + rng() % 6);
    iso = std::max(iso, tree.canonical_defect());
  }
  return verdict(iso <= 1e-10 && svd <= 1e-10 && gauge <= 1e-10,
                 "100 cases, isometry defect " + fmt(iso) + ", SVD identity error " + fmt(svd) + ", gauge error " +
                     fmt(gauge));
}

// ---- 5 and 7 ----

// Gradient descent on the full data set with a small step; the mini-batch defaults are
// noisier and are reported alongside for information.
RunConfig toy_config() {
  RunConfig c;
  c.train.batch_size = 0;
  c.train.learning_rate = 3e-3;
  c.train.sweeps = 3;
  return c;
}

bool strictly_decreasing(const TrainReport& r) {
  double prev = r.initial_nll;
  if (r.nll_trace.size() < 3) return false;
  for (std::size_t s = 0; s < 3; ++s) {
    if (!(r.nll_trace[s] < prev)) return false;
    prev = r.nll_trace[s];
  }
  return true;
}

Outcome training_sanity() {
  // probes are scored by the model trained with the default config for its full sweep count
  const RunConfig defaults;
  std::ostringstream detail;
  bool ok = true;
  for (ModelKind kind : {ModelKind::mps, ModelKind::ttn}) {
    int decreasing = 0, decreasing_defaults = 0, mean_order = 0;
    double wins = 0.0, pairs = 0.0, worst_seed = 1.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Eigen::MatrixXd train = toy_correlated_dataset(2000, seed);
      TrainReport report;
      train_model(train, kind, toy_config(), seed, &report);
      decreasing += strictly_decreasing(report);
      TrainReport report_defaults;
      const AnomalyModel model = train_model(train, kind, defaults, seed, &report_defaults);
      decreasing_defaults += strictly_decreasing(report_defaults);

      const Eigen::MatrixXd held_out = toy_correlated_dataset(200, 1000 + seed);
      std::mt19937_64 rng(5000 + seed);
      Eigen::MatrixXd noise(200, train.cols());
      for (Eigen::Index j = 0; j < train.cols(); ++j) {
        std::uniform_real_distribution<double> u(train.col(j).minCoeff(), train.col(j).maxCoeff());
        for (Eigen::Index r = 0; r < noise.rows(); ++r) noise(r, j) = u(rng);
      }
      const auto s_in = score_raw(model, held_out);
      const auto s_noise = score_raw(model, noise);
      double w = 0.0;
      for (double a : s_noise) {
        for (double b : s_in) w += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
      }
      const double p = static_cast<double>(s_noise.size() * s_in.size());
      worst_seed = std::min(worst_seed, w / p);
      wins += w;
      pairs += p;
      mean_order += mean_std(s_noise).first > mean_std(s_in).first;
    }
    const double share = wins / pairs;
    ok = ok && decreasing >= 19 && share >= 0.95;
    detail << to_string(kind) << ": NLL decreasing over 3 sweeps in " << decreasing << "/20 seeds (mini-batch defaults "
           << decreasing_defaults << "/20), noise > in-distribution in " << fmt(100 * share)
           << "% of pairs (worst seed " << fmt(100 * worst_seed) << "%, mean NLL ordered in " << mean_order
           << "/20); ";
  }
  return verdict(ok, detail.str());
}

Outcome explainability_structure() {
  const std::set<std::pair<std::size_t, std::size_t>> expected{{0, 1}, {4, 6}};
  const Eigen::MatrixXd data = toy_correlated_dataset(2000, 0);
  std::ostringstream detail;
  bool ok = true;
  for (ModelKind kind : {ModelKind::mps, ModelKind::ttn}) {
    const AnomalyModel model = train_model(data, kind, toy_config(), 0);
    const auto top = top_pairs(all_to_all_mi(model.tree()).raw, 2);
    const std::set<std::pair<std::size_t, std::size_t>> got(top.begin(), top.end());
    ok = ok && got == expected;
    detail << to_string(kind) << " top-2 (" << top[0].first << "," << top[0].second << ") (" << top[1].first << ","
           << top[1].second << "); ";
  }
  const auto hist = top_pairs(histogram_mi_matrix(data), 2);
  ok = ok && std::set<std::pair<std::size_t, std::size_t>>(hist.begin(), hist.end()) == expected;
  detail << "histogram top-2 (" << hist[0].first << "," << hist[0].second << ") (" << hist[1].first << ","
         << hist[1].second << ")";
  return verdict(ok, detail.str());
}

// ---- 6 ----

Outcome benchmark_numbers() {
  const char* ecg = std::getenv("TNAD_ECG5000_CSV");
  const char* sat = std::getenv("TNAD_SATELLITE_CSV");
  if (!ecg && !sat) return {Status::skip, "set TNAD_ECG5000_CSV and/or TNAD_SATELLITE_CSV to run"};
  std::ostringstream detail;
  bool ok = true;
  auto run = [&](const char* path, const char* name, ModelKind kind, std::size_t n, const CsvSpec& spec, double bar) {
    RunConfig c;
    c.dataset = spec;
    c.dataset.path = path;
    c.encoder.n_functions = n;
    c.folds_to_run = {0};
    const auto t0 = std::chrono::steady_clock::now();
    const BenchmarkResult r = run_benchmark(load_csv(c.dataset), kind, c, 0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double auc = r.folds.at(0).separation_auc;
    ok = ok && auc >= bar;
    detail << name << " " << to_string(kind) << " separation " << fmt(auc) << " (>= " << bar << ", " << fmt(secs)
           << " s); ";
  };
  if (ecg) {
    CsvSpec spec;
    spec.label_column = "0";
    const char* regular = std::getenv("TNAD_ECG5000_REGULAR");
    spec.regular_values = {regular ? regular : "1"};
    run(ecg, "ECG5000", ModelKind::mps, 4, spec, 0.87);
    run(ecg, "ECG5000", ModelKind::ttn, 4, spec, 0.91);
  }
  if (sat) {
    CsvSpec spec;
    spec.label_column = "-1";
    spec.anomaly_values = {"1"};
    run(sat, "Satellite", ModelKind::mps, 5, spec, 0.84);
  }
  if (!ecg || !sat) detail << (ecg ? "Satellite" : "ECG5000") << " not provided";
  return verdict(ok, detail.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance checks");
  int only = 0;
  app.add_option("--only", only, "run a single criterion (1-8)")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, encoder_exactness},   {2, oracle_equivalence},       {3, gradient_correctness}, {4, canonical_integrity},
      {5, training_sanity},     {6, benchmark_numbers},        {7, explainability_structure},
      {8, [] {
         std::mt19937_64 rng(808);
         int auc_bad = 0, eer_bad = 0;
         for (int t = 0; t < 200; ++t) {
           const std::size_t n = 2 + rng() % 60;
           std::vector<double> s(n);
           std::vector<int> y(n);
           for (std::size_t i = 0; i < n; ++i) {
             s[i] = t % 2 ? static_cast<double>(rng() % 10) : std::normal_distribution<double>()(rng);
             y[i] = static_cast<int>(rng() % 2);
           }
           y[0] = 0;
           y[1] = 1;
           double conc = 0.0, pos = 0.0, neg = 0.0;
           for (std::size_t i = 0; i < n; ++i) {
             (y[i] ? pos : neg) += 1;
             for (std::size_t j = 0; j < n; ++j) {
               if (y[i] == 1 && y[j] == 0) conc += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
             }
           }
           auc_bad += auc_roc(s, y) != conc / (pos * neg);
           if (t >= 100) continue;

           const EerResult r = eer_threshold(s, y);
           double best_gap = 2.0, best_tpr = -1.0, best_t = 0.0;
           for (double th : s) {
             double tp = 0, tn = 0;
             for (std::size_t i = 0; i < n; ++i) {
               if (y[i] && s[i] >= th) ++tp;
               if (!y[i] && s[i] < th) ++tn;
             }
             const double tpr = tp / pos, tnr = tn / neg, gap = std::abs(tpr - tnr);
             if (gap < best_gap - 1e-15 ||
                 (std::abs(gap - best_gap) <= 1e-15 && (tpr > best_tpr || (tpr == best_tpr && th < best_t)))) {
               best_gap = gap;
               best_tpr = tpr;
               best_t = th;
             }
           }
           eer_bad += r.threshold != best_t || std::abs(std::abs(r.tpr - r.tnr) - best_gap) > 1e-15;
         }
         return verdict(auc_bad == 0 && eer_bad == 0, "AUC mismatches " + std::to_string(auc_bad) +
                                                          "/200, EER mismatches " + std::to_string(eer_bad) + "/100");
       }}};

  bool failed = false, skipped = false;
  for (const auto& [id, check] : criteria) {
    if (only && id != only) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    if (id == 6 && !only) {
      o = {Status::skip, "runs as its own test (--only 6)"};
    } else {
      try {
        o = check();
      } catch (const std::exception& e) {
        o = {Status::fail, std::string("exception: ") + e.what()};
      }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    std::cout << tag << " criterion " << id << ": " << o.detail << " [" << fmt(secs) << " s]" << std::endl;
    failed = failed || o.status == Status::fail;
    skipped = skipped || o.status == Status::skip;
  }
  if (failed) return 1;
  return only && skipped ? 77 : 0;
}
