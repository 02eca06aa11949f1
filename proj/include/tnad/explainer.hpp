#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tnad/legendre.hpp"
#include "tnad/tree_network.hpp"

namespace tnad {

/// Default cap on N^(2k) entries of a k-site density matrix.
inline constexpr std::size_t kDefaultRdmBudget = std::size_t{1} << 24;
/// Default cap on the number of sites for tensor-grid moment quadrature.
inline constexpr std::size_t kDefaultMomentSites = 3;

struct ReducedDensityMatrix {
  std::vector<std::size_t> sites;
  std::size_t phys_dim = 0;
  /// (N^k x N^k); row index runs over sites with the first listed site most significant.
  Eigen::MatrixXd matrix;
  double trace_before_normalization = 0.0;
};

struct MarginalStats {
  std::vector<std::size_t> sites;
  Eigen::VectorXd mean;  // rescaled domain [0, 1]
  Eigen::VectorXd std;
  Eigen::MatrixXd covariance;
  /// Raw-domain counterparts; empty when no rescaler was supplied.
  Eigen::VectorXd raw_mean;
  Eigen::VectorXd raw_std;
  Eigen::MatrixXd raw_covariance;
};

struct FeatureExplanation {
  std::size_t index = 0;
  double observed = 0.0;  // raw value
  double observed_rescaled = 0.0;
  double mean = 0.0;  // rescaled domain
  double std = 0.0;
  double raw_mean = 0.0;
  double raw_std = 0.0;
  bool flagged = false;
  std::optional<double> conditional_expected;  // raw domain, flagged features only
  std::string conditional_error;
};

struct AnomalyExplanation {
  std::string sample_id;
  double nll = 0.0;
  double k_sigma = 1.0;
  std::vector<FeatureExplanation> features;
};

struct ConditionalExpectations {
  std::map<std::size_t, double> values;  // raw domain
  std::map<std::size_t, std::string> errors;
};

/// Marginal of the Born distribution on `sites` (arbitrary, pairwise distinct data slots).
ReducedDensityMatrix reduced_density_matrix(const TensorTree& tree, std::span<const std::size_t> sites,
                                            std::size_t budget = kDefaultRdmBudget);

/// Marginal on `targets` conditioned on rescaled values at other sites; every site not
/// listed is marginalized. Throws ConditioningError if the unnormalized trace is below 1e-30.
ReducedDensityMatrix conditional_rdm(const TensorTree& tree, std::span<const std::size_t> targets,
                                     const std::map<std::size_t, double>& conditions,
                                     std::size_t budget = kDefaultRdmBudget);

/// q(x) = <x| rho |x> / Z with Z the quadrature integral over [0,1]^k.
double quasi_density(const ReducedDensityMatrix& rdm, std::span<const double> point);

/// Integral of the unnormalized density <x| rho |x> over the unit cube.
double quasi_density_integral(const ReducedDensityMatrix& rdm);

MarginalStats marginal_moments(const ReducedDensityMatrix& rdm, const FeatureRescaler* rescaler = nullptr,
                               std::size_t max_sites = kDefaultMomentSites);

/// Single-site moments for every data slot, sharing environments across sites.
std::vector<MarginalStats> single_site_marginals(const TensorTree& tree, const FeatureRescaler* rescaler = nullptr);

/// Natural-log entropy; eigenvalues in [-1e-10, 0) are clipped, more negative ones throw IntegrityError.
double von_neumann_entropy(const Eigen::MatrixXd& rho);
inline double von_neumann_entropy(const ReducedDensityMatrix& rdm) { return von_neumann_entropy(rdm.matrix); }

double mutual_information(const TensorTree& tree, std::span<const std::size_t> x, std::span<const std::size_t> y,
                          std::size_t budget = kDefaultRdmBudget);

struct MiMatrix {
  Eigen::MatrixXd raw;      // I({i};{j}) off the diagonal, zero diagonal
  Eigen::MatrixXd display;  // raw / max off-diagonal entry, zero diagonal
};

MiMatrix all_to_all_mi(const TensorTree& tree);
/// Display scaling of a raw MI matrix.
Eigen::MatrixXd scale_for_display(const Eigen::MatrixXd& raw);

/// Flags features whose rescaled value deviates from the marginal mean by more than k_sigma std.
AnomalyExplanation flag_features(const TensorTree& tree, const LegendreFeatureMap& encoder,
                                 std::span<const double> raw_sample, double k_sigma = 1.0);
AnomalyExplanation flag_features(std::span<const MarginalStats> marginals, const FeatureRescaler& rescaler,
                                 std::span<const double> raw_sample, double k_sigma = 1.0);

/// Expected raw value of every flagged feature conditioned on all unflagged features.
ConditionalExpectations conditional_expectations(const TensorTree& tree, const LegendreFeatureMap& encoder,
                                                 std::span<const double> raw_sample,
                                                 std::span<const std::size_t> flagged);

/// flag_features plus conditional expectations and the sample's NLL score.
AnomalyExplanation explain_sample(const TensorTree& tree, const LegendreFeatureMap& encoder,
                                  std::span<const MarginalStats> marginals, std::span<const double> raw_sample,
                                  double k_sigma = 1.0);

}  // namespace tnad
