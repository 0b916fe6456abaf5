#pragma once

// Completion of an incomplete covariance estimate from a baseline regression
// of Fisher-scale correlations on auxiliary covariates, shrinking observed
// correlations towards the baseline by a weight α.

#include "auxcov/corestats.hpp"
#include "auxcov/dataset.hpp"
#include "auxcov/psi.hpp"
#include "auxcov/regression.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace auxcov {

struct AuxCovOptions {
  double pd_delta = kDefaultPdDelta;
  /// How Ψ̃ treats covariances outside O when GLS builds its own Φ.
  CrossTermPolicy cross_terms = CrossTermPolicy::kBaselineOrZero;
};

struct AuxCovDiagnostics {
  int clamped_correlations = 0;
  int baseline_pd_steps = 0;
  int completed_pd_steps = 0;
  double baseline_min_eigenvalue = 0.0;   // before correction
  double completed_min_eigenvalue = 0.0;  // before correction
  int substituted_cross_terms = 0;        // GLS with Φ = Ψ̃/n only
  std::vector<std::string> warnings;
};

/// Everything that does not depend on α. Combining for many α values is a
/// cheap affine operation.
struct AuxCovFit {
  RegressionSpec spec;
  FittedBaseline model;
  PairSets pairs;
  Eigen::MatrixXd observed_corr;   // Ĉ on O, NaN elsewhere
  Eigen::MatrixXd baseline_raw;    // tanh of the fitted baseline, unit diagonal
  Eigen::MatrixXd completed_raw;   // observed on O, baseline on Oᶜ
  Eigen::MatrixXd baseline_corr;   // C̄ after PD correction
  Eigen::MatrixXd completed_corr;  // C̃ after PD correction
  Eigen::VectorXd variances;       // diag(Σ̂_O)
  AuxCovDiagnostics diagnostics;

  Eigen::MatrixXd correlation(double alpha) const;
  Eigen::MatrixXd covariance(double alpha) const;
};

struct AuxCovResult {
  double alpha = 0.0;
  RegressionSpec spec;
  FittedBaseline model;
  PairSets pairs;
  Eigen::MatrixXd observed_corr;
  Eigen::MatrixXd baseline_raw;
  Eigen::MatrixXd completed_raw;
  Eigen::MatrixXd baseline_corr;
  Eigen::MatrixXd completed_corr;
  Eigen::MatrixXd final_corr;
  Eigen::MatrixXd final_cov;
  AuxCovDiagnostics diagnostics;
};

AuxCovFit fit_auxcov(const PartialSymmetricMatrix& cov, const AuxiliaryCovariates& aux, const RegressionSpec& spec,
                     const AuxCovOptions& options = {});
AuxCovResult combine(const AuxCovFit& fit, double alpha);
AuxCovResult run_auxcov(const PartialSymmetricMatrix& cov, const AuxiliaryCovariates& aux, double alpha,
                        const RegressionSpec& spec, const AuxCovOptions& options = {});

/// Φ = Ψ̃/n over U, with `baseline_cov` standing in for covariances outside O.
Eigen::MatrixXd measurement_error_covariance(const PartialSymmetricMatrix& cov, const Eigen::MatrixXd* baseline_cov,
                                             const AuxCovOptions& options, int max_pairs, int* substituted = nullptr);

/// All unordered pairs i < j in row-major order.
std::vector<IndexPair> all_upper_pairs(int p);

}  // namespace auxcov
