#pragma once

// Simulation tools: ground-truth correlation matrices driven by an auxiliary
// variable, structured missingness, loss metrics and oracle tuning.

#include "auxcov/corestats.hpp"
#include "auxcov/dataset.hpp"
#include "auxcov/pipeline.hpp"
#include "auxcov/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace auxcov {

struct GroundTruth {
  Eigen::MatrixXd sigma;  // PD-corrected correlation; also the covariance
  Eigen::MatrixXd raw;    // C before correction
  Eigen::MatrixXd w;      // symmetric W_ij, zero diagonal
  AuxiliaryCovariates aux{2, 1};
  double gamma = 0.0;
  bool nonlinear = false;
  int pd_steps = 0;
};

/// C_ij = sqrt(γ/2)·a_ij + sqrt((1−γ)/2)·Z_ij with a_ij = W_ij or sin(7 W_ij),
/// W and Z i.i.d. Uniform(−1, 1).
GroundTruth generate_ground_truth(int p, double gamma, bool nonlinear, std::uint64_t seed);

struct SplitPlan {
  std::vector<VarSet> subsets;  // 0-based, before merging of equal windows
  int overlap = 0;              // K = 2: s; K > 2: window width
  double target_eta = 0.0;
  double realized_eta = 0.0;
};

/// K = 2: V_1 = {1..p−s}, V_2 = {s+1..p} with s = ceil(p·sqrt(η/2)).
/// K > 2: equal-width windows at evenly spaced offsets, width chosen to bring
/// the realized η closest to the target.
SplitPlan plan_split(int p, int k, double eta);

/// Block sizes n/K, differing by at most one.
std::vector<int> block_sizes(int n, int k);

struct InjectedData {
  IncompleteDataset data;
  SplitPlan plan;
};

InjectedData inject_missingness(const Eigen::MatrixXd& sigma, int n, int k, double eta, std::uint64_t seed);

struct LossQuartet {
  std::optional<double> corr_o;    // empty when O has no off-diagonal pairs
  std::optional<double> corr_oc;   // empty when Oᶜ is empty
  std::optional<double> pcorr_o;   // empty also when the estimate is singular
  std::optional<double> pcorr_oc;
  bool singular_estimate = false;
};

LossQuartet losses(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth_sigma, const PairSets& pairs);

/// −Θ_ij / sqrt(Θ_ii Θ_jj) with Θ = Σ⁻¹; empty if Σ is not invertible.
std::optional<Eigen::MatrixXd> partial_correlations(const Eigen::MatrixXd& sigma);

struct OracleChoice {
  double alpha = 0.0;
  int spec = 0;
  double loss = 0.0;
};

/// Grid minimizer of Σ_{O}(Ĉ_ij(α) − C_ij)² with the CV tie-break.
OracleChoice oracle_alpha(const PartialSymmetricMatrix& cov, const AuxiliaryCovariates& aux,
                          std::span<const RegressionSpec> specs, const Eigen::MatrixXd& truth_corr,
                          std::span<const double> alpha_grid, const AuxCovOptions& options = {});

/// Observed sample covariance of one Gaussian data set drawn on `pattern`,
/// produced from exact per-block sufficient statistics (block sums and a
/// Bartlett-factor Wishart scatter) instead of individual rows.
PartialSymmetricMatrix sample_observed_covariance(const ObservationPattern& pattern,
                                                  const std::vector<Eigen::MatrixXd>& block_factors, Rng& rng,
                                                  const PairSets& pairs);

/// Cholesky factors of Σ restricted to each block.
std::vector<Eigen::MatrixXd> block_cholesky(const ObservationPattern& pattern, const Eigen::MatrixXd& sigma);

/// Covariance over `draws` simulated data sets of g(Ĉ_U) on U.
Eigen::MatrixXd monte_carlo_fisher_covariance(const ObservationPattern& pattern, const Eigen::MatrixXd& sigma,
                                              int draws, std::uint64_t seed, int threads = 0);

}  // namespace auxcov
