#pragma once

// Comparison completions: the maximum-determinant positive definite
// completion of Σ̂_O, and the covariance of a soft-impute low-rank
// completion of the data matrix.

#include "auxcov/corestats.hpp"
#include "auxcov/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace auxcov {

struct MaxDetOptions {
  double tol = 1e-10;   // on max |(S⁻¹)_ij| over Oᶜ
  int max_iter = 2000;  // sweeps at the final stage
  double pd_delta = kDefaultPdDelta;
};

struct MaxDetSolveReport {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  int initial_pd_steps = 0;  // δ-steps needed by the zero-filled start
  int homotopy_stages = 0;   // intermediate problems solved before the real one
  std::vector<double> logdet_trace;  // final stage, one value per sweep
  std::vector<std::string> warnings;
};

struct MaxDetResult {
  Eigen::MatrixXd sigma;
  MaxDetSolveReport report;
};

/// Cyclic coordinate ascent over the missing entries in row-major order.
/// When the zero-filled start is not positive definite the observed
/// off-diagonals are first shrunk and then restored along a homotopy, so the
/// returned matrix matches Σ̂_O exactly.
MaxDetResult maxdet_complete(const PartialSymmetricMatrix& cov, const MaxDetOptions& options = {});

struct LowRankOptions {
  /// Candidate λ values; when absent, `grid_size` log-spaced values from
  /// 1e-3·σ₁ to σ₁ of the zero-filled centred matrix.
  std::optional<std::vector<double>> lambda_grid;
  int grid_size = 20;
  double holdout_frac = 0.1;
  int max_iter = 500;
  double tol = 1e-6;  // relative change ‖Z_new − Z‖_F / ‖Z‖_F
  std::uint64_t seed = 0;
};

struct LowRankSolveReport {
  double lambda = 0.0;
  int effective_rank = 0;
  int iterations = 0;
  double relative_change = 0.0;
  bool converged = false;
  std::vector<double> lambdas;           // evaluated grid, descending
  std::vector<double> validation_error;  // mean squared error on held-out cells
  std::vector<int> ranks;                // effective rank per grid value
  std::vector<std::string> warnings;
};

struct LowRankResult {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd completed;  // X*, on the original (uncentred) scale
  LowRankSolveReport report;
};

LowRankResult lowrank_complete(const IncompleteDataset& data, const LowRankOptions& options = {});

struct SoftImputeState {
  Eigen::MatrixXd z;
  int iterations = 0;
  double relative_change = 0.0;
  int rank = 0;
  bool converged = false;
};

/// Z ← SVT_λ(P_Ω(X) + P_Ω⊥(Z)) from `warm`; `mask` is 1 on Ω.
SoftImputeState soft_impute(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask, double lambda,
                            const Eigen::MatrixXd& warm, int max_iter, double tol);

}  // namespace auxcov
