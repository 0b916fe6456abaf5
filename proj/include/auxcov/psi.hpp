#pragma once

// Asymptotic covariance Ψ of Fisher-transformed observed correlations,
// Ψ = F J H Jᵀ F, from true moments or from the data.

#include "auxcov/corestats.hpp"
#include "auxcov/dataset.hpp"
#include "auxcov/regression.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <vector>

namespace auxcov {

struct PsiComponents {
  std::vector<IndexPair> upper;       // U (rows/cols of psi, rows of J)
  std::vector<IndexPair> upper_diag;  // Ū (rows/cols of H, cols of J)
  Eigen::MatrixXd H;
  Eigen::SparseMatrix<double, Eigen::RowMajor> J;
  Eigen::VectorXd F;  // diagonal of F
  Eigen::MatrixXd psi;
  double asymmetry = 0.0;           // relative, before symmetrization
  int substituted_cross_terms = 0;  // Gaussian builder only
};

/// c_ijkl with π_t = n_t / n; pairs must be in Ū.
double c_weight(const ObservationPattern& pattern, IndexPair ij, IndexPair kl);

/// Ψ from the true covariance and fourth-moment covariances Cov(Z_iZ_j, Z_kZ_l).
PsiComponents psi_oracle(const ObservationPattern& pattern, const Eigen::MatrixXd& sigma,
                         const FourthMomentOracle& moments, int max_pairs = kDefaultMaxPairs);

/// Ψ̂ with centred empirical fourth moments; J and F use `cov`.
PsiComponents psi_empirical(const IncompleteDataset& data, const PartialSymmetricMatrix& cov,
                            int max_pairs = kDefaultMaxPairs);

enum class CrossTermPolicy {
  kBaselineOrZero,  // use the supplied baseline covariance where given, else 0
  kFail,            // MissingMomentEntry
};

struct GaussianPsiOptions {
  CrossTermPolicy policy = CrossTermPolicy::kBaselineOrZero;
  /// Full p×p covariance whose entries stand in for Σ̂_ik with (i,k) ∉ O.
  const Eigen::MatrixXd* baseline = nullptr;
  int max_pairs = kDefaultMaxPairs;
};

/// Ψ̃ with Isserlis fourth moments built from `cov`.
PsiComponents psi_gaussian(const ObservationPattern& pattern, const PartialSymmetricMatrix& cov,
                           const GaussianPsiOptions& options = {});

/// J and F for correlations implied by `sigma` (only entries on Ū are read),
/// followed by Ψ = F J H Jᵀ F. Fills `J`, `F`, `psi` and `asymmetry`.
void assemble_psi(PsiComponents& out, const Eigen::MatrixXd& sigma);

}  // namespace auxcov
