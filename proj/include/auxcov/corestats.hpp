#pragma once

// Observed sample moments of incomplete data, the Fisher transform, the
// covariance of observed sample covariances, and positive-definite correction.

#include "auxcov/dataset.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace auxcov {

/// Symmetric p×p values defined on a pair set O; entries outside O are NaN.
/// `pattern` is the observation pattern the values were estimated from, when
/// known; the Gaussian Ψ estimator and GLS need it.
struct PartialSymmetricMatrix {
  Eigen::MatrixXd values;
  PairSets pairs;
  std::shared_ptr<const ObservationPattern> pattern;

  int p() const noexcept { return pairs.p; }
  bool defined(int i, int j) const { return pairs.contains(i, j); }
  double operator()(int i, int j) const { return values(i, j); }
};

struct MeanMode {
  /// Known population means; empty means centre each variable by its own
  /// marginal mean over all samples observing it.
  std::optional<Eigen::VectorXd> known;

  static MeanMode empirical() { return {}; }
  static MeanMode known_mean(Eigen::VectorXd mu) { return MeanMode{std::move(mu)}; }
};

/// Observed sample covariance over the estimation pair set (pairs with
/// n_ij >= 2, plus the diagonal). Normalized by n_ij.
PartialSymmetricMatrix observed_sample_covariance(const IncompleteDataset& data, const MeanMode& mean = {});

/// Variables whose observed variance is exactly zero.
std::vector<int> zero_variance_variables(const PartialSymmetricMatrix& cov);

inline constexpr double kCorrelationClamp = 1e-6;

struct ObservedCorrelations {
  PartialSymmetricMatrix corr;
  int clamped = 0;  // off-diagonal pairs (i<j) pushed to ±(1 - kCorrelationClamp)
};

ObservedCorrelations observed_correlations(const PartialSymmetricMatrix& cov);

double fisher(double r);
inline double fisher_inv(double z) { return std::tanh(z); }

/// Returns Cov(Z_i Z_j, Z_k Z_l) for centred variables Z.
using FourthMomentOracle = std::function<double(int, int, int, int)>;

/// Isserlis' theorem: Σ_ik Σ_jl + Σ_il Σ_jk.
FourthMomentOracle gaussian_fourth_moments(const Eigen::MatrixXd& sigma);

/// Cov(Σ̂_ij, Σ̂_kl) = n_ijkl / (n_ij n_kl) · Cov(Z_i Z_j, Z_k Z_l), known-mean case.
double cov_of_observed_covariances(const ObservationPattern& pattern, const FourthMomentOracle& moments,
                                   IndexPair ij, IndexPair kl);

inline constexpr double kDefaultPdDelta = 0.001;

struct PdCorrection {
  Eigen::MatrixXd matrix;
  int steps = 0;                       // number of δ-additions applied
  double min_eigenvalue_before = 0.0;  // of the correlation-scaled input
};

/// Diagonal loading of the correlation-scaled matrix in steps of δ until the
/// minimum eigenvalue is positive, then rescaling back to the input's
/// diagonal. Inputs that are already positive definite come back untouched.
PdCorrection pd_correction(const Eigen::MatrixXd& a, double delta = kDefaultPdDelta);

/// Positive-definiteness threshold on λ_min used throughout: 1e-10 · p.
inline double pd_threshold(Eigen::Index p) { return 1e-10 * static_cast<double>(p); }

double min_eigenvalue(const Eigen::MatrixXd& symmetric);

/// diag(S)^{-1/2} S diag(S)^{-1/2} with an exact unit diagonal.
Eigen::MatrixXd covariance_to_correlation(const Eigen::MatrixXd& sigma);

}  // namespace auxcov
