#pragma once

// Baseline regression of Fisher-scale correlations on auxiliary covariates:
// ordinary least squares, cubic regression splines (q = 1), and a GLS model
// with known measurement-error covariance Φ fitted by adaptive gradient ascent.

#include "auxcov/splines.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace auxcov {

struct GradientControls {
  double step = 0.001;        // b
  double acceleration = 1.4;  // a
  double tolerance = 1e-7;    // s, on the relative objective change
  int max_iter = 100;         // T
  int max_shrinks = 200;      // consecutive step shrinks before the point counts as stationary
};

inline constexpr int kDefaultMaxPairs = 20000;

struct OlsSpec {};
struct SplineSpec {
  int knots = 4;
};
struct GlsSpec {
  /// Measurement-error covariance over U. When absent the pipeline builds
  /// Ψ̃/n from the observation pattern.
  std::optional<Eigen::MatrixXd> phi;
  GradientControls controls;
  int max_pairs = kDefaultMaxPairs;
};
using RegressionSpec = std::variant<OlsSpec, SplineSpec, GlsSpec>;

/// "ols", "splines(τ=4)", "gls".
std::string spec_label(const RegressionSpec& spec);
/// Knot count for spline specs, 0 otherwise.
int spec_knots(const RegressionSpec& spec);

enum class BaselineKind { kOls, kSplines, kGls };
std::string_view kind_name(BaselineKind kind);

struct FittedBaseline {
  BaselineKind kind = BaselineKind::kOls;
  int q = 1;
  /// Intercept first for OLS/GLS; B-spline coefficients for splines.
  Eigen::VectorXd beta;
  std::optional<CubicBSplineBasis> basis;
  double residual_variance = 0.0;  // mean squared in-sample residual
  double sigma_eps_sq = 0.0;       // GLS irreducible-error variance e^φ
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = true;
  std::vector<std::string> warnings;

  double predict(const Eigen::VectorXd& w) const;
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& w) const;
};

FittedBaseline fit_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& w);
FittedBaseline fit_splines(const Eigen::VectorXd& y, const Eigen::VectorXd& w, int tau);
FittedBaseline fit_gls(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, const Eigen::MatrixXd& phi,
                       const GradientControls& controls = {}, int max_pairs = kDefaultMaxPairs);

/// f̂(W_ij) for every row of `w_all` (one row per pair).
Eigen::VectorXd predict_baseline(const FittedBaseline& model, const Eigen::MatrixXd& w_all);

/// ℓ(β, φ) = −log det(e^φ I + Φ) − rᵀ(e^φ I + Φ)⁻¹r with r = y − [1|W]β,
/// evaluated in the eigenbasis of Φ.
class GlsObjective {
 public:
  GlsObjective(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, const Eigen::MatrixXd& phi);

  int num_params() const noexcept { return static_cast<int>(design_.cols()) + 1; }
  const Eigen::VectorXd& phi_eigenvalues() const noexcept { return lambda_; }

  /// theta = (β, φ).
  double value(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  /// argmax over β of ℓ(β, φ): the weighted least-squares solution.
  Eigen::VectorXd best_beta(double log_sigma_eps_sq) const;

 private:
  Eigen::VectorXd lambda_;
  Eigen::VectorXd y_rot_;
  Eigen::MatrixXd design_;  // Qᵀ[1 | W]
};

}  // namespace auxcov
