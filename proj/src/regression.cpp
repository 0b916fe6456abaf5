#include "auxcov/regression.hpp"

#include "auxcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace auxcov {

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& w) {
  Eigen::MatrixXd d(w.rows(), w.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(w.cols()) = w;
  return d;
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols())
    throw Error(ErrorCode::kRankDeficient, std::string(what) + " design has rank " + std::to_string(qr.rank()) +
                                               " < " + std::to_string(design.cols()));
  return qr.solve(y);
}

}  // namespace

std::string spec_label(const RegressionSpec& spec) {
  if (std::holds_alternative<OlsSpec>(spec)) return "ols";
  if (const auto* s = std::get_if<SplineSpec>(&spec)) return "splines(tau=" + std::to_string(s->knots) + ")";
  return "gls";
}

int spec_knots(const RegressionSpec& spec) {
  const auto* s = std::get_if<SplineSpec>(&spec);
  return s ? s->knots : 0;
}

std::string_view kind_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kOls: return "ols";
    case BaselineKind::kSplines: return "splines";
    case BaselineKind::kGls: return "gls";
  }
  return "?";
}

double FittedBaseline::predict(const Eigen::VectorXd& w) const {
  if (w.size() != q) throw Error(ErrorCode::kDimensionMismatch, "covariate has dimension " + std::to_string(w.size()));
  if (kind == BaselineKind::kSplines) return basis->value(beta, w(0));
  return beta(0) + beta.tail(q).dot(w);
}

Eigen::VectorXd FittedBaseline::predict_rows(const Eigen::MatrixXd& w) const {
  if (w.cols() != q) throw Error(ErrorCode::kDimensionMismatch, "covariates have " + std::to_string(w.cols()) + " columns");
  Eigen::VectorXd out(w.rows());
  if (kind == BaselineKind::kSplines) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) out(r) = basis->value(beta, w(r, 0));
  } else {
    out = (w * beta.tail(q)).array() + beta(0);
  }
  return out;
}

Eigen::VectorXd predict_baseline(const FittedBaseline& model, const Eigen::MatrixXd& w_all) {
  return model.predict_rows(w_all);
}

FittedBaseline fit_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& w) {
  if (w.rows() != y.size()) throw Error(ErrorCode::kDimensionMismatch, "response and covariate row counts differ");
  if (w.rows() < w.cols() + 1)
    throw Error(ErrorCode::kRankDeficient, "need at least q+1 = " + std::to_string(w.cols() + 1) + " pairs");
  FittedBaseline out;
  out.kind = BaselineKind::kOls;
  out.q = static_cast<int>(w.cols());
  const Eigen::MatrixXd design = with_intercept(w);
  out.beta = least_squares(design, y, "OLS");
  out.residual_variance = (y - design * out.beta).squaredNorm() / static_cast<double>(y.size());
  return out;
}

FittedBaseline fit_splines(const Eigen::VectorXd& y, const Eigen::VectorXd& w, int tau) {
  if (w.size() != y.size()) throw Error(ErrorCode::kDimensionMismatch, "response and covariate lengths differ");
  if (tau < 1) throw Error(ErrorCode::kConfigOutOfRange, "spline knot count must be at least 1");
  if (y.size() < tau + 4)
    throw Error(ErrorCode::kTooFewPoints, std::to_string(y.size()) + " points for a basis of dimension " +
                                              std::to_string(tau + 4));
  const std::span<const double> ws(w.data(), static_cast<size_t>(w.size()));
  const auto [lo, hi] = std::minmax_element(ws.begin(), ws.end());
  if (!(*hi > *lo)) throw Error(ErrorCode::kRankDeficient, "covariate is constant");

  KnotPlacement knots = place_quantile_knots(ws, tau);
  FittedBaseline out;
  out.kind = BaselineKind::kSplines;
  out.q = 1;
  out.warnings = std::move(knots.warnings);
  out.basis.emplace(*lo, *hi, std::move(knots.interior));
  const Eigen::MatrixXd design = out.basis->design(ws);
  out.beta = least_squares(design, y, "spline");
  out.residual_variance = (y - design * out.beta).squaredNorm() / static_cast<double>(y.size());
  return out;
}

GlsObjective::GlsObjective(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, const Eigen::MatrixXd& phi) {
  const Eigen::Index m = y.size();
  if (w.rows() != m || phi.rows() != m || phi.cols() != m)
    throw Error(ErrorCode::kDimensionMismatch, "GLS inputs have inconsistent sizes");
  const double scale = std::max(phi.cwiseAbs().maxCoeff(), 1.0);
  if ((phi - phi.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error(ErrorCode::kNonPSDPhi, "measurement-error covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(phi);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::kNonPSDPhi, "eigendecomposition failed");
  lambda_ = es.eigenvalues();
  if (lambda_(0) < -1e-10 * std::max(1.0, std::abs(lambda_(m - 1))))
    throw Error(ErrorCode::kNonPSDPhi, "minimum eigenvalue " + std::to_string(lambda_(0)));
  lambda_ = lambda_.cwiseMax(0.0);
  y_rot_ = es.eigenvectors().transpose() * y;
  design_ = es.eigenvectors().transpose() * with_intercept(w);
}

double GlsObjective::value(const Eigen::VectorXd& theta) const {
  const Eigen::Index k = design_.cols();
  const double s = std::exp(theta(k));
  const Eigen::ArrayXd d = lambda_.array() + s;
  const Eigen::ArrayXd r = (y_rot_ - design_ * theta.head(k)).array();
  return -d.log().sum() - (r.square() / d).sum();
}

Eigen::VectorXd GlsObjective::best_beta(double log_sigma_eps_sq) const {
  const Eigen::ArrayXd inv = (lambda_.array() + std::exp(log_sigma_eps_sq)).inverse();
  const Eigen::MatrixXd weighted = inv.matrix().asDiagonal() * design_;
  return (design_.transpose() * weighted).ldlt().solve(weighted.transpose() * y_rot_);
}

Eigen::VectorXd GlsObjective::gradient(const Eigen::VectorXd& theta) const {
  const Eigen::Index k = design_.cols();
  const double s = std::exp(theta(k));
  const Eigen::ArrayXd d = lambda_.array() + s;
  const Eigen::ArrayXd r = (y_rot_ - design_ * theta.head(k)).array();
  Eigen::VectorXd g(k + 1);
  g.head(k) = 2.0 * design_.transpose() * (r / d).matrix();
  g(k) = -s * d.inverse().sum() + s * (r.square() / d.square()).sum();
  return g;
}

FittedBaseline fit_gls(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, const Eigen::MatrixXd& phi,
                       const GradientControls& controls, int max_pairs) {
  if (y.size() > max_pairs)
    throw Error(ErrorCode::kTooLarge, std::to_string(y.size()) + " pairs exceed the GLS limit of " +
                                          std::to_string(max_pairs) + "; use ols or splines");
  if (!(controls.step > 0.0) || !(controls.acceleration > 0.0) || !(controls.tolerance > 0.0) ||
      controls.max_iter < 1)
    throw Error(ErrorCode::kConfigOutOfRange, "invalid gradient controls");

  const FittedBaseline ols = fit_ols(y, w);
  const GlsObjective objective(y, w, phi);
  const Eigen::Index k = ols.beta.size();

  Eigen::VectorXd theta(k + 1);
  theta.head(k) = ols.beta;
  theta(k) = std::log(std::max(ols.residual_variance, std::numeric_limits<double>::min()));

  FittedBaseline out;
  out.kind = BaselineKind::kGls;
  out.q = ols.q;
  out.converged = false;
  double b = controls.step;
  double current = objective.value(theta);
  out.objective_trace.push_back(current);

  int t = 0;
  while (t < controls.max_iter) {
    const Eigen::VectorXd grad = objective.gradient(theta);
    Eigen::VectorXd candidate;
    double cand_value = -std::numeric_limits<double>::infinity();
    int shrinks = 0;
    for (;;) {
      candidate = theta + b * grad;
      cand_value = objective.value(candidate);
      if (cand_value > current) break;
      if (++shrinks > controls.max_shrinks) break;
      b /= controls.acceleration;
    }
    if (!(cand_value > current)) {
      // No ascent direction left at working precision.
      out.converged = true;
      break;
    }
    const double rel = std::abs((cand_value - current) / current);
    theta = candidate;
    current = cand_value;
    out.objective_trace.push_back(current);
    if (rel < controls.tolerance) {
      out.converged = true;
      break;
    }
    b *= controls.acceleration;
    ++t;
  }
  out.iterations = t;
  if (!out.converged) out.warnings.emplace_back("NoProgress: stopping threshold not met after T iterations");

  // A single step size cannot resolve β and φ at once when their curvatures
  // differ by orders of magnitude, so β is finished by its exact maximizer at
  // the final φ. This never lowers ℓ.
  const Eigen::VectorXd polished = objective.best_beta(theta(k));
  Eigen::VectorXd final_theta = theta;
  final_theta.head(k) = polished;
  const double final_value = objective.value(final_theta);
  if (final_value >= current) {
    theta = final_theta;
    if (final_value > current) out.objective_trace.push_back(final_value);
  }

  out.beta = theta.head(k);
  out.sigma_eps_sq = std::exp(theta(k));
  const Eigen::MatrixXd design = with_intercept(w);
  out.residual_variance = (y - design * out.beta).squaredNorm() / static_cast<double>(y.size());
  return out;
}

}  // namespace auxcov
