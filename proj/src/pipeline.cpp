#include "auxcov/pipeline.hpp"

#include "auxcov/errors.hpp"

#include <cmath>

namespace auxcov {

std::vector<IndexPair> all_upper_pairs(int p) {
  std::vector<IndexPair> out;
  out.reserve(static_cast<size_t>(p) * (p - 1) / 2);
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) out.emplace_back(i, j);
  return out;
}

Eigen::MatrixXd measurement_error_covariance(const PartialSymmetricMatrix& cov, const Eigen::MatrixXd* baseline_cov,
                                             const AuxCovOptions& options, int max_pairs, int* substituted) {
  if (!cov.pattern)
    throw Error(ErrorCode::kConfigOutOfRange, "GLS needs either an explicit Phi or the observation pattern");
  GaussianPsiOptions po;
  po.policy = options.cross_terms;
  po.baseline = baseline_cov;
  po.max_pairs = max_pairs;
  const PsiComponents psi = psi_gaussian(*cov.pattern, cov, po);
  if (substituted) *substituted = psi.substituted_cross_terms;
  return psi.psi / static_cast<double>(cov.pattern->n());
}

namespace {

Eigen::MatrixXd baseline_matrix(const FittedBaseline& model, const Eigen::MatrixXd& w_all, int p) {
  const Eigen::VectorXd z = predict_baseline(model, w_all);
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(p, p);
  Eigen::Index r = 0;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j, ++r) c(i, j) = c(j, i) = fisher_inv(z(r));
  return c;
}

Eigen::MatrixXd scale_to_covariance(const Eigen::MatrixXd& corr, const Eigen::VectorXd& variances) {
  const Eigen::VectorXd sd = variances.array().sqrt();
  // sd_i·sd_j first so the result is exactly symmetric.
  Eigen::MatrixXd out = (sd * sd.transpose()).cwiseProduct(corr);
  out.diagonal() = variances;
  return out;
}

}  // namespace

AuxCovFit fit_auxcov(const PartialSymmetricMatrix& cov, const AuxiliaryCovariates& aux, const RegressionSpec& spec,
                     const AuxCovOptions& options) {
  const int p = cov.p();
  if (aux.p() != p)
    throw Error(ErrorCode::kDimensionMismatch, "auxiliary covariates cover " + std::to_string(aux.p()) +
                                                   " variables, covariance has " + std::to_string(p));
  AuxCovFit fit;
  fit.spec = spec;
  fit.pairs = cov.pairs;
  fit.variances = cov.values.diagonal();

  const ObservedCorrelations obs = observed_correlations(cov);
  fit.observed_corr = obs.corr.values;
  fit.diagnostics.clamped_correlations = obs.clamped;

  const auto& upper = cov.pairs.upper;
  Eigen::VectorXd y(static_cast<Eigen::Index>(upper.size()));
  for (size_t r = 0; r < upper.size(); ++r) y(r) = fisher(fit.observed_corr(upper[r].first, upper[r].second));
  const Eigen::MatrixXd w_train = aux.rows(upper);
  const Eigen::MatrixXd w_all = aux.rows(all_upper_pairs(p));

  if (std::holds_alternative<OlsSpec>(spec)) {
    fit.model = fit_ols(y, w_train);
  } else if (const auto* s = std::get_if<SplineSpec>(&spec)) {
    if (aux.q() != 1)
      throw Error(ErrorCode::kDimensionMismatch, "splines need a single auxiliary covariate, got q = " +
                                                     std::to_string(aux.q()));
    fit.model = fit_splines(y, w_train.col(0), s->knots);
  } else {
    const auto& g = std::get<GlsSpec>(spec);
    Eigen::MatrixXd phi;
    if (g.phi) {
      phi = *g.phi;
      if (phi.rows() != y.size() || phi.cols() != y.size())
        throw Error(ErrorCode::kDimensionMismatch, "Phi must be |U| x |U| = " + std::to_string(y.size()));
    } else {
      // Ψ̃ may need covariances outside O; the OLS baseline supplies them.
      const FittedBaseline ols = fit_ols(y, w_train);
      const Eigen::MatrixXd stand_in = scale_to_covariance(baseline_matrix(ols, w_all, p), fit.variances);
      phi = measurement_error_covariance(cov, &stand_in, options, g.max_pairs,
                                         &fit.diagnostics.substituted_cross_terms);
    }
    fit.model = fit_gls(y, w_train, phi, g.controls, g.max_pairs);
  }
  for (const auto& w : fit.model.warnings) fit.diagnostics.warnings.push_back(w);

  fit.baseline_raw = baseline_matrix(fit.model, w_all, p);
  fit.completed_raw = fit.baseline_raw;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (i != j && cov.pairs.contains(i, j)) fit.completed_raw(i, j) = fit.observed_corr(i, j);

  const PdCorrection pb = pd_correction(fit.baseline_raw, options.pd_delta);
  const PdCorrection pc = pd_correction(fit.completed_raw, options.pd_delta);
  fit.baseline_corr = pb.matrix;
  fit.completed_corr = pc.matrix;
  fit.diagnostics.baseline_pd_steps = pb.steps;
  fit.diagnostics.completed_pd_steps = pc.steps;
  fit.diagnostics.baseline_min_eigenvalue = pb.min_eigenvalue_before;
  fit.diagnostics.completed_min_eigenvalue = pc.min_eigenvalue_before;
  if (obs.clamped > 0)
    fit.diagnostics.warnings.push_back(std::to_string(obs.clamped) + " observed correlations clamped");
  return fit;
}

Eigen::MatrixXd AuxCovFit::correlation(double alpha) const {
  Eigen::MatrixXd c = alpha * baseline_corr + (1.0 - alpha) * completed_corr;
  c.diagonal().setOnes();
  return c;
}

Eigen::MatrixXd AuxCovFit::covariance(double alpha) const { return scale_to_covariance(correlation(alpha), variances); }

AuxCovResult combine(const AuxCovFit& fit, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kConfigOutOfRange, "alpha must lie in [0, 1]");
  AuxCovResult r;
  r.alpha = alpha;
  r.spec = fit.spec;
  r.model = fit.model;
  r.pairs = fit.pairs;
  r.observed_corr = fit.observed_corr;
  r.baseline_raw = fit.baseline_raw;
  r.completed_raw = fit.completed_raw;
  r.baseline_corr = fit.baseline_corr;
  r.completed_corr = fit.completed_corr;
  r.final_corr = fit.correlation(alpha);
  r.final_cov = scale_to_covariance(r.final_corr, fit.variances);
  r.diagnostics = fit.diagnostics;
  return r;
}

AuxCovResult run_auxcov(const PartialSymmetricMatrix& cov, const AuxiliaryCovariates& aux, double alpha,
                        const RegressionSpec& spec, const AuxCovOptions& options) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::kConfigOutOfRange, "alpha must lie in [0, 1]");
  return combine(fit_auxcov(cov, aux, spec, options), alpha);
}

}  // namespace auxcov
