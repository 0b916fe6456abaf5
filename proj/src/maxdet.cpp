#include "auxcov/baselines.hpp"

#include "auxcov/errors.hpp"

#include <cmath>
#include <limits>

namespace auxcov {

namespace {

struct Ascent {
  const std::vector<IndexPair>& missing;
  const Eigen::VectorXd& inv_sd;  // 1/sqrt(d_i), to report residuals on the input scale
  double log_scale;               // Σ log d_i

  bool invert(const Eigen::MatrixXd& r, Eigen::MatrixXd& k, double& logdet) const {
    Eigen::LLT<Eigen::MatrixXd> llt(r);
    if (llt.info() != Eigen::Success) return false;
    k = llt.solve(Eigen::MatrixXd::Identity(r.rows(), r.cols()));
    logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum() + log_scale;
    return true;
  }

  double residual(const Eigen::MatrixXd& k) const {
    double worst = 0.0;
    for (const auto& [i, j] : missing) worst = std::max(worst, std::abs(k(i, j)) * inv_sd(i) * inv_sd(j));
    return worst;
  }

  /// Sweeps until the inverse residual drops below tol. Returns sweeps used.
  int run(Eigen::MatrixXd& r, double tol, int max_sweeps, double& res, std::vector<double>* trace) const {
    Eigen::MatrixXd k;
    double logdet = 0.0;
    if (!invert(r, k, logdet)) throw Error(ErrorCode::kNoPDCompletion, "iterate lost positive definiteness");
    if (trace) trace->push_back(logdet);
    res = residual(k);
    int sweeps = 0;
    while (res >= tol && sweeps < max_sweeps) {
      for (const auto& [i, j] : missing) {
        const double kij = k(i, j);
        if (kij == 0.0) continue;
        // Zero of (S⁻¹)_ij along S_ij: subtract the 2×2 Schur complement's off-diagonal.
        const double delta = kij / (k(i, i) * k(j, j) - kij * kij);
        r(i, j) += delta;
        r(j, i) += delta;
        Eigen::Matrix<double, Eigen::Dynamic, 2> ku(k.rows(), 2);
        ku.col(0) = k.col(i);
        ku.col(1) = k.col(j);
        Eigen::Matrix2d m;
        m << k(i, i), k(i, j) + 1.0 / delta, k(j, i) + 1.0 / delta, k(j, j);
        k -= ku * m.inverse() * ku.transpose();
      }
      ++sweeps;
      if (!invert(r, k, logdet)) throw Error(ErrorCode::kNoPDCompletion, "iterate lost positive definiteness");
      if (trace) trace->push_back(logdet);
      res = residual(k);
    }
    return sweeps;
  }
};

}  // namespace

MaxDetResult maxdet_complete(const PartialSymmetricMatrix& cov, const MaxDetOptions& options) {
  const int p = cov.p();
  MaxDetResult out;
  for (int i = 0; i < p; ++i)
    if (!(cov.values(i, i) > 0.0)) throw Error(ErrorCode::kNonpositiveDiagonal, "variance " + std::to_string(i + 1));

  std::vector<IndexPair> missing;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j)
      if (!cov.defined(i, j)) missing.emplace_back(i, j);
  if (missing.empty()) {
    out.sigma = cov.values;
    out.report.converged = true;
    return out;
  }

  if (cov.pattern) {
    for (int k = 0; k < cov.pattern->num_blocks(); ++k) {
      const auto& vars = cov.pattern->subset(k);
      const auto m = static_cast<Eigen::Index>(vars.size());
      Eigen::MatrixXd block(m, m);
      bool complete = true;
      for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) {
          complete = complete && cov.defined(vars[a], vars[b]);
          block(a, b) = cov.values(vars[a], vars[b]);
        }
      if (complete && min_eigenvalue(covariance_to_correlation(block)) <= pd_threshold(m))
        throw Error(ErrorCode::kNoPDCompletion, "observed block " + std::to_string(k + 1) + " is not positive definite");
    }
  }

  const Eigen::VectorXd d = cov.values.diagonal();
  const Eigen::VectorXd inv_sd = d.array().sqrt().inverse();
  Eigen::MatrixXd target = Eigen::MatrixXd::Identity(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (i != j && cov.defined(i, j)) target(i, j) = cov.values(i, j) * inv_sd(i) * inv_sd(j);

  const Ascent ascent{missing, inv_sd, d.array().log().sum()};
  const PdCorrection start = pd_correction(target, options.pd_delta);
  Eigen::MatrixXd r = start.matrix;
  out.report.initial_pd_steps = start.steps;
  double t = start.steps > 0 ? 1.0 / (1.0 + start.steps * options.pd_delta) : 1.0;

  // Observed off-diagonals go from t·C_O back to C_O; each intermediate
  // problem is solved loosely to keep the iterate well inside the cone.
  double step = 1.0 - t;
  double res = 0.0;
  while (t < 1.0) {
    ascent.run(r, 1e-6, 500, res, nullptr);
    const double t_new = std::min(1.0, t + step);
    Eigen::MatrixXd trial = r;
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        if (i != j && cov.defined(i, j)) trial(i, j) = t_new * target(i, j);
    if (min_eigenvalue(trial) > pd_threshold(p)) {
      r = std::move(trial);
      t = t_new;
      ++out.report.homotopy_stages;
      step *= 2.0;
    } else {
      step *= 0.5;
      if (step < 1e-12) throw Error(ErrorCode::kNoPDCompletion, "observed entries admit no positive definite completion");
    }
  }

  out.report.iterations = ascent.run(r, options.tol, options.max_iter, res, &out.report.logdet_trace);
  out.report.residual = res;
  out.report.converged = res < options.tol;
  if (!out.report.converged)
    out.report.warnings.push_back("NotConverged: inverse residual " + std::to_string(res) + " after " +
                                  std::to_string(out.report.iterations) + " sweeps");

  const Eigen::VectorXd sd = d.array().sqrt();
  out.sigma = (sd * sd.transpose()).cwiseProduct(r);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (cov.defined(i, j)) out.sigma(i, j) = cov.values(i, j);
  for (const auto& [i, j] : missing) out.sigma(j, i) = out.sigma(i, j);
  return out;
}

}  // namespace auxcov
