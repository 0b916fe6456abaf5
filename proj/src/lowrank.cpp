#include "auxcov/baselines.hpp"

#include "auxcov/errors.hpp"
#include "auxcov/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace auxcov {

SoftImputeState soft_impute(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mask, double lambda,
                            const Eigen::MatrixXd& warm, int max_iter, double tol) {
  SoftImputeState st;
  st.z = warm;
  const Eigen::MatrixXd observed = x.cwiseProduct(mask);
  const Eigen::MatrixXd unobserved = Eigen::MatrixXd::Ones(x.rows(), x.cols()) - mask;
  for (st.iterations = 1; st.iterations <= max_iter; ++st.iterations) {
    const Eigen::MatrixXd filled = observed + st.z.cwiseProduct(unobserved);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd shrunk = (svd.singularValues().array() - lambda).cwiseMax(0.0);
    st.rank = static_cast<int>((shrunk.array() > 0.0).count());
    const Eigen::MatrixXd next = svd.matrixU().leftCols(st.rank) * shrunk.head(st.rank).asDiagonal() *
                                 svd.matrixV().leftCols(st.rank).transpose();
    const double denom = std::max(st.z.norm(), 1e-300);
    st.relative_change = (next - st.z).norm() / denom;
    st.z = next;
    if (st.relative_change < tol) {
      st.converged = true;
      break;
    }
  }
  st.iterations = std::min(st.iterations, max_iter);
  return st;
}

LowRankResult lowrank_complete(const IncompleteDataset& data, const LowRankOptions& options) {
  const auto& pat = data.pattern();
  const int n = pat.n();
  const int p = pat.p();
  if (options.lambda_grid && options.lambda_grid->empty()) throw Error(ErrorCode::kGridEmpty, "lambda grid is empty");
  if (!options.lambda_grid && options.grid_size < 1) throw Error(ErrorCode::kGridEmpty, "grid size must be positive");
  if (!(options.holdout_frac >= 0.0 && options.holdout_frac < 1.0))
    throw Error(ErrorCode::kConfigOutOfRange, "holdout fraction must lie in [0, 1)");

  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, p);
  for (int k = 0; k < pat.num_blocks(); ++k)
    for (int v : pat.subset(k)) mask.block(pat.offset(k), v, pat.count(k), 1).setOnes();

  Eigen::VectorXd mean(p);
  for (int i = 0; i < p; ++i) {
    double s = 0.0;
    for (int r = 0; r < n; ++r)
      if (mask(r, i) != 0.0) s += data.values()(r, i);
    mean(i) = s / mask.col(i).sum();
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, p);
  for (int r = 0; r < n; ++r)
    for (int i = 0; i < p; ++i)
      if (mask(r, i) != 0.0) x(r, i) = data.values()(r, i) - mean(i);

  LowRankResult out;
  std::vector<double> grid;
  if (options.lambda_grid) {
    grid = *options.lambda_grid;
  } else {
    const double s1 = Eigen::BDCSVD<Eigen::MatrixXd>(x).singularValues()(0);
    const int g = options.grid_size;
    for (int k = 0; k < g; ++k) {
      const double frac = g == 1 ? 0.0 : static_cast<double>(k) / (g - 1);
      grid.push_back(s1 * std::pow(10.0, -3.0 * frac));
    }
  }
  std::sort(grid.begin(), grid.end(), std::greater<>());

  // Held-out cells never enter the fit mask.
  Eigen::MatrixXd fit_mask = mask;
  std::vector<std::pair<int, int>> held;
  if (options.holdout_frac > 0.0) {
    Rng rng(options.seed);
    std::bernoulli_distribution hold(options.holdout_frac);
    for (int i = 0; i < p; ++i)
      for (int r = 0; r < n; ++r)
        if (mask(r, i) != 0.0 && hold(rng)) {
          fit_mask(r, i) = 0.0;
          held.emplace_back(r, i);
        }
  }

  double chosen = grid.back();
  if (!held.empty() && grid.size() > 1) {
    Eigen::MatrixXd warm = Eigen::MatrixXd::Zero(n, p);
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
      const SoftImputeState st = soft_impute(x, fit_mask, lambda, warm, options.max_iter, options.tol);
      warm = st.z;
      double err = 0.0;
      for (const auto& [r, i] : held) err += (st.z(r, i) - x(r, i)) * (st.z(r, i) - x(r, i));
      err /= static_cast<double>(held.size());
      out.report.lambdas.push_back(lambda);
      out.report.validation_error.push_back(err);
      out.report.ranks.push_back(st.rank);
      if (err < best) {
        best = err;
        chosen = lambda;
      }
    }
  } else {
    out.report.lambdas = grid;
  }

  // Refit on all observed cells along the grid down to the chosen value.
  Eigen::MatrixXd warm = Eigen::MatrixXd::Zero(n, p);
  SoftImputeState st;
  for (double lambda : grid) {
    st = soft_impute(x, mask, lambda, warm, options.max_iter, options.tol);
    warm = st.z;
    if (lambda == chosen) break;
  }
  out.report.lambda = chosen;
  out.report.effective_rank = st.rank;
  out.report.iterations = st.iterations;
  out.report.relative_change = st.relative_change;
  out.report.converged = st.converged;
  if (!st.converged)
    out.report.warnings.push_back("NotConverged: relative change " + std::to_string(st.relative_change));

  Eigen::MatrixXd completed = x.cwiseProduct(mask) + st.z.cwiseProduct(Eigen::MatrixXd::Ones(n, p) - mask);
  const Eigen::RowVectorXd col_mean = completed.colwise().mean();
  const Eigen::MatrixXd centred = completed.rowwise() - col_mean;
  out.sigma = centred.transpose() * centred / static_cast<double>(n);
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
  out.completed = completed.rowwise() + mean.transpose();
  return out;
}

}  // namespace auxcov
