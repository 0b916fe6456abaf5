#include "auxcov/bootstrap.hpp"

#include "auxcov/errors.hpp"
#include "auxcov/random.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace auxcov {

namespace {

std::vector<std::uint64_t> replicate_seeds(const BootstrapOptions& options) {
  if (!options.replicate_seeds.empty()) return options.replicate_seeds;
  std::vector<std::uint64_t> seeds(static_cast<size_t>(std::max(options.replicates, 0)));
  for (size_t b = 0; b < seeds.size(); ++b) seeds[b] = derive_seed(options.seed, b);
  return seeds;
}

using Generator = std::function<IncompleteDataset(Rng&)>;

BootstrapReport run_replicates(const Generator& generate, const AuxiliaryCovariates& aux,
                               std::span<const RegressionSpec> specs, std::span<const double> alpha_grid,
                               const BootstrapOptions& options) {
  const auto seeds = replicate_seeds(options);
  const int b_total = static_cast<int>(seeds.size());
  if (b_total < 2) throw Error(ErrorCode::kConfigOutOfRange, "bootstrap needs B >= 2");

  std::vector<std::optional<Eigen::MatrixXd>> estimates(b_total);
  std::vector<double> alphas(b_total, 0.0);
  std::vector<std::string> failures(b_total);

  int threads = options.threads;
#ifdef _OPENMP
  if (threads <= 0) threads = omp_get_max_threads();
#else
  threads = 1;
#endif

#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int b = 0; b < b_total; ++b) {
    try {
      Rng rng(seeds[b]);
      const IncompleteDataset sample = generate(rng);
      CvOptions cv = options.cv;
      cv.seed = derive_seed(seeds[b], 1);
      cv.threads = 1;
      const CvSelection sel = select_and_fit(sample, aux, specs, alpha_grid, cv);
      estimates[b] = sel.result.final_cov;
      alphas[b] = sel.result.alpha;
    } catch (const Error& e) {
      failures[b] = e.what();
    }
  }

  BootstrapReport report;
  report.seeds = seeds;
  std::vector<const Eigen::MatrixXd*> done;
  for (int b = 0; b < b_total; ++b) {
    if (estimates[b]) {
      done.push_back(&*estimates[b]);
      report.alphas.push_back(alphas[b]);
    } else {
      ++report.skipped;
      report.warnings.push_back("replicate " + std::to_string(b + 1) + " skipped: " + failures[b]);
    }
  }
  report.completed = static_cast<int>(done.size());
  if (report.skipped > options.max_skip_fraction * b_total || report.completed < 2)
    throw Error(ErrorCode::kReplicateFailure, std::to_string(report.skipped) + " of " + std::to_string(b_total) +
                                                  " replicates failed");

  const Eigen::Index p = done.front()->rows();
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(p, p);
  for (const auto* m : done) mean += *m;
  mean /= static_cast<double>(done.size());
  Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(p, p);
  for (const auto* m : done) ss += (*m - mean).cwiseAbs2();
  report.se = (ss / static_cast<double>(done.size() - 1)).cwiseSqrt();

  if (options.phi) {
    double sum = 0.0;
    for (const auto* m : done) {
      report.phi_values.push_back(options.phi(*m));
      sum += report.phi_values.back();
    }
    const double mu = sum / static_cast<double>(done.size());
    double acc = 0.0;
    for (double v : report.phi_values) acc += (v - mu) * (v - mu);
    report.phi_se = std::sqrt(acc / static_cast<double>(done.size() - 1));
  }
  return report;
}

}  // namespace

BootstrapReport bootstrap_nonparametric(const IncompleteDataset& data, const AuxiliaryCovariates& aux,
                                        std::span<const RegressionSpec> specs, std::span<const double> alpha_grid,
                                        const BootstrapOptions& options) {
  const auto& pat = data.pattern();
  const Generator generate = [&](Rng& rng) {
    std::vector<std::vector<int>> rows(pat.num_blocks());
    for (int k = 0; k < pat.num_blocks(); ++k) {
      std::uniform_int_distribution<int> pick(0, pat.count(k) - 1);
      rows[k].resize(pat.count(k));
      for (auto& r : rows[k]) r = pick(rng);
    }
    return data.select_rows(rows);
  };
  return run_replicates(generate, aux, specs, alpha_grid, options);
}

BootstrapReport bootstrap_parametric(const AuxCovResult& result, const ObservationPattern& pattern,
                                     const AuxiliaryCovariates& aux, std::span<const RegressionSpec> specs,
                                     std::span<const double> alpha_grid, const BootstrapOptions& options) {
  if (result.final_cov.rows() != pattern.p())
    throw Error(ErrorCode::kDimensionMismatch, "fitted covariance and pattern dimensions differ");
  std::vector<Eigen::MatrixXd> factors;
  std::vector<VarSet> subsets;
  for (int k = 0; k < pattern.num_blocks(); ++k) {
    const auto& vars = pattern.subset(k);
    const auto m = static_cast<Eigen::Index>(vars.size());
    Eigen::MatrixXd block(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) block(a, b) = result.final_cov(vars[a], vars[b]);
    Eigen::LLT<Eigen::MatrixXd> llt(block);
    if (llt.info() != Eigen::Success || min_eigenvalue(block) <= pd_threshold(m) * block.diagonal().maxCoeff())
      throw Error(ErrorCode::kNonPDBlock, "covariance block " + std::to_string(k + 1) + " is not positive definite");
    factors.push_back(llt.matrixL());
    subsets.push_back(vars);
  }
  const Generator generate = [&](Rng& rng) {
    std::vector<Eigen::MatrixXd> blocks;
    for (int k = 0; k < pattern.num_blocks(); ++k)
      blocks.push_back(standard_normal(rng, pattern.count(k), factors[k].rows()) * factors[k].transpose());
    return IncompleteDataset::from_blocks(pattern.p(), subsets, blocks);
  };
  return run_replicates(generate, aux, specs, alpha_grid, options);
}

}  // namespace auxcov
