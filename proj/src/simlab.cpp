#include "auxcov/simlab.hpp"

#include "auxcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace auxcov {

GroundTruth generate_ground_truth(int p, double gamma, bool nonlinear, std::uint64_t seed) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorCode::kBadGamma, "gamma must lie in [0, 1]");
  if (p < 2) throw Error(ErrorCode::kConfigOutOfRange, "need p >= 2");
  Rng rng(seed);
  GroundTruth gt;
  gt.gamma = gamma;
  gt.nonlinear = nonlinear;
  gt.w = Eigen::MatrixXd::Zero(p, p);
  gt.raw = Eigen::MatrixXd::Identity(p, p);
  gt.aux = AuxiliaryCovariates(p, 1);
  const double a = std::sqrt(gamma / 2.0);
  const double b = std::sqrt((1.0 - gamma) / 2.0);
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      const double w = uniform(rng, -1.0, 1.0);
      const double z = uniform(rng, -1.0, 1.0);
      const double signal = nonlinear ? std::sin(7.0 * w) : w;
      gt.w(i, j) = gt.w(j, i) = w;
      gt.raw(i, j) = gt.raw(j, i) = a * signal + b * z;
      gt.aux.set(i, j, w);
    }
  const PdCorrection pd = pd_correction(gt.raw);
  gt.sigma = pd.matrix;
  gt.pd_steps = pd.steps;
  return gt;
}

namespace {

double eta_of(int p, const std::vector<VarSet>& subsets) {
  std::vector<char> seen(static_cast<size_t>(p) * p, 0);
  int observed = 0;
  for (const auto& v : subsets)
    for (int i : v)
      for (int j : v)
        if (!seen[static_cast<size_t>(i) * p + j]) {
          seen[static_cast<size_t>(i) * p + j] = 1;
          ++observed;
        }
  return 1.0 - static_cast<double>(observed) / (static_cast<double>(p) * p);
}

std::vector<VarSet> windows(int p, int k, int width) {
  std::vector<VarSet> out;
  for (int b = 0; b < k; ++b) {
    const int start = static_cast<int>(std::lround(static_cast<double>(b) * (p - width) / (k - 1)));
    VarSet v;
    for (int i = start; i < start + width; ++i) v.push_back(i);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

SplitPlan plan_split(int p, int k, double eta) {
  if (k < 1) throw Error(ErrorCode::kConfigOutOfRange, "need K >= 1");
  if (!(eta >= 0.0 && eta < 1.0)) throw Error(ErrorCode::kUnachievableEta, "eta must lie in [0, 1)");
  SplitPlan plan;
  plan.target_eta = eta;
  VarSet all(p);
  for (int i = 0; i < p; ++i) all[i] = i;
  if (eta == 0.0 || k == 1) {
    if (eta > 0.0) throw Error(ErrorCode::kUnachievableEta, "a single block gives eta = 0");
    plan.subsets.assign(k, all);
    return plan;
  }
  if (k == 2) {
    const int s = static_cast<int>(std::ceil(p * std::sqrt(eta / 2.0)));
    if (2 * s > p)
      throw Error(ErrorCode::kUnachievableEta, "eta " + std::to_string(eta) + " needs overlap " + std::to_string(s) +
                                                   " > p/2");
    plan.overlap = s;
    VarSet v1(all.begin(), all.end() - s), v2(all.begin() + s, all.end());
    plan.subsets = {v1, v2};
    plan.realized_eta = 2.0 * s * s / (static_cast<double>(p) * p);
    return plan;
  }
  // Widths keeping consecutive windows overlapping or adjacent cover V.
  double best = std::numeric_limits<double>::infinity();
  for (int width = p; width >= 1; --width) {
    auto subs = windows(p, k, width);
    bool covers = true;
    for (int b = 0; b + 1 < k; ++b) covers = covers && subs[b + 1].front() <= subs[b].back() + 1;
    if (!covers) break;
    const double e = eta_of(p, subs);
    if (std::abs(e - eta) < best) {
      best = std::abs(e - eta);
      plan.subsets = std::move(subs);
      plan.realized_eta = e;
      plan.overlap = width;
    }
  }
  if (plan.subsets.empty()) throw Error(ErrorCode::kUnachievableEta, "no window width covers all variables");
  return plan;
}

std::vector<int> block_sizes(int n, int k) {
  std::vector<int> out(k, n / k);
  for (int b = 0; b < n % k; ++b) ++out[b];
  return out;
}

InjectedData inject_missingness(const Eigen::MatrixXd& sigma, int n, int k, double eta, std::uint64_t seed) {
  const int p = static_cast<int>(sigma.rows());
  if (n < k) throw Error(ErrorCode::kConfigOutOfRange, "need at least one sample per block");
  SplitPlan plan = plan_split(p, k, eta);
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::kSingularSigma, "generating covariance is not PD");
  Rng rng(seed);
  const Eigen::MatrixXd full = standard_normal(rng, n, p) * llt.matrixL().transpose();
  const auto sizes = block_sizes(n, k);
  std::vector<Eigen::MatrixXd> blocks;
  int row = 0;
  for (int b = 0; b < k; ++b) {
    const auto& vars = plan.subsets[b];
    Eigen::MatrixXd block(sizes[b], static_cast<Eigen::Index>(vars.size()));
    for (size_t c = 0; c < vars.size(); ++c) block.col(c) = full.col(vars[c]).segment(row, sizes[b]);
    blocks.push_back(std::move(block));
    row += sizes[b];
  }
  return InjectedData{IncompleteDataset::from_blocks(p, plan.subsets, blocks), std::move(plan)};
}

std::optional<Eigen::MatrixXd> partial_correlations(const Eigen::MatrixXd& sigma) {
  const Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Eigen::MatrixXd theta = llt.solve(Eigen::MatrixXd::Identity(sym.rows(), sym.cols()));
  if (!theta.allFinite()) return std::nullopt;
  const Eigen::VectorXd inv_sd = theta.diagonal().array().sqrt().inverse();
  Eigen::MatrixXd rho = -(inv_sd.asDiagonal() * theta * inv_sd.asDiagonal());
  rho.diagonal().setOnes();
  return rho;
}

LossQuartet losses(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth_sigma, const PairSets& pairs) {
  const int p = pairs.p;
  const Eigen::MatrixXd est_c = covariance_to_correlation(0.5 * (estimate + estimate.transpose()));
  const Eigen::MatrixXd true_c = covariance_to_correlation(truth_sigma);
  const auto est_rho = partial_correlations(estimate);
  const auto true_rho = partial_correlations(truth_sigma);

  double co = 0.0, coc = 0.0, po = 0.0, poc = 0.0;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) {
      if (i == j) continue;
      const double dc = est_c(i, j) - true_c(i, j);
      const double dp = est_rho && true_rho ? (*est_rho)(i, j) - (*true_rho)(i, j) : 0.0;
      if (pairs.contains(i, j)) {
        co += dc * dc;
        po += dp * dp;
      } else {
        coc += dc * dc;
        poc += dp * dp;
      }
    }
  LossQuartet out;
  out.singular_estimate = !est_rho;
  const int off_o = pairs.observed_count - p;
  const int oc = pairs.missing_count();
  if (off_o > 0) out.corr_o = co / off_o;
  if (oc > 0) out.corr_oc = coc / oc;
  if (est_rho && true_rho) {
    if (off_o > 0) out.pcorr_o = po / off_o;
    if (oc > 0) out.pcorr_oc = poc / oc;
  }
  return out;
}

OracleChoice oracle_alpha(const PartialSymmetricMatrix& cov, const AuxiliaryCovariates& aux,
                          std::span<const RegressionSpec> specs, const Eigen::MatrixXd& truth_corr,
                          std::span<const double> alpha_grid, const AuxCovOptions& options) {
  if (specs.empty() || alpha_grid.empty()) throw Error(ErrorCode::kGridEmpty, "oracle grid is empty");
  const int p = cov.p();
  std::vector<IndexPair> off;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (i != j && cov.defined(i, j)) off.emplace_back(i, j);

  std::vector<std::optional<AuxCovFit>> fits;
  for (const auto& spec : specs) {
    try {
      fits.emplace_back(fit_auxcov(cov, aux, spec, options));
    } catch (const Error&) {
      fits.emplace_back(std::nullopt);
    }
  }
  OracleChoice best;
  best.loss = std::numeric_limits<double>::infinity();
  for (size_t a = 0; a < alpha_grid.size(); ++a)
    for (size_t s = 0; s < fits.size(); ++s) {
      if (!fits[s]) continue;
      const double alpha = alpha_grid[a];
      double total = 0.0;
      for (const auto& [i, j] : off) {
        const double est = alpha * fits[s]->baseline_corr(i, j) + (1.0 - alpha) * fits[s]->completed_corr(i, j);
        total += (est - truth_corr(i, j)) * (est - truth_corr(i, j));
      }
      if (total < best.loss || (total == best.loss && alpha < best.alpha)) best = {alpha, static_cast<int>(s), total};
    }
  if (!std::isfinite(best.loss)) throw Error(ErrorCode::kRankDeficient, "no candidate model could be fitted");
  return best;
}

std::vector<Eigen::MatrixXd> block_cholesky(const ObservationPattern& pattern, const Eigen::MatrixXd& sigma) {
  std::vector<Eigen::MatrixXd> out;
  for (int t = 0; t < pattern.num_blocks(); ++t) {
    const auto& vars = pattern.subset(t);
    const auto d = static_cast<Eigen::Index>(vars.size());
    Eigen::MatrixXd s(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) s(a, b) = sigma(vars[a], vars[b]);
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::kNonPDBlock, "block " + std::to_string(t + 1));
    out.push_back(llt.matrixL());
  }
  return out;
}

PartialSymmetricMatrix sample_observed_covariance(const ObservationPattern& pattern,
                                                  const std::vector<Eigen::MatrixXd>& block_factors, Rng& rng,
                                                  const PairSets& pairs) {
  const int p = pattern.p();
  const int nb = pattern.num_blocks();
  std::normal_distribution<double> normal;
  std::vector<Eigen::VectorXd> means(nb);
  std::vector<Eigen::MatrixXd> scatter(nb);
  for (int t = 0; t < nb; ++t) {
    const Eigen::MatrixXd& l = block_factors[t];
    const auto d = l.rows();
    const int nt = pattern.count(t);
    Eigen::VectorXd z(d);
    for (Eigen::Index a = 0; a < d; ++a) z(a) = normal(rng);
    means[t] = l * z / std::sqrt(static_cast<double>(nt));
    const int df = nt - 1;
    if (df >= d) {
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, d);
      for (Eigen::Index a = 0; a < d; ++a) {
        b(a, a) = std::sqrt(std::chi_squared_distribution<double>(static_cast<double>(df - a))(rng));
        for (Eigen::Index c = 0; c < a; ++c) b(a, c) = normal(rng);
      }
      const Eigen::MatrixXd lb = l * b;
      scatter[t] = lb * lb.transpose();
    } else {
      // Too few samples for the Bartlett factor: draw the rows themselves.
      Eigen::MatrixXd x = standard_normal(rng, nt, d) * l.transpose();
      const Eigen::RowVectorXd m = x.colwise().mean();
      means[t] = m.transpose();
      x.rowwise() -= m;
      scatter[t] = x.transpose() * x;
    }
  }

  Eigen::VectorXd grand = Eigen::VectorXd::Zero(p);
  for (int t = 0; t < nb; ++t) {
    const auto& vars = pattern.subset(t);
    for (size_t a = 0; a < vars.size(); ++a) grand(vars[a]) += pattern.count(t) * means[t](a);
  }
  for (int i = 0; i < p; ++i) grand(i) /= pattern.pair_count(i, i);

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(p, p);
  for (int t = 0; t < nb; ++t) {
    const auto& vars = pattern.subset(t);
    const double nt = pattern.count(t);
    for (size_t a = 0; a < vars.size(); ++a) {
      const double da = means[t](a) - grand(vars[a]);
      for (size_t b = 0; b < vars.size(); ++b)
        sums(vars[a], vars[b]) += scatter[t](a, b) + nt * da * (means[t](b) - grand(vars[b]));
    }
  }
  PartialSymmetricMatrix out;
  out.pairs = pairs;
  out.values = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (pairs.contains(i, j)) out.values(i, j) = sums(i, j) / pattern.pair_count(i, j);
  return out;
}

Eigen::MatrixXd monte_carlo_fisher_covariance(const ObservationPattern& pattern, const Eigen::MatrixXd& sigma,
                                              int draws, std::uint64_t seed, int threads) {
  if (draws < 2) throw Error(ErrorCode::kConfigOutOfRange, "need at least 2 Monte-Carlo draws");
  const PairSets pairs = estimation_pairs(pattern);
  const auto factors = block_cholesky(pattern, sigma);
  const auto& upper = pairs.upper;
  const auto m = static_cast<Eigen::Index>(upper.size());
  Eigen::VectorXd centre(m);
  const Eigen::MatrixXd c = covariance_to_correlation(sigma);
  for (Eigen::Index r = 0; r < m; ++r) centre(r) = std::atanh(c(upper[r].first, upper[r].second));

  // Fixed chunks combined in order keep the result independent of threads.
  constexpr int chunk = 1000;
  const int chunks = (draws + chunk - 1) / chunk;
  std::vector<Eigen::VectorXd> sum(chunks, Eigen::VectorXd::Zero(m));
  std::vector<Eigen::MatrixXd> outer(chunks, Eigen::MatrixXd::Zero(m, m));
#ifdef _OPENMP
  if (threads <= 0) threads = omp_get_max_threads();
#else
  threads = 1;
#endif
  constexpr double bound = 1.0 - kCorrelationClamp;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int ch = 0; ch < chunks; ++ch) {
    Eigen::VectorXd g(m);
    const int hi = std::min(draws, (ch + 1) * chunk);
    for (int d = ch * chunk; d < hi; ++d) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(d)));
      const PartialSymmetricMatrix cov = sample_observed_covariance(pattern, factors, rng, pairs);
      for (Eigen::Index r = 0; r < m; ++r) {
        const auto [i, j] = upper[r];
        const double rho = std::clamp(cov.values(i, j) / std::sqrt(cov.values(i, i) * cov.values(j, j)), -bound, bound);
        g(r) = std::atanh(rho) - centre(r);
      }
      sum[ch] += g;
      outer[ch].selfadjointView<Eigen::Lower>().rankUpdate(g);
    }
  }
  Eigen::VectorXd total = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd total_outer = Eigen::MatrixXd::Zero(m, m);
  for (int ch = 0; ch < chunks; ++ch) {
    total += sum[ch];
    total_outer += outer[ch];
  }
  const Eigen::MatrixXd full = total_outer.selfadjointView<Eigen::Lower>();
  const double nd = draws;
  const Eigen::VectorXd mean = total / nd;
  return (full - nd * mean * mean.transpose()) / (nd - 1.0);
}

}  // namespace auxcov
