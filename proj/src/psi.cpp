#include "auxcov/psi.hpp"

#include "auxcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace auxcov {

namespace {

void check_size(const PairSets& pairs, int max_pairs) {
  if (static_cast<int>(pairs.upper.size()) > max_pairs)
    throw Error(ErrorCode::kTooLarge, std::to_string(pairs.upper.size()) + " observed pairs exceed the dense limit of " +
                                          std::to_string(max_pairs));
}

/// Row s holds, for pair s of Ū, n_t if block t observes both variables.
Eigen::MatrixXd block_membership(const ObservationPattern& pattern, const std::vector<IndexPair>& pairs) {
  Eigen::MatrixXd ind = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pairs.size()), pattern.num_blocks());
  for (size_t s = 0; s < pairs.size(); ++s)
    for (int t = 0; t < pattern.num_blocks(); ++t)
      if (pattern.contains(t, pairs[s].first) && pattern.contains(t, pairs[s].second)) ind(s, t) = 1.0;
  return ind;
}

/// ĉ_ijkl = n · n_ijkl / (n_ij n_kl) for all pairs of Ū at once.
Eigen::MatrixXd overlap_weights(const ObservationPattern& pattern, const std::vector<IndexPair>& pairs,
                                Eigen::MatrixXd* quad_counts = nullptr) {
  const Eigen::MatrixXd ind = block_membership(pattern, pairs);
  Eigen::VectorXd n_t(pattern.num_blocks());
  for (int t = 0; t < pattern.num_blocks(); ++t) n_t(t) = pattern.count(t);
  const Eigen::MatrixXd quad = ind * n_t.asDiagonal() * ind.transpose();
  const Eigen::VectorXd pair_n = ind * n_t;
  const Eigen::VectorXd inv = pair_n.cwiseInverse();
  Eigen::MatrixXd c = static_cast<double>(pattern.n()) * (inv.asDiagonal() * quad * inv.asDiagonal());
  if (quad_counts) *quad_counts = quad;
  return c;
}

PsiComponents skeleton(const PairSets& pairs) {
  PsiComponents out;
  out.upper = pairs.upper;
  out.upper_diag = pairs.upper_diag;
  return out;
}

}  // namespace

double c_weight(const ObservationPattern& pattern, IndexPair ij, IndexPair kl) {
  double num = 0.0, a = 0.0, b = 0.0;
  for (int t = 0; t < pattern.num_blocks(); ++t) {
    const bool in_ij = pattern.contains(t, ij.first) && pattern.contains(t, ij.second);
    const bool in_kl = pattern.contains(t, kl.first) && pattern.contains(t, kl.second);
    const double pi = pattern.proportion(t);
    if (in_ij) a += pi;
    if (in_kl) b += pi;
    if (in_ij && in_kl) num += pi;
  }
  if (a == 0.0 || b == 0.0) throw Error(ErrorCode::kNotObserved, "pair has no joint observations");
  return num / (a * b);
}

void assemble_psi(PsiComponents& out, const Eigen::MatrixXd& sigma) {
  const auto m = static_cast<Eigen::Index>(out.upper.size());
  const auto mbar = static_cast<Eigen::Index>(out.upper_diag.size());
  const int p = static_cast<int>(sigma.rows());

  std::vector<int> diag_pos(p, -1);
  std::vector<int> pos(static_cast<size_t>(p) * p, -1);
  for (Eigen::Index s = 0; s < mbar; ++s) {
    const auto [i, j] = out.upper_diag[s];
    pos[static_cast<size_t>(i) * p + j] = static_cast<int>(s);
    if (i == j) diag_pos[i] = static_cast<int>(s);
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(3 * m));
  out.F.resize(m);
  constexpr double bound = 1.0 - kCorrelationClamp;
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto [i, j] = out.upper[r];
    const double sii = sigma(i, i), sjj = sigma(j, j), sij = sigma(i, j);
    if (!(sii > 0.0) || !(sjj > 0.0))
      throw Error(ErrorCode::kZeroVariance, "nonpositive variance in Jacobian");
    const double root = std::sqrt(sii * sjj);
    trip.emplace_back(r, pos[static_cast<size_t>(i) * p + j], 1.0 / root);
    trip.emplace_back(r, diag_pos[i], -sij / (2.0 * sii * root));
    trip.emplace_back(r, diag_pos[j], -sij / (2.0 * sjj * root));
    const double c = std::clamp(sij / root, -bound, bound);
    out.F(r) = 1.0 / (1.0 - c * c);
  }
  out.J.resize(m, mbar);
  out.J.setFromTriplets(trip.begin(), trip.end());

  const Eigen::MatrixXd jh = out.J * out.H;
  Eigen::MatrixXd core = jh * out.J.transpose();
  core = out.F.asDiagonal() * core * out.F.asDiagonal();
  const double scale = std::max(core.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  out.asymmetry = m == 0 ? 0.0 : (core - core.transpose()).cwiseAbs().maxCoeff() / scale;
  if (out.asymmetry > 1e-8)
    throw Error(ErrorCode::kNotSymmetric, "assembled covariance asymmetry " + std::to_string(out.asymmetry));
  out.psi = 0.5 * (core + core.transpose());
}

PsiComponents psi_oracle(const ObservationPattern& pattern, const Eigen::MatrixXd& sigma,
                         const FourthMomentOracle& moments, int max_pairs) {
  const int p = pattern.p();
  if (sigma.rows() != p || sigma.cols() != p) throw Error(ErrorCode::kDimensionMismatch, "covariance has wrong size");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::kSingularSigma, "true covariance is not positive definite");

  const PairSets pairs = estimation_pairs(pattern);
  check_size(pairs, max_pairs);
  PsiComponents out = skeleton(pairs);
  const auto& ubar = out.upper_diag;
  const auto mbar = static_cast<Eigen::Index>(ubar.size());

  // π-weighted overlap, the same quantity as n·n_ijkl/(n_ij n_kl).
  const Eigen::MatrixXd ind = block_membership(pattern, ubar);
  Eigen::VectorXd pi(pattern.num_blocks());
  for (int t = 0; t < pattern.num_blocks(); ++t) pi(t) = pattern.proportion(t);
  const Eigen::MatrixXd num = ind * pi.asDiagonal() * ind.transpose();
  const Eigen::VectorXd den = ind * pi;

  out.H.resize(mbar, mbar);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index s = 0; s < mbar; ++s) {
    for (Eigen::Index u = s; u < mbar; ++u) {
      double h = 0.0;
      if (num(s, u) > 0.0) {
        const double c = num(s, u) / (den(s) * den(u));
        h = c * moments(ubar[s].first, ubar[s].second, ubar[u].first, ubar[u].second);
      }
      out.H(s, u) = out.H(u, s) = h;
    }
  }
  assemble_psi(out, sigma);
  return out;
}

PsiComponents psi_empirical(const IncompleteDataset& data, const PartialSymmetricMatrix& cov, int max_pairs) {
  const auto& pat = data.pattern();
  const int p = pat.p();
  if (cov.p() != p) throw Error(ErrorCode::kDimensionMismatch, "covariance and data dimensions differ");
  check_size(cov.pairs, max_pairs);
  PsiComponents out = skeleton(cov.pairs);
  const auto& ubar = out.upper_diag;
  const auto mbar = static_cast<Eigen::Index>(ubar.size());
  for (const auto& [i, j] : out.upper)
    if (pat.pair_count(i, j) < 2)
      throw Error(ErrorCode::kDegeneratePair, "pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");

  // M_i over N_ii.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (int t = 0; t < pat.num_blocks(); ++t) {
    const Eigen::VectorXd col_sum = data.block(t).colwise().sum().transpose();
    const auto& vars = pat.subset(t);
    for (size_t c = 0; c < vars.size(); ++c) mean(vars[c]) += col_sum(c);
  }
  for (int i = 0; i < p; ++i) mean(i) /= pat.pair_count(i, i);

  std::vector<int> pos(static_cast<size_t>(p) * p, -1);
  for (Eigen::Index s = 0; s < mbar; ++s) pos[static_cast<size_t>(ubar[s].first) * p + ubar[s].second] = static_cast<int>(s);

  // Products Z_iZ_j per block; their Gram matrices give the fourth-moment sums.
  Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(mbar);
  Eigen::MatrixXd sum4 = Eigen::MatrixXd::Zero(mbar, mbar);
  for (int t = 0; t < pat.num_blocks(); ++t) {
    const auto& vars = pat.subset(t);
    Eigen::MatrixXd z = data.block(t);
    for (size_t c = 0; c < vars.size(); ++c) z.col(c).array() -= mean(vars[c]);
    std::vector<int> idx;
    std::vector<std::pair<int, int>> cols;
    for (size_t a = 0; a < vars.size(); ++a)
      for (size_t b = a; b < vars.size(); ++b) {
        const int s = pos[static_cast<size_t>(vars[a]) * p + vars[b]];
        if (s < 0) continue;
        idx.push_back(s);
        cols.emplace_back(static_cast<int>(a), static_cast<int>(b));
      }
    if (idx.empty()) continue;
    Eigen::MatrixXd prod(z.rows(), static_cast<Eigen::Index>(idx.size()));
    for (size_t c = 0; c < idx.size(); ++c) prod.col(c) = z.col(cols[c].first).cwiseProduct(z.col(cols[c].second));
    const Eigen::VectorXd col_sum = prod.colwise().sum().transpose();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(prod.cols(), prod.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(prod.transpose());
    for (size_t a = 0; a < idx.size(); ++a) {
      sum2(idx[a]) += col_sum(a);
      for (size_t b = 0; b <= a; ++b) {
        sum4(idx[a], idx[b]) += gram(a, b);
        if (a != b) sum4(idx[b], idx[a]) += gram(a, b);
      }
    }
  }

  Eigen::MatrixXd quad;
  const Eigen::MatrixXd c = overlap_weights(pat, ubar, &quad);
  Eigen::VectorXd m2(mbar);
  for (Eigen::Index s = 0; s < mbar; ++s) m2(s) = sum2(s) / pat.pair_count(ubar[s].first, ubar[s].second);

  out.H.resize(mbar, mbar);
#pragma omp parallel for schedule(static)
  for (Eigen::Index u = 0; u < mbar; ++u)
    for (Eigen::Index s = 0; s < mbar; ++s)
      out.H(s, u) = quad(s, u) > 0.0 ? c(s, u) * (sum4(s, u) / quad(s, u) - m2(s) * m2(u)) : 0.0;

  assemble_psi(out, cov.values);
  return out;
}

PsiComponents psi_gaussian(const ObservationPattern& pattern, const PartialSymmetricMatrix& cov,
                           const GaussianPsiOptions& options) {
  const int p = pattern.p();
  if (cov.p() != p) throw Error(ErrorCode::kDimensionMismatch, "covariance and pattern dimensions differ");
  if (options.baseline && (options.baseline->rows() != p || options.baseline->cols() != p))
    throw Error(ErrorCode::kDimensionMismatch, "baseline covariance has wrong size");
  check_size(cov.pairs, options.max_pairs);
  PsiComponents out = skeleton(cov.pairs);
  const auto& ubar = out.upper_diag;
  const auto mbar = static_cast<Eigen::Index>(ubar.size());

  // Σ̂ with every entry the Isserlis products may touch; substitutes flagged.
  Eigen::MatrixXd s = cov.values;
  std::vector<char> substitute(static_cast<size_t>(p) * p, 0);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (!cov.defined(i, j)) {
        substitute[static_cast<size_t>(i) * p + j] = 1;
        s(i, j) = options.baseline ? (*options.baseline)(i, j) : 0.0;
      }

  const Eigen::MatrixXd c = overlap_weights(pattern, ubar);
  out.H.resize(mbar, mbar);
  int substituted = 0;
  bool missing = false;
#pragma omp parallel for schedule(dynamic, 8) reduction(+ : substituted) reduction(|| : missing)
  for (Eigen::Index a = 0; a < mbar; ++a) {
    const auto [i, j] = ubar[a];
    for (Eigen::Index b = a; b < mbar; ++b) {
      double h = 0.0;
      if (c(a, b) > 0.0) {
        const auto [k, l] = ubar[b];
        const int hits = substitute[static_cast<size_t>(i) * p + k] + substitute[static_cast<size_t>(j) * p + l] +
                         substitute[static_cast<size_t>(i) * p + l] + substitute[static_cast<size_t>(j) * p + k];
        if (hits > 0) {
          substituted += hits;
          if (options.policy == CrossTermPolicy::kFail) missing = true;
        }
        h = c(a, b) * (s(i, k) * s(j, l) + s(i, l) * s(j, k));
      }
      out.H(a, b) = out.H(b, a) = h;
    }
  }
  if (missing) throw Error(ErrorCode::kMissingMomentEntry, "an Isserlis product needs a covariance outside O");
  out.substituted_cross_terms = substituted;
  assemble_psi(out, cov.values);
  return out;
}

}  // namespace auxcov
