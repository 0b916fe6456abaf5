#include "auxcov/corestats.hpp"

#include "auxcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace auxcov {

namespace {

Eigen::VectorXd marginal_means(const IncompleteDataset& data) {
  const auto& pat = data.pattern();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(pat.p());
  for (int k = 0; k < pat.num_blocks(); ++k) {
    const Eigen::MatrixXd b = data.block(k);
    const Eigen::VectorXd col_sum = b.colwise().sum().transpose();
    const auto& vars = pat.subset(k);
    for (size_t c = 0; c < vars.size(); ++c) sum(vars[c]) += col_sum(c);
  }
  for (int i = 0; i < pat.p(); ++i) sum(i) /= pat.pair_count(i, i);
  return sum;
}

}  // namespace

PartialSymmetricMatrix observed_sample_covariance(const IncompleteDataset& data, const MeanMode& mean) {
  const auto& pat = data.pattern();
  const int p = pat.p();
  Eigen::VectorXd m;
  if (mean.known) {
    if (mean.known->size() != p) throw Error(ErrorCode::kDimensionMismatch, "known mean has wrong length");
    m = *mean.known;
  } else {
    m = marginal_means(data);
  }

  // Cross-product sums accumulate block by block; every block is fully
  // observed on its own subset, so each block contributes a dense Gram.
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(p, p);
  for (int k = 0; k < pat.num_blocks(); ++k) {
    const auto& vars = pat.subset(k);
    Eigen::MatrixXd z = data.block(k);
    for (size_t c = 0; c < vars.size(); ++c) z.col(c).array() -= m(vars[c]);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(z.cols(), z.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(z.transpose());
    for (size_t a = 0; a < vars.size(); ++a)
      for (size_t b = 0; b <= a; ++b) sums(vars[a], vars[b]) += gram(a, b);
  }

  PartialSymmetricMatrix out;
  out.pairs = estimation_pairs(pat);
  out.pattern = data.pattern_ptr();
  out.values = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j <= i; ++j) {
      if (!out.pairs.contains(i, j)) continue;
      const int nij = pat.pair_count(i, j);
      if (i != j && nij < 2)
        throw Error(ErrorCode::kDegeneratePair, "pair (" + std::to_string(j + 1) + "," + std::to_string(i + 1) + ")");
      out.values(i, j) = out.values(j, i) = sums(i, j) / nij;
    }
  }
  return out;
}

std::vector<int> zero_variance_variables(const PartialSymmetricMatrix& cov) {
  std::vector<int> out;
  for (int i = 0; i < cov.p(); ++i)
    if (!(cov.values(i, i) > 0.0)) out.push_back(i);
  return out;
}

ObservedCorrelations observed_correlations(const PartialSymmetricMatrix& cov) {
  const int p = cov.p();
  for (int i = 0; i < p; ++i)
    if (!(cov.values(i, i) > 0.0))
      throw Error(ErrorCode::kZeroVariance, "variable " + std::to_string(i + 1) + " has nonpositive variance");

  ObservedCorrelations out;
  out.corr.pairs = cov.pairs;
  out.corr.pattern = cov.pattern;
  out.corr.values = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
  constexpr double bound = 1.0 - kCorrelationClamp;
  for (int i = 0; i < p; ++i) {
    out.corr.values(i, i) = 1.0;
    for (int j = i + 1; j < p; ++j) {
      if (!cov.defined(i, j)) continue;
      double r = cov.values(i, j) / std::sqrt(cov.values(i, i) * cov.values(j, j));
      if (r > bound || r < -bound) {
        r = std::clamp(r, -bound, bound);
        ++out.clamped;
      }
      out.corr.values(i, j) = out.corr.values(j, i) = r;
    }
  }
  return out;
}

double fisher(double r) {
  if (!(r > -1.0 && r < 1.0)) throw Error(ErrorCode::kDomainError, "fisher transform needs |r| < 1");
  return std::atanh(r);
}

FourthMomentOracle gaussian_fourth_moments(const Eigen::MatrixXd& sigma) {
  return [sigma](int i, int j, int k, int l) { return sigma(i, k) * sigma(j, l) + sigma(i, l) * sigma(j, k); };
}

double cov_of_observed_covariances(const ObservationPattern& pattern, const FourthMomentOracle& moments,
                                   IndexPair ij, IndexPair kl) {
  const auto [i, j] = ij;
  const auto [k, l] = kl;
  const int nij = pattern.pair_count(i, j);
  const int nkl = pattern.pair_count(k, l);
  if (nij == 0 || nkl == 0) throw Error(ErrorCode::kNotObserved, "pair has no joint observations");
  const int nijkl = pattern.quad_count(i, j, k, l);
  if (nijkl == 0) return 0.0;
  return static_cast<double>(nijkl) / (static_cast<double>(nij) * nkl) * moments(i, j, k, l);
}

double min_eigenvalue(const Eigen::MatrixXd& symmetric) {
  if (symmetric.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Eigen::MatrixXd covariance_to_correlation(const Eigen::MatrixXd& sigma) {
  const Eigen::VectorXd inv_sd = sigma.diagonal().array().sqrt().inverse();
  Eigen::MatrixXd c = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
  c.diagonal().setOnes();
  return c;
}

PdCorrection pd_correction(const Eigen::MatrixXd& a, double delta) {
  const Eigen::Index p = a.rows();
  if (a.cols() != p) throw Error(ErrorCode::kNotSymmetric, "matrix is not square");
  if (!(delta > 0.0)) throw Error(ErrorCode::kConfigOutOfRange, "delta must be positive");
  const double scale = std::max(a.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error(ErrorCode::kNotSymmetric, "matrix is not symmetric");
  for (Eigen::Index i = 0; i < p; ++i)
    if (!(a(i, i) > 0.0)) throw Error(ErrorCode::kNonpositiveDiagonal, "diagonal entry " + std::to_string(i + 1));

  const Eigen::MatrixXd b = covariance_to_correlation(a);
  PdCorrection out;
  out.min_eigenvalue_before = min_eigenvalue(b);
  const double threshold = pd_threshold(p);
  if (out.min_eigenvalue_before > threshold) {
    out.matrix = a;
    return out;
  }

  // Adding δI m times shifts every eigenvalue by mδ, so the loop count is
  // known up front; the check below absorbs rounding in the shifted spectrum.
  long long m = static_cast<long long>(std::floor((threshold - out.min_eigenvalue_before) / delta)) + 1;
  while (min_eigenvalue(b + static_cast<double>(m) * delta * Eigen::MatrixXd::Identity(p, p)) <= threshold) ++m;

  const double loaded = 1.0 + static_cast<double>(m) * delta;
  out.steps = static_cast<int>(m);
  out.matrix.resize(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    out.matrix(i, i) = a(i, i);
    for (Eigen::Index j = 0; j < i; ++j) out.matrix(i, j) = out.matrix(j, i) = a(i, j) / loaded;
  }
  return out;
}

}  // namespace auxcov
