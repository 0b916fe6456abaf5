#include "auxcov/corestats.hpp"
#include "auxcov/errors.hpp"
#include "auxcov/psi.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace auxcov;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIoError;
}

VarSet range(int lo, int hi) {
  VarSet v;
  for (int i = lo; i < hi; ++i) v.push_back(i);
  return v;
}

Eigen::VectorXd fisher_upper(const PartialSymmetricMatrix& cov, const std::vector<IndexPair>& upper) {
  const auto corr = observed_correlations(cov).corr;
  Eigen::VectorXd g(static_cast<Eigen::Index>(upper.size()));
  for (size_t s = 0; s < upper.size(); ++s) g(s) = fisher(corr(upper[s].first, upper[s].second));
  return g;
}

double median_relative_error(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth) {
  std::vector<double> e;
  for (Eigen::Index i = 0; i < truth.rows(); ++i)
    for (Eigen::Index j = i; j < truth.cols(); ++j) e.push_back(std::abs(est(i, j) - truth(i, j)) / (std::abs(truth(i, j)) + 0.01));
  std::nth_element(e.begin(), e.begin() + e.size() / 2, e.end());
  return e[e.size() / 2];
}

}  // namespace

TEST_CASE("overlap weights on simple patterns") {
  const auto full = ObservationPattern::build(4, {range(0, 4)}, {10});
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) CHECK(c_weight(full, {i, j}, {0, 3}) == doctest::Approx(1.0));

  const auto disjoint = ObservationPattern::build(4, {{0, 1}, {2, 3}}, {5, 5});
  CHECK(c_weight(disjoint, {0, 1}, {2, 3}) == 0.0);

  // (0,1) only in the first block, (1,2) in both, equal block sizes.
  const auto two = ObservationPattern::build(3, {{0, 1, 2}, {1, 2}}, {6, 6});
  CHECK(c_weight(two, {0, 1}, {1, 2}) == doctest::Approx(1.0));
  CHECK(c_weight(two, {1, 2}, {1, 2}) == doctest::Approx(1.0));
  CHECK(c_weight(two, {0, 1}, {0, 1}) == doctest::Approx(2.0));

  CHECK(code_of([&] { c_weight(disjoint, {0, 2}, {0, 1}); }) == ErrorCode::kNotObserved);
}

TEST_CASE("overlap weight symmetry on random patterns") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 6;
    std::vector<VarSet> subsets{range(0, p)};
    std::vector<int> counts{1 + static_cast<int>(rng() % 4)};
    for (int b = 0; b < 3; ++b) {
      VarSet s;
      for (int i = 0; i < p; ++i)
        if (rng() % 2) s.push_back(i);
      if (s.empty()) s.push_back(0);
      subsets.push_back(s);
      counts.push_back(1 + static_cast<int>(rng() % 9));
    }
    const auto pat = ObservationPattern::build(p, subsets, counts);
    for (int i = 0; i < p; ++i)
      for (int j = i; j < p; ++j)
        for (int k = 0; k < p; ++k)
          for (int l = k; l < p; ++l) {
            const double c = c_weight(pat, {i, j}, {k, l});
            CHECK(c == doctest::Approx(c_weight(pat, {k, l}, {i, j})).epsilon(1e-14));
            CHECK(c == doctest::Approx(static_cast<double>(pat.n()) * pat.quad_count(i, j, k, l) /
                                       (pat.pair_count(i, j) * pat.pair_count(k, l))));
          }
  }
}

TEST_CASE("bivariate Gaussian gives the Fisher-z variance") {
  const auto pat = ObservationPattern::build(2, {{0, 1}}, {100});
  for (double rho : {0.0, 0.3, -0.7, 0.95}) {
    Eigen::Matrix2d sigma;
    sigma << 2.0, rho * std::sqrt(2.0 * 0.5), rho * std::sqrt(2.0 * 0.5), 0.5;
    const auto psi = psi_oracle(pat, sigma, gaussian_fourth_moments(sigma));
    REQUIRE(psi.psi.rows() == 1);
    CAPTURE(rho);
    CHECK(psi.psi(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("independent coordinates give a diagonal Psi of n over n_ij") {
  const auto pat = ObservationPattern::build(4, {range(0, 4), {0, 1}, {1, 2, 3}}, {10, 30, 20});
  Eigen::Vector4d d(1.0, 3.0, 0.5, 2.0);
  const Eigen::MatrixXd sigma = d.asDiagonal();
  const auto psi = psi_oracle(pat, sigma, gaussian_fourth_moments(sigma));
  for (size_t r = 0; r < psi.upper.size(); ++r)
    for (size_t s = 0; s < psi.upper.size(); ++s) {
      const auto [i, j] = psi.upper[r];
      const double expected = r == s ? static_cast<double>(pat.n()) / pat.pair_count(i, j) : 0.0;
      CHECK(psi.psi(r, s) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("the three builders coincide on complete data with identical moments") {
  Eigen::MatrixXd sigma = fixture::decaying_correlation(4);
  sigma(0, 0) = 2.0;
  const auto data = fixture::gaussian_blocks(sigma, {range(0, 4)}, {200}, 4);
  const auto cov = observed_sample_covariance(data);
  const Eigen::MatrixXd x = data.values();
  const Eigen::MatrixXd z = x.rowwise() - x.colwise().mean();
  const auto moments = [&](int i, int j, int k, int l) {
    const double m4 = (z.col(i).array() * z.col(j).array() * z.col(k).array() * z.col(l).array()).mean();
    const double mij = (z.col(i).array() * z.col(j).array()).mean();
    const double mkl = (z.col(k).array() * z.col(l).array()).mean();
    return m4 - mij * mkl;
  };
  const auto oracle_psi = psi_oracle(data.pattern(), cov.values, moments);
  const auto emp = psi_empirical(data, cov);
  CHECK((oracle_psi.H - emp.H).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((oracle_psi.psi - emp.psi).cwiseAbs().maxCoeff() < 1e-10);

  const auto gauss_oracle = psi_oracle(data.pattern(), cov.values, gaussian_fourth_moments(cov.values));
  const auto gauss = psi_gaussian(data.pattern(), cov);
  CHECK((gauss_oracle.psi - gauss.psi).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(gauss.substituted_cross_terms == 0);
}

TEST_CASE("never jointly observed quadruples have zero weight") {
  const auto data = fixture::gaussian_blocks(fixture::decaying_correlation(4), {{0, 1}, {2, 3}}, {40, 40}, 5);
  const auto cov = observed_sample_covariance(data);
  const auto emp = psi_empirical(data, cov);
  const auto gauss = psi_gaussian(data.pattern(), cov);
  const int a = cov.pairs.ubar_index(0, 1), b = cov.pairs.ubar_index(2, 3), c = cov.pairs.ubar_index(0, 0),
            d = cov.pairs.ubar_index(3, 3);
  for (const auto* h : {&emp.H, &gauss.H}) {
    CHECK((*h)(a, b) == 0.0);
    CHECK((*h)(b, a) == 0.0);
    CHECK((*h)(c, d) == 0.0);
    CHECK((*h)(a, c) != 0.0);
  }
  CHECK(emp.psi(0, 1) == 0.0);
}

TEST_CASE("identity covariance on complete data gives unit Gaussian weights") {
  const auto pat = ObservationPattern::build(5, {range(0, 5)}, {50});
  PartialSymmetricMatrix cov{Eigen::MatrixXd::Identity(5, 5), estimation_pairs(pat), nullptr};
  const auto g = psi_gaussian(pat, cov);
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) {
      const int s = cov.pairs.ubar_index(i, j);
      CHECK(g.H(s, s) == doctest::Approx(1.0));
    }
  CHECK((g.psi - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("cross terms outside O need a substitution policy") {
  // One row sees all three variables, so (0,2) has a single joint sample and
  // leaves O while the quadruple (0,1),(1,2) still has weight.
  const auto data = fixture::gaussian_blocks(fixture::decaying_correlation(3), {{0, 1, 2}, {0, 1}, {1, 2}}, {1, 20, 20}, 6);
  const auto cov = observed_sample_covariance(data);
  REQUIRE(!cov.defined(0, 2));
  GaussianPsiOptions strict;
  strict.policy = CrossTermPolicy::kFail;
  CHECK(code_of([&] { psi_gaussian(data.pattern(), cov, strict); }) == ErrorCode::kMissingMomentEntry);

  const auto zero = psi_gaussian(data.pattern(), cov);
  CHECK(zero.substituted_cross_terms > 0);
  Eigen::MatrixXd base = Eigen::MatrixXd::Identity(3, 3);
  base(0, 2) = base(2, 0) = 0.4;
  GaussianPsiOptions with_base;
  with_base.baseline = &base;
  const auto sub = psi_gaussian(data.pattern(), cov, with_base);
  const int s = cov.pairs.ubar_index(0, 1), u = cov.pairs.ubar_index(1, 2);
  const double c = c_weight(data.pattern(), {0, 1}, {1, 2});
  CHECK(sub.H(s, u) == doctest::Approx(c * (cov(0, 1) * cov(1, 2) + 0.4 * cov(1, 1))).epsilon(1e-12));
  CHECK(zero.H(s, u) == doctest::Approx(c * cov(0, 1) * cov(1, 2)).epsilon(1e-12));
}

TEST_CASE("assembled matrices are symmetric and positive semidefinite") {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd sigma = oracle::random_correlation(6, rng);
  const auto data = fixture::gaussian_blocks(sigma, {range(0, 5), range(2, 6), {0, 5}}, {60, 50, 30}, 8);
  const auto cov = observed_sample_covariance(data);
  for (const auto& psi : {psi_oracle(data.pattern(), sigma, gaussian_fourth_moments(sigma)), psi_empirical(data, cov),
                          psi_gaussian(data.pattern(), cov)}) {
    CHECK(psi.asymmetry < 1e-8);
    CHECK(psi.psi == psi.psi.transpose());
    CHECK(oracle::smallest_eigenvalue(psi.psi) > -1e-10 * psi.psi.cwiseAbs().maxCoeff());
    CHECK(psi.J.rows() == static_cast<Eigen::Index>(psi.upper.size()));
    for (Eigen::Index r = 0; r < psi.J.rows(); ++r) CHECK(psi.J.row(r).nonZeros() <= 3);
    CHECK((psi.F.array() >= 1.0).all());
  }
}

TEST_CASE("standardized Fisher correlations have identity covariance") {
  // p = 5 with two overlapping windows; 1e4 replicate data sets.
  const Eigen::MatrixXd sigma = fixture::decaying_correlation(5);
  const std::vector<VarSet> subsets{range(0, 4), range(1, 5)};
  const std::vector<int> counts{300, 300};
  const auto pat = ObservationPattern::build(5, subsets, counts);
  const auto psi = psi_oracle(pat, sigma, gaussian_fourth_moments(sigma));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(psi.psi);
  const Eigen::MatrixXd inv_root =
      es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  Eigen::VectorXd g_true(static_cast<Eigen::Index>(psi.upper.size()));
  for (size_t s = 0; s < psi.upper.size(); ++s) g_true(s) = fisher(sigma(psi.upper[s].first, psi.upper[s].second));

  const int reps = 10000;
  Eigen::MatrixXd scores(reps, g_true.size());
  for (int r = 0; r < reps; ++r) {
    const auto data = fixture::gaussian_blocks(sigma, subsets, counts, 1000 + r);
    const auto cov = observed_sample_covariance(data);
    scores.row(r) = (std::sqrt(static_cast<double>(pat.n())) * inv_root * (fisher_upper(cov, psi.upper) - g_true)).transpose();
  }
  const Eigen::MatrixXd centred = scores.rowwise() - scores.colwise().mean();
  const Eigen::MatrixXd cov = centred.transpose() * centred / (reps - 1);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
  CHECK((cov - eye).norm() / eye.norm() < 0.10);
}

TEST_CASE("empirical and Gaussian estimators converge and the Gaussian one varies less") {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd sigma = oracle::random_correlation(6, rng);
  const std::vector<VarSet> subsets{range(0, 5), range(1, 6)};
  const auto truth_at = [&](int n) {
    return psi_oracle(ObservationPattern::build(6, subsets, {n / 2, n / 2}), sigma, gaussian_fourth_moments(sigma)).psi;
  };
  double err_emp[2] = {0, 0}, err_gauss[2] = {0, 0};
  const int ns[2] = {500, 5000};
  Eigen::MatrixXd sum_e, sq_e, sum_g, sq_g;
  const int reps = 10;
  for (int k = 0; k < 2; ++k) {
    const Eigen::MatrixXd truth = truth_at(ns[k]);
    if (k == 0) {
      sum_e = sq_e = sum_g = sq_g = Eigen::MatrixXd::Zero(truth.rows(), truth.cols());
    }
    for (int r = 0; r < reps; ++r) {
      const auto data = fixture::gaussian_blocks(sigma, subsets, {ns[k] / 2, ns[k] / 2}, 77 + 100 * k + r);
      const auto cov = observed_sample_covariance(data);
      const Eigen::MatrixXd e = psi_empirical(data, cov).psi;
      const Eigen::MatrixXd g = psi_gaussian(data.pattern(), cov).psi;
      err_emp[k] += median_relative_error(e, truth) / reps;
      err_gauss[k] += median_relative_error(g, truth) / reps;
      if (k == 0) {
        sum_e += e;
        sq_e += e.cwiseAbs2();
        sum_g += g;
        sq_g += g.cwiseAbs2();
      }
    }
  }
  CHECK(err_emp[1] < err_emp[0]);
  CHECK(err_gauss[1] < err_gauss[0]);
  const Eigen::MatrixXd var_e = sq_e / reps - (sum_e / reps).cwiseAbs2();
  const Eigen::MatrixXd var_g = sq_g / reps - (sum_g / reps).cwiseAbs2();
  CHECK(var_g.sum() < var_e.sum());
}

TEST_CASE("Psi builder input checks") {
  const auto data = fixture::gaussian_blocks(fixture::decaying_correlation(4), {range(0, 4)}, {30}, 9);
  const auto cov = observed_sample_covariance(data);
  CHECK(code_of([&] { psi_empirical(data, cov, 3); }) == ErrorCode::kTooLarge);
  CHECK(code_of([&] { psi_oracle(data.pattern(), Eigen::MatrixXd::Identity(3, 3), gaussian_fourth_moments(Eigen::MatrixXd::Identity(3, 3))); }) ==
        ErrorCode::kDimensionMismatch);
  Eigen::MatrixXd singular = Eigen::MatrixXd::Ones(4, 4);
  CHECK(code_of([&] { psi_oracle(data.pattern(), singular, gaussian_fourth_moments(singular)); }) == ErrorCode::kSingularSigma);
  Eigen::MatrixXd wrong = Eigen::MatrixXd::Identity(3, 3);
  GaussianPsiOptions opt;
  opt.baseline = &wrong;
  CHECK(code_of([&] { psi_gaussian(data.pattern(), cov, opt); }) == ErrorCode::kDimensionMismatch);
}
