#include "auxcov/corestats.hpp"
#include "auxcov/errors.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <random>

using namespace auxcov;

namespace {

PartialSymmetricMatrix complete_matrix(const Eigen::MatrixXd& v) {
  const int p = static_cast<int>(v.rows());
  VarSet all;
  for (int i = 0; i < p; ++i) all.push_back(i);
  PartialSymmetricMatrix m;
  m.values = v;
  m.pairs = pair_sets(ObservationPattern::build(p, {all}, {10}));
  return m;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kIoError;
}

}  // namespace

TEST_CASE("observed covariance with a known mean") {
  {
    Eigen::MatrixXd b(2, 1);
    b << 1, -1;
    const auto data = IncompleteDataset::from_blocks(1, {{0}}, {b});
    const auto cov = observed_sample_covariance(data, MeanMode::known_mean(Eigen::VectorXd::Zero(1)));
    CHECK(cov(0, 0) == doctest::Approx(1.0));
  }
  {
    Eigen::MatrixXd b(2, 2);
    b << 1, 2, 3, 4;
    const auto data = IncompleteDataset::from_blocks(2, {{0, 1}}, {b});
    const auto cov = observed_sample_covariance(data, MeanMode::known_mean(Eigen::VectorXd::Zero(2)));
    CHECK(cov(0, 1) == doctest::Approx(7.0));
  }
}

TEST_CASE("complete data gives the 1/n sample covariance") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = oracle::gaussian_rows(fixture::decaying_correlation(4), 30, rng);
  const auto data = IncompleteDataset::from_blocks(4, {{0, 1, 2, 3}}, {x});
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd expected = c.transpose() * c / 30.0;
  const auto cov = observed_sample_covariance(data);
  CHECK((cov.values - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("incomplete data matches the row-by-row oracle") {
  const auto data = fixture::gaussian_blocks(fixture::decaying_correlation(6), {{0, 1, 2, 3}, {2, 3, 4, 5}, {0, 5}},
                                             {7, 9, 4}, 2);
  const auto cov = observed_sample_covariance(data);
  const Eigen::MatrixXd ref = oracle::pairwise_covariance(data.values());
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      CHECK(std::isnan(cov(i, j)) == std::isnan(ref(i, j)));
      if (!std::isnan(ref(i, j))) CHECK(std::abs(cov(i, j) - ref(i, j)) < 1e-12);
    }
}

TEST_CASE("observed correlations") {
  Eigen::MatrixXd v(2, 2);
  v << 4, 3, 3, 9;
  CHECK(observed_correlations(complete_matrix(v)).corr(0, 1) == doctest::Approx(0.5));
  v << 4, 0, 0, 9;
  CHECK(observed_correlations(complete_matrix(v)).corr(0, 1) == 0.0);
  v << 1, 1, 1, 1;
  const auto c = observed_correlations(complete_matrix(v));
  CHECK(c.corr(0, 1) == 1.0 - kCorrelationClamp);
  CHECK(c.clamped == 1);
  CHECK(c.corr(0, 0) == 1.0);
  v << 0, 0, 0, 1;
  CHECK(code_of([&] { observed_correlations(complete_matrix(v)); }) == ErrorCode::kZeroVariance);
}

TEST_CASE("zero variance is reported, not fatal") {
  Eigen::MatrixXd b(3, 2);
  b << 1, 2, 1, 3, 1, 5;
  const auto cov = observed_sample_covariance(IncompleteDataset::from_blocks(2, {{0, 1}}, {b}));
  CHECK(zero_variance_variables(cov) == std::vector<int>{0});
}

TEST_CASE("fisher transform") {
  CHECK(fisher(0.0) == 0.0);
  CHECK(fisher(0.5) == doctest::Approx(0.5493061443340549).epsilon(1e-14));
  CHECK(std::abs(fisher_inv(fisher(-0.73)) + 0.73) < 1e-12);
  CHECK(code_of([] { fisher(1.0); }) == ErrorCode::kDomainError);
  CHECK(code_of([] { fisher(-1.5); }) == ErrorCode::kDomainError);
  double prev = -std::numeric_limits<double>::infinity();
  for (double r = -0.999; r < 1.0; r += 0.001) {
    const double z = fisher(r);
    CHECK(z > prev);
    CHECK(fisher(-r) == doctest::Approx(-z));
    prev = z;
  }
  for (double z : {-50.0, -3.0, 0.1, 7.0}) {
    CHECK(std::abs(fisher_inv(z)) <= 1.0);
    if (std::abs(z) < 10) CHECK(std::abs(fisher_inv(z)) < 1.0);
  }
}

TEST_CASE("covariance of observed covariances: closed cases") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(4, 4);
  const auto moments = gaussian_fourth_moments(id);
  const auto disjoint = ObservationPattern::build(4, {{0, 1}, {2, 3}}, {5, 5});
  CHECK(cov_of_observed_covariances(disjoint, moments, {0, 1}, {2, 3}) == 0.0);
  const auto full = ObservationPattern::build(4, {{0, 1, 2, 3}}, {20});
  CHECK(cov_of_observed_covariances(full, moments, {1, 1}, {1, 1}) == doctest::Approx(2.0 / 20.0));
  CHECK(code_of([&] { cov_of_observed_covariances(disjoint, moments, {0, 2}, {0, 1}); }) == ErrorCode::kNotObserved);
}

TEST_CASE("covariance of observed covariances against Monte Carlo") {
  const Eigen::MatrixXd sigma = fixture::decaying_correlation(4);
  const std::vector<VarSet> subsets{{0, 1, 2}, {1, 2, 3}};
  const std::vector<int> counts{5, 7};
  const auto pat = ObservationPattern::build(4, subsets, counts);
  const auto moments = gaussian_fourth_moments(sigma);
  const std::vector<std::pair<IndexPair, IndexPair>> cases{
      {{0, 1}, {1, 2}}, {{1, 2}, {2, 3}}, {{1, 1}, {2, 2}}, {{0, 2}, {1, 3}}, {{1, 2}, {1, 2}}};
  const int draws = 100000;
  std::vector<std::vector<double>> va(cases.size()), vb(cases.size());
  std::mt19937_64 rng(17);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  for (int d = 0; d < draws; ++d) {
    std::vector<Eigen::MatrixXd> blocks;
    for (size_t k = 0; k < subsets.size(); ++k) {
      const Eigen::MatrixXd full = oracle::gaussian_rows(sigma, counts[k], rng);
      Eigen::MatrixXd b(counts[k], 3);
      for (int c = 0; c < 3; ++c) b.col(c) = full.col(subsets[k][c]);
      blocks.push_back(b);
    }
    const auto data = IncompleteDataset::from_blocks(4, subsets, blocks);
    const auto cov = observed_sample_covariance(data, MeanMode::known_mean(zero));
    for (size_t c = 0; c < cases.size(); ++c) {
      va[c].push_back(cov(cases[c].first.first, cases[c].first.second));
      vb[c].push_back(cov(cases[c].second.first, cases[c].second.second));
    }
  }
  for (size_t c = 0; c < cases.size(); ++c) {
    double ma = 0, mb = 0;
    for (int d = 0; d < draws; ++d) {
      ma += va[c][d];
      mb += vb[c][d];
    }
    ma /= draws;
    mb /= draws;
    double m1 = 0, m2 = 0;
    for (int d = 0; d < draws; ++d) {
      const double t = (va[c][d] - ma) * (vb[c][d] - mb);
      m1 += t;
      m2 += t * t;
    }
    m1 /= draws;
    const double se = std::sqrt((m2 / draws - m1 * m1) / draws);
    const double exact = cov_of_observed_covariances(pat, moments, cases[c].first, cases[c].second);
    CAPTURE(c);
    CHECK(std::abs(m1 - exact) < 3.0 * se);
  }
}

TEST_CASE("PD correction examples") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
  const auto r = pd_correction(id);
  CHECK(r.matrix == id);
  CHECK(r.steps == 0);
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 2);
  const auto s = pd_correction(ones, 0.001);
  CHECK(s.steps == 1);
  CHECK(s.matrix(0, 1) == doctest::Approx(1.0 / 1.001).epsilon(1e-15));
  CHECK(s.matrix(0, 0) == 1.0);
  CHECK(s.matrix(0, 1) == doctest::Approx(0.9990010).epsilon(1e-7));
}

TEST_CASE("PD correction contract on random symmetric inputs") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0), scale(0.2, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int p = 2 + static_cast<int>(rng() % 7);
    Eigen::MatrixXd a(p, p);
    for (int i = 0; i < p; ++i) {
      a(i, i) = scale(rng);
      for (int j = 0; j < i; ++j) a(i, j) = a(j, i) = u(rng) * 1.2;
    }
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < i; ++j) a(i, j) = a(j, i) = a(i, j) * std::sqrt(a(i, i) * a(j, j));
    const auto r = pd_correction(a);
    CHECK(min_eigenvalue(r.matrix) > 0.0);
    for (int i = 0; i < p; ++i) CHECK(r.matrix(i, i) == a(i, i));
    const double factor = 1.0 / (1.0 + r.steps * kDefaultPdDelta);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < i; ++j) CHECK(r.matrix(i, j) == doctest::Approx(a(i, j) * factor).epsilon(1e-12));
    int oracle_steps = 0;
    const Eigen::MatrixXd lit = oracle::diagonal_loading(a, kDefaultPdDelta, &oracle_steps);
    CHECK(oracle_steps == r.steps);
    CHECK((lit - r.matrix).cwiseAbs().maxCoeff() < 1e-10);
    const auto again = pd_correction(r.matrix);
    CHECK(again.steps == 0);
    CHECK(again.matrix == r.matrix);
  }
}

TEST_CASE("PD correction input checks") {
  Eigen::MatrixXd a(2, 2);
  a << 1, 0.3, 0.2, 1;
  CHECK(code_of([&] { pd_correction(a); }) == ErrorCode::kNotSymmetric);
  a << 0, 0.1, 0.1, 1;
  CHECK(code_of([&] { pd_correction(a); }) == ErrorCode::kNonpositiveDiagonal);
  a << 1, 0.1, 0.1, 1;
  CHECK(code_of([&] { pd_correction(a, 0.0); }) == ErrorCode::kConfigOutOfRange);
}

TEST_CASE("observed covariance is consistent") {
  const Eigen::MatrixXd sigma = fixture::decaying_correlation(5);
  const std::vector<int> ns{100, 1000, 10000};
  std::vector<double> lx, ly;
  for (int n : ns) {
    double mse = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      const auto data = fixture::gaussian_blocks(sigma, {{0, 1, 2, 3}, {1, 2, 3, 4}}, {n / 2, n - n / 2},
                                                 1000 * static_cast<std::uint64_t>(n) + rep);
      const auto cov = observed_sample_covariance(data);
      double s = 0.0;
      int c = 0;
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
          if (cov.defined(i, j)) {
            s += (cov(i, j) - sigma(i, j)) * (cov(i, j) - sigma(i, j));
            ++c;
          }
      mse += s / c;
    }
    lx.push_back(std::log(n));
    ly.push_back(std::log(mse / 50));
  }
  const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3;
  double sxy = 0, sxx = 0;
  for (int k = 0; k < 3; ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  const double slope = sxy / sxx;
  CHECK(ly[1] < ly[0]);
  CHECK(ly[2] < ly[1]);
  CHECK(slope >= -1.3);
  CHECK(slope <= -0.7);
}
