#include "auxcov/errors.hpp"
#include "auxcov/regression.hpp"

#include <doctest.h>

#include <cmath>
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

Eigen::MatrixXd column(std::initializer_list<double> v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Eigen::VectorXd uniform_vector(int n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

double rmse(const FittedBaseline& m, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  return std::sqrt((m.predict_rows(w) - y).squaredNorm() / y.size());
}

}  // namespace

TEST_CASE("OLS recovers an exact line") {
  std::mt19937_64 rng(1);
  const Eigen::VectorXd w = uniform_vector(40, -1, 1, rng);
  const Eigen::VectorXd y = (0.3 + 1.7 * w.array()).matrix();
  const auto m = fit_ols(y, w);
  CHECK(std::abs(m.beta(0) - 0.3) < 1e-10);
  CHECK(std::abs(m.beta(1) - 1.7) < 1e-10);
  CHECK(m.residual_variance < 1e-20);
}

TEST_CASE("OLS on three points") {
  const Eigen::VectorXd y = column({1, 2, 4});
  const auto m = fit_ols(y, column({0, 1, 2}));
  CHECK(m.beta(0) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(m.beta(1) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("OLS with constant response") {
  std::mt19937_64 rng(2);
  const Eigen::VectorXd w = uniform_vector(10, 0, 1, rng);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(10, -0.4);
  const auto m = fit_ols(y, w);
  CHECK(m.beta(0) == doctest::Approx(-0.4));
  CHECK(std::abs(m.beta(1)) < 1e-12);
}

TEST_CASE("OLS rank checks") {
  CHECK(code_of([] { fit_ols(column({1, 2, 3}), column({5, 5, 5})); }) == ErrorCode::kRankDeficient);
  Eigen::MatrixXd w2(2, 2);
  w2 << 1, 2, 3, 4;
  CHECK(code_of([&] { fit_ols(column({1, 2}), w2); }) == ErrorCode::kRankDeficient);
}

TEST_CASE("OLS residuals are orthogonal to the design") {
  std::mt19937_64 rng(3);
  Eigen::MatrixXd w(200, 3);
  for (int c = 0; c < 3; ++c) w.col(c) = uniform_vector(200, -2, 2, rng);
  const Eigen::VectorXd y = uniform_vector(200, -1, 1, rng) + w.col(0) - 0.5 * w.col(2);
  const auto m = fit_ols(y, w);
  Eigen::MatrixXd design(200, 4);
  design << Eigen::VectorXd::Ones(200), w;
  const Eigen::VectorXd r = y - design * m.beta;
  CHECK((design.transpose() * r).cwiseAbs().maxCoeff() < 1e-8 * y.norm());
}

TEST_CASE("B-spline basis is a partition of unity") {
  const CubicBSplineBasis b(0.0, 1.0, {0.2, 0.3, 0.7});
  CHECK(b.dimension() == 7);
  for (double x = 0.0; x <= 1.0; x += 0.01) {
    const Eigen::VectorXd v = b.evaluate(x);
    CHECK(v.sum() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(v.minCoeff() >= -1e-15);
  }
}

TEST_CASE("splines reproduce linear functions") {
  std::mt19937_64 rng(4);
  const Eigen::VectorXd w = uniform_vector(300, -1, 1, rng);
  const Eigen::VectorXd y = (0.2 - 0.9 * w.array()).matrix();
  for (int tau = 1; tau <= 8; ++tau) {
    const auto m = fit_splines(y, w, tau);
    CHECK((m.predict_rows(w) - y).cwiseAbs().maxCoeff() < 1e-8);
    // Linear continuation outside the training range.
    Eigen::VectorXd probe(1);
    probe << 2.5;
    CHECK(std::abs(m.predict(probe) - (0.2 - 0.9 * 2.5)) < 1e-8);
  }
}

TEST_CASE("splines fit sin(7w)") {
  std::mt19937_64 rng(5);
  const Eigen::VectorXd w = uniform_vector(2000, -1, 1, rng);
  const Eigen::VectorXd y = w.array().unaryExpr([](double x) { return std::sin(7 * x); }).matrix();
  const auto m = fit_splines(y, w, 8);
  CHECK(rmse(m, y, w) < 0.05);
  REQUIRE(m.basis);
  CHECK(m.basis->interior().size() == 8);
}

TEST_CASE("knots sit at evenly spaced quantiles") {
  std::vector<double> x;
  for (int i = 0; i <= 100; ++i) x.push_back(i);
  const auto k = place_quantile_knots(x, 3);
  REQUIRE(k.interior.size() == 3);
  CHECK(k.interior[0] == doctest::Approx(25));
  CHECK(k.interior[1] == doctest::Approx(50));
  CHECK(k.interior[2] == doctest::Approx(75));
  CHECK(k.warnings.empty());
}

TEST_CASE("coincident knots are moved or dropped with a warning") {
  std::vector<double> x(50, 1.0);
  for (int i = 0; i < 10; ++i) x.push_back(2.0 + i);
  const auto k = place_quantile_knots(x, 6);
  CHECK(!k.warnings.empty());
  for (size_t i = 1; i < k.interior.size(); ++i) CHECK(k.interior[i] > k.interior[i - 1]);
  for (double t : k.interior) {
    CHECK(t > 1.0);
    CHECK(t < 11.0);
  }
}

TEST_CASE("spline errors") {
  CHECK(code_of([] { fit_splines(column({1, 2, 3}), column({0, 1, 2}), 1); }) == ErrorCode::kTooFewPoints);
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(20, 0, 1);
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(20, 3.0);
  CHECK(code_of([&] { fit_splines(y, w, 2); }) == ErrorCode::kRankDeficient);
}

TEST_CASE("spline predictions at training points equal fitted values") {
  std::mt19937_64 rng(6);
  const Eigen::VectorXd w = uniform_vector(100, 0, 3, rng);
  const Eigen::VectorXd y = w.array().cos().matrix() + 0.1 * uniform_vector(100, -1, 1, rng);
  const auto m = fit_splines(y, w, 4);
  const std::vector<double> ws(w.data(), w.data() + w.size());
  const Eigen::VectorXd fitted = m.basis->design(ws) * m.beta;
  CHECK((m.predict_rows(w) - fitted).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("spline extrapolation follows the boundary slope") {
  std::mt19937_64 rng(7);
  const Eigen::VectorXd w = uniform_vector(200, 0, 1, rng);
  const Eigen::VectorXd y = w.array().square().matrix();
  const auto m = fit_splines(y, w, 3);
  const double hi = m.basis->upper(), lo = m.basis->lower();
  const double h = 1e-6;
  Eigen::VectorXd a(1), b(1);
  a << hi - h;
  b << hi;
  const double slope_hi = (m.predict(b) - m.predict(a)) / h;
  a << lo;
  b << lo + h;
  const double slope_lo = (m.predict(b) - m.predict(a)) / h;
  Eigen::VectorXd out(1);
  out << hi + 0.5;
  CHECK(m.predict(out) == doctest::Approx(m.predict(b.setConstant(hi)) + 0.5 * slope_hi).epsilon(1e-5));
  out << lo - 0.25;
  CHECK(m.predict(out) == doctest::Approx(m.predict(b.setConstant(lo)) - 0.25 * slope_lo).epsilon(1e-5));
  CHECK(m.basis->slope_at_upper(m.beta) == doctest::Approx(slope_hi).epsilon(1e-4));
}

TEST_CASE("in-sample spline error does not grow along nested knot sets") {
  // Quantile knots at k/2, k/4, k/8 nest, so each fit can reproduce the last.
  std::mt19937_64 rng(8);
  const Eigen::VectorXd w = uniform_vector(500, -1, 1, rng);
  std::normal_distribution<double> z(0.0, 0.1);
  Eigen::VectorXd y = w.array().unaryExpr([](double x) { return std::sin(7 * x); }).matrix();
  for (int i = 0; i < y.size(); ++i) y(i) += z(rng);
  double prev = std::numeric_limits<double>::infinity();
  for (int tau : {1, 3, 7, 15}) {
    const double e = rmse(fit_splines(y, w, tau), y, w);
    CAPTURE(tau);
    CHECK(e <= prev * (1 + 1e-12));
    prev = e;
  }
}

TEST_CASE("prediction dimension checks") {
  const auto m = fit_ols(column({1, 2, 4}), column({0, 1, 2}));
  CHECK(code_of([&] { m.predict(Eigen::VectorXd::Zero(2)); }) == ErrorCode::kDimensionMismatch);
  CHECK(code_of([&] { predict_baseline(m, Eigen::MatrixXd::Zero(3, 2)); }) == ErrorCode::kDimensionMismatch);
  Eigen::VectorXd w(1);
  w << 0.3;
  FittedBaseline unit = m;
  unit.beta << 0.0, 1.0;
  CHECK(unit.predict(w) == doctest::Approx(0.3));
}

TEST_CASE("GLS with isotropic error covariance equals OLS") {
  std::mt19937_64 rng(9);
  const Eigen::VectorXd w = uniform_vector(60, -1, 1, rng);
  const Eigen::VectorXd y = 0.5 * w + 0.3 * uniform_vector(60, -1, 1, rng);
  const auto ols = fit_ols(y, w);
  for (double c : {0.01, 0.5, 3.0}) {
    const auto gls = fit_gls(y, w, c * Eigen::MatrixXd::Identity(60, 60));
    CHECK((gls.beta - ols.beta).cwiseAbs().maxCoeff() < 1e-6);
  }
  const auto zero = fit_gls(y, w, Eigen::MatrixXd::Zero(60, 60));
  CHECK((zero.beta - ols.beta).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("GLS analytic gradient matches central differences") {
  std::mt19937_64 rng(10);
  const int m = 50;
  const Eigen::VectorXd w = uniform_vector(m, -1, 1, rng);
  const Eigen::VectorXd y = 0.2 + 0.7 * w.array() + 0.2 * uniform_vector(m, -1, 1, rng).array();
  Eigen::MatrixXd a(m, m);
  std::normal_distribution<double> z;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = z(rng) * 0.05;
  const Eigen::MatrixXd phi = a * a.transpose();
  const GlsObjective obj(y, w, phi);
  double worst = 0.0;
  for (int pt = 0; pt < 10; ++pt) {
    Eigen::VectorXd theta(3);
    theta << z(rng), z(rng), -3.0 + z(rng);
    const Eigen::VectorXd g = obj.gradient(theta);
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-5;
      Eigen::VectorXd tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      const double fd = (obj.value(tp) - obj.value(tm)) / (2 * h);
      worst = std::max(worst, std::abs(g(k) - fd) / std::max(std::abs(fd), std::abs(g(k))));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("GLS objective trace never decreases") {
  std::mt19937_64 rng(11);
  const int m = 80;
  const Eigen::VectorXd w = uniform_vector(m, -1, 1, rng);
  Eigen::VectorXd diag = Eigen::VectorXd::LinSpaced(m, -2, 1).array().unaryExpr([](double t) { return std::pow(10.0, t); }).matrix();
  const Eigen::VectorXd y = 0.1 + w.array() + diag.array().sqrt() * uniform_vector(m, -1, 1, rng).array();
  const auto fit = fit_gls(y, w, Eigen::MatrixXd(diag.asDiagonal()));
  REQUIRE(fit.objective_trace.size() >= 2);
  for (size_t t = 1; t < fit.objective_trace.size(); ++t) CHECK(fit.objective_trace[t] >= fit.objective_trace[t - 1]);
  CHECK(fit.sigma_eps_sq > 0.0);
}

TEST_CASE("GLS beats OLS under heteroskedastic measurement error") {
  int wins = 0;
  for (int rep = 0; rep < 20; ++rep) {
    std::mt19937_64 rng(100 + rep);
    const int m = 60;
    const Eigen::VectorXd w = uniform_vector(m, -1, 1, rng);
    const Eigen::VectorXd var = Eigen::VectorXd::LinSpaced(m, -2, 2).array().unaryExpr([](double t) { return std::pow(10.0, t); }).matrix();
    std::normal_distribution<double> z;
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) y(i) = 1.0 + 2.0 * w(i) + std::sqrt(var(i)) * z(rng) + 0.05 * z(rng);
    y(m - 1) += 50.0;  // a 5 sd outlier at the noisiest point
    const auto ols = fit_ols(y, w);
    const auto gls = fit_gls(y, w, Eigen::MatrixXd(var.asDiagonal()));
    if (std::abs(gls.beta(1) - 2.0) < std::abs(ols.beta(1) - 2.0)) ++wins;
  }
  CHECK(wins >= 18);
}

TEST_CASE("GLS input checks and stopping") {
  const Eigen::VectorXd y = column({0.1, 0.4, 0.2, 0.9});
  const Eigen::MatrixXd w = column({0, 1, 2, 3});
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(4, 4);
  bad(0, 0) = -1.0;
  CHECK(code_of([&] { fit_gls(y, w, bad); }) == ErrorCode::kNonPSDPhi);
  Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(4, 4);
  asym(0, 1) = 0.5;
  CHECK(code_of([&] { fit_gls(y, w, asym); }) == ErrorCode::kNonPSDPhi);
  CHECK(code_of([&] { fit_gls(y, w, Eigen::MatrixXd::Identity(4, 4), {}, 3); }) == ErrorCode::kTooLarge);
  CHECK(code_of([&] { fit_gls(y, w, Eigen::MatrixXd::Identity(3, 3)); }) == ErrorCode::kDimensionMismatch);

  GradientControls c;
  c.max_iter = 1;
  c.tolerance = 1e-300;
  Eigen::VectorXd diag(4);
  diag << 0.01, 1, 5, 0.2;
  const auto fit = fit_gls(y, w, Eigen::MatrixXd(diag.asDiagonal()), c);
  CHECK(!fit.converged);
  REQUIRE(!fit.warnings.empty());
  CHECK(fit.warnings.front().find("NoProgress") != std::string::npos);
}
