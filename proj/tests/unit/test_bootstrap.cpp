#include "auxcov/bootstrap.hpp"
#include "auxcov/errors.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>

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

const std::vector<RegressionSpec> kOls{OlsSpec{}};
const std::vector<double> kGrid{0.0, 0.25, 0.5, 0.75, 1.0};

struct Problem {
  IncompleteDataset data;
  AuxiliaryCovariates aux;
};

Problem problem(int p, int n_per_block, std::uint64_t seed, double scale = 1.0) {
  const int s = p / 4;
  return {fixture::gaussian_blocks(scale * fixture::decaying_correlation(p), {range(0, p - s), range(s, p)},
                                   {n_per_block, n_per_block}, seed),
          fixture::scalar_aux(fixture::distance_covariate(p))};
}

BootstrapOptions options(int b, std::uint64_t seed) {
  BootstrapOptions o;
  o.replicates = b;
  o.seed = seed;
  o.cv.folds = 4;
  return o;
}

}  // namespace

TEST_CASE("two replicates give the two-point standard deviation") {
  const auto pr = problem(8, 30, 1);
  auto opt = options(2, 5);
  opt.phi = [](const Eigen::MatrixXd& s) { return s(0, 1); };
  const auto rep = bootstrap_nonparametric(pr.data, pr.aux, kOls, kGrid, opt);
  REQUIRE(rep.completed == 2);
  REQUIRE(rep.phi_values.size() == 2);
  const double expected = std::abs(rep.phi_values[0] - rep.phi_values[1]) / std::sqrt(2.0);
  CHECK(*rep.phi_se == doctest::Approx(expected).epsilon(1e-12));
  CHECK(rep.se(0, 1) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(rep.se(1, 0) == rep.se(0, 1));
}

TEST_CASE("a constant functional has zero standard error") {
  const auto pr = problem(8, 30, 2);
  auto opt = options(10, 6);
  opt.phi = [](const Eigen::MatrixXd&) { return 3.5; };
  CHECK(*bootstrap_nonparametric(pr.data, pr.aux, kOls, kGrid, opt).phi_se == 0.0);
  const auto fit = select_and_fit(pr.data, pr.aux, kOls, kGrid, opt.cv);
  CHECK(*bootstrap_parametric(fit.result, pr.data.pattern(), pr.aux, kOls, kGrid, opt).phi_se == 0.0);
}

TEST_CASE("near-deterministic data give a vanishing standard error") {
  const auto pr = problem(8, 30, 3, 1e-12);
  auto opt = options(20, 7);
  opt.phi = [](const Eigen::MatrixXd& s) { return s(0, 0); };
  const auto rep = bootstrap_nonparametric(pr.data, pr.aux, kOls, kGrid, opt);
  CHECK(*rep.phi_se < 1e-5);
  CHECK(rep.se.maxCoeff() < 1e-5);
}

TEST_CASE("parametric replicates from the identity match the null sampling sd") {
  const int p = 4;
  const auto pat = ObservationPattern::build(p, {range(0, 3), range(1, 4)}, {150, 250});
  AuxCovResult fitted;
  fitted.final_cov = Eigen::MatrixXd::Identity(p, p);
  const auto aux = fixture::scalar_aux(fixture::distance_covariate(p));
  auto opt = options(500, 8);
  const auto rep = bootstrap_parametric(fitted, pat, aux, kOls, std::vector<double>{0.0}, opt);
  CHECK(rep.completed == 500);
  const PairSets pairs = estimation_pairs(pat);
  for (const auto& [i, j] : pairs.upper) {
    const double theory = 1.0 / std::sqrt(static_cast<double>(pat.pair_count(i, j)));
    CAPTURE(i);
    CAPTURE(j);
    CHECK(std::abs(rep.se(i, j) - theory) < 0.25 * theory);
  }
}

TEST_CASE("a non positive definite block stops the parametric bootstrap") {
  const auto pat = ObservationPattern::build(3, {{0, 1}, {1, 2}}, {20, 20});
  AuxCovResult bad;
  bad.final_cov = Eigen::MatrixXd::Identity(3, 3);
  bad.final_cov(0, 1) = bad.final_cov(1, 0) = 1.0;
  const auto aux = fixture::scalar_aux(fixture::distance_covariate(3));
  CHECK(code_of([&] { bootstrap_parametric(bad, pat, aux, kOls, kGrid, options(5, 1)); }) == ErrorCode::kNonPDBlock);
  AuxCovResult small;
  small.final_cov = Eigen::MatrixXd::Identity(2, 2);
  CHECK(code_of([&] { bootstrap_parametric(small, pat, aux, kOls, kGrid, options(5, 1)); }) ==
        ErrorCode::kDimensionMismatch);
}

TEST_CASE("permuting the replicate seeds leaves the standard errors unchanged") {
  const auto pr = problem(8, 30, 4);
  auto opt = options(12, 9);
  const auto base = bootstrap_nonparametric(pr.data, pr.aux, kOls, kGrid, opt);
  std::vector<std::uint64_t> seeds = base.seeds;
  std::reverse(seeds.begin(), seeds.end());
  std::rotate(seeds.begin(), seeds.begin() + 5, seeds.end());
  opt.replicate_seeds = seeds;
  const auto perm = bootstrap_nonparametric(pr.data, pr.aux, kOls, kGrid, opt);
  CHECK(std::is_permutation(perm.seeds.begin(), perm.seeds.end(), base.seeds.begin()));
  CHECK((perm.se - base.se).cwiseAbs().maxCoeff() <= 1e-12 * base.se.maxCoeff());
  std::vector<double> a = base.alphas, b = perm.alphas;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
}

TEST_CASE("results do not depend on the thread count") {
  const auto pr = problem(8, 30, 5);
  auto opt = options(8, 10);
  opt.threads = 1;
  const auto one = bootstrap_nonparametric(pr.data, pr.aux, kOls, kGrid, opt);
  opt.threads = 3;
  const auto three = bootstrap_nonparametric(pr.data, pr.aux, kOls, kGrid, opt);
  CHECK(one.se == three.se);
  CHECK(one.alphas == three.alphas);
  opt.seed = 11;
  CHECK(bootstrap_nonparametric(pr.data, pr.aux, kOls, kGrid, opt).se != one.se);
}

TEST_CASE("failed replicates are counted and too many are an error") {
  // Variable 6 lives only in a three-row block; a resample that repeats one
  // row leaves it with zero variance.
  Eigen::MatrixXd sigma = fixture::decaying_correlation(6);
  const auto data = fixture::gaussian_blocks(sigma, {range(0, 5), {4, 5}}, {30, 3}, 12);
  const auto aux = fixture::scalar_aux(fixture::distance_covariate(6));
  auto opt = options(40, 13);
  opt.cv.folds = 2;
  opt.max_skip_fraction = 1.0;
  const auto rep = bootstrap_nonparametric(data, aux, kOls, kGrid, opt);
  CHECK(rep.skipped > 4);
  CHECK(rep.completed > 0);
  CHECK(rep.completed + rep.skipped == 40);
  CHECK(rep.warnings.size() == static_cast<size_t>(rep.skipped));
  opt.max_skip_fraction = 0.1;
  CHECK(code_of([&] { bootstrap_nonparametric(data, aux, kOls, kGrid, opt); }) == ErrorCode::kReplicateFailure);
}

TEST_CASE("fewer than two replicates is a configuration error") {
  const auto pr = problem(8, 30, 6);
  CHECK(code_of([&] { bootstrap_nonparametric(pr.data, pr.aux, kOls, kGrid, options(1, 1)); }) ==
        ErrorCode::kConfigOutOfRange);
}
