// Serial reference kernels against the OpenMP implementations.
//
//   bench_kernels --benchmark_filter=Psi

#include "auxcov/corestats.hpp"
#include "auxcov/psi.hpp"
#include "auxcov/reference.hpp"
#include "auxcov/simlab.hpp"

#include <benchmark/benchmark.h>

#include <map>

namespace {

struct Fixture {
  auxcov::GroundTruth truth;
  auxcov::InjectedData sim;
  auxcov::PartialSymmetricMatrix cov;
};

const Fixture& fixture(int p) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(p);
  if (it == cache.end()) {
    auto truth = auxcov::generate_ground_truth(p, 0.5, false, 11);
    auto sim = auxcov::inject_missingness(truth.sigma, 400, 2, 0.2, 12);
    auto cov = auxcov::observed_sample_covariance(sim.data);
    it = cache.emplace(p, Fixture{std::move(truth), std::move(sim), std::move(cov)}).first;
  }
  return it->second;
}

void BM_ObservedCovariance(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(auxcov::observed_sample_covariance(f.sim.data));
}

void BM_ObservedCovarianceReference(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(auxcov::reference::observed_covariance(f.sim.data));
}

void BM_PsiEmpirical(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(auxcov::psi_empirical(f.sim.data, f.cov).psi);
}

void BM_PsiEmpiricalReference(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  const auto& pairs = f.cov.pairs;
  Eigen::MatrixXd sigma = f.cov.values;
  for (auto _ : state) {
    const Eigen::MatrixXd h = auxcov::reference::empirical_h(f.sim.data);
    benchmark::DoNotOptimize(auxcov::reference::assemble_psi(pairs, sigma, h));
  }
}

void BM_PsiOracle(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  const auto moments = auxcov::gaussian_fourth_moments(f.truth.sigma);
  for (auto _ : state) benchmark::DoNotOptimize(auxcov::psi_oracle(f.sim.data.pattern(), f.truth.sigma, moments).psi);
}

void BM_PsiOracleReference(benchmark::State& state) {
  const auto& f = fixture(static_cast<int>(state.range(0)));
  const auto pairs = auxcov::estimation_pairs(f.sim.data.pattern());
  for (auto _ : state) {
    const Eigen::MatrixXd h = auxcov::reference::gaussian_h(f.sim.data.pattern(), f.truth.sigma);
    benchmark::DoNotOptimize(auxcov::reference::assemble_psi(pairs, f.truth.sigma, h));
  }
}

}  // namespace

BENCHMARK(BM_ObservedCovariance)->Arg(20)->Arg(50);
BENCHMARK(BM_ObservedCovarianceReference)->Arg(20)->Arg(50);
BENCHMARK(BM_PsiEmpirical)->Arg(10)->Arg(20);
BENCHMARK(BM_PsiEmpiricalReference)->Arg(10)->Arg(20);
BENCHMARK(BM_PsiOracle)->Arg(10)->Arg(20);
BENCHMARK(BM_PsiOracleReference)->Arg(10)->Arg(20);

BENCHMARK_MAIN();
