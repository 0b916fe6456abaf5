#include "auxcov/crossval.hpp"

#include "auxcov/errors.hpp"
#include "auxcov/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace auxcov {

std::vector<double> default_alpha_grid() {
  std::vector<double> g(51);
  for (int k = 0; k <= 50; ++k) g[k] = k / 50.0;
  return g;
}

std::vector<RegressionSpec> spline_grid(int lo, int hi) {
  std::vector<RegressionSpec> out;
  for (int t = lo; t <= hi; ++t) out.emplace_back(SplineSpec{t});
  return out;
}

std::vector<std::vector<std::vector<int>>> make_folds(const ObservationPattern& pattern, int folds,
                                                     std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::kConfigOutOfRange, "need at least 2 folds");
  for (int k = 0; k < pattern.num_blocks(); ++k)
    if (pattern.count(k) < folds)
      throw Error(ErrorCode::kFoldTooSmall, "block " + std::to_string(k + 1) + " has " +
                                                std::to_string(pattern.count(k)) + " samples for " +
                                                std::to_string(folds) + " folds");
  std::vector<std::vector<std::vector<int>>> out(folds, std::vector<std::vector<int>>(pattern.num_blocks()));
  Rng rng(seed);
  for (int k = 0; k < pattern.num_blocks(); ++k) {
    const int nk = pattern.count(k);
    std::vector<int> perm(nk);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int h = 0; h < folds; ++h) {
      const int lo = static_cast<int>(static_cast<long long>(h) * nk / folds);
      const int hi = static_cast<int>(static_cast<long long>(h + 1) * nk / folds);
      out[h][k].assign(perm.begin() + lo, perm.begin() + hi);
      std::sort(out[h][k].begin(), out[h][k].end());
    }
  }
  return out;
}

std::vector<std::vector<int>> training_rows(const std::vector<std::vector<std::vector<int>>>& folds, int h) {
  std::vector<std::vector<int>> out(folds[h].size());
  for (size_t g = 0; g < folds.size(); ++g) {
    if (static_cast<int>(g) == h) continue;
    for (size_t k = 0; k < out.size(); ++k) out[k].insert(out[k].end(), folds[g][k].begin(), folds[g][k].end());
  }
  for (auto& rows : out) std::sort(rows.begin(), rows.end());
  return out;
}

namespace {

struct HeldOut {
  std::vector<IndexPair> pairs;
  std::vector<double> values;
};

/// Held-out targets on pairs of the full O that the fold can still estimate.
HeldOut held_out_targets(const PartialSymmetricMatrix& test, const PairSets& full, CvTarget target) {
  HeldOut out;
  const int p = test.p();
  constexpr double bound = 1.0 - kCorrelationClamp;
  for (int i = 0; i < p; ++i) {
    for (int j = target == CvTarget::kCorrelation ? i + 1 : i; j < p; ++j) {
      if (!full.contains(i, j) || !test.defined(i, j)) continue;
      if (target == CvTarget::kCovariance) {
        out.pairs.emplace_back(i, j);
        out.values.push_back(test.values(i, j));
        continue;
      }
      const double vi = test.values(i, i), vj = test.values(j, j);
      if (!(vi > 0.0) || !(vj > 0.0)) continue;
      out.pairs.emplace_back(i, j);
      out.values.push_back(std::clamp(test.values(i, j) / std::sqrt(vi * vj), -bound, bound));
    }
  }
  return out;
}

}  // namespace

CvReport cross_validate(const IncompleteDataset& data, const AuxiliaryCovariates& aux,
                        std::span<const RegressionSpec> specs, std::span<const double> alpha_grid,
                        const CvOptions& options) {
  if (specs.empty()) throw Error(ErrorCode::kGridEmpty, "no candidate models");
  if (alpha_grid.empty()) throw Error(ErrorCode::kGridEmpty, "alpha grid is empty");
  for (double a : alpha_grid)
    if (!(a >= 0.0 && a <= 1.0)) throw Error(ErrorCode::kConfigOutOfRange, "alpha grid values must lie in [0, 1]");

  const auto folds = make_folds(data.pattern(), options.folds, options.seed);
  const int nf = options.folds;
  const int ns = static_cast<int>(specs.size());
  const int na = static_cast<int>(alpha_grid.size());
  const PairSets full = estimation_pairs(data.pattern());
  const auto loss_of = [&](double est, double obs) {
    if (options.pair_loss) return options.pair_loss(est, obs);
    return (est - obs) * (est - obs);
  };
  // Ordered pairs: each off-diagonal pair of O appears twice.
  const auto weight = [&](const IndexPair& ij) { return ij.first == ij.second ? 1.0 : 2.0; };

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<std::vector<double>>> losses(
      nf, std::vector<std::vector<double>>(ns, std::vector<double>(na, nan)));
  std::vector<char> fold_ok(nf, 0);
  std::vector<std::string> fold_note(nf);
  std::vector<std::vector<std::optional<Error>>> spec_error(nf, std::vector<std::optional<Error>>(ns));

  int threads = options.threads;
#ifdef _OPENMP
  if (threads <= 0) threads = omp_get_max_threads();
#else
  threads = 1;
#endif

#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int h = 0; h < nf; ++h) {
    std::optional<PartialSymmetricMatrix> train_cov;
    HeldOut target;
    try {
      const IncompleteDataset train = data.select_rows(training_rows(folds, h));
      const IncompleteDataset test = data.select_rows(folds[h]);
      train_cov = observed_sample_covariance(train);
      const PartialSymmetricMatrix test_cov = observed_sample_covariance(test);
      if (!zero_variance_variables(*train_cov).empty()) {
        fold_note[h] = "training set has a zero-variance variable";
        continue;
      }
      target = held_out_targets(test_cov, full, options.target);
      if (target.pairs.empty()) {
        fold_note[h] = "no held-out pair has two joint samples";
        continue;
      }
    } catch (const Error& e) {
      fold_note[h] = e.what();
      continue;
    }
    fold_ok[h] = 1;

    for (int s = 0; s < ns; ++s) {
      try {
        const AuxCovFit fit = fit_auxcov(*train_cov, aux, specs[s], options.auxcov);
        for (int a = 0; a < na; ++a) {
          const double alpha = alpha_grid[a];
          double total = 0.0;
          for (size_t r = 0; r < target.pairs.size(); ++r) {
            const auto [i, j] = target.pairs[r];
            double est = i == j ? 1.0 : alpha * fit.baseline_corr(i, j) + (1.0 - alpha) * fit.completed_corr(i, j);
            if (options.target == CvTarget::kCovariance)
              est = i == j ? fit.variances(i) : est * std::sqrt(fit.variances(i) * fit.variances(j));
            total += weight(target.pairs[r]) * loss_of(est, target.values[r]);
          }
          losses[h][s][a] = total;
        }
      } catch (const Error& e) {
        spec_error[h][s] = e;
      }
    }
  }

  CvReport report;
  report.alpha_grid.assign(alpha_grid.begin(), alpha_grid.end());
  report.folds = nf;
  for (const auto& spec : specs) report.spec_labels.push_back(spec_label(spec));
  for (int h = 0; h < nf; ++h) {
    if (fold_ok[h]) {
      ++report.used_folds;
    } else {
      report.warnings.push_back("fold " + std::to_string(h + 1) + " skipped: " + fold_note[h]);
    }
  }
  if (report.used_folds == 0) throw Error(ErrorCode::kAllFoldsDegenerate, "no fold produced a usable loss");

  std::vector<char> dropped(ns, 0);
  std::optional<Error> first_error;
  for (int s = 0; s < ns; ++s)
    for (int h = 0; h < nf; ++h)
      if (fold_ok[h] && spec_error[h][s]) {
        if (!dropped[s]) {
          report.dropped_specs.push_back(s);
          report.warnings.push_back(report.spec_labels[s] + " dropped: " + spec_error[h][s]->what());
          if (!first_error) first_error = spec_error[h][s];
        }
        dropped[s] = 1;
      }
  if (static_cast<int>(report.dropped_specs.size()) == ns) throw *first_error;

  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < na; ++a) {
    for (int s = 0; s < ns; ++s) {
      if (dropped[s]) continue;
      std::vector<double> per_fold(nf, nan);
      double sum = 0.0;
      for (int h = 0; h < nf; ++h) {
        if (!fold_ok[h]) continue;
        per_fold[h] = losses[h][s][a];
        sum += losses[h][s][a];
      }
      const double risk = sum / report.used_folds;
      report.grid.push_back({alpha_grid[a], s, risk});
      report.fold_losses.push_back(std::move(per_fold));
      const bool better = risk < best || (risk == best && alpha_grid[a] < report.best().alpha);
      if (better) {
        best = risk;
        report.selected = static_cast<int>(report.grid.size()) - 1;
      }
    }
  }
  return report;
}

CvSelection select_and_fit(const IncompleteDataset& data, const AuxiliaryCovariates& aux,
                           std::span<const RegressionSpec> specs, std::span<const double> alpha_grid,
                           const CvOptions& options) {
  CvSelection out;
  out.report = cross_validate(data, aux, specs, alpha_grid, options);
  const CvPoint& best = out.report.best();
  const PartialSymmetricMatrix cov = observed_sample_covariance(data);
  out.result = combine(fit_auxcov(cov, aux, specs[best.spec], options.auxcov), best.alpha);
  for (const auto& w : out.report.warnings) out.result.diagnostics.warnings.push_back(w);
  return out;
}

}  // namespace auxcov
