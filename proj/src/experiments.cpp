#include "auxcov/experiments.hpp"

#include "auxcov/baselines.hpp"
#include "auxcov/bootstrap.hpp"
#include "auxcov/crossval.hpp"
#include "auxcov/csv.hpp"
#include "auxcov/errors.hpp"
#include "auxcov/psi.hpp"
#include "auxcov/simlab.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace auxcov {

namespace {

using Records = std::vector<ExperimentRecord>;

int thread_count(int requested) {
#ifdef _OPENMP
  return requested > 0 ? requested : omp_get_max_threads();
#else
  (void)requested;
  return 1;
#endif
}

/// Runs `body` for r = 0..count-1 (possibly in parallel) and concatenates the
/// records in replicate order.
Records per_replicate(int count, int threads, const std::function<Records(int)>& body) {
  std::vector<Records> parts(count);
  std::vector<std::string> errors(count);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(threads))
  for (int r = 0; r < count; ++r) {
    try {
      parts[r] = body(r);
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  }
  Records out;
  for (int r = 0; r < count; ++r) {
    if (!errors[r].empty()) throw Error(ErrorCode::kReplicateFailure, "replicate " + std::to_string(r) + ": " + errors[r]);
    out.insert(out.end(), parts[r].begin(), parts[r].end());
  }
  return out;
}

std::vector<double> alpha_grid_of(const ExperimentConfig& c) {
  return c.alpha_grid.empty() ? default_alpha_grid() : c.alpha_grid;
}

struct Setting {
  double gamma;
  int n;
  std::uint64_t seed;
};

/// One seed per (γ, n, replicate); the simulated truth and data never depend
/// on the experiment being run.
std::uint64_t replicate_seed(std::uint64_t seed, size_t gi, size_t ni, int r) {
  return derive_seed(derive_seed(derive_seed(seed, gi), ni), static_cast<std::uint64_t>(r));
}

void add_means(Records& records) {
  std::map<std::tuple<double, int, std::string, std::string>, std::pair<double, int>> acc;
  std::map<std::tuple<double, int, std::string, std::string>, ExperimentRecord> proto;
  for (const auto& rec : records) {
    const auto key = std::make_tuple(rec.gamma, rec.n, rec.method, rec.metric);
    auto& a = acc[key];
    a.first += rec.value;
    ++a.second;
    proto.emplace(key, rec);
  }
  for (const auto& [key, a] : acc) {
    ExperimentRecord rec = proto.at(key);
    rec.replicate = "mean";
    rec.value = a.first / a.second;
    records.push_back(rec);
  }
}

ExperimentRecord make_record(int r, double gamma, int p, int n, int k, double eta, std::string method,
                             std::string metric, double value) {
  return ExperimentRecord{std::to_string(r), gamma, p, n, k, eta, std::move(method), std::move(metric), value};
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// α tracking for a fixed model family: CV choice against the oracle.
Records run_tracking(const ExperimentConfig& c, std::uint64_t seed, bool nonlinear,
                     const std::vector<RegressionSpec>& specs, const std::string& method, bool report_tau) {
  const auto grid = alpha_grid_of(c);
  std::vector<Setting> settings;
  std::vector<std::pair<size_t, size_t>> index;
  for (size_t gi = 0; gi < c.gammas.size(); ++gi)
    for (size_t ni = 0; ni < c.ns.size(); ++ni) index.emplace_back(gi, ni);

  const int total = static_cast<int>(index.size()) * c.replicates;
  Records out = per_replicate(total, c.threads, [&](int job) {
    const auto [gi, ni] = index[job / c.replicates];
    const int r = job % c.replicates;
    const double gamma = c.gammas[gi];
    const int n = c.ns[ni];
    const std::uint64_t s = replicate_seed(seed, gi, ni, r);
    const GroundTruth truth = generate_ground_truth(c.p, gamma, nonlinear, derive_seed(s, 0));
    const InjectedData sim = inject_missingness(truth.sigma, n, c.blocks, c.eta, derive_seed(s, 1));
    CvOptions cv;
    cv.folds = c.folds;
    cv.seed = derive_seed(s, 2);
    cv.threads = 1;
    const CvReport rep = cross_validate(sim.data, truth.aux, specs, grid, cv);
    const PartialSymmetricMatrix cov = observed_sample_covariance(sim.data);
    const OracleChoice orc = oracle_alpha(cov, truth.aux, specs, truth.sigma, grid);
    const double eta = sim.plan.realized_eta;
    Records rec;
    rec.push_back(make_record(r, gamma, c.p, n, c.blocks, eta, method, "alpha_cv", rep.best().alpha));
    rec.push_back(make_record(r, gamma, c.p, n, c.blocks, eta, method, "alpha_or", orc.alpha));
    if (report_tau) {
      rec.push_back(make_record(r, gamma, c.p, n, c.blocks, eta, method, "tau_cv", spec_knots(specs[rep.best().spec])));
      rec.push_back(make_record(r, gamma, c.p, n, c.blocks, eta, method, "tau_or", spec_knots(specs[orc.spec])));
    }
    return rec;
  });
  add_means(out);
  return out;
}

Records run_methods_compare(const ExperimentConfig& c, std::uint64_t seed) {
  const auto grid = alpha_grid_of(c);
  std::vector<std::pair<size_t, size_t>> index;
  for (size_t gi = 0; gi < c.gammas.size(); ++gi)
    for (size_t ni = 0; ni < c.ns.size(); ++ni) index.emplace_back(gi, ni);
  for (const auto& m : c.methods)
    if (m != "auxcov-ols" && m != "auxcov-gls" && m != "auxcov-splines" && m != "maxdet" && m != "lr")
      throw Error(ErrorCode::kConfigOutOfRange, "unknown method '" + m + "'");

  const int total = static_cast<int>(index.size()) * c.replicates;
  Records out = per_replicate(total, c.threads, [&](int job) {
    const auto [gi, ni] = index[job / c.replicates];
    const int r = job % c.replicates;
    const double gamma = c.gammas[gi];
    const int n = c.ns[ni];
    const std::uint64_t s = replicate_seed(seed, gi, ni, r);
    const GroundTruth truth = generate_ground_truth(c.p, gamma, false, derive_seed(s, 0));
    const InjectedData sim = inject_missingness(truth.sigma, n, c.blocks, c.eta, derive_seed(s, 1));
    const PartialSymmetricMatrix cov = observed_sample_covariance(sim.data);
    const double eta = sim.plan.realized_eta;
    CvOptions cv;
    cv.folds = c.folds;
    cv.seed = derive_seed(s, 2);
    cv.threads = 1;

    Records rec;
    for (const auto& method : c.methods) {
      Eigen::MatrixXd estimate;
      if (method == "auxcov-ols") {
        const std::vector<RegressionSpec> specs{OlsSpec{}};
        estimate = select_and_fit(sim.data, truth.aux, specs, grid, cv).result.final_cov;
      } else if (method == "auxcov-gls") {
        const std::vector<RegressionSpec> specs{GlsSpec{}};
        estimate = select_and_fit(sim.data, truth.aux, specs, grid, cv).result.final_cov;
      } else if (method == "auxcov-splines") {
        const auto specs = spline_grid(c.tau_min, c.tau_max);
        estimate = select_and_fit(sim.data, truth.aux, specs, grid, cv).result.final_cov;
      } else if (method == "maxdet") {
        estimate = maxdet_complete(cov).sigma;
      } else {
        LowRankOptions lr;
        lr.seed = derive_seed(s, 3);
        estimate = lowrank_complete(sim.data, lr).sigma;
      }
      const LossQuartet lq = losses(estimate, truth.sigma, cov.pairs);
      // Losses that do not apply (no Oᶜ, singular estimate) stay as NA rows.
      const auto emit = [&](const char* metric, const std::optional<double>& v) {
        rec.push_back(make_record(r, gamma, c.p, n, c.blocks, eta, method, metric, v ? *v : std::nan("")));
      };
      emit("corr_O", lq.corr_o);
      emit("corr_Oc", lq.corr_oc);
      emit("pcorr_O", lq.pcorr_o);
      emit("pcorr_Oc", lq.pcorr_oc);
    }
    return rec;
  });
  add_means(out);
  // log10 of the mean losses, as plotted.
  const size_t n_rec = out.size();
  for (size_t i = 0; i < n_rec; ++i)
    if (out[i].replicate == "mean") {
      ExperimentRecord rec = out[i];
      rec.metric = "log10_mean_" + rec.metric;
      rec.value = std::log10(rec.value);
      out.push_back(rec);
    }
  return out;
}

Records run_bootstrap_check(const ExperimentConfig& c, std::uint64_t seed) {
  const double gamma = c.gammas.front();
  const int n = c.ns.front();
  const auto grid = alpha_grid_of(c);
  const std::vector<RegressionSpec> specs{OlsSpec{}};
  const GroundTruth truth = generate_ground_truth(c.p, gamma, false, derive_seed(seed, 0));
  CvOptions cv;
  cv.folds = c.folds;
  cv.threads = 1;

  // Monte-Carlo standard errors from independent data sets.
  std::vector<Eigen::MatrixXd> estimates(c.replicates);
  std::vector<std::string> errors(c.replicates);
  double eta = 0.0;
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(c.threads))
  for (int r = 0; r < c.replicates; ++r) {
    try {
      const std::uint64_t s = derive_seed(derive_seed(seed, 1), r);
      const InjectedData sim = inject_missingness(truth.sigma, n, c.blocks, c.eta, derive_seed(s, 0));
      CvOptions local = cv;
      local.seed = derive_seed(s, 1);
      estimates[r] = select_and_fit(sim.data, truth.aux, specs, grid, local).result.final_cov;
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  }
  for (int r = 0; r < c.replicates; ++r)
    if (!errors[r].empty()) throw Error(ErrorCode::kReplicateFailure, "Monte-Carlo replicate " + std::to_string(r) + ": " + errors[r]);
  const int p = c.p;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(p, p);
  for (const auto& e : estimates) mean += e;
  mean /= c.replicates;
  Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(p, p);
  for (const auto& e : estimates) ss += (e - mean).cwiseAbs2();
  const Eigen::MatrixXd mc_se = (ss / (c.replicates - 1)).cwiseSqrt();

  // Bootstrap on one further data set.
  const InjectedData sim = inject_missingness(truth.sigma, n, c.blocks, c.eta, derive_seed(seed, 2));
  eta = sim.plan.realized_eta;
  BootstrapOptions bo;
  bo.replicates = c.bootstrap_b;
  bo.seed = derive_seed(seed, 3);
  bo.cv = cv;
  bo.threads = c.threads;
  const BootstrapReport nonpar = bootstrap_nonparametric(sim.data, truth.aux, specs, grid, bo);
  CvOptions fit_cv = cv;
  fit_cv.seed = derive_seed(seed, 4);
  const CvSelection fitted = select_and_fit(sim.data, truth.aux, specs, grid, fit_cv);
  const BootstrapReport par = bootstrap_parametric(fitted.result, sim.data.pattern(), truth.aux, specs, grid, bo);

  Records out;
  std::vector<double> a, b, c2;
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      const std::string metric = "se[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]";
      out.push_back(make_record(0, gamma, p, n, c.blocks, eta, "mc", metric, mc_se(i, j)));
      out.push_back(make_record(0, gamma, p, n, c.blocks, eta, "nonparametric", metric, nonpar.se(i, j)));
      out.push_back(make_record(0, gamma, p, n, c.blocks, eta, "parametric", metric, par.se(i, j)));
      a.push_back(mc_se(i, j));
      b.push_back(nonpar.se(i, j));
      c2.push_back(par.se(i, j));
    }
  out.push_back(make_record(0, gamma, p, n, c.blocks, eta, "nonparametric", "pearson_vs_mc", pearson(a, b)));
  out.push_back(make_record(0, gamma, p, n, c.blocks, eta, "parametric", "pearson_vs_mc", pearson(a, c2)));
  out.push_back(make_record(0, gamma, p, n, c.blocks, eta, "nonparametric", "skipped", nonpar.skipped));
  out.push_back(make_record(0, gamma, p, n, c.blocks, eta, "parametric", "skipped", par.skipped));
  return out;
}

Records run_psi_verify(const ExperimentConfig& c, std::uint64_t seed) {
  const double gamma = c.gammas.front();
  const int n = c.ns.front();
  const GroundTruth truth = generate_ground_truth(c.p, gamma, false, derive_seed(seed, 0));
  const SplitPlan plan = plan_split(c.p, c.blocks, c.eta);
  const auto pattern = ObservationPattern::build(c.p, plan.subsets, block_sizes(n, c.blocks));
  const PsiComponents psi = psi_oracle(pattern, truth.sigma, gaussian_fourth_moments(truth.sigma));
  const Eigen::MatrixXd mc = static_cast<double>(n) *
                             monte_carlo_fisher_covariance(pattern, truth.sigma, c.mc_draws, derive_seed(seed, 1), c.threads);
  Records out;
  const auto m = psi.psi.rows();
  for (Eigen::Index s = 0; s < m; ++s)
    for (Eigen::Index u = s; u < m; ++u) {
      const auto [i, j] = psi.upper[s];
      const auto [k, l] = psi.upper[u];
      const std::string metric = "psi[" + std::to_string(i + 1) + "-" + std::to_string(j + 1) + "," +
                                 std::to_string(k + 1) + "-" + std::to_string(l + 1) + "]";
      out.push_back(make_record(0, gamma, c.p, n, c.blocks, plan.realized_eta, "oracle", metric, psi.psi(s, u)));
      out.push_back(make_record(0, gamma, c.p, n, c.blocks, plan.realized_eta, "mc", metric, mc(s, u)));
    }
  out.push_back(make_record(0, gamma, c.p, n, c.blocks, plan.realized_eta, "mc", "relative_frobenius",
                            (psi.psi - mc).norm() / psi.psi.norm()));
  return out;
}

}  // namespace

std::vector<std::string> experiment_names() {
  return {"cv-tracking", "cv-splines", "bootstrap-check", "methods-compare", "psi-verify", "gls-tracking"};
}

void validate_config(const ExperimentConfig& c) {
  const auto fail = [](const std::string& why) { throw Error(ErrorCode::kConfigOutOfRange, why); };
  if (c.p < 2 || c.p > 200) fail("p must lie in [2, 200]");
  if (c.ns.empty()) fail("no sample sizes given");
  for (int n : c.ns)
    if (n < 2 || n > 5000) fail("n must lie in [2, 5000]");
  if (c.gammas.empty()) fail("no gamma values given");
  for (double g : c.gammas)
    if (!(g >= 0.0 && g <= 1.0)) throw Error(ErrorCode::kBadGamma, "gamma must lie in [0, 1]");
  if (c.replicates < 2 || c.replicates > 500) fail("replicates must lie in [2, 500]");
  if (c.bootstrap_b < 2 || c.bootstrap_b > 500) fail("bootstrap B must lie in [2, 500]");
  if (c.mc_draws < 2 || c.mc_draws > 1000000) fail("Monte-Carlo draws must lie in [2, 1e6]");
  if (c.blocks < 1) fail("K must be positive");
  if (c.folds < 2) fail("need at least 2 folds");
  if (c.tau_min < 1 || c.tau_max < c.tau_min) fail("invalid knot range");
  for (double a : c.alpha_grid)
    if (!(a >= 0.0 && a <= 1.0)) fail("alpha grid values must lie in [0, 1]");
}

ExperimentReport run_experiment(const std::string& name, const ExperimentConfig& config, std::uint64_t seed) {
  validate_config(config);
  ExperimentReport report;
  report.name = name;
  report.seed = seed;
  report.config = config;
  if (name == "cv-tracking") {
    report.records = run_tracking(config, seed, false, {OlsSpec{}}, "auxcov-ols", false);
  } else if (name == "cv-splines") {
    report.records = run_tracking(config, seed, true, spline_grid(config.tau_min, config.tau_max), "auxcov-splines", true);
  } else if (name == "gls-tracking") {
    report.records = run_tracking(config, seed, false, {GlsSpec{}}, "auxcov-gls", false);
  } else if (name == "methods-compare") {
    report.records = run_methods_compare(config, seed);
  } else if (name == "bootstrap-check") {
    report.records = run_bootstrap_check(config, seed);
  } else if (name == "psi-verify") {
    report.records = run_psi_verify(config, seed);
  } else {
    throw Error(ErrorCode::kConfigOutOfRange, "unknown experiment '" + name + "'");
  }
  return report;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  return {{"gammas", c.gammas},         {"p", c.p},
          {"n", c.ns},                  {"K", c.blocks},
          {"eta", c.eta},               {"replicates", c.replicates},
          {"folds", c.folds},           {"alpha_grid", c.alpha_grid.empty() ? default_alpha_grid() : c.alpha_grid},
          {"tau_min", c.tau_min},       {"tau_max", c.tau_max},
          {"bootstrap_B", c.bootstrap_b}, {"mc_draws", c.mc_draws},
          {"methods", c.methods}};
}

std::string records_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "replicate,gamma,p,n,K,eta,method,metric,value\n";
  for (const auto& r : report.records) {
    out << r.replicate << ',' << csv::format_double(r.gamma) << ',' << r.p << ',' << r.n << ',' << r.k << ','
        << csv::format_double(r.eta) << ',' << csv::quote_if_needed(r.method) << ','
        << csv::quote_if_needed(r.metric) << ','
        << (std::isfinite(r.value) ? csv::format_double(r.value) : std::string("NA")) << '\n';
  }
  return out.str();
}

nlohmann::json manifest(const ExperimentReport& report) {
  return {{"experiment", report.name},
          {"seed", report.seed},
          {"version", AUXCOV_VERSION},
          {"config", config_to_json(report.config)},
          {"records", report.records.size()},
          {"columns", {"replicate", "gamma", "p", "n", "K", "eta", "method", "metric", "value"}}};
}

void write_experiment(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
    f << text;
  };
  write(dir / (report.name + ".csv"), records_csv(report));
  write(dir / (report.name + ".manifest.json"), manifest(report).dump(2) + "\n");
}

}  // namespace auxcov
