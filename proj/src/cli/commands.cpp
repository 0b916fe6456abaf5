#include "auxcov/cli.hpp"

#include "auxcov/bootstrap.hpp"
#include "auxcov/crossval.hpp"
#include "auxcov/errors.hpp"
#include "auxcov/experiments.hpp"
#include "auxcov/matrix_io.hpp"
#include "auxcov/psi.hpp"
#include "auxcov/random.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace auxcov::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct DataArgs {
  std::string data;
  std::string format = "auto";
  std::string aux;
  std::string method = "auto";
  std::string alpha = "cv";
  std::vector<double> alpha_grid;
  int knots = 4;
  int tau_min = 2;
  int tau_max = 10;
  int folds = 10;
  std::string target = "correlation";
  int max_pairs = kDefaultMaxPairs;
};

struct CommonArgs {
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
};

void add_data_options(CLI::App& cmd, DataArgs& a) {
  cmd.add_option("--data", a.data, "Long CSV file or block directory")->required()->check(CLI::ExistingPath);
  cmd.add_option("--format", a.format, "auto, long or blocks")->check(CLI::IsMember({"auto", "long", "blocks"}));
  cmd.add_option("--aux", a.aux, "Auxiliary covariates: i,j,w1..wq")->required()->check(CLI::ExistingFile);
  cmd.add_option("--method", a.method, "ols, gls, splines or auto")
      ->check(CLI::IsMember({"auto", "ols", "gls", "splines"}));
  cmd.add_option("--alpha", a.alpha, "Shrinkage weight in [0, 1], or cv");
  cmd.add_option("--alpha-grid", a.alpha_grid, "Candidate alpha values for cv")->delimiter(',');
  cmd.add_option("--knots", a.knots, "Interior knots when alpha is fixed")->check(CLI::PositiveNumber);
  cmd.add_option("--tau-min", a.tau_min, "Smallest knot count searched by cv")->check(CLI::PositiveNumber);
  cmd.add_option("--tau-max", a.tau_max, "Largest knot count searched by cv")->check(CLI::PositiveNumber);
  cmd.add_option("--folds", a.folds, "Cross-validation folds")->check(CLI::Range(2, 1000000));
  cmd.add_option("--target", a.target, "Held-out target: correlation or covariance")
      ->check(CLI::IsMember({"correlation", "covariance"}));
  cmd.add_option("--max-pairs", a.max_pairs, "Largest |U| for which gls is offered")->check(CLI::PositiveNumber);
}

void add_common_options(CLI::App& cmd, CommonArgs& c) {
  cmd.add_option("--seed", c.seed, "Random seed");
  cmd.add_option("--out", c.out, "Output directory (default: $AUXCOV_OUTPUT_DIR or .)");
  cmd.add_option("--threads", c.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
}

fs::path output_dir(const CommonArgs& c) {
  fs::path dir = c.out;
  if (dir.empty()) {
    const char* env = std::getenv("AUXCOV_OUTPUT_DIR");
    dir = env && *env ? fs::path(env) : fs::path(".");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  f << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

struct Problem {
  IncompleteDataset data;
  AuxiliaryCovariates aux;
  PartialSymmetricMatrix cov;
  std::vector<RegressionSpec> specs;
  std::vector<double> alphas;
  std::optional<double> fixed_alpha;
  CvOptions cv;
  std::string method;
  std::vector<std::string> notes;
};

DataFormat parse_format(const std::string& s) {
  if (s == "long") return DataFormat::kLongCsv;
  if (s == "blocks") return DataFormat::kBlockDirectory;
  return DataFormat::kAuto;
}

Problem load_problem(const DataArgs& a, const CommonArgs& c) {
  IncompleteDataset data = load_dataset(a.data, parse_format(a.format));
  AuxiliaryCovariates aux = load_aux(a.aux, data.names());
  if (aux.p() != data.pattern().p())
    throw Error(ErrorCode::kDimensionMismatch, "auxiliary file covers " + std::to_string(aux.p()) + " variables");
  if (!aux.complete())
    throw Error(ErrorCode::kNoAuxCoverage, std::to_string(aux.missing_count()) + " variable pairs have no covariates");
  PartialSymmetricMatrix cov = observed_sample_covariance(data);
  Problem pr{std::move(data), std::move(aux), std::move(cov), {}, {}, std::nullopt, {}, a.method, {}};

  if (a.alpha != "cv") {
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(a.alpha, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != a.alpha.size() || !(value >= 0.0 && value <= 1.0))
      throw Error(ErrorCode::kConfigOutOfRange, "--alpha must be cv or a number in [0, 1], got '" + a.alpha + "'");
    pr.fixed_alpha = value;
  }

  const int p = pr.data.pattern().p();
  const long pairs = static_cast<long>(p) * (p - 1) / 2;
  if (pr.method == "auto") {
    if (pairs <= a.max_pairs) {
      pr.method = "gls";
    } else {
      pr.method = pr.aux.q() == 1 ? "splines" : "ols";
      pr.notes.push_back("|U| = " + std::to_string(pairs) + " exceeds the gls limit; using " + pr.method);
    }
  }
  if (pr.method == "gls") {
    GlsSpec g;
    g.max_pairs = a.max_pairs;
    pr.specs.push_back(g);
  } else if (pr.method == "splines") {
    if (pr.fixed_alpha) {
      pr.specs.push_back(SplineSpec{a.knots});
    } else {
      if (a.tau_max < a.tau_min) throw Error(ErrorCode::kConfigOutOfRange, "--tau-max is below --tau-min");
      pr.specs = spline_grid(a.tau_min, a.tau_max);
    }
  } else {
    pr.specs.push_back(OlsSpec{});
  }

  pr.alphas = a.alpha_grid.empty() ? default_alpha_grid() : a.alpha_grid;
  for (double v : pr.alphas)
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::kConfigOutOfRange, "alpha grid values must lie in [0, 1]");
  pr.cv.folds = a.folds;
  pr.cv.seed = c.seed;
  pr.cv.threads = c.threads;
  pr.cv.target = a.target == "covariance" ? CvTarget::kCovariance : CvTarget::kCorrelation;
  return pr;
}

json data_config(const DataArgs& a, const Problem& pr) {
  return {{"data", a.data},   {"format", a.format},         {"aux", a.aux},
          {"method", pr.method}, {"alpha", a.alpha},        {"alpha_grid", pr.alphas},
          {"knots", a.knots}, {"tau_min", a.tau_min},       {"tau_max", a.tau_max},
          {"folds", a.folds}, {"target", a.target},         {"max_pairs", a.max_pairs}};
}

json model_json(const FittedBaseline& m, const RegressionSpec& spec) {
  json j{{"kind", std::string(kind_name(m.kind))},
         {"label", spec_label(spec)},
         {"coefficients", to_json(m.beta)},
         {"residual_variance", m.residual_variance},
         {"iterations", m.iterations},
         {"converged", m.converged},
         {"warnings", m.warnings}};
  if (m.basis) {
    j["knots"] = m.basis->interior();
    j["boundary"] = {m.basis->lower(), m.basis->upper()};
  }
  if (m.kind == BaselineKind::kGls) j["sigma_eps_sq"] = m.sigma_eps_sq;
  return j;
}

json diagnostics_json(const AuxCovDiagnostics& d) {
  return {{"clamped_correlations", d.clamped_correlations},
          {"baseline_pd_steps", d.baseline_pd_steps},
          {"completed_pd_steps", d.completed_pd_steps},
          {"baseline_min_eigenvalue", d.baseline_min_eigenvalue},
          {"completed_min_eigenvalue", d.completed_min_eigenvalue},
          {"substituted_cross_terms", d.substituted_cross_terms},
          {"warnings", d.warnings}};
}

json cv_json(const CvReport& r) {
  json points = json::array();
  for (size_t g = 0; g < r.grid.size(); ++g) {
    const auto& pt = r.grid[g];
    points.push_back({{"alpha", pt.alpha}, {"model", r.spec_labels[static_cast<size_t>(pt.spec)]},
                      {"risk", std::isfinite(pt.risk) ? json(pt.risk) : json(nullptr)}});
  }
  return {{"folds", r.folds},       {"used_folds", r.used_folds}, {"selected", r.selected},
          {"models", r.spec_labels}, {"risk", points},            {"dropped_models", r.dropped_specs},
          {"warnings", r.warnings}};
}

json base_report(const std::string& command, const CommonArgs& c) {
  return {{"command", command}, {"seed", c.seed}, {"version", AUXCOV_VERSION}, {"threads", c.threads}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> pair_labels(const std::vector<IndexPair>& pairs, const std::vector<std::string>& names) {
  std::vector<std::string> out;
  out.reserve(pairs.size());
  for (const auto& [i, j] : pairs) out.push_back(names[static_cast<size_t>(i)] + ":" + names[static_cast<size_t>(j)]);
  return out;
}

// Covariance implied by the baseline correlations and the observed variances.
Eigen::MatrixXd combine_baseline_covariance(const AuxCovResult& r) {
  const Eigen::VectorXd sd = r.final_cov.diagonal().cwiseSqrt();
  return sd.asDiagonal() * r.baseline_corr * sd.asDiagonal();
}

// Fits the requested completion, either at a fixed α or by cross-validation.
struct Completion {
  AuxCovResult result;
  std::optional<CvReport> cv;
};

Completion complete_problem(const Problem& pr) {
  if (pr.fixed_alpha) {
    // With several candidates and a fixed α, the model is still chosen by CV.
    if (pr.specs.size() == 1) return {run_auxcov(pr.cov, pr.aux, *pr.fixed_alpha, pr.specs.front(), pr.cv.auxcov), {}};
    const double a = *pr.fixed_alpha;
    CvSelection sel = select_and_fit(pr.data, pr.aux, pr.specs, std::span<const double>(&a, 1), pr.cv);
    return {std::move(sel.result), std::move(sel.report)};
  }
  CvSelection sel = select_and_fit(pr.data, pr.aux, pr.specs, pr.alphas, pr.cv);
  return {std::move(sel.result), std::move(sel.report)};
}

void cmd_complete(const DataArgs& a, const CommonArgs& c, bool emit_baseline, bool emit_psi, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Problem pr = load_problem(a, c);
  const fs::path dir = output_dir(c);
  const Completion comp = complete_problem(pr);
  const auto& r = comp.result;
  const auto& names = pr.data.names();

  write_matrix_csv(dir / "completed_correlation.csv", r.final_corr, names);
  write_matrix_csv(dir / "completed_covariance.csv", r.final_cov, names);
  json files = {"completed_correlation.csv", "completed_covariance.csv", "report.json"};
  if (emit_baseline) {
    write_matrix_csv(dir / "baseline_correlation.csv", r.baseline_corr, names);
    files.push_back("baseline_correlation.csv");
  }
  int substituted = 0;
  if (emit_psi) {
    const Eigen::MatrixXd stand_in = combine_baseline_covariance(r);
    GaussianPsiOptions po;
    po.baseline = &stand_in;
    po.max_pairs = a.max_pairs;
    const PsiComponents psi = psi_gaussian(pr.data.pattern(), pr.cov, po);
    substituted = psi.substituted_cross_terms;
    write_matrix_csv(dir / "psi.csv", psi.psi, pair_labels(psi.upper, names));
    files.push_back("psi.csv");
  }

  json rep = base_report("complete", c);
  rep["config"] = data_config(a, pr);
  rep["alpha"] = r.alpha;
  if (comp.cv) {
    if (!pr.fixed_alpha) rep["alpha_cv"] = r.alpha;
    rep["cv"] = cv_json(*comp.cv);
  }
  rep["model"] = model_json(r.model, r.spec);
  rep["diagnostics"] = diagnostics_json(r.diagnostics);
  if (emit_psi) rep["diagnostics"]["psi_substituted_cross_terms"] = substituted;
  const auto& pat = pr.data.pattern();
  rep["p"] = pat.p();
  rep["n"] = pat.n();
  rep["blocks"] = pat.num_blocks();
  rep["eta"] = r.pairs.eta;
  rep["observed_pairs"] = r.pairs.observed_count;
  rep["notes"] = pr.notes;
  rep["files"] = files;
  rep["seconds"] = seconds_since(t0);
  write_json(dir / "report.json", rep);
  out << "wrote " << (dir / "completed_correlation.csv").string() << "\n";
}

void cmd_bootstrap(const DataArgs& a, const CommonArgs& c, int b, const std::string& variant, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  Problem pr = load_problem(a, c);
  const fs::path dir = output_dir(c);
  std::vector<double> alphas = pr.alphas;
  if (pr.fixed_alpha) alphas = {*pr.fixed_alpha};

  BootstrapOptions bo;
  bo.replicates = b;
  bo.seed = c.seed;
  bo.cv = pr.cv;
  bo.threads = c.threads;
  BootstrapReport br;
  std::optional<AuxCovResult> fitted;
  if (variant == "parametric") {
    CvOptions fit_cv = pr.cv;
    fit_cv.seed = derive_seed(c.seed, 0xF17);
    fitted = select_and_fit(pr.data, pr.aux, pr.specs, alphas, fit_cv).result;
    br = bootstrap_parametric(*fitted, pr.data.pattern(), pr.aux, pr.specs, alphas, bo);
  } else {
    br = bootstrap_nonparametric(pr.data, pr.aux, pr.specs, alphas, bo);
  }
  write_matrix_csv(dir / "se_matrix.csv", br.se, pr.data.names());

  json rep = base_report("bootstrap", c);
  rep["config"] = data_config(a, pr);
  rep["config"]["B"] = b;
  rep["config"]["variant"] = variant;
  rep["completed"] = br.completed;
  rep["skipped"] = br.skipped;
  rep["alphas"] = br.alphas;
  rep["warnings"] = br.warnings;
  rep["eta"] = pair_sets(pr.data.pattern(), 2).eta;
  if (fitted) rep["alpha"] = fitted->alpha;
  rep["notes"] = pr.notes;
  rep["files"] = {"se_matrix.csv", "report.json"};
  rep["seconds"] = seconds_since(t0);
  write_json(dir / "report.json", rep);
  out << "wrote " << (dir / "se_matrix.csv").string() << "\n";
}

struct SimArgs {
  std::string name;
  ExperimentConfig config;
};

void add_sim_options(CLI::App& cmd, ExperimentConfig& e) {
  cmd.add_option("--gamma", e.gammas, "Auxiliary signal strengths")->delimiter(',');
  cmd.add_option("--p", e.p, "Number of variables");
  cmd.add_option("--n", e.ns, "Sample sizes")->delimiter(',');
  cmd.add_option("--K", e.blocks, "Number of blocks");
  cmd.add_option("--eta", e.eta, "Target missing-pair fraction");
  cmd.add_option("--replicates", e.replicates, "Simulation replicates");
  cmd.add_option("--folds", e.folds, "Cross-validation folds");
  cmd.add_option("--alpha-grid", e.alpha_grid, "Candidate alpha values")->delimiter(',');
  cmd.add_option("--tau-min", e.tau_min, "Smallest knot count");
  cmd.add_option("--tau-max", e.tau_max, "Largest knot count");
  cmd.add_option("--B", e.bootstrap_b, "Bootstrap replicates");
  cmd.add_option("--mc-draws", e.mc_draws, "Monte-Carlo draws");
}

void cmd_simulate(const SimArgs& s, const CommonArgs& c, std::ostream& out) {
  const auto known = experiment_names();
  if (std::find(known.begin(), known.end(), s.name) == known.end())
    throw Error(ErrorCode::kConfigOutOfRange, "unknown experiment '" + s.name + "'");
  ExperimentConfig cfg = s.config;
  cfg.threads = c.threads;
  const ExperimentReport rep = run_experiment(s.name, cfg, c.seed);
  const fs::path dir = output_dir(c);
  write_experiment(rep, dir);
  out << "wrote " << (dir / (s.name + ".csv")).string() << "\n";
}

void cmd_compare(const ExperimentConfig& config, const CommonArgs& c, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = config;
  cfg.threads = c.threads;
  const ExperimentReport rep = run_experiment("methods-compare", cfg, c.seed);
  const fs::path dir = output_dir(c);
  write_text(dir / "losses.csv", records_csv(rep));
  json j = base_report("compare", c);
  j["config"] = config_to_json(cfg);
  j["records"] = rep.records.size();
  j["files"] = {"losses.csv", "report.json"};
  j["seconds"] = seconds_since(t0);
  write_json(dir / "report.json", j);
  out << "wrote " << (dir / "losses.csv").string() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Completion of structurally incomplete covariance matrices using auxiliary covariates", "auxcov"};
  app.set_version_flag("--version", std::string(AUXCOV_VERSION));
  app.require_subcommand(1);

  DataArgs data_args;
  CommonArgs common;
  bool emit_baseline = false;
  bool emit_psi = false;
  auto* complete = app.add_subcommand("complete", "Complete a covariance matrix from incomplete data");
  add_data_options(*complete, data_args);
  add_common_options(*complete, common);
  complete->add_flag("--emit-baseline", emit_baseline, "Also write the pure baseline correlation matrix");
  complete->add_flag("--emit-psi", emit_psi, "Also write the estimated measurement-error covariance over pairs");

  DataArgs boot_args;
  CommonArgs boot_common;
  int b = 200;
  std::string variant = "nonparametric";
  auto* boot = app.add_subcommand("bootstrap", "Bootstrap standard errors of the completed covariance");
  add_data_options(*boot, boot_args);
  add_common_options(*boot, boot_common);
  boot->add_option("--B", b, "Bootstrap replicates")->check(CLI::Range(2, 100000));
  boot->add_option("--variant", variant, "nonparametric or parametric")
      ->check(CLI::IsMember({"nonparametric", "parametric"}));

  SimArgs sim;
  CommonArgs sim_common;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation experiment");
  simulate->add_option("--name", sim.name, "Experiment name")->required();
  add_sim_options(*simulate, sim.config);
  simulate->add_option("--methods", sim.config.methods, "Methods for methods-compare")->delimiter(',');
  add_common_options(*simulate, sim_common);

  ExperimentConfig cmp;
  cmp.gammas = {0.8};
  cmp.eta = 0.3;
  CommonArgs cmp_common;
  auto* compare = app.add_subcommand("compare", "Compare completion methods on simulated data");
  add_sim_options(*compare, cmp);
  compare->add_option("--methods", cmp.methods, "Subset of auxcov-ols,auxcov-gls,auxcov-splines,maxdet,lr")
      ->delimiter(',');
  add_common_options(*compare, cmp_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    err << "error: UsageError: " << msg << "\n";
    return 2;
  }

  try {
    if (*complete) cmd_complete(data_args, common, emit_baseline, emit_psi, out);
    else if (*boot) cmd_bootstrap(boot_args, boot_common, b, variant, out);
    else if (*simulate) cmd_simulate(sim, sim_common, out);
    else if (*compare) cmd_compare(cmp, cmp_common, out);
  } catch (const Error& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    err << "error: " << msg << "\n";
    return is_input_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    err << "error: InternalError: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace auxcov::cli
