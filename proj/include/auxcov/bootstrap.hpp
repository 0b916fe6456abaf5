#pragma once

// Bootstrap standard errors of the cross-validated completion. Every
// replicate reruns the full model and α selection.

#include "auxcov/crossval.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace auxcov {

using MatrixFunctional = std::function<double(const Eigen::MatrixXd&)>;

struct BootstrapOptions {
  int replicates = 200;  // B
  std::uint64_t seed = 0;
  /// Explicit per-replicate seeds; overrides `replicates` and `seed` when set.
  std::vector<std::uint64_t> replicate_seeds;
  CvOptions cv;               // fold count and loss reused in every replicate
  MatrixFunctional phi;       // optional scalar summary of Σ̃(α_cv)
  double max_skip_fraction = 0.1;
  int threads = 0;            // replicate loop; nested CV runs single-threaded
};

struct BootstrapReport {
  Eigen::MatrixXd se;              // entrywise SD of Σ̃(α_cv) over replicates
  std::optional<double> phi_se;    // SD of phi, when phi is set
  std::vector<double> phi_values;  // per completed replicate
  std::vector<double> alphas;      // selected α per completed replicate
  std::vector<std::uint64_t> seeds;
  int completed = 0;
  int skipped = 0;
  std::vector<std::string> warnings;
};

/// Resamples every block with replacement at its own size.
BootstrapReport bootstrap_nonparametric(const IncompleteDataset& data, const AuxiliaryCovariates& aux,
                                        std::span<const RegressionSpec> specs, std::span<const double> alpha_grid,
                                        const BootstrapOptions& options);

/// Draws block k as n_k samples from N(0, Σ̂(α)_{V_k V_k}).
BootstrapReport bootstrap_parametric(const AuxCovResult& result, const ObservationPattern& pattern,
                                     const AuxiliaryCovariates& aux, std::span<const RegressionSpec> specs,
                                     std::span<const double> alpha_grid, const BootstrapOptions& options);

}  // namespace auxcov
