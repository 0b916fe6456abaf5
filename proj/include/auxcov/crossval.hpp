#pragma once

// N-fold cross-validation over α and a list of candidate baseline models.

#include "auxcov/pipeline.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace auxcov {

enum class CvTarget {
  kCorrelation,  // off-diagonal pairs of O
  kCovariance,   // all pairs of O, diagonal included
};

struct CvOptions {
  int folds = 10;
  std::uint64_t seed = 0;
  CvTarget target = CvTarget::kCorrelation;
  /// Per-pair loss; squared difference when empty.
  std::function<double(double estimate, double held_out)> pair_loss;
  /// Worker threads for the fold loop; 0 uses the OpenMP default.
  int threads = 0;
  AuxCovOptions auxcov;
};

struct CvPoint {
  double alpha = 0.0;
  int spec = 0;  // index into the candidate list
  double risk = 0.0;
};

struct CvReport {
  std::vector<double> alpha_grid;
  std::vector<std::string> spec_labels;
  std::vector<CvPoint> grid;                     // α-major, then candidate order
  std::vector<std::vector<double>> fold_losses;  // per grid point, NaN for skipped folds
  int selected = -1;
  int folds = 0;
  int used_folds = 0;
  std::vector<int> dropped_specs;
  std::vector<std::string> warnings;

  const CvPoint& best() const { return grid.at(static_cast<size_t>(selected)); }
};

std::vector<double> default_alpha_grid();
std::vector<RegressionSpec> spline_grid(int lo = 2, int hi = 10);

/// Per-block permutation then contiguous chunking; result[h][k] lists the
/// block-local rows of block k in fold h.
std::vector<std::vector<std::vector<int>>> make_folds(const ObservationPattern& pattern, int folds,
                                                     std::uint64_t seed);

/// The complement of fold h.
std::vector<std::vector<int>> training_rows(const std::vector<std::vector<std::vector<int>>>& folds, int h);

/// Ties go to the smallest α, then the earliest candidate.
CvReport cross_validate(const IncompleteDataset& data, const AuxiliaryCovariates& aux,
                        std::span<const RegressionSpec> specs, std::span<const double> alpha_grid,
                        const CvOptions& options = {});

struct CvSelection {
  CvReport report;
  AuxCovResult result;  // refitted on all data at the selected point
};

CvSelection select_and_fit(const IncompleteDataset& data, const AuxiliaryCovariates& aux,
                           std::span<const RegressionSpec> specs, std::span<const double> alpha_grid,
                           const CvOptions& options = {});

}  // namespace auxcov
