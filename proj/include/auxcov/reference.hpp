#pragma once

// Straightforward serial versions of the parallel moment kernels. They loop
// over individual samples and quadruples exactly as the estimators are
// defined and exist to check and benchmark the production code.

#include "auxcov/corestats.hpp"
#include "auxcov/dataset.hpp"

#include <Eigen/Dense>

namespace auxcov::reference {

/// Σ̂_ij as a per-pair sum over N_ij; NaN outside the estimation pairs.
Eigen::MatrixXd observed_covariance(const IncompleteDataset& data, const MeanMode& mean = {});

/// Ĥ over Ū from sample-level loops.
Eigen::MatrixXd empirical_h(const IncompleteDataset& data);

/// H̃ over Ū; `sigma` must be defined on every entry the products touch.
Eigen::MatrixXd gaussian_h(const ObservationPattern& pattern, const Eigen::MatrixXd& sigma);

/// F J H Jᵀ F with dense J.
Eigen::MatrixXd assemble_psi(const PairSets& pairs, const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& h);

}  // namespace auxcov::reference
