#pragma once

// Small seeded data sets shared by the unit and acceptance tests.

#include "auxcov/dataset.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace fixture {

/// Gaussian blocks over the given subsets, drawn from N(0, sigma).
inline auxcov::IncompleteDataset gaussian_blocks(const Eigen::MatrixXd& sigma, const std::vector<auxcov::VarSet>& subsets,
                                                 const std::vector<int>& counts, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Eigen::MatrixXd> blocks;
  for (size_t k = 0; k < subsets.size(); ++k) {
    const Eigen::MatrixXd full = oracle::gaussian_rows(sigma, counts[k], rng);
    Eigen::MatrixXd b(counts[k], static_cast<Eigen::Index>(subsets[k].size()));
    for (size_t c = 0; c < subsets[k].size(); ++c) b.col(static_cast<Eigen::Index>(c)) = full.col(subsets[k][c]);
    blocks.push_back(b);
  }
  return auxcov::IncompleteDataset::from_blocks(static_cast<int>(sigma.rows()), subsets, blocks);
}

/// Symmetric scalar covariates from a p×p matrix (diagonal ignored).
inline auxcov::AuxiliaryCovariates scalar_aux(const Eigen::MatrixXd& w) {
  const int p = static_cast<int>(w.rows());
  auxcov::AuxiliaryCovariates aux(p, 1);
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) aux.set(i, j, w(i, j));
  return aux;
}

/// Covariates |i - j| / p, a stand-in for spatial distance.
inline Eigen::MatrixXd distance_covariate(int p) {
  Eigen::MatrixXd w(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) w(i, j) = std::abs(i - j) / static_cast<double>(p);
  return w;
}

/// Correlation decaying with distance, exp(-3|i-j|/p).
inline Eigen::MatrixXd decaying_correlation(int p) {
  Eigen::MatrixXd c(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) c(i, j) = std::exp(-3.0 * std::abs(i - j) / p);
  return c;
}

}  // namespace fixture
