#include "auxcov/reference.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>

namespace auxcov::reference {

namespace {

Eigen::VectorXd marginal_means(const IncompleteDataset& data) {
  const auto& pat = data.pattern();
  Eigen::VectorXd m(pat.p());
  for (int i = 0; i < pat.p(); ++i) {
    double s = 0.0;
    const auto rows = pat.joint_samples(i, i);
    for (int r : rows) s += data.values()(r, i);
    m(i) = s / static_cast<double>(rows.size());
  }
  return m;
}

std::vector<int> intersect(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

Eigen::MatrixXd observed_covariance(const IncompleteDataset& data, const MeanMode& mean) {
  const auto& pat = data.pattern();
  const int p = pat.p();
  const Eigen::VectorXd m = mean.known ? *mean.known : marginal_means(data);
  const PairSets pairs = estimation_pairs(pat);
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) {
      if (!pairs.contains(i, j)) continue;
      const auto rows = pat.joint_samples(i, j);
      double s = 0.0;
      for (int r : rows) s += (data.values()(r, i) - m(i)) * (data.values()(r, j) - m(j));
      out(i, j) = s / static_cast<double>(rows.size());
    }
  return out;
}

Eigen::MatrixXd empirical_h(const IncompleteDataset& data) {
  const auto& pat = data.pattern();
  const PairSets pairs = estimation_pairs(pat);
  const auto& ubar = pairs.upper_diag;
  const Eigen::VectorXd m = marginal_means(data);
  const auto& x = data.values();
  const auto n = static_cast<double>(pat.n());

  std::vector<std::vector<int>> rows(ubar.size());
  std::vector<double> mij(ubar.size());
  for (size_t s = 0; s < ubar.size(); ++s) {
    const auto [i, j] = ubar[s];
    rows[s] = pat.joint_samples(i, j);
    double acc = 0.0;
    for (int r : rows[s]) acc += (x(r, i) - m(i)) * (x(r, j) - m(j));
    mij[s] = acc / static_cast<double>(rows[s].size());
  }

  const auto mbar = static_cast<Eigen::Index>(ubar.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(mbar, mbar);
  for (Eigen::Index s = 0; s < mbar; ++s)
    for (Eigen::Index u = 0; u < mbar; ++u) {
      const auto common = intersect(rows[s], rows[u]);
      if (common.empty()) continue;
      const auto [i, j] = ubar[s];
      const auto [k, l] = ubar[u];
      double acc = 0.0;
      for (int r : common) acc += (x(r, i) - m(i)) * (x(r, j) - m(j)) * (x(r, k) - m(k)) * (x(r, l) - m(l));
      const double mijkl = acc / static_cast<double>(common.size());
      const double c = n * static_cast<double>(common.size()) /
                       (static_cast<double>(rows[s].size()) * static_cast<double>(rows[u].size()));
      h(s, u) = c * (mijkl - mij[s] * mij[u]);
    }
  return h;
}

Eigen::MatrixXd gaussian_h(const ObservationPattern& pattern, const Eigen::MatrixXd& sigma) {
  const PairSets pairs = estimation_pairs(pattern);
  const auto& ubar = pairs.upper_diag;
  const auto mbar = static_cast<Eigen::Index>(ubar.size());
  const auto n = static_cast<double>(pattern.n());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(mbar, mbar);
  for (Eigen::Index s = 0; s < mbar; ++s)
    for (Eigen::Index u = 0; u < mbar; ++u) {
      const auto [i, j] = ubar[s];
      const auto [k, l] = ubar[u];
      const int q = pattern.quad_count(i, j, k, l);
      if (q == 0) continue;
      const double c = n * q / (static_cast<double>(pattern.pair_count(i, j)) * pattern.pair_count(k, l));
      h(s, u) = c * (sigma(i, k) * sigma(j, l) + sigma(i, l) * sigma(j, k));
    }
  return h;
}

Eigen::MatrixXd assemble_psi(const PairSets& pairs, const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& h) {
  const auto& u = pairs.upper;
  const auto& ubar = pairs.upper_diag;
  const auto m = static_cast<Eigen::Index>(u.size());
  const auto mbar = static_cast<Eigen::Index>(ubar.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, mbar);
  Eigen::VectorXd f(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto [i, j] = u[r];
    for (Eigen::Index c = 0; c < mbar; ++c) {
      const auto [k, l] = ubar[c];
      // ∂C_ij/∂Σ_kl for C_ij = Σ_ij / sqrt(Σ_ii Σ_jj).
      if (k == i && l == j) jac(r, c) = 1.0 / std::sqrt(sigma(i, i) * sigma(j, j));
      if (k == i && l == i) jac(r, c) = -0.5 * sigma(i, j) / (std::pow(sigma(i, i), 1.5) * std::sqrt(sigma(j, j)));
      if (k == j && l == j) jac(r, c) = -0.5 * sigma(i, j) / (std::pow(sigma(j, j), 1.5) * std::sqrt(sigma(i, i)));
    }
    const double cij = sigma(i, j) / std::sqrt(sigma(i, i) * sigma(j, j));
    f(r) = 1.0 / (1.0 - cij * cij);
  }
  return f.asDiagonal() * jac * h * jac.transpose() * f.asDiagonal();
}

}  // namespace auxcov::reference
