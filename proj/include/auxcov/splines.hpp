#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace auxcov {

/// Clamped cubic B-spline basis on [lower, upper] with the given interior
/// knots. Dimension is interior.size() + 4.
class CubicBSplineBasis {
 public:
  CubicBSplineBasis(double lower, double upper, std::vector<double> interior);

  int dimension() const noexcept { return static_cast<int>(interior_.size()) + 4; }
  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  const std::vector<double>& interior() const noexcept { return interior_; }
  const std::vector<double>& knot_vector() const noexcept { return knots_; }

  /// All basis values at x, clamped into [lower, upper].
  Eigen::VectorXd evaluate(double x) const;
  Eigen::MatrixXd design(std::span<const double> xs) const;

  /// S(x) = Σ c_j B_j(x), continued linearly outside [lower, upper] with the
  /// boundary slope.
  double value(const Eigen::VectorXd& coef, double x) const;
  double slope_at_lower(const Eigen::VectorXd& coef) const;
  double slope_at_upper(const Eigen::VectorXd& coef) const;

 private:
  int find_span(double x) const;

  double lower_;
  double upper_;
  std::vector<double> interior_;
  std::vector<double> knots_;
};

struct KnotPlacement {
  std::vector<double> interior;
  std::vector<std::string> warnings;
};

/// Empirical quantiles k/(τ+1), k = 1..τ (linear interpolation between order
/// statistics). Coincident knots move to the midpoint of the next pair of
/// distinct data values; knots that still collide are dropped with a warning.
KnotPlacement place_quantile_knots(std::span<const double> x, int tau);

/// Type-7 sample quantile of sorted data.
double sorted_quantile(std::span<const double> sorted, double prob);

}  // namespace auxcov
