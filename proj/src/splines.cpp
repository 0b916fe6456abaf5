#include "auxcov/splines.hpp"

#include "auxcov/errors.hpp"

#include <algorithm>
#include <cmath>

namespace auxcov {

CubicBSplineBasis::CubicBSplineBasis(double lower, double upper, std::vector<double> interior)
    : lower_(lower), upper_(upper), interior_(std::move(interior)) {
  if (!(upper_ > lower_)) throw Error(ErrorCode::kRankDeficient, "spline boundary knots coincide");
  for (size_t k = 0; k < interior_.size(); ++k) {
    const double prev = k == 0 ? lower_ : interior_[k - 1];
    if (!(interior_[k] > prev) || !(interior_[k] < upper_))
      throw Error(ErrorCode::kRankDeficient, "interior knots must be strictly increasing inside the boundary");
  }
  knots_.assign(4, lower_);
  knots_.insert(knots_.end(), interior_.begin(), interior_.end());
  knots_.insert(knots_.end(), 4, upper_);
}

int CubicBSplineBasis::find_span(double x) const {
  // Span index s with knots_[s] <= x < knots_[s+1], s in [3, dimension()-1].
  const int last = dimension() - 1;
  if (x >= upper_) return last;
  if (x <= lower_) return 3;
  const auto it = std::upper_bound(knots_.begin() + 3, knots_.begin() + last + 1, x);
  return static_cast<int>(it - knots_.begin()) - 1;
}

Eigen::VectorXd CubicBSplineBasis::evaluate(double x) const {
  x = std::clamp(x, lower_, upper_);
  const int span = find_span(x);
  // Cox-de Boor triangle for the four nonzero functions on the span.
  double n[4] = {1.0, 0.0, 0.0, 0.0};
  double left[4], right[4];
  for (int d = 1; d <= 3; ++d) {
    left[d] = x - knots_[span + 1 - d];
    right[d] = knots_[span + d] - x;
    double saved = 0.0;
    for (int r = 0; r < d; ++r) {
      const double denom = right[r + 1] + left[d - r];
      const double temp = denom == 0.0 ? 0.0 : n[r] / denom;
      n[r] = saved + right[r + 1] * temp;
      saved = left[d - r] * temp;
    }
    n[d] = saved;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dimension());
  for (int r = 0; r < 4; ++r) out(span - 3 + r) = n[r];
  return out;
}

Eigen::MatrixXd CubicBSplineBasis::design(std::span<const double> xs) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(xs.size()), dimension());
  for (size_t r = 0; r < xs.size(); ++r) out.row(r) = evaluate(xs[r]).transpose();
  return out;
}

double CubicBSplineBasis::slope_at_lower(const Eigen::VectorXd& coef) const {
  return 3.0 * (coef(1) - coef(0)) / (knots_[4] - knots_[1]);
}

double CubicBSplineBasis::slope_at_upper(const Eigen::VectorXd& coef) const {
  const int n = dimension();
  return 3.0 * (coef(n - 1) - coef(n - 2)) / (knots_[n + 2] - knots_[n - 1]);
}

double CubicBSplineBasis::value(const Eigen::VectorXd& coef, double x) const {
  if (x < lower_) return evaluate(lower_).dot(coef) + slope_at_lower(coef) * (x - lower_);
  if (x > upper_) return evaluate(upper_).dot(coef) + slope_at_upper(coef) * (x - upper_);
  return evaluate(x).dot(coef);
}

double sorted_quantile(std::span<const double> sorted, double prob) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

KnotPlacement place_quantile_knots(std::span<const double> x, int tau) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const double lower = sorted.front();
  const double upper = sorted.back();

  KnotPlacement out;
  double prev = lower;
  for (int k = 1; k <= tau; ++k) {
    double knot = sorted_quantile(sorted, static_cast<double>(k) / (tau + 1));
    if (!(knot > prev)) {
      // Midpoint of the first consecutive distinct values lying above prev.
      auto it = std::upper_bound(distinct.begin(), distinct.end(), prev);
      knot = std::nan("");
      if (it != distinct.end()) {
        const double above = *it;
        const double below = it == distinct.begin() ? prev : std::max(prev, *(it - 1));
        knot = 0.5 * (below + above);
        out.warnings.push_back("knot " + std::to_string(k) + " coincided with its neighbour and was moved");
      }
    }
    if (!(knot > prev) || !(knot < upper)) {
      out.warnings.push_back("knot " + std::to_string(k) + " collided and was dropped");
      continue;
    }
    out.interior.push_back(knot);
    prev = knot;
  }
  if (static_cast<int>(out.interior.size()) < tau)
    out.warnings.push_back("knot count reduced from " + std::to_string(tau) + " to " +
                           std::to_string(out.interior.size()));
  return out;
}

}  // namespace auxcov
