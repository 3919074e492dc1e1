#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace transfit {

/// Non-zero window of a cubic B-spline basis at one point: entries
/// `first .. first+3` of the full basis vector.
struct BasisSpan {
  std::size_t first = 0;
  std::array<double, 4> values{};
};

/// Cubic B-spline basis on an open (clamped) knot vector.
///
/// Evaluation outside [boundary_low, boundary_high] clamps to the nearest
/// boundary, so a spline extrapolates as a constant.
class SplineBasis {
 public:
  static constexpr int kDegree = 3;

  SplineBasis(std::vector<double> interior_knots, double boundary_low, double boundary_high);

  int degree() const noexcept { return kDegree; }
  /// q_n = #interior + degree + 1.
  std::size_t size() const noexcept { return interior_.size() + kDegree + 1; }
  const std::vector<double>& interior_knots() const noexcept { return interior_; }
  double boundary_low() const noexcept { return low_; }
  double boundary_high() const noexcept { return high_; }
  /// Full knot vector with boundary knots repeated degree+1 times.
  const std::vector<double>& knot_vector() const noexcept { return knots_; }

  BasisSpan eval_span(double t) const;
  Eigen::VectorXd eval(double t) const;
  double value(const Eigen::VectorXd& gamma, double t) const;

  /// Greville abscissae; coefficients equal to these reproduce phi(t) = t.
  Eigen::VectorXd greville() const;

 private:
  std::vector<double> interior_;
  double low_;
  double high_;
  std::vector<double> knots_;
};

/// Cubic basis with ceil(n^{1/3}) interior knots at equally spaced type-7
/// quantiles of `times`; boundary knots at min/max of `times`.
SplineBasis make_knots(std::span<const double> times, std::size_t n);

/// As make_knots, with an explicit interior knot count.
SplineBasis make_knots_with_count(std::span<const double> times, std::size_t interior_count);

/// ceil(n^{1/3}), exact on perfect cubes.
std::size_t default_knot_count(std::size_t n);

Eigen::VectorXd basis_eval(const SplineBasis& basis, double t);
double spline_eval(const SplineBasis& basis, const Eigen::VectorXd& gamma, double t);

/// Order-2 difference operator D ((q-2) x q) and its Gram matrix D'D.
struct PenaltyMatrix {
  Eigen::MatrixXd d_matrix;
  Eigen::MatrixXd gram;
};

PenaltyMatrix penalty_matrix(std::size_t q);

}  // namespace transfit
