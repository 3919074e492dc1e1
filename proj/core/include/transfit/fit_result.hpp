#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "transfit/em.hpp"
#include "transfit/link.hpp"
#include "transfit/spline.hpp"

namespace transfit {

struct FitOptions {
  double lambda_init = 1.0;
  /// Outer stopping rule on ||theta(lambda_new) - theta(lambda)||.
  double outer_tol = 1e-6;
  int max_outer = 50;
  EmOptions em;
  /// Secant extrapolation of the smoothing-parameter fixed point; false gives
  /// the plain Fellner-Schall iteration.
  bool accelerate = true;
  /// Overrides the ceil(n^{1/3}) interior-knot rule.
  std::optional<std::size_t> interior_knots;
};

struct FitDiagnostics {
  std::vector<double> lambda_path;
  /// Numerator of the smoothing-parameter update at each outer step.
  std::vector<double> fs_numerators;
  double outer_delta = std::numeric_limits<double>::quiet_NaN();
  bool lambda_clamped = false;
  bool penalty_degenerate = false;
  bool info_singular = false;
  /// EM iterations where the penalized likelihood dropped by more than 1e-8.
  int ascent_violations = 0;
  std::vector<std::string> messages;
};

struct FitResult {
  ParamState theta;
  double lambda = 0.0;
  SplineBasis basis;
  LinkSpec link;
  Eigen::MatrixXd info_matrix;
  /// Empty when the information matrix is singular.
  Eigen::VectorXd std_errors;
  double penloglik = 0.0;
  int em_iterations = 0;
  int outer_iterations = 0;
  bool converged = false;
  std::vector<std::string> covariate_names;
  FitDiagnostics diagnostics;

  double phi(double t) const { return basis.value(theta.gamma, t); }
};

}  // namespace transfit
