#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "transfit/error.hpp"

namespace transfit {

/// Smooth objective to maximize. Writes the gradient into `grad` (already
/// sized) and returns the value; a non-finite return marks the point as
/// outside the objective's domain.
using Objective = std::function<double(const Eigen::VectorXd& theta, Eigen::VectorXd& grad)>;

/// Maximize `objective` subject to theta[offset] <= theta[offset+1] <= ...
/// <= theta[offset+size-1]. The remaining coordinates are free.
struct ConstrainedProblem {
  Objective objective;
  std::size_t monotone_offset = 0;
  std::size_t monotone_size = 0;
  Eigen::VectorXd start;

  std::size_t constraint_count() const noexcept {
    return monotone_size > 0 ? monotone_size - 1 : 0;
  }
  /// Rows a_k with a_k' theta = theta[o+k+1] - theta[o+k] >= 0.
  Eigen::MatrixXd constraint_matrix() const;
  Eigen::VectorXd slacks(const Eigen::VectorXd& theta) const;
};

struct BarrierOptions {
  double tol = 1e-7;
  double mu_initial = 1e-2;
  double mu_factor = 0.2;
  double mu_final = 1e-8;
  int max_inner_iterations = 1000;
  /// Absolute gradient accuracy of the objective; stopping tests never demand less.
  double gradient_floor = 0.0;
  /// Inverse-Hessian guess for the first quasi-Newton pass (warm start).
  std::optional<Eigen::MatrixXd> inverse_hessian;
};

struct BarrierResult {
  Eigen::VectorXd theta;
  double objective = 0.0;
  /// Objective (without barrier) at the end of each barrier stage.
  std::vector<double> stage_objectives;
  int iterations = 0;
  int evaluations = 0;
  Eigen::MatrixXd inverse_hessian;
};

/// Carries the best feasible iterate reached before the failure.
class OptimizationError : public NumericalError {
 public:
  OptimizationError(Kind kind, const std::string& what, Eigen::VectorXd best)
      : NumericalError(kind, what), best_(std::move(best)) {}
  const Eigen::VectorXd& best() const noexcept { return best_; }

 private:
  Eigen::VectorXd best_;
};

/// Log-barrier method: maximizes f + mu * sum log(slack) for a geometric
/// sequence of mu, each stage solved by BFGS with backtracking.
BarrierResult barrier_maximize(const ConstrainedProblem& problem,
                               const BarrierOptions& options = {});

}  // namespace transfit
