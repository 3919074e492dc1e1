#include "transfit/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace transfit {

Eigen::MatrixXd ConstrainedProblem::constraint_matrix() const {
  const auto p = start.size();
  const auto m = static_cast<Eigen::Index>(constraint_count());
  const auto o = static_cast<Eigen::Index>(monotone_offset);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, p);
  for (Eigen::Index k = 0; k < m; ++k) {
    a(k, o + k) = -1.0;
    a(k, o + k + 1) = 1.0;
  }
  return a;
}

Eigen::VectorXd ConstrainedProblem::slacks(const Eigen::VectorXd& theta) const {
  const auto m = static_cast<Eigen::Index>(constraint_count());
  const auto o = static_cast<Eigen::Index>(monotone_offset);
  return theta.segment(o + 1, m) - theta.segment(o, m);
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kBoundaryFraction = 0.99;
constexpr int kStallLimit = 20;

class BarrierSolver {
 public:
  BarrierSolver(const ConstrainedProblem& p, const BarrierOptions& o)
      : prob_(p), opt_(o), m_(static_cast<Eigen::Index>(p.constraint_count())),
        off_(static_cast<Eigen::Index>(p.monotone_offset)) {}

  // Value of f + mu*sum(log s); gradient into g. Non-finite when infeasible.
  double augmented(const Eigen::VectorXd& theta, double mu, Eigen::VectorXd& g, double& f) {
    ++evaluations;
    f = prob_.objective(theta, g);
    if (!std::isfinite(f)) return -std::numeric_limits<double>::infinity();
    double value = f;
    for (Eigen::Index k = 0; k < m_; ++k) {
      const double s = theta(off_ + k + 1) - theta(off_ + k);
      if (!(s > 0.0)) return -std::numeric_limits<double>::infinity();
      value += mu * std::log(s);
      g(off_ + k + 1) += mu / s;
      g(off_ + k) -= mu / s;
    }
    return value;
  }

  // Largest step along dir keeping every slack strictly positive.
  double max_step(const Eigen::VectorXd& theta, const Eigen::VectorXd& dir) const {
    double step = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m_; ++k) {
      const double ds = dir(off_ + k + 1) - dir(off_ + k);
      if (ds < 0.0) {
        const double s = theta(off_ + k + 1) - theta(off_ + k);
        step = std::min(step, -s / ds);
      }
    }
    return step;
  }

  // One barrier stage; theta and h (inverse Hessian of -F) updated in place.
  void stage(Eigen::VectorXd& theta, Eigen::MatrixXd& h, bool& h_scaled, double mu, double& f) {
    const auto n = theta.size();
    Eigen::VectorXd g(n), g_new(n), trial(n);
    double value = augmented(theta, mu, g, f);
    if (!std::isfinite(value)) {
      throw OptimizationError(NumericalError::Kind::NonFiniteLikelihood,
                              "barrier_maximize: objective is not finite at the current iterate",
                              theta);
    }
    int stalled = 0;
    for (int it = 0;; ++it) {
      const double round_off = 1e-12 * std::max(1.0, std::fabs(value));
      if (g.lpNorm<Eigen::Infinity>() <
          std::max(opt_.tol * std::max(1.0, std::fabs(f)), opt_.gradient_floor)) {
        return;
      }
      if (it >= opt_.max_inner_iterations) {
        throw OptimizationError(NumericalError::Kind::MaxIterations,
                                "barrier_maximize: inner quasi-Newton iteration limit reached",
                                theta);
      }
      ++iterations;

      bool steepest = false;
      Eigen::VectorXd dir = h * g;  // ascent direction for F
      if (!(dir.dot(g) > 0.0)) {
        h.setIdentity();
        h_scaled = false;
        dir = g;
        steepest = true;
      }

      double f_new = 0.0;
      double value_new = 0.0;
      double alpha = 0.0;
      for (int attempt = 0; attempt < 2; ++attempt) {
        alpha = std::min(1.0, kBoundaryFraction * max_step(theta, dir));
        const double slope = g.dot(dir);
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
          trial = theta + alpha * dir;
          value_new = augmented(trial, mu, g_new, f_new);
          if (std::isfinite(value_new) && value_new >= value + kArmijo * alpha * slope) {
            accepted = true;
            break;
          }
          // Close to the optimum the gain drops below round-off in F; fall back to the
          // approximate Armijo test on the directional derivative (Hager-Zhang).
          if (std::isfinite(value_new) && value_new >= value - round_off &&
              g_new.dot(dir) >= -(1.0 - 2.0 * kArmijo) * slope && trial != theta) {
            accepted = true;
            break;
          }
          alpha *= 0.5;
        }
        if (accepted && trial != theta) break;
        if (steepest) {
          stationary_or_throw(theta, g, f);
          return;
        }
        h.setIdentity();
        h_scaled = false;
        dir = g;
        steepest = true;
      }

      // Steps that only move F within round-off: gradient noise exceeds tol.
      stalled = value_new > value + round_off ? 0 : stalled + 1;
      if (stalled >= kStallLimit) {
        stationary_or_throw(theta, g, f);
        return;
      }

      const Eigen::VectorXd s = trial - theta;
      const Eigen::VectorXd y = g - g_new;  // gradient change of -F
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        if (!h_scaled) {
          h *= sy / y.squaredNorm();
          h_scaled = true;
        }
        const double rho = 1.0 / sy;
        const Eigen::VectorXd hy = h * y;
        const double yhy = y.dot(hy);
        h += (rho * rho * yhy + rho) * (s * s.transpose()) -
             rho * (hy * s.transpose() + s * hy.transpose());
      }
      theta = trial;
      g = g_new;
      value = value_new;
      f = f_new;
    }
  }

  int iterations = 0;
  int evaluations = 0;

 private:
  // Numerically stationary when the gradient is already small.
  void stationary_or_throw(const Eigen::VectorXd& theta, const Eigen::VectorXd& g, double f) const {
    const double limit = std::max(std::sqrt(opt_.tol) * std::max(1.0, std::fabs(f)),
                                  10.0 * opt_.gradient_floor);
    if (g.lpNorm<Eigen::Infinity>() < limit) return;
    throw OptimizationError(NumericalError::Kind::LineSearchFailure,
                            "barrier_maximize: objective cannot be improved along the "
                            "steepest-ascent direction",
                            theta);
  }

  const ConstrainedProblem& prob_;
  const BarrierOptions& opt_;
  Eigen::Index m_;
  Eigen::Index off_;
};

}  // namespace

BarrierResult barrier_maximize(const ConstrainedProblem& problem, const BarrierOptions& options) {
  if (!problem.objective) throw DomainError("barrier_maximize: no objective");
  if (!(options.tol > 0.0)) throw DomainError("barrier_maximize: tol must be positive");
  const auto n = problem.start.size();
  if (problem.monotone_offset + problem.monotone_size > static_cast<std::size_t>(n)) {
    throw DomainError("barrier_maximize: monotone block exceeds parameter vector");
  }

  Eigen::VectorXd theta = problem.start;
  const auto o = static_cast<Eigen::Index>(problem.monotone_offset);
  const auto q = static_cast<Eigen::Index>(problem.monotone_size);
  if (q > 1) {
    const double scale = std::max(1.0, theta.segment(o, q).cwiseAbs().maxCoeff());
    const double floor = 1e-6 * scale;
    for (Eigen::Index k = 1; k < q; ++k) {
      if (theta(o + k) - theta(o + k - 1) < -1e-10 * scale) {
        throw DomainError("barrier_maximize: start violates the monotonicity constraints");
      }
    }
    for (Eigen::Index k = 1; k < q; ++k) {
      theta(o + k) = std::max(theta(o + k), theta(o + k - 1) + floor);
    }
  }

  BarrierSolver solver(problem, options);
  Eigen::MatrixXd h = options.inverse_hessian && options.inverse_hessian->rows() == n
                          ? *options.inverse_hessian
                          : Eigen::MatrixXd::Identity(n, n);
  bool h_scaled = options.inverse_hessian.has_value();

  BarrierResult result;
  double f = 0.0;
  for (double mu = options.mu_initial; mu >= options.mu_final; mu *= options.mu_factor) {
    solver.stage(theta, h, h_scaled, problem.constraint_count() > 0 ? mu : 0.0, f);
    result.stage_objectives.push_back(f);
    if (problem.constraint_count() == 0) break;
  }

  Eigen::VectorXd g(n);
  const double f_start = problem.objective(problem.start, g);
  if (std::isfinite(f_start) && f_start > f) {
    theta = problem.start;
    f = f_start;
  }
  result.theta = std::move(theta);
  result.objective = f;
  result.iterations = solver.iterations;
  result.evaluations = solver.evaluations;
  result.inverse_hessian = std::move(h);
  return result;
}

}  // namespace transfit
