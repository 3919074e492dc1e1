#include "transfit/nested.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "transfit/error.hpp"
#include "transfit/inference.hpp"

namespace transfit {

namespace {

constexpr double kEigenCutoff = 1e-9;

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double cut = kEigenCutoff * ev.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (std::fabs(ev(k)) > cut) inv(k) = 1.0 / ev(k);
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

int count_ascent_violations(const std::vector<double>& trace) {
  int v = 0;
  for (std::size_t k = 1; k < trace.size(); ++k) {
    if (trace[k] < trace[k - 1] - 1e-8) ++v;
  }
  return v;
}

// Root finding on s(x) = log(lambda_fs) - x with x = log(lambda); s(x) is the
// plain Fellner-Schall step, so the fixed point is unchanged. Secant moves when
// the slope is negative; otherwise doubles the previous move while the steps
// keep their sign (lambda drifting to a bound). Moves are capped.
class SecantStep {
 public:
  double propose(double lambda, double lambda_fs) {
    const double x = std::log(lambda);
    const double step = std::log(lambda_fs) - x;
    double move = step;
    if (has_prev_ && x != prev_x_) {
      const double slope = (step - prev_step_) / (x - prev_x_);
      if (slope < 0.0) {
        move = -step / slope;
      } else if (step * prev_step_ > 0.0) {
        move = std::copysign(std::max(std::fabs(step), 2.0 * std::fabs(prev_move_)), step);
      }
    }
    if (std::fabs(step) <= kMaxMove) move = std::clamp(move, -kMaxMove, kMaxMove);
    else move = step;
    has_prev_ = true;
    prev_x_ = x;
    prev_step_ = step;
    prev_move_ = move;
    return std::clamp(std::exp(x + move), kLambdaMin, kLambdaMax);
  }

 private:
  static constexpr double kMaxMove = 3.0;
  bool has_prev_ = false;
  double prev_x_ = 0.0;
  double prev_step_ = 0.0;
  double prev_move_ = 0.0;
};

}  // namespace

LambdaUpdate update_lambda(const SplineModel& model, const ParamState& theta, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw DomainError("update_lambda: lambda must be positive and finite");
  }
  const auto q = static_cast<Eigen::Index>(model.q());
  const Eigen::MatrixXd& gram = model.penalty().gram;

  LambdaUpdate out;
  out.lambda = lambda;
  out.quadratic = (model.penalty().d_matrix * theta.gamma).squaredNorm();

  const Eigen::MatrixXd j_inv = pseudo_inverse(neg_hessian(model, theta, lambda).matrix);
  const double rho = lambda * lambda;
  const double tr_s = static_cast<double>(q - 2) / rho;
  // tr(J^- S) with S = blockdiag(0, D'D)
  const double tr_js = (j_inv.bottomRightCorner(q, q) * gram).trace();
  out.numerator = tr_s - tr_js;

  if (out.quadratic < 1e-14) {
    out.degenerate = true;
    return out;
  }
  const double rho_new = out.numerator / out.quadratic * rho;
  double lam = rho_new > 0.0 ? std::sqrt(rho_new) : 0.0;
  if (lam < kLambdaMin || lam > kLambdaMax || !std::isfinite(lam)) {
    out.clamped = true;
    lam = std::isfinite(lam) ? std::clamp(lam, kLambdaMin, kLambdaMax) : kLambdaMax;
  }
  out.lambda = lam;
  return out;
}

double update_lambda(const ParamState& theta, double lambda, const Dataset& ds,
                     const SplineBasis& basis, const LinkSpec& link) {
  return update_lambda(SplineModel(ds, basis, link), theta, lambda).lambda;
}

FitResult fit(const Dataset& ds, const LinkSpec& link, const FitOptions& options) {
  validate(link);
  if (!(options.lambda_init > 0.0)) throw DomainError("fit: lambda_init must be positive");
  if (options.max_outer < 1) throw DomainError("fit: max_outer must be at least 1");

  const std::vector<double> pool = ds.finite_endpoints();
  SplineBasis basis = options.interior_knots ? make_knots_with_count(pool, *options.interior_knots)
                                             : make_knots(pool, ds.size());
  const SplineModel model(ds, basis, link);

  FitDiagnostics diag;
  double lambda = std::clamp(options.lambda_init, kLambdaMin, kLambdaMax);
  diag.lambda_path.push_back(lambda);

  EmResult em = em_fixed_lambda(model, lambda, initial_state(model.d(), model.q(), link),
                                options.em);
  int em_iterations = em.iterations;
  diag.ascent_violations += count_ascent_violations(em.penloglik_trace);
  bool em_all_converged = em.converged;

  SecantStep secant;
  bool converged = false;
  int outer = 0;
  while (outer < options.max_outer) {
    ++outer;
    const LambdaUpdate upd = update_lambda(model, em.theta, lambda);
    diag.fs_numerators.push_back(upd.numerator);
    diag.lambda_clamped = diag.lambda_clamped || upd.clamped;
    diag.penalty_degenerate = diag.penalty_degenerate || upd.degenerate;

    double lambda_new = upd.lambda;
    if (options.accelerate && !upd.degenerate) {
      lambda_new = secant.propose(lambda, upd.lambda);
    }
    EmResult next = em_fixed_lambda(model, lambda_new, em.theta, options.em);
    em_iterations += next.iterations;
    diag.ascent_violations += count_ascent_violations(next.penloglik_trace);
    em_all_converged = em_all_converged && next.converged;
    diag.outer_delta = (next.theta.packed() - em.theta.packed()).norm();
    lambda = lambda_new;
    diag.lambda_path.push_back(lambda);
    em = std::move(next);
    if (diag.outer_delta < options.outer_tol) {
      converged = true;
      break;
    }
  }
  if (!em_all_converged) diag.messages.push_back("an inner EM run reached its iteration limit");
  if (diag.lambda_clamped) diag.messages.push_back("smoothing parameter clamped to its bounds");
  if (diag.penalty_degenerate) {
    diag.messages.push_back("fitted spline coefficients are affine; smoothing parameter held");
  }

  FitResult res{em.theta,
                lambda,
                basis,
                link,
                {},
                {},
                observed_penloglik(model, em.theta, lambda),
                em_iterations,
                outer,
                false,
                ds.covariate_names(),
                std::move(diag)};

  if (!converged) {
    res.diagnostics.messages.push_back("outer smoothing-parameter loop did not converge");
    throw OuterNonConvergence("fit: outer loop did not converge within " +
                                  std::to_string(options.max_outer) + " iterations",
                              std::move(res));
  }

  const InfoEstimate info = estimate_info(model, res.theta);
  res.info_matrix = info.info;
  res.std_errors = info.std_errors;
  res.diagnostics.info_singular = info.singular;
  res.converged = !info.singular;
  if (info.singular) {
    res.diagnostics.messages.push_back(
        "information matrix is singular (collinear or constant covariates?)");
  }
  return res;
}

}  // namespace transfit
