#include "transfit/em.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "transfit/error.hpp"

namespace transfit {

Eigen::VectorXd ParamState::packed() const {
  Eigen::VectorXd theta(beta.size() + gamma.size());
  theta << beta, gamma;
  return theta;
}

ParamState ParamState::unpack(const Eigen::VectorXd& theta, std::size_t d) {
  const auto dd = static_cast<Eigen::Index>(d);
  return {theta.head(dd), theta.tail(theta.size() - dd)};
}

bool ParamState::is_monotone(double slack) const {
  for (Eigen::Index j = 1; j < gamma.size(); ++j) {
    if (gamma(j) < gamma(j - 1) - slack) return false;
  }
  return true;
}

double zero_truncated_mean(double x) {
  if (x < 1e-8) return 1.0 + 0.5 * x;
  return x / -std::expm1(-x);
}

SplineModel::SplineModel(const Dataset& ds, SplineBasis basis, LinkSpec link)
    : basis_(std::move(basis)), link_(link), penalty_(penalty_matrix(basis_.size())) {
  validate(link_);
  const std::size_t n = ds.size();
  z_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ds.dimension()));
  status_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = ds[i];
    z_.row(static_cast<Eigen::Index>(i)) = o.covariates.transpose();
    status_.push_back(o.status);
    left_.push_back(o.left);
    right_.push_back(o.right);
    at_left_.push_back(o.status == Censoring::Left ? BasisSpan{} : basis_.eval_span(o.left));
    at_right_.push_back(o.status == Censoring::Right ? BasisSpan{} : basis_.eval_span(o.right));
  }
}

double SplineModel::penalty_value(const Eigen::VectorXd& gamma, double lambda) const {
  return 0.5 * lambda * lambda * (penalty_.d_matrix * gamma).squaredNorm();
}

namespace {

double span_dot(const BasisSpan& s, const Eigen::VectorXd& gamma) {
  const auto f = static_cast<Eigen::Index>(s.first);
  return gamma(f) * s.values[0] + gamma(f + 1) * s.values[1] + gamma(f + 2) * s.values[2] +
         gamma(f + 3) * s.values[3];
}

void span_axpy(const BasisSpan& s, double w, Eigen::Ref<Eigen::VectorXd> out) {
  const auto f = static_cast<Eigen::Index>(s.first);
  for (Eigen::Index k = 0; k < 4; ++k) out(f + k) += w * s.values[static_cast<std::size_t>(k)];
}

struct Rates {
  CumRate at_left{0.0, 0.0};
  CumRate at_right{0.0, 0.0};
};

Rates subject_rates(const SplineModel& m, const ParamState& theta, std::size_t i) {
  const double zb = m.covariates().row(static_cast<Eigen::Index>(i)).dot(theta.beta);
  Rates r;
  if (m.status(i) != Censoring::Left) {
    r.at_left = cum_rate(m.link(), span_dot(m.span_left(i), theta.gamma) + zb);
  }
  if (m.status(i) != Censoring::Right) {
    r.at_right = cum_rate(m.link(), span_dot(m.span_right(i), theta.gamma) + zb);
  }
  return r;
}

// Scatter d/dzeta weights into a packed (beta, gamma) gradient.
void accumulate(const SplineModel& m, std::size_t i, double w_left, double w_right,
                Eigen::VectorXd& grad) {
  const auto d = static_cast<Eigen::Index>(m.d());
  const double w = w_left + w_right;
  if (w != 0.0) grad.head(d) += w * m.covariates().row(static_cast<Eigen::Index>(i)).transpose();
  auto g = grad.tail(static_cast<Eigen::Index>(m.q()));
  if (w_left != 0.0) span_axpy(m.span_left(i), w_left, g);
  if (w_right != 0.0) span_axpy(m.span_right(i), w_right, g);
}

void check_dims(const SplineModel& m, const ParamState& theta) {
  if (static_cast<std::size_t>(theta.beta.size()) != m.d() ||
      static_cast<std::size_t>(theta.gamma.size()) != m.q()) {
    throw DomainError("parameter dimensions do not match the model (d=" + std::to_string(m.d()) +
                      ", q=" + std::to_string(m.q()) + ")");
  }
}

// Q value and gradient; NaN when some Poisson mean is not positive.
// log H and its first two derivatives in eta, kept finite where H underflows.
struct LogRate {
  double log_value = 0.0;
  double dlog = 1.0;  // H'/H
  double value = 0.0;
  double deriv = 0.0;
  double curv = 0.0;        // H''
  double curv_ratio = 0.0;  // H''/H
  double log_curv = 0.0;    // (log H)''
};

LogRate log_rate(const LinkSpec& link, double eta) {
  const double a = link.alpha < kAlphaZeroCutoff ? 0.0 : link.alpha;
  const CumRate r = cum_rate(link, eta);
  LogRate out;
  out.value = r.value;
  out.deriv = r.deriv;
  out.curv = r.deriv * (1.0 - a * r.deriv);
  if (a == 0.0) {
    out.log_value = eta;
    out.dlog = 1.0;
  } else if (eta > 30.0) {
    out.log_value = std::log(r.value);
    out.dlog = r.deriv / r.value;
  } else {
    const double x = a * std::exp(eta);
    const double l1p = std::log1p(x);
    out.log_value = x > 0.0 ? eta + std::log(l1p / x) : eta;
    out.dlog = x > 0.0 ? x / ((1.0 + x) * l1p) : 1.0;
  }
  out.curv_ratio = out.dlog * (1.0 - a * r.deriv);
  out.log_curv = out.curv_ratio - out.dlog * out.dlog;
  return out;
}

struct LogRates {
  LogRate at_left;
  LogRate at_right;
};

LogRates subject_log_rates(const SplineModel& m, const ParamState& theta, std::size_t i) {
  const double zb = m.covariates().row(static_cast<Eigen::Index>(i)).dot(theta.beta);
  LogRates r;
  if (m.status(i) != Censoring::Left) {
    r.at_left = log_rate(m.link(), span_dot(m.span_left(i), theta.gamma) + zb);
  }
  if (m.status(i) != Censoring::Right) {
    r.at_right = log_rate(m.link(), span_dot(m.span_right(i), theta.gamma) + zb);
  }
  return r;
}

// For an interval row: rho = H(L)/H(R) and 1 - rho, from the logs.
struct IntervalRatio {
  double rho;
  double gap;
};

IntervalRatio interval_ratio(const LogRates& r) {
  const double diff = r.at_left.log_value - r.at_right.log_value;
  return {std::exp(diff), -std::expm1(diff)};
}

double q_eval(const SplineModel& m, const ParamState& theta, const LatentExpectations& ex,
              double lambda, Eigen::VectorXd& grad) {
  grad.setZero(static_cast<Eigen::Index>(m.dim()));
  double value = 0.0;
  for (std::size_t i = 0; i < m.n(); ++i) {
    const LogRates r = subject_log_rates(m, theta, i);
    const auto ii = static_cast<Eigen::Index>(i);
    switch (m.status(i)) {
      case Censoring::Left: {
        const double ey = ex.e_y(ii);
        value += ey * r.at_right.log_value - r.at_right.value;
        accumulate(m, i, 0.0, ey * r.at_right.dlog - r.at_right.deriv, grad);
        break;
      }
      case Censoring::Interval: {
        // e_w log(H(R) - H(L)) - H(R)
        if (!(r.at_right.log_value > r.at_left.log_value)) {
          return std::numeric_limits<double>::quiet_NaN();
        }
        const double ew = ex.e_w(ii);
        const IntervalRatio ir = interval_ratio(r);
        value += ew * (r.at_right.log_value + std::log(ir.gap)) - r.at_right.value;
        accumulate(m, i, -ew * r.at_left.dlog * ir.rho / ir.gap,
                   ew * r.at_right.dlog / ir.gap - r.at_right.deriv, grad);
        break;
      }
      case Censoring::Right: {
        value -= r.at_left.value;
        accumulate(m, i, -r.at_left.deriv, 0.0, grad);
        break;
      }
    }
  }
  // Differences first: gamma' D'D gamma loses accuracy when lambda is large.
  const Eigen::VectorXd dg = m.penalty().d_matrix * theta.gamma;
  value -= 0.5 * lambda * lambda * dg.squaredNorm();
  grad.tail(static_cast<Eigen::Index>(m.q())) -=
      lambda * lambda * (m.penalty().d_matrix.transpose() * dg);
  return value;
}

}  // namespace

SubjectTerm subject_loglik(Censoring status, const CumRate& at_left, const CumRate& at_right) {
  constexpr double eps = kProbabilityClamp;
  const double log_eps = std::log(eps);
  const double log_one_minus_eps = std::log1p(-eps);
  const Rates r{at_left, at_right};
  SubjectTerm t;
  switch (status) {
    case Censoring::Left: {
      const double f = -std::expm1(-r.at_right.value);
      if (!(f >= eps)) {
        t.value = log_eps;
      } else if (f > 1.0 - eps) {
        t.value = log_one_minus_eps;
      } else {
        t.value = std::log(f);
        t.d_right = r.at_right.deriv / std::expm1(r.at_right.value);
      }
      break;
    }
    case Censoring::Interval: {
      const double dh = r.at_right.value - r.at_left.value;
      const double tail = -std::expm1(-dh);  // 1 - exp(-dH)
      const double diff = std::exp(-r.at_left.value) * tail;
      if (!(diff >= eps)) {
        t.value = log_eps;
      } else if (diff > 1.0 - eps) {
        t.value = log_one_minus_eps;
      } else {
        t.value = -r.at_left.value + std::log(tail);
        t.d_left = -r.at_left.deriv / tail;
        t.d_right = r.at_right.deriv / std::expm1(dh);
      }
      break;
    }
    case Censoring::Right: {
      const double surv = std::exp(-r.at_left.value);
      if (!(surv >= eps)) {
        t.value = log_eps;
      } else if (surv > 1.0 - eps) {
        t.value = log_one_minus_eps;
      } else {
        t.value = -r.at_left.value;
        t.d_left = -r.at_left.deriv;
      }
      break;
    }
  }
  return t;
}

SubjectTerm subject_loglik(const SplineModel& m, const ParamState& theta, std::size_t i) {
  const Rates r = subject_rates(m, theta, i);
  return subject_loglik(m.status(i), r.at_left, r.at_right);
}

double observed_penloglik(const SplineModel& m, const ParamState& theta, double lambda,
                          Eigen::VectorXd* grad) {
  check_dims(m, theta);
  if (grad) grad->setZero(static_cast<Eigen::Index>(m.dim()));
  double value = 0.0;
  for (std::size_t i = 0; i < m.n(); ++i) {
    const SubjectTerm t = subject_loglik(m, theta, i);
    value += t.value;
    if (grad) accumulate(m, i, t.d_left, t.d_right, *grad);
  }
  const Eigen::VectorXd dg = m.penalty().d_matrix * theta.gamma;
  value -= 0.5 * lambda * lambda * dg.squaredNorm();
  if (grad) {
    grad->tail(static_cast<Eigen::Index>(m.q())) -=
        lambda * lambda * (m.penalty().d_matrix.transpose() * dg);
  }
  if (!std::isfinite(value)) {
    throw NumericalError(NumericalError::Kind::NonFiniteLikelihood,
                         "observed penalized log-likelihood is not finite");
  }
  return value;
}

double observed_penloglik(const ParamState& theta, double lambda, const Dataset& ds,
                          const SplineBasis& basis, const LinkSpec& link) {
  return observed_penloglik(SplineModel(ds, basis, link), theta, lambda);
}

LatentExpectations e_step(const SplineModel& m, const ParamState& theta) {
  check_dims(m, theta);
  const auto n = static_cast<Eigen::Index>(m.n());
  LatentExpectations ex{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n),
                        Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (std::size_t i = 0; i < m.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Rates r = subject_rates(m, theta, i);
    switch (m.status(i)) {
      case Censoring::Left:
        ex.e_y(ii) = zero_truncated_mean(r.at_right.value);
        ex.u1(ii) = m.right(i);
        break;
      case Censoring::Interval: {
        const double dh = r.at_right.value - r.at_left.value;
        if (dh < 0.0) {
          throw NumericalError(NumericalError::Kind::InfeasibleParameters,
                               "e_step: H(R) < H(L) for interval-censored subject " +
                                   std::to_string(i));
        }
        ex.e_w(ii) = zero_truncated_mean(dh);
        ex.u1(ii) = m.left(i);
        ex.u2(ii) = m.right(i);
        break;
      }
      case Censoring::Right:
        ex.u1(ii) = m.left(i);
        ex.u2(ii) = m.left(i);
        break;
    }
  }
  return ex;
}

LatentExpectations e_step(const ParamState& theta, const Dataset& ds, const SplineBasis& basis,
                          const LinkSpec& link) {
  return e_step(SplineModel(ds, basis, link), theta);
}

QValue q_objective(const SplineModel& m, const ParamState& theta, const LatentExpectations& ex,
                   double lambda) {
  check_dims(m, theta);
  QValue out;
  out.value = q_eval(m, theta, ex, lambda, out.grad);
  if (std::isnan(out.value)) {
    throw NumericalError(NumericalError::Kind::InfeasibleParameters,
                         "q_objective: non-positive Poisson mean at the given parameters");
  }
  return out;
}

QValue q_objective(const ParamState& theta, const LatentExpectations& ex, double lambda,
                   const Dataset& ds, const SplineBasis& basis, const LinkSpec& link) {
  return q_objective(SplineModel(ds, basis, link), theta, ex, lambda);
}

Eigen::MatrixXd q_neg_hessian(const SplineModel& m, const ParamState& theta,
                              const LatentExpectations& ex, double lambda) {
  check_dims(m, theta);
  const auto p = static_cast<Eigen::Index>(m.dim());
  const auto d = static_cast<Eigen::Index>(m.d());
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xl(p), xr(p);
  auto design = [&](std::size_t i, const BasisSpan& span, Eigen::VectorXd& x) {
    x.setZero();
    x.head(d) = m.covariates().row(static_cast<Eigen::Index>(i)).transpose();
    span_axpy(span, 1.0, x.tail(static_cast<Eigen::Index>(m.q())));
  };
  for (std::size_t i = 0; i < m.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const LogRates r = subject_log_rates(m, theta, i);
    switch (m.status(i)) {
      case Censoring::Left: {
        const double c = ex.e_y(ii) * r.at_right.log_curv - r.at_right.curv;
        design(i, m.span_right(i), xr);
        hess.noalias() -= c * xr * xr.transpose();
        break;
      }
      case Censoring::Interval: {
        const double ew = ex.e_w(ii);
        const IntervalRatio ir = interval_ratio(r);
        const LogRate& lo = r.at_left;
        const LogRate& hi = r.at_right;
        const double ul = lo.dlog * ir.rho / ir.gap;  // H'(L) / dH
        const double ur = hi.dlog / ir.gap;           // H'(R) / dH
        const double cll = -ew * lo.curv_ratio * ir.rho / ir.gap - ew * ul * ul;
        const double crr = ew * hi.curv_ratio / ir.gap - ew * ur * ur - hi.curv;
        const double clr = ew * ul * ur;
        design(i, m.span_left(i), xl);
        design(i, m.span_right(i), xr);
        hess.noalias() -= cll * xl * xl.transpose() + crr * xr * xr.transpose() +
                          clr * (xl * xr.transpose() + xr * xl.transpose());
        break;
      }
      case Censoring::Right: {
        design(i, m.span_left(i), xl);
        hess.noalias() += r.at_left.curv * xl * xl.transpose();
        break;
      }
    }
  }
  const auto q = static_cast<Eigen::Index>(m.q());
  hess.bottomRightCorner(q, q) += lambda * lambda * m.penalty().gram;
  return hess;
}

namespace {

// Inverse of the negative Q Hessian with eigenvalues floored, as a BFGS start.
Eigen::MatrixXd preconditioner(const SplineModel& m, const ParamState& theta,
                               const LatentExpectations& ex, double lambda) {
  const Eigen::MatrixXd hess = q_neg_hessian(m, theta, ex, lambda);
  if (!hess.allFinite()) return Eigen::MatrixXd::Identity(hess.rows(), hess.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double floor = std::max(1e-8 * ev.cwiseAbs().maxCoeff(), 1e-10);
  const Eigen::VectorXd inv = ev.unaryExpr([floor](double v) { return 1.0 / std::max(v, floor); });
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

MStepResult m_step(const SplineModel& m, const LatentExpectations& ex, const ParamState& start,
                   double lambda, const BarrierOptions& options) {
  check_dims(m, start);
  const std::size_t d = m.d();
  ConstrainedProblem prob;
  prob.objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    return q_eval(m, ParamState::unpack(theta, d), ex, lambda, grad);
  };
  prob.monotone_offset = d;
  prob.monotone_size = m.q();
  prob.start = start.packed();
  BarrierOptions opt = options;
  if (!opt.inverse_hessian) opt.inverse_hessian = preconditioner(m, start, ex, lambda);
  // Round-off in lambda^2 D'D gamma bounds the attainable gradient accuracy.
  const double gamma_scale = std::max(1.0, start.gamma.cwiseAbs().maxCoeff());
  opt.gradient_floor = std::max(opt.gradient_floor, 1e-13 * lambda * lambda * gamma_scale);
  MStepResult out;
  out.optimizer = barrier_maximize(prob, opt);
  out.theta = ParamState::unpack(out.optimizer.theta, d);
  return out;
}

ParamState m_step(const LatentExpectations& ex, const ParamState& start, double lambda,
                  const Dataset& ds, const SplineBasis& basis, const LinkSpec& link) {
  return m_step(SplineModel(ds, basis, link), ex, start, lambda).theta;
}

EmResult em_fixed_lambda(const SplineModel& m, double lambda, const ParamState& init,
                         const EmOptions& options) {
  if (!(lambda >= 0.0)) throw DomainError("em_fixed_lambda: lambda must be >= 0");
  if (!init.is_monotone()) throw DomainError("em_fixed_lambda: initial gamma is not monotone");
  const std::size_t d = m.d();
  EmResult res;
  res.theta = init;
  double current = observed_penloglik(m, init, lambda);
  res.penloglik_trace.push_back(current);

  auto em_map = [&](const ParamState& from) {
    ++res.iterations;
    return m_step(m, e_step(m, from), from, lambda, options.inner).theta;
  };
  // One plain EM map from the current iterate; true once it moves less than tol.
  auto plain_step = [&] {
    ParamState next = em_map(res.theta);
    res.last_step = (next.packed() - res.theta.packed()).norm();
    res.theta = std::move(next);
    current = observed_penloglik(m, res.theta, lambda);
    res.penloglik_trace.push_back(current);
    return res.last_step < options.tol;
  };

  while (res.iterations < options.max_iter) {
    const Eigen::VectorXd t0 = res.theta.packed();
    if (plain_step()) {
      res.converged = true;
      break;
    }
    if (!options.accelerate) continue;
    const Eigen::VectorXd t1 = res.theta.packed();
    if (res.iterations >= options.max_iter) break;
    if (plain_step()) {
      res.converged = true;
      break;
    }
    if (res.iterations >= options.max_iter) break;
    const Eigen::VectorXd r = t1 - t0;
    const Eigen::VectorXd v = res.theta.packed() - t1 - r;
    if (!(v.norm() > 0.0)) continue;
    // SQUAREM step length, backtracked toward -1 (which reproduces the last iterate)
    double alpha = std::min(-1.0, -r.norm() / v.norm());
    for (int k = 0; k < 8 && alpha < -1.0; ++k, alpha = 0.5 * (alpha - 1.0)) {
      const ParamState guess = ParamState::unpack(t0 - 2.0 * alpha * r + alpha * alpha * v, d);
      if (!guess.is_monotone(0.0)) continue;
      try {
        if (!std::isfinite(observed_penloglik(m, guess, lambda))) continue;
        ParamState next = em_map(guess);
        const double value = observed_penloglik(m, next, lambda);
        if (value >= current) {
          res.last_step = (next.packed() - res.theta.packed()).norm();
          res.theta = std::move(next);
          current = value;
          res.penloglik_trace.push_back(current);
        }
      } catch (const NumericalError&) {
      }
      break;
    }
  }
  return res;
}

EmResult em_fixed_lambda(const Dataset& ds, double lambda, const ParamState& init,
                         const SplineBasis& basis, const LinkSpec& link,
                         const EmOptions& options) {
  return em_fixed_lambda(SplineModel(ds, basis, link), lambda, init, options);
}

NegHessian neg_hessian(const SplineModel& m, const ParamState& theta, double lambda) {
  const auto p = static_cast<Eigen::Index>(m.dim());
  const std::size_t d = m.d();
  const Eigen::VectorXd x0 = theta.packed();
  Eigen::MatrixXd hess(p, p);
  Eigen::VectorXd gp(p), gm(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const double h = 1e-5 * std::max(1.0, std::fabs(x0(k)));
    Eigen::VectorXd x = x0;
    x(k) = x0(k) + h;
    observed_penloglik(m, ParamState::unpack(x, d), lambda, &gp);
    x(k) = x0(k) - h;
    observed_penloglik(m, ParamState::unpack(x, d), lambda, &gm);
    hess.col(k) = -(gp - gm) / (2.0 * h);
  }
  if (!hess.allFinite()) {
    throw NumericalError(NumericalError::Kind::NonFiniteLikelihood,
                         "neg_hessian: non-finite entries");
  }
  NegHessian out;
  const double scale = hess.cwiseAbs().rowwise().sum().maxCoeff();
  const Eigen::MatrixXd asym = hess - hess.transpose();
  out.asymmetry = scale > 0.0 ? asym.cwiseAbs().rowwise().sum().maxCoeff() / scale : 0.0;
  out.matrix = 0.5 * (hess + hess.transpose());
  return out;
}

Eigen::MatrixXd neg_hessian(const ParamState& theta, double lambda, const Dataset& ds,
                            const SplineBasis& basis, const LinkSpec& link) {
  return neg_hessian(SplineModel(ds, basis, link), theta, lambda).matrix;
}

ParamState initial_state(std::size_t d, std::size_t q, const LinkSpec& link) {
  ParamState s;
  s.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  s.gamma = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(q), link_eval(link, 0.05),
                                       link_eval(link, 0.95));
  return s;
}

}  // namespace transfit
