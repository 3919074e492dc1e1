#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "transfit/barrier.hpp"
#include "transfit/dataset.hpp"
#include "transfit/link.hpp"
#include "transfit/spline.hpp"

namespace transfit {

/// Probability floor/ceiling applied before taking logs.
inline constexpr double kProbabilityClamp = 1e-12;

/// theta = (beta, gamma); gamma is nondecreasing.
struct ParamState {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;

  /// Stacked (beta', gamma')'.
  Eigen::VectorXd packed() const;
  static ParamState unpack(const Eigen::VectorXd& theta, std::size_t d);
  bool is_monotone(double slack = 1e-10) const;
};

/// Conditional means of the latent Poisson counts given the data.
struct LatentExpectations {
  Eigen::VectorXd e_y;  // left-censored subjects only
  Eigen::VectorXd e_w;  // interval-censored subjects only
  Eigen::VectorXd u1;
  Eigen::VectorXd u2;
};

/// x / (1 - exp(-x)), the mean of a zero-truncated Poisson(x).
double zero_truncated_mean(double x);

/// Dataset, basis and link bundled with the per-subject basis windows at
/// L and R, which stay fixed for the whole fit.
class SplineModel {
 public:
  SplineModel(const Dataset& ds, SplineBasis basis, LinkSpec link);

  std::size_t n() const noexcept { return status_.size(); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(z_.cols()); }
  std::size_t q() const noexcept { return basis_.size(); }
  std::size_t dim() const noexcept { return d() + q(); }
  const SplineBasis& basis() const noexcept { return basis_; }
  const LinkSpec& link() const noexcept { return link_; }
  const PenaltyMatrix& penalty() const noexcept { return penalty_; }
  const Eigen::MatrixXd& covariates() const noexcept { return z_; }
  Censoring status(std::size_t i) const { return status_[i]; }
  double left(std::size_t i) const { return left_[i]; }
  double right(std::size_t i) const { return right_[i]; }
  const BasisSpan& span_left(std::size_t i) const { return at_left_[i]; }
  const BasisSpan& span_right(std::size_t i) const { return at_right_[i]; }

  /// 0.5 * lambda^2 * ||D gamma||^2
  double penalty_value(const Eigen::VectorXd& gamma, double lambda) const;

 private:
  SplineBasis basis_;
  LinkSpec link_;
  PenaltyMatrix penalty_;
  Eigen::MatrixXd z_;
  std::vector<Censoring> status_;
  std::vector<double> left_;
  std::vector<double> right_;
  std::vector<BasisSpan> at_left_;
  std::vector<BasisSpan> at_right_;
};

/// Derivatives of one subject's log-likelihood with respect to
/// zeta_L = phi(L) + Z'beta and zeta_R = phi(R) + Z'beta.
struct SubjectTerm {
  double value = 0.0;
  double d_left = 0.0;
  double d_right = 0.0;
};

/// Clamped log-likelihood of one subject from its cumulative rates H(L), H(R)
/// (the unused side is ignored).
SubjectTerm subject_loglik(Censoring status, const CumRate& at_left, const CumRate& at_right);
SubjectTerm subject_loglik(const SplineModel& model, const ParamState& theta, std::size_t i);

/// Penalized observed log-likelihood; optional analytic gradient (packed order).
double observed_penloglik(const SplineModel& model, const ParamState& theta, double lambda,
                          Eigen::VectorXd* grad = nullptr);
double observed_penloglik(const ParamState& theta, double lambda, const Dataset& ds,
                          const SplineBasis& basis, const LinkSpec& link);

LatentExpectations e_step(const SplineModel& model, const ParamState& theta);
LatentExpectations e_step(const ParamState& theta, const Dataset& ds, const SplineBasis& basis,
                          const LinkSpec& link);

struct QValue {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// Penalized Q function. Throws NumericalError(InfeasibleParameters) when a
/// Poisson mean is not positive.
QValue q_objective(const SplineModel& model, const ParamState& theta,
                   const LatentExpectations& ex, double lambda);
QValue q_objective(const ParamState& theta, const LatentExpectations& ex, double lambda,
                   const Dataset& ds, const SplineBasis& basis, const LinkSpec& link);

/// Analytic negative Hessian of the penalized Q function (not necessarily PSD).
Eigen::MatrixXd q_neg_hessian(const SplineModel& model, const ParamState& theta,
                              const LatentExpectations& ex, double lambda);

struct MStepResult {
  ParamState theta;
  BarrierResult optimizer;
};

MStepResult m_step(const SplineModel& model, const LatentExpectations& ex,
                   const ParamState& start, double lambda, const BarrierOptions& options = {});
ParamState m_step(const LatentExpectations& ex, const ParamState& start, double lambda,
                  const Dataset& ds, const SplineBasis& basis, const LinkSpec& link);

struct EmOptions {
  double tol = 1e-6;
  /// Counts EM maps (E-step + M-step), extrapolated ones included.
  int max_iter = 2000;
  /// SQUAREM extrapolation between pairs of EM maps, kept only when it does
  /// not lower the penalized likelihood. false gives plain EM.
  bool accelerate = true;
  BarrierOptions inner;
};

struct EmResult {
  ParamState theta;
  int iterations = 0;
  bool converged = false;
  /// Observed penalized log-likelihood at the start and after every iteration.
  std::vector<double> penloglik_trace;
  double last_step = 0.0;
};

EmResult em_fixed_lambda(const SplineModel& model, double lambda, const ParamState& init,
                         const EmOptions& options = {});
EmResult em_fixed_lambda(const Dataset& ds, double lambda, const ParamState& init,
                         const SplineBasis& basis, const LinkSpec& link,
                         const EmOptions& options = {});

struct NegHessian {
  Eigen::MatrixXd matrix;
  /// ||M - M'||_inf / ||M||_inf before symmetrization.
  double asymmetry = 0.0;
};

/// Minus the Hessian of observed_penloglik, by central differences of the
/// analytic gradient, symmetrized.
NegHessian neg_hessian(const SplineModel& model, const ParamState& theta, double lambda);
Eigen::MatrixXd neg_hessian(const ParamState& theta, double lambda, const Dataset& ds,
                            const SplineBasis& basis, const LinkSpec& link);

/// beta = 0; gamma evenly spaced from g(0.05) to g(0.95).
ParamState initial_state(std::size_t d, std::size_t q, const LinkSpec& link);

}  // namespace transfit
