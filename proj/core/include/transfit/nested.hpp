#pragma once

#include <memory>

#include "transfit/dataset.hpp"
#include "transfit/em.hpp"
#include "transfit/fit_result.hpp"
#include "transfit/link.hpp"

namespace transfit {

inline constexpr double kLambdaMin = 1e-6;
inline constexpr double kLambdaMax = 1e6;

struct LambdaUpdate {
  double lambda = 0.0;
  /// tr(S_rho^- S) - tr(J^- S), the quantity the update scales by rho.
  double numerator = 0.0;
  double quadratic = 0.0;  // theta' S theta
  bool clamped = false;
  /// theta' S theta ~ 0: lambda returned unchanged.
  bool degenerate = false;
};

/// Generalized Fellner-Schall step with rho = lambda^2 as the smoothing
/// parameter multiplying S = blockdiag(0, D'D).
LambdaUpdate update_lambda(const SplineModel& model, const ParamState& theta, double lambda);
double update_lambda(const ParamState& theta, double lambda, const Dataset& ds,
                     const SplineBasis& basis, const LinkSpec& link);

/// Thrown when the outer loop hits its iteration cap; holds the last iterate.
class OuterNonConvergence : public NumericalError {
 public:
  OuterNonConvergence(const std::string& what, FitResult best)
      : NumericalError(Kind::OuterNonConvergence, what),
        best_(std::make_shared<FitResult>(std::move(best))) {}
  const FitResult& best() const noexcept { return *best_; }

 private:
  std::shared_ptr<const FitResult> best_;
};

/// Knots, nested EM / smoothing-parameter iterations, then standard errors.
FitResult fit(const Dataset& ds, const LinkSpec& link, const FitOptions& options = {});

}  // namespace transfit
