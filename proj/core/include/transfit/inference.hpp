#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "transfit/dataset.hpp"
#include "transfit/em.hpp"
#include "transfit/fit_result.hpp"

namespace transfit {

/// Per-subject scores: beta (n x d) and phi along each basis function (n x q).
struct ScoreRows {
  Eigen::MatrixXd beta_scores;
  Eigen::MatrixXd phi_scores;
};

Eigen::VectorXd score_beta(const ParamState& theta, const IntervalObservation& obs,
                           const SplineBasis& basis, const LinkSpec& link);
Eigen::VectorXd score_phi_basis(const ParamState& theta, const IntervalObservation& obs,
                                const SplineBasis& basis, const LinkSpec& link);
ScoreRows score_rows(const SplineModel& model, const ParamState& theta);

struct InfoEstimate {
  Eigen::MatrixXd info;
  /// Empty when `singular`.
  Eigen::VectorXd std_errors;
  bool singular = false;
  /// Least-squares coefficients of the beta scores on the phi scores (q x d).
  Eigen::MatrixXd projection;
  /// Efficient-score rows (n x d).
  Eigen::MatrixXd residuals;
};

/// Outer-product information of the beta scores after projecting out the
/// spline-space phi scores.
InfoEstimate estimate_info(const SplineModel& model, const ParamState& theta);
InfoEstimate estimate_info(const FitResult& fit, const Dataset& ds);

struct WaldInterval {
  double estimate = 0.0;
  double std_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  /// False when the standard error is missing, zero or not finite.
  bool valid = false;
};

std::vector<WaldInterval> wald_ci(const FitResult& fit, double level = 0.95);
WaldInterval wald_interval(double estimate, double std_error, double level = 0.95);

struct PointwiseBand {
  std::vector<double> grid;
  std::vector<double> phi_hat;
  std::vector<double> lower;
  std::vector<double> upper;
  int replicates = 0;
  int failures = 0;
};

/// Returns subject indices for bootstrap replicate `b` of a dataset with `n` rows.
using Resampler = std::function<std::vector<std::size_t>(std::size_t n, std::uint64_t seed,
                                                         std::size_t b)>;

struct BootstrapOptions {
  FitOptions fit;
  unsigned threads = 1;
  double lower_level = 0.025;
  double upper_level = 0.975;
  /// Replicates with more failures than this fraction raise BootstrapUnreliable.
  double max_failure_fraction = 0.2;
  /// Defaults to sampling n subjects with replacement from a per-replicate stream.
  Resampler resampler;
};

std::vector<std::size_t> resample_with_replacement(std::size_t n, std::uint64_t seed,
                                                   std::size_t b);

PointwiseBand bootstrap_band(const Dataset& ds, const LinkSpec& link,
                             const std::vector<double>& grid, int replicates,
                             std::uint64_t seed, const BootstrapOptions& options = {});

}  // namespace transfit
