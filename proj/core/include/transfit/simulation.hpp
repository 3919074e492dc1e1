#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "transfit/dataset.hpp"
#include "transfit/fit_result.hpp"
#include "transfit/link.hpp"

namespace transfit {

enum class SimScenario { C1, C2, C3 };

const char* to_string(SimScenario s);
/// Accepts "C1".."C3" (case-insensitive).
SimScenario parse_scenario(const std::string& text);

/// C1: phi = log((t^2+t)/5), C2: log t, C3: log(log(1+3t) + t/3).
double phi_true(SimScenario s, double t);
double phi_inverse(SimScenario s, double v);

Eigen::Vector2d default_beta(SimScenario s);

struct SimConfig {
  SimScenario config = SimScenario::C1;
  double alpha = 0.0;
  int n = 100;
  std::uint64_t seed = 0;
  Eigen::Vector2d beta_true = default_beta(SimScenario::C1);

  /// Config with the scenario's default coefficients.
  static SimConfig make(SimScenario s, double alpha, int n, std::uint64_t seed);
};

void validate(const SimConfig& sc);

/// Event time solving F(T | z) = u under the generating model.
double event_time(const SimConfig& sc, const Eigen::Vector2d& z, double u);

struct LatentSubject {
  Eigen::Vector2d z;
  double event_time = 0.0;
  std::vector<double> exams;
};

/// Covariates, event times and examination schedules before censoring.
std::vector<LatentSubject> simulate_latent(const SimConfig& sc);
IntervalObservation censor(const LatentSubject& subject);
Dataset simulate_dataset(const SimConfig& sc);

struct CoefficientSummary {
  double bias = 0.0;
  /// NaN with fewer than two successful replicates.
  double sd = 0.0;
  double ase = 0.0;
  double mse = 0.0;
  /// Fraction of 95% Wald intervals covering the true value.
  double cp95 = 0.0;
};

struct MCSummary {
  std::vector<CoefficientSummary> coefficients;
  int replications = 0;
  int failures = 0;
  double right_censor_rate = 0.0;
  /// More than 10% of replicates failed.
  bool flagged = false;
  /// Per-replicate outcomes in replicate order; failed ones hold NaN.
  std::vector<Eigen::Vector2d> estimates;
  std::vector<Eigen::Vector2d> std_errors;
  std::vector<double> numerators_min;
};

struct McOptions {
  FitOptions fit;
  unsigned threads = 1;
  /// Link used for fitting; defaults to the generating alpha.
  std::optional<double> fit_alpha;
};

MCSummary mc_replicate(const SimConfig& sc, int replications,
                       std::optional<std::size_t> knots_override = std::nullopt,
                       const McOptions& options = {});

struct PowerPoint {
  double beta1 = 0.0;
  double rejection_rate = 0.0;
  int replications = 0;
  int failures = 0;
};

/// Level-0.05 Wald test of beta_1 = 0 at each grid value of beta_1. Replicate
/// r uses the same random stream at every grid point.
std::vector<PowerPoint> power_curve(const SimConfig& base, const std::vector<double>& beta1_grid,
                                    int replications, const McOptions& options = {});

}  // namespace transfit
