#include "transfit/inference.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Eigenvalues>

#include "transfit/error.hpp"
#include "transfit/nested.hpp"
#include "transfit/parallel.hpp"
#include "transfit/random.hpp"
#include "transfit/stats.hpp"

namespace transfit {

namespace {

struct ObsTerm {
  SubjectTerm term;
  Eigen::VectorXd basis_left;
  Eigen::VectorXd basis_right;
};

ObsTerm observation_term(const ParamState& theta, const IntervalObservation& obs,
                         const SplineBasis& basis, const LinkSpec& link) {
  check_observation(obs);
  if (obs.covariates.size() != theta.beta.size()) {
    throw DomainError("score: covariate dimension does not match beta");
  }
  const double zb = obs.covariates.dot(theta.beta);
  ObsTerm out;
  const auto q = static_cast<Eigen::Index>(basis.size());
  out.basis_left = Eigen::VectorXd::Zero(q);
  out.basis_right = Eigen::VectorXd::Zero(q);
  CumRate at_left{0.0, 0.0};
  CumRate at_right{0.0, 0.0};
  if (obs.status != Censoring::Left) {
    out.basis_left = basis.eval(obs.left);
    at_left = cum_rate(link, out.basis_left.dot(theta.gamma) + zb);
  }
  if (obs.status != Censoring::Right) {
    out.basis_right = basis.eval(obs.right);
    at_right = cum_rate(link, out.basis_right.dot(theta.gamma) + zb);
  }
  out.term = subject_loglik(obs.status, at_left, at_right);
  return out;
}

}  // namespace

Eigen::VectorXd score_beta(const ParamState& theta, const IntervalObservation& obs,
                           const SplineBasis& basis, const LinkSpec& link) {
  const ObsTerm t = observation_term(theta, obs, basis, link);
  return (t.term.d_left + t.term.d_right) * obs.covariates;
}

Eigen::VectorXd score_phi_basis(const ParamState& theta, const IntervalObservation& obs,
                                const SplineBasis& basis, const LinkSpec& link) {
  const ObsTerm t = observation_term(theta, obs, basis, link);
  return t.term.d_left * t.basis_left + t.term.d_right * t.basis_right;
}

ScoreRows score_rows(const SplineModel& model, const ParamState& theta) {
  const auto n = static_cast<Eigen::Index>(model.n());
  ScoreRows rows{Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(model.d())),
                 Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(model.q()))};
  for (std::size_t i = 0; i < model.n(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const SubjectTerm t = subject_loglik(model, theta, i);
    rows.beta_scores.row(ii) = (t.d_left + t.d_right) * model.covariates().row(ii);
    if (t.d_left != 0.0) {
      const BasisSpan& s = model.span_left(i);
      for (Eigen::Index k = 0; k < 4; ++k) {
        rows.phi_scores(ii, static_cast<Eigen::Index>(s.first) + k) +=
            t.d_left * s.values[static_cast<std::size_t>(k)];
      }
    }
    if (t.d_right != 0.0) {
      const BasisSpan& s = model.span_right(i);
      for (Eigen::Index k = 0; k < 4; ++k) {
        rows.phi_scores(ii, static_cast<Eigen::Index>(s.first) + k) +=
            t.d_right * s.values[static_cast<std::size_t>(k)];
      }
    }
  }
  return rows;
}

InfoEstimate estimate_info(const SplineModel& model, const ParamState& theta) {
  const ScoreRows rows = score_rows(model, theta);
  const auto n = static_cast<double>(model.n());
  const Eigen::MatrixXd& phi = rows.phi_scores;

  // Normal equations solved with an eigenvalue-truncated pseudo-inverse.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(phi.transpose() * phi);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double cut = 1e-9 * ev.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev(k) > cut) inv(k) = 1.0 / ev(k);
  }
  const Eigen::MatrixXd gram_pinv =
      eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();

  InfoEstimate out;
  out.projection = gram_pinv * (phi.transpose() * rows.beta_scores);
  out.residuals = rows.beta_scores - phi * out.projection;
  out.info = out.residuals.transpose() * out.residuals / n;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> info_eig(out.info);
  // relative to the raw score variance: a covariate that phi absorbs (a constant) leaves only round-off
  const double raw = rows.beta_scores.squaredNorm() / n;
  out.singular = !(raw > 0.0) || info_eig.eigenvalues().minCoeff() <= 1e-10 * raw;
  if (!out.singular) {
    const Eigen::MatrixXd cov = out.info.inverse() / n;
    out.std_errors = cov.diagonal().cwiseSqrt();
    if (!out.std_errors.allFinite() || out.std_errors.minCoeff() <= 0.0) {
      out.singular = true;
      out.std_errors.resize(0);
    }
  }
  return out;
}

InfoEstimate estimate_info(const FitResult& fit, const Dataset& ds) {
  return estimate_info(SplineModel(ds, fit.basis, fit.link), fit.theta);
}

WaldInterval wald_interval(double estimate, double std_error, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("wald_ci: level must lie in (0,1)");
  const double z = normal_quantile(0.5 * (1.0 + level));
  WaldInterval w;
  w.estimate = estimate;
  w.std_error = std_error;
  w.valid = std::isfinite(std_error) && std_error > 0.0;
  const double half = std::isfinite(std_error) ? z * std_error : 0.0;
  w.lower = estimate - half;
  w.upper = estimate + half;
  return w;
}

std::vector<WaldInterval> wald_ci(const FitResult& fit, double level) {
  std::vector<WaldInterval> out;
  const Eigen::Index d = fit.theta.beta.size();
  for (Eigen::Index l = 0; l < d; ++l) {
    const double se = fit.std_errors.size() == d ? fit.std_errors(l)
                                                  : std::numeric_limits<double>::quiet_NaN();
    out.push_back(wald_interval(fit.theta.beta(l), se, level));
  }
  return out;
}

std::vector<std::size_t> resample_with_replacement(std::size_t n, std::uint64_t seed,
                                                   std::size_t b) {
  Rng rng = make_rng(seed, b, StreamPurpose::Bootstrap);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

PointwiseBand bootstrap_band(const Dataset& ds, const LinkSpec& link,
                             const std::vector<double>& grid, int replicates,
                             std::uint64_t seed, const BootstrapOptions& options) {
  if (replicates < 2) throw DomainError("bootstrap_band: need at least 2 replicates");
  if (grid.empty()) throw DomainError("bootstrap_band: empty evaluation grid");
  const std::vector<double> pool = ds.finite_endpoints();
  const auto [lo, hi] = std::minmax_element(pool.begin(), pool.end());
  for (double t : grid) {
    if (!(t >= *lo && t <= *hi)) {
      throw DomainError("bootstrap_band: grid point " + std::to_string(t) +
                        " outside the observed time range");
    }
  }

  const FitResult full = fit(ds, link, options.fit);
  PointwiseBand band;
  band.grid = grid;
  for (double t : grid) band.phi_hat.push_back(full.phi(t));

  const Resampler resampler = options.resampler ? options.resampler : resample_with_replacement;
  const auto count = static_cast<std::size_t>(replicates);
  std::vector<std::optional<std::vector<double>>> curves(count);
  parallel_for(count, options.threads, [&](std::size_t b) {
    try {
      const Dataset sample = ds.select(resampler(ds.size(), seed, b));
      const FitResult f = fit(sample, link, options.fit);
      if (!f.converged) return;
      std::vector<double> curve;
      curve.reserve(grid.size());
      for (double t : grid) curve.push_back(f.phi(t));
      curves[b] = std::move(curve);
    } catch (const std::exception&) {
      // counted below
    }
  });

  band.replicates = replicates;
  band.failures = static_cast<int>(std::count(curves.begin(), curves.end(), std::nullopt));
  if (band.failures > options.max_failure_fraction * replicates ||
      band.failures > replicates - 2) {
    throw NumericalError(NumericalError::Kind::BootstrapUnreliable,
                         "bootstrap_band: " + std::to_string(band.failures) + " of " +
                             std::to_string(replicates) + " resamples failed to fit");
  }
  std::vector<double> column;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    column.clear();
    for (const auto& c : curves) {
      if (c) column.push_back((*c)[g]);
    }
    std::sort(column.begin(), column.end());
    band.lower.push_back(empirical_quantile(column, options.lower_level));
    band.upper.push_back(empirical_quantile(column, options.upper_level));
  }
  return band;
}

}  // namespace transfit
