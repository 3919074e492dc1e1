#include "transfit/simulation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "transfit/error.hpp"
#include "transfit/inference.hpp"
#include "transfit/nested.hpp"
#include "transfit/parallel.hpp"
#include "transfit/random.hpp"
#include "transfit/stats.hpp"

namespace transfit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double c3_inner(double t) { return std::log1p(3.0 * t) + t / 3.0; }

// Solves log(1+3t) + t/3 = target (> 0). The map is increasing and concave.
double c3_solve(double target) {
  double lo = 1e-12;
  while (c3_inner(lo) > target && lo > 1e-300) lo *= 1e-3;
  double hi = 1.0;
  while (c3_inner(hi) < target) hi *= 2.0;
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = c3_inner(t) - target;
    if (std::abs(f) <= 1e-14 * target) break;
    if (f > 0.0) hi = t; else lo = t;
    const double step = f / (3.0 / (1.0 + 3.0 * t) + 1.0 / 3.0);
    double next = t - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-15 * t) {
      t = next;
      break;
    }
    t = next;
  }
  return t;
}

double open_uniform(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u;
  do {
    u = unif(rng);
  } while (u <= 0.0);
  return u;
}

}  // namespace

const char* to_string(SimScenario s) {
  switch (s) {
    case SimScenario::C1: return "C1";
    case SimScenario::C2: return "C2";
    case SimScenario::C3: return "C3";
  }
  return "?";
}

SimScenario parse_scenario(const std::string& text) {
  std::string up = text;
  for (char& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "C1") return SimScenario::C1;
  if (up == "C2") return SimScenario::C2;
  if (up == "C3") return SimScenario::C3;
  throw DomainError("unknown configuration '" + text + "' (expected C1, C2 or C3)");
}

double phi_true(SimScenario s, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("phi_true: t must be positive and finite");
  switch (s) {
    case SimScenario::C1: return std::log((t * t + t) / 5.0);
    case SimScenario::C2: return std::log(t);
    case SimScenario::C3: return std::log(c3_inner(t));
  }
  return kNaN;
}

double phi_inverse(SimScenario s, double v) {
  if (!std::isfinite(v)) throw DomainError("phi_inverse: value must be finite");
  switch (s) {
    case SimScenario::C1: {
      const double x = 20.0 * std::exp(v);
      return x / (2.0 * (std::sqrt(1.0 + x) + 1.0));
    }
    case SimScenario::C2: return std::exp(v);
    case SimScenario::C3: return c3_solve(std::exp(v));
  }
  return kNaN;
}

Eigen::Vector2d default_beta(SimScenario s) {
  switch (s) {
    case SimScenario::C1: return {-1.0, -1.0};
    case SimScenario::C2: return {-1.0, 1.0};
    case SimScenario::C3: return {1.0, -1.0};
  }
  return {kNaN, kNaN};
}

SimConfig SimConfig::make(SimScenario s, double alpha, int n, std::uint64_t seed) {
  SimConfig sc;
  sc.config = s;
  sc.alpha = alpha;
  sc.n = n;
  sc.seed = seed;
  sc.beta_true = default_beta(s);
  return sc;
}

void validate(const SimConfig& sc) {
  validate(LinkSpec{sc.alpha});
  if (sc.n < 1) throw DomainError("simulation: n must be positive");
  if (!sc.beta_true.allFinite()) throw DomainError("simulation: beta must be finite");
}

double event_time(const SimConfig& sc, const Eigen::Vector2d& z, double u) {
  return phi_inverse(sc.config, link_eval(LinkSpec{sc.alpha}, u) - z.dot(sc.beta_true));
}

std::vector<LatentSubject> simulate_latent(const SimConfig& sc) {
  validate(sc);
  Rng rng = make_rng(sc.seed, 0, StreamPurpose::Simulation);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::poisson_distribution<int> extra(1.0);
  std::exponential_distribution<double> gap(2.0);  // mean 0.5

  std::vector<LatentSubject> out(static_cast<std::size_t>(sc.n));
  for (auto& s : out) {
    s.z(0) = coin(rng) ? 1.0 : 0.0;
    s.z(1) = gauss(rng);
    s.event_time = event_time(sc, s.z, open_uniform(rng));
    const int k = 1 + extra(rng);
    double t = 0.0;
    s.exams.resize(static_cast<std::size_t>(k));
    for (auto& e : s.exams) {
      do {
        t += gap(rng);
      } while (!(t > 0.0));
      e = t;
    }
  }
  return out;
}

IntervalObservation censor(const LatentSubject& s) {
  IntervalObservation o;
  o.covariates = s.z;
  const double t = s.event_time;
  if (t <= s.exams.front()) {
    o.status = Censoring::Left;
    o.left = 0.0;
    o.right = s.exams.front();
  } else if (t > s.exams.back()) {
    o.status = Censoring::Right;
    o.left = s.exams.back();
    o.right = std::numeric_limits<double>::infinity();
  } else {
    const auto it = std::lower_bound(s.exams.begin(), s.exams.end(), t);
    o.status = Censoring::Interval;
    o.left = *(it - 1);
    o.right = *it;
  }
  return o;
}

Dataset simulate_dataset(const SimConfig& sc) {
  std::vector<IntervalObservation> obs;
  for (const auto& s : simulate_latent(sc)) obs.push_back(censor(s));
  return Dataset(std::move(obs), {"z1", "z2"});
}

namespace {

struct ReplicateOutcome {
  bool ok = false;
  Eigen::Vector2d estimate{kNaN, kNaN};
  Eigen::Vector2d std_error{kNaN, kNaN};
  double right_censored = 0.0;
  double numerator_min = kNaN;
};

ReplicateOutcome run_replicate(const SimConfig& sc, const LinkSpec& fit_link,
                               const FitOptions& fit_options) {
  ReplicateOutcome out;
  Dataset ds;
  try {
    ds = simulate_dataset(sc);
  } catch (const DomainError&) {
    // all subjects right-censored: counts as a failed replicate
    return out;
  }
  out.right_censored = validate(ds).proportion(Censoring::Right);
  try {
    const FitResult f = fit(ds, fit_link, fit_options);
    if (!f.converged || f.std_errors.size() != 2) return out;
    out.ok = true;
    out.estimate = f.theta.beta;
    out.std_error = f.std_errors;
    if (!f.diagnostics.fs_numerators.empty()) {
      out.numerator_min = *std::min_element(f.diagnostics.fs_numerators.begin(),
                                            f.diagnostics.fs_numerators.end());
    }
  } catch (const NumericalError&) {
  } catch (const DomainError&) {
  }
  return out;
}

SimConfig replicate_config(const SimConfig& sc, std::size_t r) {
  SimConfig c = sc;
  c.seed = derive_seed(sc.seed, r, StreamPurpose::Simulation);
  return c;
}

}  // namespace

MCSummary mc_replicate(const SimConfig& sc, int replications,
                       std::optional<std::size_t> knots_override, const McOptions& options) {
  validate(sc);
  if (replications < 1) throw DomainError("mc_replicate: need at least one replication");
  FitOptions fit_options = options.fit;
  if (knots_override) fit_options.interior_knots = knots_override;
  const LinkSpec fit_link{options.fit_alpha.value_or(sc.alpha)};
  validate(fit_link);

  const auto count = static_cast<std::size_t>(replications);
  std::vector<ReplicateOutcome> outcomes(count);
  parallel_for(count, options.threads, [&](std::size_t r) {
    outcomes[r] = run_replicate(replicate_config(sc, r), fit_link, fit_options);
  });

  MCSummary s;
  s.replications = replications;
  const double z = normal_quantile(0.975);
  double censored = 0.0;
  std::vector<const ReplicateOutcome*> good;
  for (const auto& o : outcomes) {
    censored += o.right_censored;
    s.estimates.push_back(o.estimate);
    s.std_errors.push_back(o.std_error);
    s.numerators_min.push_back(o.numerator_min);
    if (o.ok) good.push_back(&o); else ++s.failures;
  }
  s.right_censor_rate = censored / replications;
  s.flagged = s.failures > 0.1 * replications;

  const auto m = static_cast<double>(good.size());
  for (Eigen::Index l = 0; l < 2; ++l) {
    CoefficientSummary c{kNaN, kNaN, kNaN, kNaN, kNaN};
    if (!good.empty()) {
      const double truth = sc.beta_true(l);
      double sum = 0.0, se_sum = 0.0, sq_err = 0.0, covered = 0.0;
      for (const auto* o : good) {
        const double b = o->estimate(l);
        const double se = o->std_error(l);
        sum += b;
        se_sum += se;
        sq_err += (b - truth) * (b - truth);
        if (std::abs(b - truth) <= z * se) covered += 1.0;
      }
      const double mean = sum / m;
      c.bias = mean - truth;
      c.ase = se_sum / m;
      c.mse = sq_err / m;
      c.cp95 = covered / m;
      if (good.size() > 1) {
        double ss = 0.0;
        for (const auto* o : good) ss += (o->estimate(l) - mean) * (o->estimate(l) - mean);
        c.sd = std::sqrt(ss / (m - 1.0));
      }
    }
    s.coefficients.push_back(c);
  }
  return s;
}

std::vector<PowerPoint> power_curve(const SimConfig& base, const std::vector<double>& beta1_grid,
                                    int replications, const McOptions& options) {
  validate(base);
  if (replications < 1) throw DomainError("power_curve: need at least one replication");
  for (double b : beta1_grid) {
    if (!std::isfinite(b)) throw DomainError("power_curve: grid values must be finite");
  }
  const LinkSpec fit_link{options.fit_alpha.value_or(base.alpha)};
  validate(fit_link);

  const auto reps = static_cast<std::size_t>(replications);
  const std::size_t total = reps * beta1_grid.size();
  std::vector<ReplicateOutcome> outcomes(total);
  parallel_for(total, options.threads, [&](std::size_t job) {
    SimConfig sc = replicate_config(base, job % reps);
    sc.beta_true(0) = beta1_grid[job / reps];
    outcomes[job] = run_replicate(sc, fit_link, options.fit);
  });

  const double z = normal_quantile(0.975);
  std::vector<PowerPoint> curve;
  for (std::size_t g = 0; g < beta1_grid.size(); ++g) {
    PowerPoint p;
    p.beta1 = beta1_grid[g];
    p.replications = replications;
    int rejected = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& o = outcomes[g * reps + r];
      if (!o.ok) {
        ++p.failures;
        continue;
      }
      if (std::abs(o.estimate(0)) > z * o.std_error(0)) ++rejected;
    }
    const int used = replications - p.failures;
    p.rejection_rate = used > 0 ? static_cast<double>(rejected) / used : kNaN;
    curve.push_back(p);
  }
  return curve;
}

}  // namespace transfit
