#include "transfit/link.hpp"

#include <cmath>
#include <string>

#include "transfit/error.hpp"

namespace transfit {

namespace {

bool is_ph(const LinkSpec& spec) { return spec.alpha < kAlphaZeroCutoff; }

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw DomainError(std::string(what) + ": argument must be finite");
  }
}

}  // namespace

void validate(const LinkSpec& spec) {
  if (!std::isfinite(spec.alpha) || spec.alpha < 0.0) {
    throw DomainError("link alpha must be finite and >= 0, got " + std::to_string(spec.alpha));
  }
}

double link_eval(const LinkSpec& spec, double u) {
  validate(spec);
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError("link_eval: u must lie in (0,1), got " + std::to_string(u));
  }
  const double log_surv = std::log1p(-u);
  if (is_ph(spec)) return std::log(-log_surv);
  return std::log(std::expm1(-spec.alpha * log_surv) / spec.alpha);
}

CumRate cum_rate(const LinkSpec& spec, double eta) {
  validate(spec);
  require_finite(eta, "cum_rate");
  if (is_ph(spec)) {
    const double e = std::exp(eta);
    return {e, e};
  }
  const double a = spec.alpha;
  double h;
  if (eta > 30.0) {
    // log(1 + a e^eta) = eta + log(a) + log1p(e^{-eta}/a)
    h = (eta + std::log(a) + std::log1p(std::exp(-eta) / a)) / a;
  } else {
    h = std::log1p(a * std::exp(eta)) / a;
  }
  return {h, 1.0 / (std::exp(-eta) + a)};
}

double link_inv(const LinkSpec& spec, double x) {
  return -std::expm1(-cum_rate(spec, x).value);
}

double link_inv_deriv(const LinkSpec& spec, double x) {
  const CumRate h = cum_rate(spec, x);
  return std::exp(-h.value) * h.deriv;
}

}  // namespace transfit
