#pragma once

namespace transfit {

/// Member of the link family
///   g_a(u) = log{((1-u)^{-a} - 1)/a}   for a > 0,
///   g_0(u) = log{-log(1-u)}            (proportional hazards).
/// a = 1 is proportional odds.
struct LinkSpec {
  double alpha = 0.0;

  static LinkSpec proportional_hazards() { return {0.0}; }
  static LinkSpec proportional_odds() { return {1.0}; }
};

/// Below this alpha the closed-form PH branch is used.
inline constexpr double kAlphaZeroCutoff = 1e-8;

/// Poisson mean-rate transform H(eta) = -log(1 - g^{-1}(eta)) and its derivative.
struct CumRate {
  double value;
  double deriv;
};

double link_eval(const LinkSpec& spec, double u);
double link_inv(const LinkSpec& spec, double x);
/// d g^{-1}(x) / dx.
double link_inv_deriv(const LinkSpec& spec, double x);
CumRate cum_rate(const LinkSpec& spec, double eta);

void validate(const LinkSpec& spec);

}  // namespace transfit
