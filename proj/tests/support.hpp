#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <doctest.h>

#include "transfit/dataset.hpp"
#include "transfit/link.hpp"
#include "transfit/spline.hpp"

namespace testing {

// Central differences of a scalar function of a vector.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double rel_step = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = rel_step * std::max(1.0, std::fabs(x(k)));
    Eigen::VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    g(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
}

inline double max_rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double e = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) e = std::max(e, rel_err(a(k), b(k)));
  return e;
}

// Small synthetic dataset with all three censoring classes and d covariates.
inline transfit::Dataset synthetic_dataset(std::size_t n, std::size_t d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.2, 4.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<transfit::IntervalObservation> obs;
  for (std::size_t i = 0; i < n; ++i) {
    transfit::IntervalObservation o;
    o.covariates.resize(static_cast<Eigen::Index>(d));
    for (auto& z : o.covariates) z = gauss(rng);
    double a = unif(rng), b = unif(rng);
    if (a > b) std::swap(a, b);
    b += 0.05;
    switch (i % 3) {
      case 0:
        o.status = transfit::Censoring::Left;
        o.left = 0.0;
        o.right = b;
        break;
      case 1:
        o.status = transfit::Censoring::Interval;
        o.left = a;
        o.right = b;
        break;
      default:
        o.status = transfit::Censoring::Right;
        o.left = a;
        o.right = std::numeric_limits<double>::infinity();
        break;
    }
    obs.push_back(o);
  }
  std::vector<std::string> names;
  for (std::size_t k = 0; k < d; ++k) names.push_back("x" + std::to_string(k + 1));
  return transfit::Dataset(std::move(obs), names);
}

// Random strictly increasing coefficient vector centred near the link's median.
inline Eigen::VectorXd random_monotone(std::size_t q, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> step(0.1, 0.8);
  Eigen::VectorXd g(static_cast<Eigen::Index>(q));
  double v = -2.0;
  for (auto& x : g) {
    x = v;
    v += step(rng);
  }
  return g;
}

}  // namespace testing
