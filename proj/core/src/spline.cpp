#include "transfit/spline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "transfit/error.hpp"
#include "transfit/stats.hpp"

namespace transfit {

SplineBasis::SplineBasis(std::vector<double> interior_knots, double boundary_low,
                         double boundary_high)
    : interior_(std::move(interior_knots)), low_(boundary_low), high_(boundary_high) {
  if (!std::isfinite(low_) || !std::isfinite(high_) || !(low_ < high_)) {
    throw DomainError("spline boundary knots must be finite with low < high");
  }
  for (std::size_t k = 0; k < interior_.size(); ++k) {
    const double prev = k == 0 ? low_ : interior_[k - 1];
    if (!std::isfinite(interior_[k]) || interior_[k] < prev || interior_[k] <= low_ ||
        interior_[k] >= high_) {
      throw DomainError("interior knots must be sorted and strictly inside the boundary");
    }
  }
  knots_.reserve(interior_.size() + 2 * (kDegree + 1));
  knots_.insert(knots_.end(), kDegree + 1, low_);
  knots_.insert(knots_.end(), interior_.begin(), interior_.end());
  knots_.insert(knots_.end(), kDegree + 1, high_);
}

BasisSpan SplineBasis::eval_span(double t) const {
  constexpr int p = kDegree;
  const std::size_t q = size();
  const double u = std::clamp(t, low_, high_);

  // knot span i with knots_[i] <= u < knots_[i+1], i in [p, q-1]
  std::size_t i;
  if (u >= high_) {
    i = q - 1;
  } else {
    auto it = std::upper_bound(knots_.begin() + p, knots_.begin() + static_cast<long>(q) + 1, u);
    i = static_cast<std::size_t>(it - knots_.begin()) - 1;
  }

  // Cox-de Boor triangle; 0/0 taken as 0.
  std::array<double, p + 1> n{};
  std::array<double, p + 1> left{};
  std::array<double, p + 1> right{};
  n[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - knots_[i + 1 - j];
    right[j] = knots_[i + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom == 0.0 ? 0.0 : n[r] / denom;
      n[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    n[j] = saved;
  }

  BasisSpan span;
  span.first = i - p;
  span.values = n;
  return span;
}

Eigen::VectorXd SplineBasis::eval(double t) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
  const BasisSpan s = eval_span(t);
  for (int k = 0; k <= kDegree; ++k) out(static_cast<Eigen::Index>(s.first) + k) = s.values[k];
  return out;
}

double SplineBasis::value(const Eigen::VectorXd& gamma, double t) const {
  if (static_cast<std::size_t>(gamma.size()) != size()) {
    throw DomainError("spline coefficient vector has length " + std::to_string(gamma.size()) +
                      ", basis has " + std::to_string(size()));
  }
  const BasisSpan s = eval_span(t);
  double v = 0.0;
  for (int k = 0; k <= kDegree; ++k) v += gamma(static_cast<Eigen::Index>(s.first) + k) * s.values[k];
  return v;
}

Eigen::VectorXd SplineBasis::greville() const {
  Eigen::VectorXd g(static_cast<Eigen::Index>(size()));
  for (std::size_t j = 0; j < size(); ++j) {
    g(static_cast<Eigen::Index>(j)) = (knots_[j + 1] + knots_[j + 2] + knots_[j + 3]) / kDegree;
  }
  return g;
}

std::size_t default_knot_count(std::size_t n) {
  auto m = static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(n))));
  while (m > 0 && (m - 1) * (m - 1) * (m - 1) >= n) --m;
  while (m * m * m < n) ++m;
  return m;
}

SplineBasis make_knots_with_count(std::span<const double> times, std::size_t m) {
  if (times.empty()) throw DomainError("make_knots: no observation times");
  std::vector<double> pool(times.begin(), times.end());
  for (double t : pool) {
    if (!std::isfinite(t) || t <= 0.0) {
      throw DomainError("make_knots: observation times must be finite and positive");
    }
  }
  std::sort(pool.begin(), pool.end());
  std::vector<double> distinct = pool;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < m + 2) {
    throw DomainError("make_knots: " + std::to_string(distinct.size()) +
                      " distinct observation times cannot support " + std::to_string(m) +
                      " interior knots");
  }

  const double low = distinct.front();
  const double high = distinct.back();
  std::vector<double> knots;
  knots.reserve(m);
  double prev = low;
  for (std::size_t k = 1; k <= m; ++k) {
    double knot = empirical_quantile(pool, static_cast<double>(k) / static_cast<double>(m + 1));
    if (knot <= prev || knot >= high) {
      // tie: move halfway toward the next distinct endpoint above prev
      auto next = std::upper_bound(distinct.begin(), distinct.end(), prev);
      const double upper = next == distinct.end() ? high : *next;
      knot = 0.5 * (prev + upper);
    }
    knots.push_back(knot);
    prev = knot;
  }
  return SplineBasis(std::move(knots), low, high);
}

SplineBasis make_knots(std::span<const double> times, std::size_t n) {
  if (n < 2) throw DomainError("make_knots: sample size must be at least 2");
  return make_knots_with_count(times, default_knot_count(n));
}

Eigen::VectorXd basis_eval(const SplineBasis& basis, double t) { return basis.eval(t); }

double spline_eval(const SplineBasis& basis, const Eigen::VectorXd& gamma, double t) {
  return basis.value(gamma, t);
}

PenaltyMatrix penalty_matrix(std::size_t q) {
  if (q < 3) throw DomainError("penalty_matrix: need at least 3 coefficients");
  const auto rows = static_cast<Eigen::Index>(q - 2);
  PenaltyMatrix p;
  p.d_matrix = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(q));
  for (Eigen::Index r = 0; r < rows; ++r) {
    p.d_matrix(r, r) = 1.0;
    p.d_matrix(r, r + 1) = -2.0;
    p.d_matrix(r, r + 2) = 1.0;
  }
  p.gram = p.d_matrix.transpose() * p.d_matrix;
  return p;
}

}  // namespace transfit
