#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"
#include "transfit/error.hpp"
#include "transfit/spline.hpp"

using namespace transfit;

namespace {

// Textbook recursive Cox-de Boor with 0/0 := 0, right end included in the last span.
double cox_de_boor(const std::vector<double>& u, std::size_t j, int p, double t) {
  if (p == 0) {
    const bool last = t == u.back() && u[j] < u[j + 1] && u[j + 1] == u.back();
    return (u[j] <= t && t < u[j + 1]) || last ? 1.0 : 0.0;
  }
  double left = 0.0, right = 0.0;
  const double d1 = u[j + p] - u[j];
  const double d2 = u[j + p + 1] - u[j + 1];
  if (d1 > 0) left = (t - u[j]) / d1 * cox_de_boor(u, j, p - 1, t);
  if (d2 > 0) right = (u[j + p + 1] - t) / d2 * cox_de_boor(u, j + 1, p - 1, t);
  return left + right;
}

// Type-7 quantile written out independently of the library.
double quantile7(std::vector<double> x, double p) {
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - std::floor(h)) * (x[hi] - x[lo]);
}

SplineBasis example_basis() { return SplineBasis({1.0, 2.5, 3.0, 6.0}, 0.5, 8.0); }

}  // namespace

TEST_CASE("knot count rule") {
  CHECK(default_knot_count(100) == 5);
  CHECK(default_knot_count(94) == 5);
  CHECK(default_knot_count(8) == 2);
  CHECK(default_knot_count(27) == 3);
  CHECK(default_knot_count(28) == 4);
  CHECK(default_knot_count(1000) == 10);
  CHECK(default_knot_count(1001) == 11);
  std::vector<double> t(200);
  std::iota(t.begin(), t.end(), 1.0);
  CHECK(make_knots(t, 100).interior_knots().size() == 5);
  CHECK(make_knots(t, 100).size() == 9);
}

TEST_CASE("make_knots: nine times, n=8") {
  const std::vector<double> t{1, 2, 3, 4, 5, 6, 7, 8, 9};
  const SplineBasis b = make_knots(t, 8);
  REQUIRE(b.interior_knots().size() == 2);
  CHECK(b.interior_knots()[0] == doctest::Approx(quantile7(t, 1.0 / 3.0)).epsilon(1e-14));
  CHECK(b.interior_knots()[1] == doctest::Approx(quantile7(t, 2.0 / 3.0)).epsilon(1e-14));
  CHECK(b.interior_knots()[0] == doctest::Approx(11.0 / 3.0));
  CHECK(b.boundary_low() == 1.0);
  CHECK(b.boundary_high() == 9.0);
  CHECK(b.knot_vector().size() == 2 + 8);
}

TEST_CASE("make_knots: ties and degenerate pools") {
  std::vector<double> t{1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 3, 4, 5};
  const SplineBasis b = make_knots_with_count(t, 3);
  const auto& k = b.interior_knots();
  CHECK(b.boundary_low() < k[0]);
  for (std::size_t i = 1; i < k.size(); ++i) CHECK(k[i - 1] < k[i]);
  CHECK(k.back() < b.boundary_high());
  CHECK_THROWS_AS(make_knots_with_count(std::vector<double>{1, 1, 2, 2, 3}, 2), DomainError);
  CHECK_THROWS_AS(make_knots(std::vector<double>{}, 10), DomainError);
  CHECK_THROWS_AS(make_knots(std::vector<double>{1, 2, -3, 4, 5}, 2), DomainError);
  CHECK_THROWS_AS(make_knots(std::vector<double>{1, 2, 3, 4, 5}, 1), DomainError);
}

TEST_CASE("basis at the boundaries") {
  const SplineBasis b = example_basis();
  Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.size()));
  e(0) = 1.0;
  CHECK((b.eval(0.5) - e).cwiseAbs().maxCoeff() < 1e-15);
  e.setZero();
  e(e.size() - 1) = 1.0;
  CHECK((b.eval(8.0) - e).cwiseAbs().maxCoeff() < 1e-15);
  // clamped outside the range
  CHECK((b.eval(-3.0) - b.eval(0.5)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((b.eval(100.0) - b.eval(8.0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single interval reduces to cubic Bernstein polynomials") {
  const SplineBasis b({}, 0.0, 1.0);
  REQUIRE(b.size() == 4);
  const Eigen::VectorXd mid = b.eval(0.5);
  CHECK(mid(0) == doctest::Approx(1.0 / 8));
  CHECK(mid(1) == doctest::Approx(3.0 / 8));
  CHECK(mid(2) == doctest::Approx(3.0 / 8));
  CHECK(mid(3) == doctest::Approx(1.0 / 8));
  const double binom[] = {1, 3, 3, 1};
  for (double t = 0.0; t <= 1.0; t += 0.03125) {
    const Eigen::VectorXd v = b.eval(t);
    for (int k = 0; k < 4; ++k) {
      CHECK(v(k) == doctest::Approx(binom[k] * std::pow(t, k) * std::pow(1 - t, 3 - k))
                        .epsilon(1e-13));
    }
  }
}

TEST_CASE("basis matches recursive Cox-de Boor") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> interior(1 + rep % 6);
    for (auto& k : interior) k = unif(rng) * 0.8 + 1.0;
    std::sort(interior.begin(), interior.end());
    const SplineBasis b(interior, 0.5, 10.0);
    for (int s = 0; s < 50; ++s) {
      const double t = 0.5 + 9.5 * s / 49.0;
      const Eigen::VectorXd v = b.eval(t);
      for (std::size_t j = 0; j < b.size(); ++j) {
        CHECK(std::fabs(v(static_cast<Eigen::Index>(j)) - cox_de_boor(b.knot_vector(), j, 3, t)) <
              1e-12);
      }
    }
  }
}

TEST_CASE("property: partition of unity, non-negativity, local support") {
  const SplineBasis b = example_basis();
  for (int s = 0; s < 1000; ++s) {
    const double t = 0.5 + 7.5 * s / 999.0;
    const Eigen::VectorXd v = b.eval(t);
    CHECK(std::fabs(v.sum() - 1.0) < 1e-12);
    CHECK(v.minCoeff() >= 0.0);
    CHECK((v.array() != 0.0).count() <= 4);
    const BasisSpan span = b.eval_span(t);
    for (int k = 0; k < 4; ++k) {
      CHECK(span.values[static_cast<std::size_t>(k)] ==
            v(static_cast<Eigen::Index>(span.first) + k));
    }
  }
}

TEST_CASE("spline values") {
  const SplineBasis b = example_basis();
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(b.size()), 2.5);
  for (double t = 0.5; t <= 8.0; t += 0.1) CHECK(spline_eval(b, c, t) == doctest::Approx(2.5));
  // knot averages reproduce the identity
  const Eigen::VectorXd gv = b.greville();
  for (double t = 0.5; t <= 8.0; t += 0.01) CHECK(std::fabs(b.value(gv, t) - t) < 1e-10);
  CHECK(basis_eval(b, 3.3).isApprox(b.eval(3.3)));
  CHECK_THROWS_AS(spline_eval(b, Eigen::VectorXd::Zero(3), 1.0), DomainError);
}

TEST_CASE("property: nondecreasing coefficients give a nondecreasing spline") {
  const SplineBasis b = example_basis();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_real_distribution<double> tt(0.0, 9.0);
  int violations = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    Eigen::VectorXd g(static_cast<Eigen::Index>(b.size()));
    double v = -1.0;
    for (auto& x : g) {
      v += unif(rng) < 0.3 ? 0.0 : unif(rng);
      x = v;
    }
    double t1 = tt(rng), t2 = tt(rng);
    if (t1 > t2) std::swap(t1, t2);
    if (b.value(g, t1) > b.value(g, t2) + 1e-12) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("penalty matrix") {
  const PenaltyMatrix p4 = penalty_matrix(4);
  Eigen::MatrixXd expect(2, 4);
  expect << 1, -2, 1, 0, 0, 1, -2, 1;
  CHECK(p4.d_matrix == expect);
  Eigen::Vector4d g(0, 0, 1, 3);
  CHECK((p4.d_matrix * g).squaredNorm() == 2.0);
  CHECK_THROWS_AS(penalty_matrix(2), DomainError);

  for (std::size_t q : {4u, 6u, 9u, 12u}) {
    const PenaltyMatrix p = penalty_matrix(q);
    CHECK(p.d_matrix.rows() == static_cast<Eigen::Index>(q - 2));
    CHECK(p.d_matrix.rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.gram.isApprox(p.gram.transpose()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p.gram);
    const double top = eig.eigenvalues().maxCoeff();
    CHECK(eig.eigenvalues().minCoeff() > -1e-12 * top);
    CHECK((eig.eigenvalues().array() > 1e-9 * top).count() == static_cast<Eigen::Index>(q - 2));
    const Eigen::VectorXd affine =
        Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(q), 0.0, 1.0) * 3.7 +
        Eigen::VectorXd::Constant(static_cast<Eigen::Index>(q), -1.2);
    CHECK((p.gram * affine).cwiseAbs().maxCoeff() < 1e-10);
  }
}
