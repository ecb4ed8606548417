#include <doctest.h>

#include <numbers>

#include "bayespde/basis.hpp"
#include "support.hpp"

using namespace bayespde;
using testing::rel_err;

namespace {

// Central stencils: order 1 and 2 on three points, order 3 on five.
double fd(const BSplineBasis1D& b, double x, int p, int order, double h) {
  auto f = [&](double z) {
    Vector pt(1);
    pt[0] = z;
    return eval1d(b, pt, 0)(0, p);
  };
  switch (order) {
    case 1: return (f(x + h) - f(x - h)) / (2 * h);
    case 2: return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h);
    default: return (f(x + 2 * h) - 2 * f(x + h) + 2 * f(x - h) - f(x - 2 * h)) / (2 * h * h * h);
  }
}

double knot_distance(const BSplineBasis1D& b, double x) {
  double d = 1e300;
  for (Eigen::Index i = 0; i < b.knots.size(); ++i) d = std::min(d, std::fabs(b.knots[i] - x));
  return d;
}

}  // namespace

TEST_CASE("minimal clamped knot vector is the Bezier case") {
  const BSplineBasis1D b = make_bspline(0.0, 1.0, 4, 3);
  REQUIRE(b.knots.size() == 8);
  for (int i = 0; i < 4; ++i) CHECK(b.knots[i] == 0.0);
  for (int i = 4; i < 8; ++i) CHECK(b.knots[i] == 1.0);
  CHECK(b.count == 4);
}

TEST_CASE("uniform interior knots sit at 10k/7") {
  const BSplineBasis1D b = make_bspline(0.0, 10.0, 10, 3);
  REQUIRE(b.knots.size() == 14);
  for (int k = 1; k <= 6; ++k) CHECK(b.knots[3 + k] == doctest::Approx(10.0 * k / 7.0).epsilon(1e-14));
  CHECK(b.count == static_cast<int>(b.knots.size()) - b.degree - 1);
}

TEST_CASE("make_bspline validates its arguments") {
  CHECK_THROWS(make_bspline(0.0, 1.0, 3, 3));
  CHECK_THROWS(make_bspline(1.0, 1.0, 5, 3));
  CHECK_THROWS(make_bspline(0.0, 1.0, 5, 0));
}

TEST_CASE("partition of unity and zero-sum derivatives") {
  Rng rng(7);
  for (int degree : {1, 2, 3, 4, 5}) {
    const BSplineBasis1D b = make_bspline(-2.0, 3.0, degree + 6, degree);
    Vector pts(102);
    for (Eigen::Index i = 0; i < 100; ++i) pts[i] = -2.0 + 5.0 * rng.uniform();
    pts[100] = -2.0;
    pts[101] = 3.0;
    CHECK((eval1d(b, pts, 0).rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    for (int order = 1; order <= degree; ++order) {
      const Matrix d = eval1d(b, pts, order);
      CHECK(d.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("derivatives of orders 1 to 3 match finite differences of the order-0 basis") {
  Rng rng(17);
  for (int degree : {3, 4}) {
    const BSplineBasis1D b = make_bspline(0.0, 1.0, 9, degree);
    const double steps[] = {0.0, 1e-5, 1e-4, 1e-3};
    int checked = 0;
    while (checked < 100) {
      const double x = 0.02 + 0.96 * rng.uniform();
      if (knot_distance(b, x) < 3 * steps[3]) continue;
      Vector pt(1);
      pt[0] = x;
      for (int order = 1; order <= 3; ++order) {
        const Matrix exact = eval1d(b, pt, order);
        Matrix approx(1, b.count);
        for (int p = 0; p < b.count; ++p) approx(0, p) = fd(b, x, p, order, steps[order]);
        CHECK(rel_err(approx, exact) <= 1e-6);
      }
      ++checked;
    }
  }
}

TEST_CASE("eval1d rejects orders above the degree and points outside the domain") {
  const BSplineBasis1D b = make_bspline(0.0, 1.0, 6, 3);
  Vector pts(1);
  pts[0] = 0.5;
  CHECK_THROWS(eval1d(b, pts, 4));
  pts[0] = 1.5;
  CHECK_THROWS(eval1d(b, pts, 0));
}

TEST_CASE("2D spatial basis is the row-wise Kronecker of the axis bases") {
  const Vector xs = Vector::LinSpaced(5, 0.0, 1.0), ys = Vector::LinSpaced(4, -1.0, 1.0);
  const SpatialBasis sb = make_spatial_basis_2d(xs, ys, 4, 5, 3);
  REQUIRE(sb.count() == 20);
  REQUIRE(sb.size() == 20);
  const DerivSpec d{1, 2, 0};
  const Matrix psi = eval_spatial(sb, d);
  const Matrix bx = eval1d(sb.bx, xs, 1), by = eval1d(*sb.by, ys, 2);
  for (Eigen::Index j = 0; j < ys.size(); ++j)
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
      const Eigen::Index row = j * xs.size() + i;
      CHECK(sb.locations(row, 0) == xs[i]);
      CHECK(sb.locations(row, 1) == ys[j]);
      for (int qy = 0; qy < 5; ++qy)
        for (int qx = 0; qx < 4; ++qx)
          CHECK(psi(row, qy * 4 + qx) == doctest::Approx(by(j, qy) * bx(i, qx)).epsilon(1e-14));
    }
  CHECK_THROWS(eval_spatial(sb, DerivSpec{0, 0, 1}));
  CHECK_THROWS(eval_spatial(sb, DerivSpec{4, 0, 0}));
}

TEST_CASE("operator application is the weighted sum of spatial derivatives") {
  const Vector xs = Vector::LinSpaced(6, 0.0, 2.0);
  const SpatialBasis sb = make_spatial_basis_2d(xs, xs, 5, 5, 3);
  const OperatorSpec g{{{2.0, {2, 0, 0}}, {-1.0, {0, 2, 0}}}};
  const Matrix expected = 2.0 * eval_spatial(sb, {2, 0, 0}) - eval_spatial(sb, {0, 2, 0});
  CHECK(rel_err(apply_operator(sb, g), expected) <= 1e-15);
  CHECK(OperatorSpec::laplacian().max_order() == 2);
  CHECK(OperatorSpec::identity().is_identity());
  CHECK(OperatorSpec::laplacian().render("u") == "u_xx + u_yy");
}

TEST_CASE("Laplacian of the heat initial surface through a fitted basis") {
  const Vector xs = Vector::LinSpaced(41, 0.0, 20.0);
  const SpatialBasis sb = make_spatial_basis_2d(xs, xs, 15, 15, 4);
  const double w = 2.0 * std::numbers::pi / 40.0;
  Vector surface(sb.size());
  for (Eigen::Index r = 0; r < sb.size(); ++r)
    surface[r] = std::sin(w * sb.locations(r, 0)) * std::cos(w * sb.locations(r, 1));
  const Matrix psi = eval_spatial(sb, {});
  const Vector coef = psi.colPivHouseholderQr().solve(surface);
  const Vector lap = apply_operator(sb, OperatorSpec::laplacian()) * coef;
  CHECK(rel_err(lap, -2.0 * w * w * surface) <= 1e-3);
}

TEST_CASE("evaluate_bases caches every requested order and the operator") {
  const Vector xs = Vector::LinSpaced(7, 0.0, 1.0), ts = Vector::LinSpaced(6, 0.0, 1.0);
  const SpatialBasis sb = make_spatial_basis_1d(xs, 5, 3);
  const TemporalBasis tb = make_temporal_basis(ts, 4, 3);
  const BasisEvaluations ev =
      evaluate_bases(sb, tb, {{1, 0, 0}, {0, 0, 2}}, OperatorSpec{{{1.0, {2, 0, 0}}}}, 2);
  CHECK(ev.spatial({}).rows() == 7);
  CHECK(ev.spatial({1, 0, 0}).cols() == 5);
  CHECK(ev.temporal(0).cols() == 4);
  CHECK(ev.temporal(2).rows() == 6);
  CHECK(rel_err(ev.psi_operator, eval_spatial(sb, {2, 0, 0})) == 0.0);
  CHECK(ev.theta.isIdentity());
  CHECK(ev.theta.rows() == 2);
  CHECK_THROWS(ev.spatial({3, 0, 0}));
  CHECK_THROWS(ev.temporal(1));
}

TEST_CASE("default degree supports the highest derivative with at least cubic splines") {
  CHECK(default_degree(0) == 3);
  CHECK(default_degree(2) == 3);
  CHECK(default_degree(3) == 3);
  CHECK(default_degree(4) == 4);
}

TEST_CASE("suffix notation") {
  CHECK(suffix({}) == "");
  CHECK(suffix({2, 1, 0}) == "xxy");
  CHECK(suffix({0, 0, 1}) == "t");
}
