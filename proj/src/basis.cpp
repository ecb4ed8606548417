#include "bayespde/basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bayespde {

namespace {

// Index of the knot span containing x, clamped so that x == hi falls into the last span.
int find_span(const BSplineBasis1D& b, double x) {
  const int n = b.count - 1;
  if (x >= b.knots[n + 1]) return n;
  if (x <= b.knots[b.degree]) return b.degree;
  int low = b.degree, high = n + 1;
  int mid = (low + high) / 2;
  while (x < b.knots[mid] || x >= b.knots[mid + 1]) {
    if (x < b.knots[mid])
      high = mid;
    else
      low = mid;
    mid = (low + high) / 2;
  }
  return mid;
}

// Nonzero basis functions on a span and their derivatives up to `order`
// (Cox-de Boor triangle plus the standard derivative recurrence).
Matrix basis_derivatives(const BSplineBasis1D& b, int span, double x, int order) {
  const int p = b.degree;
  const Vector& U = b.knots;
  Matrix ndu(p + 1, p + 1);
  Vector left(p + 1), right(p + 1);
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - U[span + 1 - j];
    right[j] = U[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right[r + 1] + left[j - r];
      const double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu(j, j) = saved;
  }

  Matrix ders = Matrix::Zero(order + 1, p + 1);
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);

  Matrix a(2, p + 1);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= order; ++k) {
      double d = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk) {
        a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
        d += a(s2, k) * ndu(r, pk);
      }
      ders(k, r) = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= order; ++k) {
    ders.row(k) *= factor;
    factor *= (p - k);
  }
  return ders;
}

// Row-wise Kronecker: row r of the result is kron(by.row(r), bx.row(r)).
Matrix row_kronecker(const Matrix& by, const Matrix& bx) {
  Matrix out(bx.rows(), bx.cols() * by.cols());
  for (Eigen::Index j = 0; j < by.cols(); ++j)
    out.middleCols(j * bx.cols(), bx.cols()) = bx.array().colwise() * by.col(j).array();
  return out;
}

}  // namespace

BSplineBasis1D make_bspline(double lo, double hi, int count, int degree) {
  if (degree < 1) throw std::invalid_argument("make_bspline: degree must be >= 1");
  if (!(lo < hi)) throw std::invalid_argument("make_bspline: degenerate domain");
  if (count < degree + 1)
    throw std::invalid_argument("make_bspline: count " + std::to_string(count) +
                                " is below degree + 1 = " + std::to_string(degree + 1));
  BSplineBasis1D b;
  b.degree = degree;
  b.count = count;
  b.lo = lo;
  b.hi = hi;
  const int interior = count - degree - 1;
  b.knots.resize(count + degree + 1);
  for (int i = 0; i <= degree; ++i) {
    b.knots[i] = lo;
    b.knots[count + i] = hi;
  }
  for (int k = 1; k <= interior; ++k)
    b.knots[degree + k] = lo + (hi - lo) * static_cast<double>(k) / (interior + 1);
  return b;
}

Matrix eval1d(const BSplineBasis1D& b, const Vector& points, int order) {
  if (order < 0 || order > b.degree)
    throw std::invalid_argument("eval1d: derivative order " + std::to_string(order) +
                                " exceeds degree " + std::to_string(b.degree));
  const double slack = 1e-10 * (b.hi - b.lo);
  Matrix out = Matrix::Zero(points.size(), b.count);
  for (Eigen::Index i = 0; i < points.size(); ++i) {
    double x = points[i];
    if (!(x >= b.lo - slack && x <= b.hi + slack))
      throw std::out_of_range("eval1d: point " + std::to_string(x) + " outside [" +
                              std::to_string(b.lo) + ", " + std::to_string(b.hi) + "]");
    x = std::clamp(x, b.lo, b.hi);
    const int span = find_span(b, x);
    const Matrix ders = basis_derivatives(b, span, x, order);
    out.row(i).segment(span - b.degree, b.degree + 1) = ders.row(order);
  }
  return out;
}

std::string suffix(const DerivSpec& d) {
  return std::string(d.dx, 'x') + std::string(d.dy, 'y') + std::string(d.dt, 't');
}

bool OperatorSpec::is_identity() const {
  return terms.size() == 1 && terms[0].first == 1.0 && terms[0].second == DerivSpec{};
}

int OperatorSpec::max_order() const {
  int m = 0;
  for (const auto& [c, d] : terms) m = std::max(m, d.spatial_order());
  return m;
}

std::string OperatorSpec::render(const std::string& symbol) const {
  if (terms.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [c, d] : terms) {
    const std::string name = d == DerivSpec{} ? symbol : symbol + "_" + suffix(d);
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << "-";
    const double mag = std::abs(c);
    if (mag != 1.0) os << mag << " ";
    os << name;
    first = false;
  }
  return os.str();
}

Matrix grid_locations(const Vector& xs, const Vector& ys) {
  Matrix loc(xs.size() * ys.size(), 2);
  for (Eigen::Index j = 0; j < ys.size(); ++j)
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
      loc(j * xs.size() + i, 0) = xs[i];
      loc(j * xs.size() + i, 1) = ys[j];
    }
  return loc;
}

SpatialBasis make_spatial_basis_1d(const Vector& xs, int count, int degree) {
  SpatialBasis sb;
  sb.bx = make_bspline(xs.minCoeff(), xs.maxCoeff(), count, degree);
  sb.locations = xs;
  return sb;
}

SpatialBasis make_spatial_basis_2d(const Vector& xs, const Vector& ys, int count_x, int count_y,
                                   int degree) {
  SpatialBasis sb;
  sb.bx = make_bspline(xs.minCoeff(), xs.maxCoeff(), count_x, degree);
  sb.by = make_bspline(ys.minCoeff(), ys.maxCoeff(), count_y, degree);
  sb.locations = grid_locations(xs, ys);
  return sb;
}

TemporalBasis make_temporal_basis(const Vector& times, int count, int degree) {
  return {make_bspline(times.minCoeff(), times.maxCoeff(), count, degree), times};
}

Matrix eval_spatial(const SpatialBasis& sb, const DerivSpec& d) {
  if (d.dt != 0) throw std::invalid_argument("eval_spatial: temporal order must be 0");
  if (!sb.is_2d()) {
    if (d.dy != 0) throw std::invalid_argument("eval_spatial: y derivative on a 1D basis");
    return eval1d(sb.bx, sb.locations.col(0), d.dx);
  }
  return row_kronecker(eval1d(*sb.by, sb.locations.col(1), d.dy),
                       eval1d(sb.bx, sb.locations.col(0), d.dx));
}

Matrix apply_operator(const SpatialBasis& sb, const OperatorSpec& g) {
  Matrix out = Matrix::Zero(sb.size(), sb.count());
  for (const auto& [c, d] : g.terms) out += c * eval_spatial(sb, d);
  return out;
}

const Matrix& BasisEvaluations::spatial(const DerivSpec& d) const {
  auto it = psi.find(d.spatial());
  if (it == psi.end())
    throw std::out_of_range("basis evaluations lack spatial derivative '" + suffix(d.spatial()) +
                            "'");
  return it->second;
}

const Matrix& BasisEvaluations::temporal(int order) const {
  auto it = phi.find(order);
  if (it == phi.end())
    throw std::out_of_range("basis evaluations lack temporal derivative of order " +
                            std::to_string(order));
  return it->second;
}

BasisEvaluations evaluate_bases(const SpatialBasis& sb, const TemporalBasis& tb,
                                const std::vector<DerivSpec>& required, const OperatorSpec& g,
                                int components) {
  BasisEvaluations ev;
  ev.psi.emplace(DerivSpec{}, eval_spatial(sb, DerivSpec{}));
  ev.phi.emplace(0, eval1d(tb.bt, tb.times, 0));
  for (const DerivSpec& d : required) {
    const DerivSpec s = d.spatial();
    if (!ev.psi.contains(s)) ev.psi.emplace(s, eval_spatial(sb, s));
    if (!ev.phi.contains(d.dt)) ev.phi.emplace(d.dt, eval1d(tb.bt, tb.times, d.dt));
  }
  ev.psi_operator = g.is_identity() ? ev.psi.at(DerivSpec{}) : apply_operator(sb, g);
  ev.theta = Matrix::Identity(components, components);
  return ev;
}

Tensor reconstruct_with(const Matrix& A, const Matrix& psi, const Matrix& phi,
                        const Matrix& theta) {
  const Eigen::Index P = psi.cols(), Q = phi.cols();
  if (A.cols() != P * Q)
    throw DimensionError("reconstruct: A has " + std::to_string(A.cols()) + " columns, expected " +
                         std::to_string(P * Q));
  if (theta.cols() != A.rows()) throw DimensionError("reconstruct: Theta does not match A rows");
  const Eigen::Index S = psi.rows(), T = phi.rows(), R = A.rows();
  std::vector<Matrix> fields(static_cast<std::size_t>(R));
  for (Eigen::Index r = 0; r < R; ++r) {
    Vector row = A.row(r).transpose();
    Eigen::Map<const Matrix> core(row.data(), P, Q);
    fields[static_cast<std::size_t>(r)] = psi * (core * phi.transpose());
  }
  Tensor out(S, T, theta.rows());
  for (Eigen::Index n = 0; n < theta.rows(); ++n) {
    auto slice = out.slice(n);
    for (Eigen::Index r = 0; r < R; ++r)
      if (theta(n, r) != 0.0) slice += theta(n, r) * fields[static_cast<std::size_t>(r)];
  }
  return out;
}

Tensor reconstruct_field(const Matrix& A, const BasisEvaluations& ev, const DerivSpec& d) {
  return reconstruct_with(A, ev.spatial(d), ev.temporal(d.dt), ev.theta);
}

}  // namespace bayespde
