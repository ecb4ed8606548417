#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bayespde/tensor.hpp"

namespace bayespde {

/// Clamped B-spline basis on [lo, hi].
struct BSplineBasis1D {
  int degree = 3;
  Vector knots;
  int count = 0;
  double lo = 0.0;
  double hi = 1.0;
};

/// Clamped basis with uniformly spaced interior knots. Requires count >= degree + 1.
BSplineBasis1D make_bspline(double lo, double hi, int count, int degree);

/// Row i holds the order-th derivative of every basis function at points[i].
Matrix eval1d(const BSplineBasis1D& b, const Vector& points, int order);

/// Partial derivative orders. dt applies to the temporal basis, dx/dy to the spatial one.
struct DerivSpec {
  int dx = 0;
  int dy = 0;
  int dt = 0;

  int spatial_order() const { return dx + dy; }
  DerivSpec spatial() const { return {dx, dy, 0}; }
  auto operator<=>(const DerivSpec&) const = default;
};

/// Suffix notation: "" for the field itself, otherwise e.g. "x", "xxy", "t".
std::string suffix(const DerivSpec& d);

/// Linear spatial differential operator sum_k c_k d^{dspec_k}.
struct OperatorSpec {
  std::vector<std::pair<double, DerivSpec>> terms;

  static OperatorSpec identity() { return {{{1.0, DerivSpec{}}}}; }
  static OperatorSpec laplacian() { return {{{1.0, {2, 0, 0}}, {1.0, {0, 2, 0}}}}; }
  bool is_identity() const;
  int max_order() const;
  /// "u_xx + u_yy" style rendering for the given component symbol.
  std::string render(const std::string& symbol) const;
};

/// Spatial basis over an ordered list of locations (one column for 1D, two for 2D).
/// For 2D the column index is qy * Px + qx, i.e. Psi = Psi_y (x) Psi_x row-wise.
struct SpatialBasis {
  BSplineBasis1D bx;
  std::optional<BSplineBasis1D> by;
  Matrix locations;  // S x dim

  bool is_2d() const { return by.has_value(); }
  Eigen::Index size() const { return locations.rows(); }
  int count() const { return is_2d() ? bx.count * by->count : bx.count; }
  int degree() const { return is_2d() ? std::min(bx.degree, by->degree) : bx.degree; }
};

struct TemporalBasis {
  BSplineBasis1D bt;
  Vector times;

  int count() const { return bt.count; }
};

/// Locations of a rectangular grid with x varying fastest.
Matrix grid_locations(const Vector& xs, const Vector& ys);

SpatialBasis make_spatial_basis_1d(const Vector& xs, int count, int degree);
SpatialBasis make_spatial_basis_2d(const Vector& xs, const Vector& ys, int count_x, int count_y,
                                   int degree);
TemporalBasis make_temporal_basis(const Vector& times, int count, int degree);

/// S x P matrix of spatial derivatives; d.dt must be 0.
Matrix eval_spatial(const SpatialBasis& sb, const DerivSpec& d);

/// sum_k c_k eval_spatial(sb, d_k).
Matrix apply_operator(const SpatialBasis& sb, const OperatorSpec& g);

/// Cached basis evaluations used throughout sampling.
struct BasisEvaluations {
  std::map<DerivSpec, Matrix> psi;  // keyed by spatial spec (dt == 0)
  std::map<int, Matrix> phi;        // keyed by temporal order
  Matrix psi_operator;              // g(Psi); empty when no operator was requested
  Matrix theta;                     // N x R

  const Matrix& spatial(const DerivSpec& d) const;
  const Matrix& temporal(int order) const;
  Eigen::Index space() const { return psi.empty() ? 0 : psi.begin()->second.rows(); }
  Eigen::Index time() const { return phi.empty() ? 0 : phi.begin()->second.rows(); }
  Eigen::Index spatial_count() const { return psi.empty() ? 0 : psi.begin()->second.cols(); }
  Eigen::Index temporal_count() const { return phi.empty() ? 0 : phi.begin()->second.cols(); }
};

/// Evaluates every requested derivative once. Order-0 matrices are always included.
BasisEvaluations evaluate_bases(const SpatialBasis& sb, const TemporalBasis& tb,
                                const std::vector<DerivSpec>& required, const OperatorSpec& g,
                                int components);

/// Refold of Theta * A * (Phi_dt (x) Psi_d)'.
Tensor reconstruct_field(const Matrix& A, const BasisEvaluations& ev, const DerivSpec& d);

/// Same contraction with explicit spatial and temporal matrices.
Tensor reconstruct_with(const Matrix& A, const Matrix& psi, const Matrix& phi,
                        const Matrix& theta);

/// Degree rule for a basis that must support derivatives up to max_order.
inline int default_degree(int max_order) { return std::max(3, max_order); }

}  // namespace bayespde
