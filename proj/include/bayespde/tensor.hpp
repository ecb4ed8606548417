#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

namespace bayespde {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dense order-3 array indexed (space, time, component). Storage is space
// fastest, then time, then component: flat index = s + S*(t + T*n). With this
// layout the mode-3 unfolding has column index t*S + s, which is the row order
// of kron(Phi, Psi).
template <typename Scalar>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(Eigen::Index S, Eigen::Index T, Eigen::Index N)
      : dims_{S, T, N}, values_(VectorX<Scalar>::Zero(S * T * N)) {
    if (S < 0 || T < 0 || N < 0) throw DimensionError("Tensor3: negative extent");
  }
  Tensor3(Eigen::Index S, Eigen::Index T, Eigen::Index N, VectorX<Scalar> values)
      : dims_{S, T, N}, values_(std::move(values)) {
    if (values_.size() != S * T * N)
      throw DimensionError("Tensor3: value count " + std::to_string(values_.size()) +
                           " does not match " + std::to_string(S) + "x" + std::to_string(T) +
                           "x" + std::to_string(N));
  }

  Eigen::Index space() const { return dims_[0]; }
  Eigen::Index time() const { return dims_[1]; }
  Eigen::Index components() const { return dims_[2]; }
  Eigen::Index extent(int mode) const { return dims_.at(static_cast<std::size_t>(mode - 1)); }
  Eigen::Index size() const { return values_.size(); }

  Eigen::Index flat_index(Eigen::Index s, Eigen::Index t, Eigen::Index n) const {
    return s + dims_[0] * (t + dims_[1] * n);
  }

  Scalar& operator()(Eigen::Index s, Eigen::Index t, Eigen::Index n) {
    return values_[flat_index(s, t, n)];
  }
  const Scalar& operator()(Eigen::Index s, Eigen::Index t, Eigen::Index n) const {
    return values_[flat_index(s, t, n)];
  }

  const VectorX<Scalar>& values() const { return values_; }
  VectorX<Scalar>& values() { return values_; }

  // S x T view of a single component.
  Eigen::Map<const MatrixX<Scalar>> slice(Eigen::Index n) const {
    return Eigen::Map<const MatrixX<Scalar>>(values_.data() + n * dims_[0] * dims_[1], dims_[0],
                                             dims_[1]);
  }
  Eigen::Map<MatrixX<Scalar>> slice(Eigen::Index n) {
    return Eigen::Map<MatrixX<Scalar>>(values_.data() + n * dims_[0] * dims_[1], dims_[0],
                                       dims_[1]);
  }

  bool operator==(const Tensor3& other) const {
    return dims_ == other.dims_ && values_ == other.values_;
  }

 private:
  std::array<Eigen::Index, 3> dims_{0, 0, 0};
  VectorX<Scalar> values_;
};

using Tensor = Tensor3<double>;

/// Mode-3 unfolding: N x (S*T), column t*S + s.
template <typename Scalar>
MatrixX<Scalar> mode3_matricize(const Tensor3<Scalar>& t) {
  // With the space-time-component layout the unfolding is a transposed view.
  Eigen::Map<const MatrixX<Scalar>> st_by_n(t.values().data(), t.space() * t.time(),
                                            t.components());
  return st_by_n.transpose();
}

/// Inverse of mode3_matricize for the given spatial and temporal extents.
template <typename Derived>
Tensor3<typename Derived::Scalar> refold_mode3(const Eigen::MatrixBase<Derived>& m,
                                               Eigen::Index S, Eigen::Index T) {
  using Scalar = typename Derived::Scalar;
  if (m.cols() != S * T)
    throw DimensionError("refold_mode3: expected " + std::to_string(S * T) + " columns, got " +
                         std::to_string(m.cols()));
  MatrixX<Scalar> st_by_n = m.transpose();
  return Tensor3<Scalar>(S, T, m.rows(),
                         Eigen::Map<const VectorX<Scalar>>(st_by_n.data(), st_by_n.size()));
}

template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> kronecker(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  return Eigen::kroneckerProduct(a.derived(), b.derived()).eval();
}

/// Z = X x_mode B, i.e. Z_(mode) = B * X_(mode).
template <typename Scalar, typename Derived>
Tensor3<Scalar> n_mode_product(const Tensor3<Scalar>& x, const Eigen::MatrixBase<Derived>& b,
                               int mode) {
  if (mode < 1 || mode > 3) throw DimensionError("n_mode_product: mode must be 1, 2 or 3");
  if (b.cols() != x.extent(mode))
    throw DimensionError("n_mode_product: matrix has " + std::to_string(b.cols()) +
                         " columns but tensor extent along mode " + std::to_string(mode) +
                         " is " + std::to_string(x.extent(mode)));
  const Eigen::Index S = x.space(), T = x.time(), N = x.components();
  switch (mode) {
    case 1: {
      Tensor3<Scalar> z(b.rows(), T, N);
      Eigen::Map<const MatrixX<Scalar>> xs(x.values().data(), S, T * N);
      Eigen::Map<MatrixX<Scalar>> zs(z.values().data(), b.rows(), T * N);
      zs.noalias() = b * xs;
      return z;
    }
    case 2: {
      Tensor3<Scalar> z(S, b.rows(), N);
      for (Eigen::Index n = 0; n < N; ++n) z.slice(n).noalias() = x.slice(n) * b.transpose();
      return z;
    }
    default: {
      MatrixX<Scalar> unfolded = b * mode3_matricize(x);
      return refold_mode3(unfolded, S, T);
    }
  }
}

/// core x1 psi x2 phi x3 theta.
template <typename Scalar>
Tensor3<Scalar> tucker_reconstruct(const Tensor3<Scalar>& core, const MatrixX<Scalar>& psi,
                                   const MatrixX<Scalar>& phi, const MatrixX<Scalar>& theta) {
  if (psi.cols() != core.space() || phi.cols() != core.time() ||
      theta.cols() != core.components())
    throw DimensionError("tucker_reconstruct: factor columns do not match core extents");
  return n_mode_product(n_mode_product(n_mode_product(core, psi, 1), phi, 2), theta, 3);
}

}  // namespace bayespde
