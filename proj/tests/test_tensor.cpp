#include <doctest.h>

#include "bayespde/tensor.hpp"
#include "support.hpp"

using namespace bayespde;
using testing::random_matrix;
using testing::rel_err;

namespace {

Tensor random_tensor(Eigen::Index S, Eigen::Index T, Eigen::Index N, Rng& rng) {
  Tensor x(S, T, N);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.values()[i] = rng.normal();
  return x;
}

// Explicit triple-loop n-mode product.
Tensor mode_product_oracle(const Tensor& x, const Matrix& b, int mode) {
  const Eigen::Index S = x.space(), T = x.time(), N = x.components();
  Tensor z(mode == 1 ? b.rows() : S, mode == 2 ? b.rows() : T, mode == 3 ? b.rows() : N);
  for (Eigen::Index s = 0; s < z.space(); ++s)
    for (Eigen::Index t = 0; t < z.time(); ++t)
      for (Eigen::Index n = 0; n < z.components(); ++n) {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < x.extent(mode); ++k)
          acc += mode == 1   ? b(s, k) * x(k, t, n)
                 : mode == 2 ? b(t, k) * x(s, k, n)
                             : b(n, k) * x(s, t, k);
        z(s, t, n) = acc;
      }
  return z;
}

double rel_err(const Tensor& a, const Tensor& b) {
  REQUIRE(a.space() == b.space());
  REQUIRE(a.time() == b.time());
  REQUIRE(a.components() == b.components());
  return testing::rel_err(a.values(), b.values());
}

}  // namespace

TEST_CASE("flat index is space fastest then time then component") {
  Tensor x(3, 4, 2);
  CHECK(x.flat_index(0, 0, 0) == 0);
  CHECK(x.flat_index(1, 0, 0) == 1);
  CHECK(x.flat_index(0, 1, 0) == 3);
  CHECK(x.flat_index(0, 0, 1) == 12);
  x(2, 3, 1) = 7.0;
  CHECK(x.values()[2 + 3 * (3 + 4 * 1)] == 7.0);
  CHECK(x.slice(1)(2, 3) == 7.0);
}

TEST_CASE("mode-3 unfolding uses column t*S + s and refolds exactly") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index S = 2 + trial % 4, T = 3 + trial % 3, N = 1 + trial % 3;
    const Tensor x = random_tensor(S, T, N, rng);
    const Matrix m = mode3_matricize(x);
    REQUIRE(m.rows() == N);
    REQUIRE(m.cols() == S * T);
    for (Eigen::Index n = 0; n < N; ++n)
      for (Eigen::Index t = 0; t < T; ++t)
        for (Eigen::Index s = 0; s < S; ++s) CHECK(m(n, t * S + s) == x(s, t, n));
    CHECK(refold_mode3(m, S, T) == x);
  }
  CHECK_THROWS_AS(refold_mode3(Matrix::Zero(2, 5), 2, 3), DimensionError);
}

TEST_CASE("n-mode products agree with the explicit summation") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index S = 2 + trial % 5, T = 2 + (trial * 3) % 4, N = 1 + trial % 3;
    const Tensor x = random_tensor(S, T, N, rng);
    for (int mode = 1; mode <= 3; ++mode) {
      const Matrix b = random_matrix(1 + (trial + mode) % 4, x.extent(mode), rng);
      CHECK(rel_err(n_mode_product(x, b, mode), mode_product_oracle(x, b, mode)) <= 1e-12);
    }
  }
}

TEST_CASE("n-mode product rejects bad modes and extents") {
  Rng rng(1);
  const Tensor x = random_tensor(3, 4, 2, rng);
  CHECK_THROWS_AS(n_mode_product(x, Matrix::Zero(2, 3), 0), DimensionError);
  CHECK_THROWS_AS(n_mode_product(x, Matrix::Zero(2, 3), 4), DimensionError);
  CHECK_THROWS_AS(n_mode_product(x, Matrix::Zero(2, 5), 2), DimensionError);
}

TEST_CASE("Tucker reconstruction matches Theta G_(3) kron(Phi, Psi)'") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index P = 2 + trial % 4, Q = 2 + trial % 3, R = 1 + trial % 2;
    const Eigen::Index S = 3 + trial % 5, T = 4 + trial % 2, N = R + trial % 2;
    const Tensor core = random_tensor(P, Q, R, rng);
    const Matrix psi = random_matrix(S, P, rng), phi = random_matrix(T, Q, rng),
                 theta = random_matrix(N, R, rng);
    const Tensor z = tucker_reconstruct(core, psi, phi, theta);
    const Matrix expected = theta * mode3_matricize(core) * kronecker(phi, psi).transpose();
    CHECK(testing::rel_err(mode3_matricize(z), expected) <= 1e-12);

    // The basis-level contraction used by the sampler is the same map.
    const Tensor via_basis = reconstruct_with(mode3_matricize(core), psi, phi, theta);
    CHECK(rel_err(via_basis, z) <= 1e-12);
  }
}

TEST_CASE("kronecker matches the block definition") {
  Rng rng(2);
  const Matrix a = random_matrix(2, 3, rng), b = random_matrix(4, 2, rng);
  const Matrix k = kronecker(a, b);
  REQUIRE(k.rows() == 8);
  REQUIRE(k.cols() == 6);
  for (Eigen::Index i = 0; i < 2; ++i)
    for (Eigen::Index j = 0; j < 3; ++j)
      for (Eigen::Index p = 0; p < 4; ++p)
        for (Eigen::Index q = 0; q < 2; ++q) CHECK(k(i * 4 + p, j * 2 + q) == a(i, j) * b(p, q));
}

TEST_CASE("tensor construction checks sizes") {
  CHECK_THROWS_AS(Tensor(2, 2, 2, Vector::Zero(7)), DimensionError);
  CHECK_THROWS_AS(Tensor(-1, 2, 2), DimensionError);
  CHECK(Tensor(0, 5, 2).size() == 0);
}
