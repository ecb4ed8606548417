#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "bayespde/basis.hpp"
#include "bayespde/library.hpp"
#include "bayespde/random.hpp"
#include "bayespde/sampler.hpp"

namespace testing {

using namespace bayespde;

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

/// Everything a DiscoveryProblem references, kept alive together.
struct SmallProblem {
  FeatureLibrary lib;
  ObservationSet obs;
  CovariateField cov;
  SpatialBasis space;
  TemporalBasis time;
  BasisEvaluations ev;
  OperatorSpec op;
  int time_order = 1;

  DiscoveryProblem problem() const { return {obs, ev, lib, cov, time_order}; }
};

struct SmallSpec {
  int S = 12;
  int T = 10;
  int P = 5;
  int Q = 5;
  int components = 1;
  std::vector<std::string> terms{"u", "u*u_x", "u_xx"};
  std::vector<std::string> covariates;
  OperatorSpec op = OperatorSpec::identity();
  int time_order = 1;
  double missing = 0.0;
  int degree = 3;
};

/// 1D problem on [0,1] x [0,1] with random data, mask and covariates.
inline std::unique_ptr<SmallProblem> make_small(const SmallSpec& spec, Rng& rng) {
  std::vector<std::string> names{"u", "v", "w"};
  names.resize(static_cast<std::size_t>(spec.components));
  const Vector xs = Vector::LinSpaced(spec.S, 0.0, 1.0);
  const Vector ts = Vector::LinSpaced(spec.T, 0.0, 1.0);
  Tensor data(spec.S, spec.T, spec.components);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.values()[i] = rng.normal();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(data.size()), 1);
  for (auto& m : mask)
    if (rng.uniform() < spec.missing) m = 0;
  FeatureLibrary lib(names, spec.covariates);
  for (const auto& t : spec.terms) lib.add(t);
  Tensor cov(spec.S, spec.T, static_cast<Eigen::Index>(spec.covariates.size()));
  for (Eigen::Index i = 0; i < cov.size(); ++i) cov.values()[i] = rng.normal();
  auto out = std::unique_ptr<SmallProblem>(new SmallProblem{
      std::move(lib), ObservationSet(std::move(data), std::move(mask)), std::move(cov),
      make_spatial_basis_1d(xs, spec.P, spec.degree), make_temporal_basis(ts, spec.Q, spec.degree),
      {}, spec.op, spec.time_order});
  out->ev = evaluate_bases(out->space, out->time, required_derivatives(out->lib, spec.time_order),
                           spec.op, spec.components);
  return out;
}

// Row of the basis Kronecker product phi(t) (x) psi(s), built directly from Eigen.
inline Eigen::RowVectorXd kron_row(const Matrix& phi, const Matrix& psi, const SpaceTimePoint& p) {
  return kronecker(phi.row(p.t), psi.row(p.s));
}

// Per-point negative log posterior written out term by term.
inline double point_nlp(const Matrix& A, const ModelState& st, const SmallProblem& sp,
                 const ModelConfig& cfg, const SpaceTimePoint& p) {
  const BasisEvaluations& ev = sp.ev;
  const Eigen::Index N = A.rows();
  const double ST = static_cast<double>(ev.space() * ev.time());
  auto state_value = [&](int n, const DerivSpec& d) {
    return A.row(n).dot(kron_row(ev.temporal(d.dt), ev.spatial(d), p));
  };
  double nlp = 0.0;
  for (Eigen::Index n = 0; n < N; ++n) {
    if (sp.obs.present(p.s, p.t, n)) {
      const double e = sp.obs.data()(p.s, p.t, n) - state_value(static_cast<int>(n), {});
      nlp += e * e / (2.0 * st.sigma2_V[n]);
    }
    double f_dot_m = 0.0;
    for (std::size_t d = 0; d < sp.lib.size(); ++d) {
      double f = 1.0;
      for (const Factor& fac : sp.lib[d].factors)
        f *= fac.is_state() ? state_value(fac.component, fac.deriv) : sp.cov(p.s, p.t, fac.covariate);
      f_dot_m += st.M(n, static_cast<Eigen::Index>(d)) * f;
    }
    const double y = A.row(n).dot(kron_row(ev.temporal(sp.time_order), ev.psi_operator, p));
    nlp += (y - f_dot_m) * (y - f_dot_m) / (2.0 * st.sigma2_U[n]);
  }
  nlp += (cfg.lambda1 * A.cwiseAbs().sum() + cfg.lambda2 * A.squaredNorm()) / ST;
  return nlp;
}

inline ModelState random_state(const SmallProblem& sp, Rng& rng) {
  const Eigen::Index N = sp.obs.components(), D = static_cast<Eigen::Index>(sp.lib.size());
  ModelState st;
  st.A = random_matrix(N, sp.ev.spatial_count() * sp.ev.temporal_count(), rng);
  st.M = random_matrix(N, D, rng);
  st.gamma = IndicatorMatrix::Ones(N, D);
  st.pi = Vector::Constant(N, 0.5);
  st.sigma2_U = Vector::Constant(N, 0.5) + Vector::NullaryExpr(N, [&] { return rng.uniform(); });
  st.sigma2_V = Vector::Constant(N, 0.2) + Vector::NullaryExpr(N, [&] { return rng.uniform(); });
  st.a_V = Vector::Ones(N);
  return st;
}

// log p(y | gamma) up to a constant, from an explicit least-squares fit of the active columns.
inline double log_marginal(const Matrix& F, const Vector& y, const std::vector<int>& active, double g) {
  const double n = static_cast<double>(F.rows());
  double fit = 0.0;
  if (!active.empty()) {
    Matrix Fg(F.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j) Fg.col(static_cast<Eigen::Index>(j)) = F.col(active[j]);
    const Vector beta = Fg.householderQr().solve(y);
    fit = y.dot(Fg * beta);  // y' P_gamma y
  }
  const double scale = 0.5 * (y.squaredNorm() - g / (g + 1.0) * fit);
  return -0.5 * static_cast<double>(active.size()) * std::log1p(g) - (0.5 * n - 1.0) * std::log(scale);
}

inline std::vector<int> bits(unsigned mask, int D) {
  std::vector<int> out;
  for (int d = 0; d < D; ++d)
    if (mask & (1u << d)) out.push_back(d);
  return out;
}

}  // namespace testing
