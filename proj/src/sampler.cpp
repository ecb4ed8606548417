#include "bayespde/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include "bayespde/diagnostics.hpp"
#include "bayespde/log.hpp"

namespace bayespde {

namespace {

void warn_limited(int& counter, const std::string& msg) {
  if (counter < 5) log_warning(msg + (counter == 4 ? " (further warnings suppressed)" : ""));
  ++counter;
}

int pinv_warnings = 0;
int variance_warnings = 0;

// Inverse of a symmetric PSD matrix; pseudo-inverse when it is numerically singular.
Matrix spd_inverse(const Matrix& m) {
  Eigen::LDLT<Matrix> ldlt(m);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const Vector d = ldlt.vectorD().cwiseAbs();
    if (d.minCoeff() > 1e-12 * d.maxCoeff())
      return ldlt.solve(Matrix::Identity(m.rows(), m.cols()));
  }
  warn_limited(pinv_warnings, "rank-deficient design; using pseudo-inverse");
  return m.completeOrthogonalDecomposition().pseudoInverse();
}

// Lower factor L with L L' = m for a symmetric PSD m.
Matrix psd_sqrt(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

std::vector<Eigen::Index> active_set(const IndicatorMatrix& gamma, Eigen::Index n) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index d = 0; d < gamma.cols(); ++d)
    if (gamma(n, d)) out.push_back(d);
  return out;
}

// Per-point evaluation of basis expansions with A reshaped into P x Q cores.
class PointEvaluator {
 public:
  PointEvaluator(const Matrix& A, const BasisEvaluations& ev)
      : ev_(ev), P_(ev.spatial_count()), Q_(ev.temporal_count()) {
    if (A.cols() != P_ * Q_)
      throw DimensionError("A has " + std::to_string(A.cols()) + " columns, bases give " +
                           std::to_string(P_ * Q_));
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
      Vector row = A.row(r).transpose();
      cores_.emplace_back(Eigen::Map<const Matrix>(row.data(), P_, Q_));
    }
  }

  Eigen::Index rank() const { return static_cast<Eigen::Index>(cores_.size()); }

  // Per-core value psi' C_r phi for explicit basis rows.
  Vector core_values(const Eigen::Ref<const Eigen::RowVectorXd>& psi,
                     const Eigen::Ref<const Eigen::RowVectorXd>& phi) const {
    Vector out(rank());
    for (Eigen::Index r = 0; r < rank(); ++r)
      out[r] = (psi * cores_[static_cast<std::size_t>(r)]).dot(phi);
    return out;
  }

  double component(Eigen::Index n, const DerivSpec& d, const SpaceTimePoint& p) const {
    return ev_.theta.row(n).dot(
        core_values(ev_.spatial(d).row(p.s), ev_.temporal(d.dt).row(p.t)));
  }

  Eigen::Index P() const { return P_; }
  Eigen::Index Q() const { return Q_; }

 private:
  const BasisEvaluations& ev_;
  Eigen::Index P_, Q_;
  std::vector<Matrix> cores_;
};

// grad_cores[r] += coef_r * psi' phi for every core r.
void add_outer(std::vector<Matrix>& grad_cores, const Vector& coef,
               const Eigen::Ref<const Eigen::RowVectorXd>& psi,
               const Eigen::Ref<const Eigen::RowVectorXd>& phi) {
  for (std::size_t r = 0; r < grad_cores.size(); ++r) {
    const double c = coef[static_cast<Eigen::Index>(r)];
    if (c != 0.0) grad_cores[r].noalias() += (c * psi.transpose()) * phi;
  }
}

// Likelihood part of the per-point gradient, accumulated into P x Q cores.
void accumulate_point_grad(const ModelState& state, const DiscoveryProblem& prob,
                           const PointEvaluator& pe, const SpaceTimePoint& p,
                           std::vector<Matrix>& grad_cores, int time_order) {
  const BasisEvaluations& ev = prob.ev;
  const Matrix& theta = ev.theta;
  const Eigen::Index N = theta.rows();
  const Eigen::Index R = pe.rank();

  // Data model.
  const auto psi0 = ev.spatial({}).row(p.s);
  const auto phi0 = ev.temporal(0).row(p.t);
  const Vector u = theta * pe.core_values(psi0, phi0);
  Vector data_coef = Vector::Zero(R);
  for (Eigen::Index n = 0; n < N; ++n) {
    if (!prob.obs.present(p.s, p.t, n)) continue;
    const double e = prob.obs.data()(p.s, p.t, n) - u[n];
    data_coef -= theta.row(n).transpose() * (e / state.sigma2_V[n]);
  }
  add_outer(grad_cores, data_coef, psi0, phi0);

  // Process model.
  const auto psiJ = ev.psi_operator.row(p.s);
  const auto phiJ = ev.temporal(time_order).row(p.t);
  const Vector y = theta * pe.core_values(psiJ, phiJ);

  std::map<Factor, double> values;
  for (const TermSpec& t : prob.lib.terms())
    for (const Factor& f : t.factors)
      if (!values.contains(f))
        values.emplace(f, f.is_state() ? pe.component(f.component, f.deriv, p)
                                       : prob.cov(p.s, p.t, f.covariate));
  const Eigen::Index D = static_cast<Eigen::Index>(prob.lib.size());
  Vector fvals(D);
  for (Eigen::Index d = 0; d < D; ++d) {
    double v = 1.0;
    for (const Factor& f : prob.lib[static_cast<std::size_t>(d)].factors) v *= values.at(f);
    fvals[d] = v;
  }
  const Vector w = (y - state.M * fvals).cwiseQuotient(state.sigma2_U);
  add_outer(grad_cores, theta.transpose() * w, psiJ, phiJ);

  // Library Jacobian: -sum_n w_n sum_d M(n,d) df_d/dA.
  const Vector mw = state.M.transpose() * w;  // D
  std::map<Factor, double> coef;
  for (Eigen::Index d = 0; d < D; ++d) {
    if (mw[d] == 0.0) continue;
    for (const auto& [f, partial] : term_partials(prob.lib[static_cast<std::size_t>(d)], values))
      coef[f] -= mw[d] * partial;
  }
  for (const auto& [f, c] : coef) {
    if (c == 0.0) continue;
    add_outer(grad_cores, c * theta.row(f.component).transpose(), ev.spatial(f.deriv).row(p.s),
              ev.temporal(f.deriv.dt).row(p.t));
  }
}

Matrix cores_to_matrix(const std::vector<Matrix>& cores, Eigen::Index P, Eigen::Index Q) {
  Matrix out(static_cast<Eigen::Index>(cores.size()), P * Q);
  for (std::size_t r = 0; r < cores.size(); ++r)
    out.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<const Eigen::RowVectorXd>(cores[r].data(), P * Q);
  return out;
}

Matrix prior_grad(const Matrix& A, const ModelConfig& cfg, double space_time) {
  return (cfg.lambda1 * A.unaryExpr([](double a) { return double((a > 0) - (a < 0)); }) +
          2.0 * cfg.lambda2 * A) /
         space_time;
}

Matrix rows_of(const Eigen::Ref<const Matrix>& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

std::vector<RegressionStats> stats_per_component(const Matrix& F, const Matrix& Y) {
  const Matrix FtF = F.transpose() * F;
  std::vector<RegressionStats> out;
  for (Eigen::Index c = 0; c < Y.cols(); ++c)
    out.push_back({FtF, F.transpose() * Y.col(c), Y.col(c).squaredNorm(), static_cast<double>(F.rows())});
  return out;
}

// Solves (Psi'Psi) X (Phi'Phi) + lambda X = rhs in the eigenbases of both Gram matrices.
class SeparableRidge {
 public:
  SeparableRidge(const Matrix& psi, const Matrix& phi, double lambda) : lambda_(lambda) {
    Eigen::SelfAdjointEigenSolver<Matrix> e1(psi.transpose() * psi);
    Eigen::SelfAdjointEigenSolver<Matrix> e2(phi.transpose() * phi);
    U1_ = e1.eigenvectors();
    U2_ = e2.eigenvectors();
    denom_ = e1.eigenvalues().cwiseMax(0.0) * e2.eigenvalues().cwiseMax(0.0).transpose();
    denom_.array() += lambda;
    const double hi = denom_.cwiseAbs().maxCoeff();
    if (!(denom_.minCoeff() > 1e-13 * hi))
      throw std::runtime_error(
          "ridge initialization is singular; increase lambda2 (e.g. to 1e-6 or larger)");
  }
  Matrix solve(const Matrix& rhs) const {
    Matrix t = U1_.transpose() * rhs * U2_;
    t.array() /= denom_.array();
    return U1_ * t * U2_.transpose();
  }

 private:
  double lambda_;
  Matrix U1_, U2_, denom_;
};

}  // namespace

// ---------------------------------------------------------------------------

ObservationSet::ObservationSet(Tensor data)
    : data_(std::move(data)), mask_(static_cast<std::size_t>(data_.size()), 1) {}

ObservationSet::ObservationSet(Tensor data, std::vector<std::uint8_t> mask)
    : data_(std::move(data)), mask_(std::move(mask)) {
  if (mask_.size() != static_cast<std::size_t>(data_.size()))
    throw DimensionError("observation mask length does not match data");
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (!mask_[i]) data_.values()[static_cast<Eigen::Index>(i)] = 0.0;
}

int ObservationSet::present_count(Eigen::Index s, Eigen::Index t) const {
  int c = 0;
  for (Eigen::Index n = 0; n < components(); ++n) c += present(s, t, n);
  return c;
}

Eigen::Index ObservationSet::observed_count(Eigen::Index n) const {
  const Eigen::Index block = space() * time();
  return std::count_if(mask_.begin() + n * block, mask_.begin() + (n + 1) * block,
                       [](std::uint8_t m) { return m != 0; });
}

Eigen::Index ObservationSet::missing_count() const {
  return std::count(mask_.begin(), mask_.end(), std::uint8_t{0});
}

void ModelConfig::validate(int components) const {
  if (!(beta_rss > 0.0 && beta_rss < 1.0))
    throw std::invalid_argument("beta_rss must lie in (0, 1)");
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (burn_in < 0 || (iterations > 0 && burn_in >= iterations))
    throw std::invalid_argument("burn_in must be below iterations");
  if (kappa.empty() || (kappa.size() != 1 && static_cast<int>(kappa.size()) != components))
    throw std::invalid_argument("kappa needs one value or one per component");
  for (double k : kappa)
    if (!(k > 0.0)) throw std::invalid_argument("kappa entries must be positive");
  if (minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("Beta hyperparameters must be positive");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("penalties must be >= 0");
  if (!(nu_V > 0.0 && A_V > 0.0)) throw std::invalid_argument("Half-t hyperparameters must be positive");
  if (g < 0.0) throw std::invalid_argument("g must be >= 0");
  if (!(inclusion_threshold >= 0.0 && inclusion_threshold < 1.0))
    throw std::invalid_argument("inclusion_threshold must lie in [0, 1)");
}

double ModelConfig::kappa_for(Eigen::Index n) const {
  return kappa.size() == 1 ? kappa[0] : kappa.at(static_cast<std::size_t>(n));
}

std::vector<DerivSpec> required_derivatives(const FeatureLibrary& lib, int time_order) {
  std::vector<DerivSpec> req = lib.required_derivatives();
  req.push_back({0, 0, time_order});
  return req;
}

RegressionStats RegressionStats::from(const Matrix& F, const Vector& y) {
  RegressionStats s;
  s.FtF = F.transpose() * F;
  s.Fty = F.transpose() * y;
  s.yty = y.squaredNorm();
  s.n = static_cast<double>(F.rows());
  return s;
}

SubsetFit fit_subset(const RegressionStats& stats, const std::vector<Eigen::Index>& active,
                     double g) {
  SubsetFit fit;
  fit.active = active;
  const Eigen::Index k = static_cast<Eigen::Index>(active.size());
  if (k == 0) {
    fit.scale = 0.5 * stats.yty;
    return fit;
  }
  Matrix gram(k, k);
  Vector fty(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    fty[i] = stats.Fty[active[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < k; ++j)
      gram(i, j) = stats.FtF(active[static_cast<std::size_t>(i)], active[static_cast<std::size_t>(j)]);
  }
  const double shrink = g / (g + 1.0);
  fit.cov = shrink * spd_inverse(gram);
  fit.mean = fit.cov * fty;
  // g' G^{-1} g = shrink * fty' gram^{-1} fty = fty' mean
  fit.scale = 0.5 * (stats.yty - fty.dot(fit.mean));
  return fit;
}

double inclusion_ratio(double rss_in, double rss_out, double n, double g) {
  const double tiny = std::numeric_limits<double>::min();
  const double log_r = 0.5 * std::log1p(g) +
                       (0.5 * n - 1.0) * (std::log(std::max(rss_in, tiny)) -
                                          std::log(std::max(rss_out, tiny)));
  return std::exp(log_r);
}

double inclusion_probability(double ratio, double pi) {
  if (!(pi > 0.0)) return 0.0;
  if (!(pi < 1.0)) return 1.0;
  if (std::isinf(ratio)) return 0.0;
  return 1.0 / (1.0 + ratio * (1.0 - pi) / pi);
}

Matrix ridge_fit(const ObservationSet& obs, const BasisEvaluations& ev, double penalty) {
  return ridge_fit(obs, ev, Vector::Constant(obs.components(), penalty));
}

Matrix ridge_fit(const ObservationSet& obs, const BasisEvaluations& ev, const Vector& penalty) {
  const Matrix& psi = ev.spatial({});
  const Matrix& phi = ev.temporal(0);
  if (psi.rows() != obs.space() || phi.rows() != obs.time())
    throw DimensionError("bases do not cover the observation grid");
  if (penalty.size() != obs.components()) throw DimensionError("one ridge penalty per component");
  const Eigen::Index P = psi.cols(), Q = phi.cols(), S = obs.space(), T = obs.time();
  Matrix A(obs.components(), P * Q);
  for (Eigen::Index n = 0; n < obs.components(); ++n) {
    const double lambda = penalty[n];
    const SeparableRidge precond(psi, phi, lambda);
    const Matrix V = obs.data().slice(n);
    Matrix W(S, T);
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index s = 0; s < S; ++s) W(s, t) = obs.present(s, t, n) ? 1.0 : 0.0;
    const Matrix rhs = psi.transpose() * W.cwiseProduct(V) * phi;
    Matrix X = precond.solve(rhs);
    if (W.minCoeff() < 1.0) {
      // Preconditioned conjugate gradients on the masked normal equations.
      auto apply = [&](const Matrix& Z) -> Matrix {
        return psi.transpose() * W.cwiseProduct(psi * Z * phi.transpose()) * phi + lambda * Z;
      };
      Matrix r = rhs - apply(X);
      Matrix z = precond.solve(r);
      Matrix p = z;
      double rz = (r.array() * z.array()).sum();
      const double tol = 1e-12 * rhs.norm();
      for (int it = 0; it < 1000 && r.norm() > tol; ++it) {
        const Matrix Ap = apply(p);
        const double alpha = rz / (p.array() * Ap.array()).sum();
        X += alpha * p;
        r -= alpha * Ap;
        z = precond.solve(r);
        const double rz_new = (r.array() * z.array()).sum();
        p = z + (rz_new / rz) * p;
        rz = rz_new;
      }
    }
    A.row(n) = Eigen::Map<const Eigen::RowVectorXd>(X.data(), P * Q);
  }
  return A;
}

Matrix initial_coefficients(const ObservationSet& obs, const BasisEvaluations& ev, double lambda2) {
  const Matrix first = ridge_fit(obs, ev, lambda2);
  const Vector sse = observed_sse(obs, reconstruct_field(first, ev, {}));
  Vector penalty(obs.components());
  for (Eigen::Index n = 0; n < obs.components(); ++n) {
    const auto count = obs.observed_count(n);
    const double var = count > 0 ? sse[n] / static_cast<double>(count) : 1.0;
    penalty[n] = 2.0 * var * lambda2;
  }
  try {
    return ridge_fit(obs, ev, penalty);
  } catch (const std::runtime_error&) {
    return first;
  }
}

Matrix build_response(const Matrix& A, const BasisEvaluations& ev, int time_order,
                      const std::vector<SpaceTimePoint>& points) {
  if (ev.psi_operator.size() == 0) throw std::out_of_range("basis evaluations lack g(Psi)");
  const PointEvaluator pe(A, ev);
  const Matrix& phiJ = ev.temporal(time_order);
  Matrix out(ev.theta.rows(), static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) =
        ev.theta * pe.core_values(ev.psi_operator.row(points[i].s), phiJ.row(points[i].t));
  return out;
}

Tensor response_field(const Matrix& A, const BasisEvaluations& ev, int time_order) {
  if (ev.psi_operator.size() == 0) throw std::out_of_range("basis evaluations lack g(Psi)");
  return reconstruct_with(A, ev.psi_operator, ev.temporal(time_order), ev.theta);
}

FullDesign full_design(const Matrix& A, const DiscoveryProblem& prob) {
  const Eigen::Index ST = prob.ev.space() * prob.ev.time();
  std::vector<Eigen::Index> all(static_cast<std::size_t>(ST));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  const StateFields fields(prob.lib, A, prob.ev);
  FullDesign out;
  out.F = design_matrix(prob.lib, fields, prob.cov, all);
  const Tensor Y = response_field(A, prob.ev, prob.time_order);
  out.Y = Eigen::Map<const Matrix>(Y.values().data(), ST, Y.components());
  return out;
}

DesignPass design_pass(const Matrix& A, const DiscoveryProblem& prob,
                       const std::vector<Eigen::Index>& subsample) {
  constexpr Eigen::Index chunk = 4096;
  const Eigen::Index ST = prob.ev.space() * prob.ev.time();
  const Eigen::Index D = static_cast<Eigen::Index>(prob.lib.size());
  const StateFields fields(prob.lib, A, prob.ev);
  const Tensor Yt = response_field(A, prob.ev, prob.time_order);
  const Eigen::Map<const Matrix> Y(Yt.values().data(), ST, Yt.components());
  const Eigen::Index N = Y.cols();

  Matrix gram = Matrix::Zero(D, D);
  Matrix FtY = Matrix::Zero(D, N);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index start = 0; start < ST; start += chunk) {
    const Eigen::Index len = std::min(chunk, ST - start);
    rows.resize(static_cast<std::size_t>(len));
    std::iota(rows.begin(), rows.end(), start);
    const Matrix F = design_matrix(prob.lib, fields, prob.cov, rows);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(F.transpose());
    FtY.noalias() += F.transpose() * Y.middleRows(start, len);
  }
  const Matrix FtF = gram.selfadjointView<Eigen::Lower>();

  DesignPass out;
  for (Eigen::Index c = 0; c < N; ++c)
    out.full.push_back({FtF, FtY.col(c), Y.col(c).squaredNorm(), static_cast<double>(ST)});
  out.F_sub = design_matrix(prob.lib, fields, prob.cov, subsample);
  out.Y_sub = rows_of(Y, subsample);
  return out;
}

Matrix update_gamma(ModelState& state, const Matrix& F, const Matrix& Y, double g, Rng& rng) {
  const Eigen::Index N = Y.cols(), D = F.cols();
  const double n = static_cast<double>(F.rows());
  for (Eigen::Index c = 0; c < N; ++c)
    if (n < static_cast<double>(state.gamma.row(c).cast<int>().sum() + 2))
      throw std::invalid_argument("update_gamma: subsample smaller than active set + 2");
  const Matrix FtF = F.transpose() * F;
  std::vector<RegressionStats> stats(static_cast<std::size_t>(N));
  for (Eigen::Index c = 0; c < N; ++c) {
    stats[static_cast<std::size_t>(c)].FtF = FtF;
    stats[static_cast<std::size_t>(c)].Fty = F.transpose() * Y.col(c);
    stats[static_cast<std::size_t>(c)].yty = Y.col(c).squaredNorm();
    stats[static_cast<std::size_t>(c)].n = n;
  }
  Matrix probs = Matrix::Zero(N, D);
  for (std::size_t idx : rng.permutation(static_cast<std::size_t>(N * D))) {
    const Eigen::Index c = static_cast<Eigen::Index>(idx) / D;
    const Eigen::Index d = static_cast<Eigen::Index>(idx) % D;
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < D; ++j)
      if (j != d && state.gamma(c, j)) out.push_back(j);
    std::vector<Eigen::Index> in = out;
    in.insert(std::lower_bound(in.begin(), in.end(), d), d);
    const auto& st = stats[static_cast<std::size_t>(c)];
    const double rss_in = fit_subset(st, in, g).scale;
    const double rss_out = fit_subset(st, out, g).scale;
    const double p = inclusion_probability(inclusion_ratio(rss_in, rss_out, n, g), state.pi[c]);
    probs(c, d) = p;
    state.gamma(c, d) = rng.bernoulli(p) ? 1 : 0;
  }
  return probs;
}

void update_pi(ModelState& state, const ModelConfig& cfg, Rng& rng) {
  const double D = static_cast<double>(state.gamma.cols());
  for (Eigen::Index n = 0; n < state.gamma.rows(); ++n) {
    const double k = state.gamma.row(n).cast<double>().sum();
    state.pi[n] = rng.beta(cfg.a + k, cfg.b + D - k);
  }
}

void update_M(ModelState& state, const Matrix& F, const Matrix& Y, double g, Rng& rng) {
  update_M(state, stats_per_component(F, Y), g, rng);
}

void update_M(ModelState& state, const std::vector<RegressionStats>& stats, double g, Rng& rng) {
  for (Eigen::Index n = 0; n < static_cast<Eigen::Index>(stats.size()); ++n) {
    state.M.row(n).setZero();
    const auto active = active_set(state.gamma, n);
    if (active.empty()) continue;
    const SubsetFit fit = fit_subset(stats[static_cast<std::size_t>(n)], active, g);
    const Vector draw =
        fit.mean + psd_sqrt(state.sigma2_U[n] * fit.cov) *
                       rng.normal_vector(static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i)
      state.M(n, active[i]) = draw[static_cast<Eigen::Index>(i)];
  }
}

void update_sigma_U(ModelState& state, const Matrix& F, const Matrix& Y, double g,
                    const ModelConfig& cfg, Rng& rng) {
  update_sigma_U(state, stats_per_component(F, Y), g, cfg, rng);
}

void update_sigma_U(ModelState& state, const std::vector<RegressionStats>& stats, double g,
                    const ModelConfig& cfg, Rng& rng) {
  for (Eigen::Index n = 0; n < static_cast<Eigen::Index>(stats.size()); ++n) {
    const RegressionStats& st = stats[static_cast<std::size_t>(n)];
    double scale = fit_subset(st, active_set(state.gamma, n), g).scale;
    if (!(scale > cfg.variance_floor)) {
      warn_limited(variance_warnings, "non-positive process residual scale; flooring");
      scale = cfg.variance_floor;
    }
    state.sigma2_U[n] = std::max(rng.inv_gamma(0.5 * st.n, scale), cfg.variance_floor);
  }
}

Vector observed_sse(const ObservationSet& obs, const Tensor& u) {
  if (u.space() != obs.space() || u.time() != obs.time() || u.components() != obs.components())
    throw DimensionError("observed_sse: field does not match the observations");
  Vector out = Vector::Zero(obs.components());
  for (Eigen::Index n = 0; n < obs.components(); ++n)
    for (Eigen::Index t = 0; t < obs.time(); ++t)
      for (Eigen::Index s = 0; s < obs.space(); ++s) {
        if (!obs.present(s, t, n)) continue;
        const double e = obs.data()(s, t, n) - u(s, t, n);
        out[n] += e * e;
      }
  return out;
}

double data_log_likelihood(const ObservationSet& obs, const Tensor& u, const Vector& sigma2_V) {
  const Vector sse = observed_sse(obs, u);
  double ll = 0.0;
  for (Eigen::Index n = 0; n < obs.components(); ++n) {
    const double k = static_cast<double>(obs.observed_count(n));
    ll -= 0.5 * k * std::log(2.0 * std::numbers::pi * sigma2_V[n]) + 0.5 * sse[n] / sigma2_V[n];
  }
  return ll;
}

void update_sigma_V(ModelState& state, const ObservationSet& obs, const BasisEvaluations& ev,
                    const ModelConfig& cfg, Rng& rng) {
  const Vector sse = observed_sse(obs, reconstruct_field(state.A, ev, {}));
  for (Eigen::Index n = 0; n < obs.components(); ++n) {
    const double shape = 0.5 * (static_cast<double>(obs.observed_count(n)) + cfg.nu_V);
    const double scale = cfg.nu_V / state.a_V[n] + 0.5 * sse[n];
    state.sigma2_V[n] = std::max(rng.inv_gamma(shape, scale), cfg.variance_floor);
    state.a_V[n] = rng.inv_gamma(0.5 * (cfg.nu_V + 1.0),
                                 cfg.nu_V / state.sigma2_V[n] + 1.0 / (cfg.A_V * cfg.A_V));
  }
}

Matrix loss_grad(const ModelState& state, const DiscoveryProblem& prob, const ModelConfig& cfg,
                 const SpaceTimePoint& point) {
  const PointEvaluator pe(state.A, prob.ev);
  std::vector<Matrix> cores(static_cast<std::size_t>(pe.rank()), Matrix::Zero(pe.P(), pe.Q()));
  accumulate_point_grad(state, prob, pe, point, cores, prob.time_order);
  const double ST = static_cast<double>(prob.ev.space() * prob.ev.time());
  return cores_to_matrix(cores, pe.P(), pe.Q()) + prior_grad(state.A, cfg, ST);
}

void update_A(ModelState& state, const DiscoveryProblem& prob, const ModelConfig& cfg,
              const std::vector<Eigen::Index>& minibatch) {
  if (minibatch.empty()) return;
  const Eigen::Index S = prob.ev.space();
  const PointEvaluator pe(state.A, prob.ev);
  std::vector<Matrix> cores(static_cast<std::size_t>(pe.rank()), Matrix::Zero(pe.P(), pe.Q()));
  for (Eigen::Index flat : minibatch)
    accumulate_point_grad(state, prob, pe, {flat % S, flat / S}, cores, prob.time_order);
  const double ST = static_cast<double>(S * prob.ev.time());
  const Matrix mean_grad = cores_to_matrix(cores, pe.P(), pe.Q()) /
                               static_cast<double>(minibatch.size()) +
                           prior_grad(state.A, cfg, ST);
  for (Eigen::Index r = 0; r < state.A.rows(); ++r) {
    const double k = cfg.kappa_for(r);
    if (k != 0.0) state.A.row(r) -= k * mean_grad.row(r);
  }
}

void update_A(ModelState& state, const DiscoveryProblem& prob, const ModelConfig& cfg, Rng& rng) {
  const Eigen::Index ST = prob.ev.space() * prob.ev.time();
  const Eigen::Index k = std::min<Eigen::Index>(cfg.minibatch, ST);
  update_A(state, prob, cfg, rng.sample_without_replacement(ST, k));
}

ModelState init_state(const DiscoveryProblem& prob, const ModelConfig& cfg, Rng& rng) {
  const Eigen::Index N = prob.obs.components();
  const Eigen::Index D = static_cast<Eigen::Index>(prob.lib.size());
  const double ST = static_cast<double>(prob.obs.space() * prob.obs.time());
  ModelState st;
  const Matrix fit = initial_coefficients(prob.obs, prob.ev, cfg.lambda2);
  st.A = prob.ev.theta.isIdentity() ? fit : Matrix(prob.ev.theta.completeOrthogonalDecomposition().solve(fit));
  st.gamma = IndicatorMatrix::Ones(N, D);
  st.pi = Vector::Constant(N, cfg.a / (cfg.a + cfg.b));
  st.M = Matrix::Zero(N, D);
  st.sigma2_U = Vector::Ones(N);
  st.sigma2_V = Vector::Ones(N);
  st.a_V = Vector::Ones(N);

  const DesignPass design = design_pass(st.A, prob, {});
  const double g = cfg.g > 0.0 ? cfg.g : ST;
  for (Eigen::Index n = 0; n < N; ++n) {
    const SubsetFit f = fit_subset(design.full[static_cast<std::size_t>(n)], active_set(st.gamma, n), g);
    st.sigma2_U[n] = std::max(2.0 * f.scale / ST, cfg.variance_floor);
  }
  update_M(st, design.full, g, rng);

  const Vector sse = observed_sse(prob.obs, reconstruct_field(st.A, prob.ev, {}));
  for (Eigen::Index n = 0; n < N; ++n) {
    const auto count = prob.obs.observed_count(n);
    st.sigma2_V[n] = std::max(count > 0 ? sse[n] / static_cast<double>(count) : 1.0, cfg.variance_floor);
    // mode of the auxiliary's conditional given the initial variance
    st.a_V[n] = (cfg.nu_V / st.sigma2_V[n] + 1.0 / (cfg.A_V * cfg.A_V)) / (0.5 * (cfg.nu_V + 1.0) + 1.0);
  }
  return st;
}

ModelState init_state(const DiscoveryProblem& prob, const ModelConfig& cfg) {
  Rng rng(cfg.seed);
  return init_state(prob, cfg, rng);
}

int effective_subsample(const DiscoveryProblem& prob, const ModelConfig& cfg) {
  const Eigen::Index ST = prob.ev.space() * prob.ev.time();
  const int D = static_cast<int>(prob.lib.size());
  int n = cfg.subsample > 0
              ? cfg.subsample
              : subsample_size(cfg.g > 0.0 ? cfg.g : static_cast<double>(ST), cfg.beta_rss, 1.0, D + 2);
  return static_cast<int>(std::min<Eigen::Index>(n, ST));
}

ChainSamples run_chain(const DiscoveryProblem& prob, const ModelConfig& cfg) {
  cfg.validate(static_cast<int>(prob.obs.components()));
  if (prob.ev.space() != prob.obs.space() || prob.ev.time() != prob.obs.time())
    throw DimensionError("bases do not cover the observation grid");
  ChainSamples out;
  out.burn_in = cfg.burn_in;
  if (cfg.iterations == 0) return out;

  Rng rng(cfg.seed);
  ModelState state = init_state(prob, cfg, rng);
  const Eigen::Index ST = prob.ev.space() * prob.ev.time();
  const int n_star = effective_subsample(prob, cfg);
  out.subsample_size = n_star;
  const double g_full = cfg.g > 0.0 ? cfg.g : static_cast<double>(ST);
  const double g_sub = cfg.subsample_g ? static_cast<double>(n_star) : g_full;
  const Eigen::Index batch = std::min<Eigen::Index>(cfg.minibatch, ST);

  for (int it = 0; it < cfg.iterations; ++it) {
    try {
      const auto minibatch = rng.sample_without_replacement(ST, batch);
      const auto sub = rng.sample_without_replacement(ST, n_star);
      const DesignPass design = design_pass(state.A, prob, sub);
      update_gamma(state, design.F_sub, design.Y_sub, g_sub, rng);
      update_pi(state, cfg, rng);
      update_M(state, design.full, g_full, rng);
      update_sigma_U(state, design.full, g_full, cfg, rng);
      update_sigma_V(state, prob.obs, prob.ev, cfg, rng);
      update_A(state, prob, cfg, minibatch);
      if (!state.A.allFinite()) throw std::runtime_error("basis coefficients diverged (non-finite A)");
    } catch (const SamplerError&) {
      throw;
    } catch (const std::exception& e) {
      throw SamplerError(it, e.what());
    }
    out.M.push_back(state.M);
    out.gamma.push_back(state.gamma);
    out.pi.push_back(state.pi);
    out.sigma2_U.push_back(state.sigma2_U);
    out.sigma2_V.push_back(state.sigma2_V);
    if (cfg.record_A_every > 0 && (it + 1) % cfg.record_A_every == 0) out.A.emplace_back(it, state.A);
    if ((it + 1) % 500 == 0) log_info("iteration " + std::to_string(it + 1) + "/" + std::to_string(cfg.iterations));
  }
  return out;
}

}  // namespace bayespde
