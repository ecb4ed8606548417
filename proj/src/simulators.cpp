#include "bayespde/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace bayespde {

Eigen::Index GridDataset::missing_count() const {
  return std::count(mask.begin(), mask.end(), std::uint8_t{0});
}

void GridDataset::validate() const {
  const Eigen::Index S = is_2d() ? x.size() * y.size() : x.size();
  if (values.space() != S) throw DimensionError("spatial coordinates do not match S");
  if (values.time() != t.size()) throw DimensionError("time coordinates do not match T");
  if (static_cast<Eigen::Index>(components.size()) != values.components())
    throw DimensionError("component names do not match N");
  if (mask.size() != static_cast<std::size_t>(values.size()))
    throw DimensionError("mask length does not match values");
  auto increasing = [](const Vector& v) {
    for (Eigen::Index i = 1; i < v.size(); ++i)
      if (!(v[i] > v[i - 1])) return false;
    return true;
  };
  if (!increasing(x) || !increasing(y) || !increasing(t))
    throw DimensionError("coordinates must be strictly increasing");
}

GridDataset make_dataset(Tensor values, Vector x, Vector y, Vector t,
                         std::vector<std::string> components) {
  GridDataset d;
  d.mask.assign(static_cast<std::size_t>(values.size()), 1);
  d.values = std::move(values);
  d.x = std::move(x);
  d.y = std::move(y);
  d.t = std::move(t);
  d.components = std::move(components);
  d.validate();
  return d;
}

namespace {

using Rhs = std::function<void(const Vector&, Vector&)>;

int steps_per_output(double t_end, int outputs, double dt) {
  if (outputs < 2) throw std::invalid_argument("need at least 2 output times");
  if (!(dt > 0.0)) throw std::invalid_argument("internal step must be positive");
  const double out_dt = t_end / (outputs - 1);
  const double ratio = out_dt / dt;
  const long k = std::lround(ratio);
  if (k < 1 || std::fabs(ratio - static_cast<double>(k)) > 1e-9 * ratio)
    throw std::invalid_argument("output spacing must be a whole number of internal steps");
  return static_cast<int>(k);
}

void rk4_step(const Rhs& f, Vector& u, double dt, Vector& k1, Vector& k2, Vector& k3,
              Vector& k4, Vector& tmp) {
  f(u, k1);
  tmp = u + 0.5 * dt * k1;
  f(tmp, k2);
  tmp = u + 0.5 * dt * k2;
  f(tmp, k3);
  tmp = u + dt * k3;
  f(tmp, k4);
  u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Integrates and stores every output; `check` may throw to abort.
Matrix integrate(const Rhs& f, Vector u, double t_end, int outputs, double dt,
                 const std::function<void(const Vector&, long)>& check) {
  const int k = steps_per_output(t_end, outputs, dt);
  const double h = t_end / (outputs - 1) / k;
  Matrix out(u.size(), outputs);
  out.col(0) = u;
  Vector k1(u.size()), k2(u.size()), k3(u.size()), k4(u.size()), tmp(u.size());
  long step = 0;
  for (int o = 1; o < outputs; ++o) {
    for (int i = 0; i < k; ++i) {
      rk4_step(f, u, h, k1, k2, k3, k4, tmp);
      ++step;
      if (!u.allFinite() || u.cwiseAbs().maxCoeff() > 1e8)
        throw SimulationError(step, "solution blew up");
    }
    check(u, step);
    out.col(o) = u;
  }
  return out;
}

Vector linspace(double lo, double hi, int n) { return Vector::LinSpaced(n, lo, hi); }

// Second difference along one axis of an nx x ny field (x fastest).
// odd = true mirrors with a sign flip about each end node under Boundary::Reflect.
void add_second_difference(const Vector& u, Vector& out, int nx, int ny, bool along_x, Boundary bc,
                           bool odd, double scale) {
  const int n = along_x ? nx : ny;
  const double sign = odd ? -1.0 : 1.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int k = along_x ? i : j;
      auto at = [&](int m) {
        return along_x ? u[j * nx + m] : u[m * nx + i];
      };
      const double c = at(k);
      double lo = 0.0, hi = 0.0;
      switch (bc) {
        case Boundary::Reflect:
          lo = k > 0 ? at(k - 1) : sign * at(1) + (odd ? 2.0 * c : 0.0);
          hi = k < n - 1 ? at(k + 1) : sign * at(n - 2) + (odd ? 2.0 * c : 0.0);
          break;
        case Boundary::Periodic:
          lo = at(k > 0 ? k - 1 : n - 1);
          hi = at(k < n - 1 ? k + 1 : 0);
          break;
        case Boundary::Fixed:
          if (k == 0 || k == n - 1) continue;
          lo = at(k - 1);
          hi = at(k + 1);
          break;
      }
      out[j * nx + i] += scale * (lo - 2.0 * c + hi);
    }
}

// Zero the tendency on edge nodes for Boundary::Fixed.
void hold_edges(Vector& du, int n, int offset) {
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (i == 0 || j == 0 || i == n - 1 || j == n - 1) du[offset + j * n + i] = 0.0;
}

}  // namespace

GridDataset simulate_burgers(const BurgersSpec& spec) {
  if (spec.points < 4 || spec.points % 2) throw std::invalid_argument("Burgers grid must be even and >= 4");
  if (!(spec.hi > spec.lo)) throw std::invalid_argument("Burgers domain is empty");
  if (spec.nu < 0.0) throw std::invalid_argument("viscosity must be >= 0");
  const int n = spec.points;
  const double L = spec.hi - spec.lo;
  const double h = L / n;
  Vector x(n);
  for (int i = 0; i < n; ++i) x[i] = spec.lo + i * h;

  std::vector<double> wave(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int m = j <= n / 2 ? j : j - n;
    wave[static_cast<std::size_t>(j)] = 2.0 * std::numbers::pi * m / L;
  }
  const double kmax = 2.0 * std::numbers::pi * (n / 2) / L;
  if (spec.dt * spec.nu * kmax * kmax > 2.5)
    throw std::invalid_argument("internal step violates the diffusive stability bound");

  Eigen::FFT<double> fft;
  std::vector<double> phys(static_cast<std::size_t>(n)), sq(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> uhat, qhat, rhs_hat(static_cast<std::size_t>(n));
  const Rhs f = [&](const Vector& u, Vector& du) {
    for (int i = 0; i < n; ++i) {
      phys[static_cast<std::size_t>(i)] = u[i];
      sq[static_cast<std::size_t>(i)] = 0.5 * u[i] * u[i];
    }
    fft.fwd(uhat, phys);
    fft.fwd(qhat, sq);
    for (int j = 0; j < n; ++j) {
      const auto js = static_cast<std::size_t>(j);
      const double k = wave[js];
      const std::complex<double> ik = j == n / 2 ? 0.0 : std::complex<double>(0.0, k);
      rhs_hat[js] = -ik * qhat[js] - spec.nu * k * k * uhat[js];
    }
    fft.inv(phys, rhs_hat);
    for (int i = 0; i < n; ++i) du[i] = phys[static_cast<std::size_t>(i)];
  };

  Vector u0(n);
  for (int i = 0; i < n; ++i) u0[i] = std::exp(-(x[i] + spec.shift) * (x[i] + spec.shift));
  const Matrix out = integrate(f, u0, spec.t_end, spec.outputs, spec.dt, [](const Vector&, long) {});
  Tensor values(n, spec.outputs, 1);
  values.slice(0) = out;
  return make_dataset(std::move(values), x, Vector(), linspace(0.0, spec.t_end, spec.outputs), {"u"});
}

GridDataset simulate_heat2d(const HeatSpec& spec) {
  if (spec.points < 3) throw std::invalid_argument("heat grid needs >= 3 points per axis");
  const int n = spec.points;
  const double h = spec.length / (n - 1);
  if (spec.dt > h * h / (4.0 * spec.alpha))
    throw std::invalid_argument("internal step violates dt <= h^2 / (4 alpha)");
  const Vector x = linspace(0.0, spec.length, n);
  const double w = 2.0 * std::numbers::pi / (2.0 * spec.length);
  Vector u0(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) u0[j * n + i] = std::sin(w * x[i]) * std::cos(w * x[j]);
  const double scale = spec.alpha / (h * h);
  const Rhs f = [&](const Vector& u, Vector& du) {
    du.setZero();
    add_second_difference(u, du, n, n, true, spec.boundary, true, scale);
    add_second_difference(u, du, n, n, false, spec.boundary, false, scale);
    if (spec.boundary == Boundary::Fixed) hold_edges(du, n, 0);
  };
  const double bound = u0.cwiseAbs().maxCoeff() + 1e-10;
  const Matrix out = integrate(f, u0, spec.t_end, spec.outputs, spec.dt, [&](const Vector& u, long step) {
    if (u.cwiseAbs().maxCoeff() > bound) throw SimulationError(step, "maximum principle violated");
  });
  Tensor values(n * n, spec.outputs, 1);
  values.slice(0) = out;
  return make_dataset(std::move(values), x, x, linspace(0.0, spec.t_end, spec.outputs), {"u"});
}

GridDataset simulate_reaction_diffusion(const ReactionDiffusionSpec& spec) {
  if (spec.points < 3) throw std::invalid_argument("grid needs >= 3 points per axis");
  if (spec.diff_u < 0.0 || spec.diff_v < 0.0) throw std::invalid_argument("diffusivities must be >= 0");
  const int n = spec.points;
  const int S = n * n;
  const double h = (spec.hi - spec.lo) / (n - 1);
  const double dmax = std::max(spec.diff_u, spec.diff_v);
  if (spec.dt * dmax * 8.0 / (h * h) > 2.5)
    throw std::invalid_argument("internal step violates the diffusive stability bound");
  const Vector x = linspace(spec.lo, spec.hi, n);
  const double pi = std::numbers::pi;
  Vector z0(2 * S);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double xi = x[i], yj = x[j];
      z0[j * n + i] = spec.uniform_initial
                          ? spec.u0
                          : std::exp(std::cos(2 * pi * xi / 15) * std::sin(2 * pi * yj / 15));
      z0[S + j * n + i] =
          spec.uniform_initial
              ? spec.v0
              : 0.1 * std::exp(std::cos(2 * pi * yj / 30) * std::sin(2 * pi * xi / 30 - 5));
    }
  Vector lap(S);
  const Rhs f = [&](const Vector& z, Vector& dz) {
    const auto u = z.head(S);
    const auto v = z.tail(S);
    dz.head(S) = spec.gamma0 * u - (spec.gamma0 / spec.gamma1) * u.cwiseProduct(u) -
                 spec.beta * u.cwiseProduct(v);
    dz.tail(S) = spec.mu * u.cwiseProduct(v) - spec.eta * v;
    for (int c = 0; c < 2; ++c) {
      const double d = c == 0 ? spec.diff_u : spec.diff_v;
      if (d == 0.0) continue;
      const Vector comp = z.segment(c * S, S);
      lap.setZero();
      add_second_difference(comp, lap, n, n, true, spec.boundary, false, d / (h * h));
      add_second_difference(comp, lap, n, n, false, spec.boundary, false, d / (h * h));
      dz.segment(c * S, S) += lap;
    }
    if (spec.boundary == Boundary::Fixed) {
      hold_edges(dz, n, 0);
      hold_edges(dz, n, S);
    }
  };
  const Matrix out = integrate(f, z0, spec.t_end, spec.outputs, spec.dt, [](const Vector& z, long step) {
    if (z.minCoeff() < 0.0) throw SimulationError(step, "negative density");
  });
  Tensor values(S, spec.outputs, 2);
  values.slice(0) = out.topRows(S);
  values.slice(1) = out.bottomRows(S);
  return make_dataset(std::move(values), x, x, linspace(0.0, spec.t_end, spec.outputs), {"u", "v"});
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string true_equation(const BurgersSpec& spec) { return "u_t = -1 u u_x + " + num(spec.nu) + " u_xx"; }

std::string true_equation(const HeatSpec& spec) {
  return "u_t = " + num(spec.alpha) + " u_xx + " + num(spec.alpha) + " u_yy";
}

std::string true_equation(const ReactionDiffusionSpec& spec) {
  return "u_t = " + num(spec.gamma0) + " u - " + num(spec.gamma0 / spec.gamma1) + " u^2 - " +
         num(spec.beta) + " u v + " + num(spec.diff_u) + " u_xx + " + num(spec.diff_u) +
         " u_yy\nv_t = -" + num(spec.eta) + " v + " + num(spec.mu) + " u v + " + num(spec.diff_v) +
         " v_xx + " + num(spec.diff_v) + " v_yy";
}

GridDataset add_noise(const GridDataset& data, double zeta, bool per_component, Rng& rng) {
  if (zeta < 0.0) throw std::invalid_argument("noise fraction must be >= 0");
  GridDataset out = data;
  if (zeta == 0.0) return out;
  const Tensor& u = data.values;
  const Eigen::Index block = u.space() * u.time();
  auto sd = [&](Eigen::Index first, Eigen::Index count) {
    double sum = 0.0, sum2 = 0.0;
    Eigen::Index m = 0;
    for (Eigen::Index i = first; i < first + count; ++i) {
      if (!data.mask[static_cast<std::size_t>(i)]) continue;
      sum += u.values()[i];
      sum2 += u.values()[i] * u.values()[i];
      ++m;
    }
    if (m < 2) return 0.0;
    const double mean = sum / static_cast<double>(m);
    return std::sqrt(std::max(0.0, (sum2 - static_cast<double>(m) * mean * mean) / static_cast<double>(m - 1)));
  };
  const double global = sd(0, u.size());
  for (Eigen::Index n = 0; n < u.components(); ++n) {
    const double sigma = per_component ? sd(n * block, block) : global;
    for (Eigen::Index i = n * block; i < (n + 1) * block; ++i) {
      const double e = rng.normal();
      if (data.mask[static_cast<std::size_t>(i)]) out.values.values()[i] += zeta * sigma * e;
    }
  }
  return out;
}

GridDataset apply_missingness(const GridDataset& data, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("missing fraction must lie in [0, 1)");
  GridDataset out = data;
  for (std::size_t i = 0; i < out.mask.size(); ++i) {
    const bool drop = rng.uniform() < fraction;
    if (drop) out.mask[i] = 0;
  }
  return out;
}

}  // namespace bayespde
