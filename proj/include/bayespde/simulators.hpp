#pragma once

#include <stdexcept>
#include <string>

#include "bayespde/dataset.hpp"
#include "bayespde/random.hpp"

namespace bayespde {

class SimulationError : public std::runtime_error {
 public:
  SimulationError(long step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// u_t = -u u_x + nu u_xx on a periodic interval, pseudo-spectral in space, RK4 in time.
struct BurgersSpec {
  int points = 256;
  double lo = -8.0;
  double hi = 8.0;  // periodic; hi itself is not a grid node
  double t_end = 10.0;
  int outputs = 101;
  double nu = 0.1;
  double dt = 1e-3;
  double shift = 2.0;  // u(x, 0) = exp(-(x + shift)^2)
};

/// Edge treatment of the 2D finite-difference grids. Reflect mirrors about the edge node
/// (odd in x, even in y for heat; even for reaction-diffusion), Periodic wraps the
/// first and last nodes as neighbours, Fixed holds edge nodes at their initial values.
enum class Boundary { Reflect, Periodic, Fixed };

/// u_t = alpha (u_xx + u_yy) on [0, L]^2 from sin(2 pi x / 2L) cos(2 pi y / 2L).
/// Reflection (odd in x, even in y) keeps the initial mode exact.
struct HeatSpec {
  int points = 41;
  double length = 20.0;
  double t_end = 2.0;
  int outputs = 201;
  double alpha = 1.0;
  double dt = 0.01;
  Boundary boundary = Boundary::Periodic;
};

/// Diffusive predator-prey system with prey carrying capacity.
struct ReactionDiffusionSpec {
  int points = 41;
  double lo = -10.0;
  double hi = 10.0;
  double t_end = 10.0;
  int outputs = 101;
  double dt = 0.01;
  double diff_u = 0.1;
  double diff_v = 0.1;
  double gamma0 = 0.4;
  double gamma1 = 1.5;
  double beta = 0.5;
  double mu = 0.3;
  double eta = 0.1;
  bool uniform_initial = false;  // constant fields u0, v0 instead of the patterned ones
  double u0 = 1.0;
  double v0 = 0.1;
  Boundary boundary = Boundary::Reflect;  // zero flux
};

GridDataset simulate_burgers(const BurgersSpec& spec = {});
GridDataset simulate_heat2d(const HeatSpec& spec = {});
GridDataset simulate_reaction_diffusion(const ReactionDiffusionSpec& spec = {});

std::string true_equation(const BurgersSpec& spec);
std::string true_equation(const HeatSpec& spec);
std::string true_equation(const ReactionDiffusionSpec& spec);

/// v = u + zeta * sigma * eps with sigma the empirical sd of the field (per component
/// when per_component is set). Only present entries are perturbed.
GridDataset add_noise(const GridDataset& data, double zeta, bool per_component, Rng& rng);

/// Masks each entry independently with probability `fraction`.
GridDataset apply_missingness(const GridDataset& data, double fraction, Rng& rng);

}  // namespace bayespde
