#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bayespde/basis.hpp"
#include "bayespde/library.hpp"
#include "bayespde/random.hpp"
#include "bayespde/tensor.hpp"

namespace bayespde {

using IndicatorMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Gridded observations with a presence mask; masked entries are never read.
class ObservationSet {
 public:
  ObservationSet() = default;
  /// All entries present.
  explicit ObservationSet(Tensor data);
  /// mask(s,t,n) != 0 marks a present entry; absent entries are zeroed in storage.
  ObservationSet(Tensor data, std::vector<std::uint8_t> mask);

  const Tensor& data() const { return data_; }
  bool present(Eigen::Index s, Eigen::Index t, Eigen::Index n) const {
    return mask_[static_cast<std::size_t>(data_.flat_index(s, t, n))] != 0;
  }
  bool present_flat(Eigen::Index flat) const { return mask_[static_cast<std::size_t>(flat)] != 0; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  /// L(s,t): present components at a space-time point.
  int present_count(Eigen::Index s, Eigen::Index t) const;
  Eigen::Index observed_count(Eigen::Index n) const;
  Eigen::Index missing_count() const;
  Eigen::Index space() const { return data_.space(); }
  Eigen::Index time() const { return data_.time(); }
  Eigen::Index components() const { return data_.components(); }

 private:
  Tensor data_;
  std::vector<std::uint8_t> mask_;
};

struct ModelConfig {
  double g = 0.0;               // g-prior scale for full-data steps; 0 means S*T
  bool subsample_g = true;      // use g = n* inside the inclusion update
  double a = 1.0;               // Beta prior on pi
  double b = 1.0;
  double lambda1 = 0.01;        // elastic net on A
  double lambda2 = 0.01;
  std::vector<double> kappa{1e-4};  // learning rate per component (one value broadcasts)
  int minibatch = 100;
  int iterations = 5000;
  int burn_in = 2500;
  double beta_rss = 0.9;        // hypothetical RSS ratio used to size the subsample
  int subsample = 0;            // explicit subsample size; 0 derives it from beta_rss
  double nu_V = 2.0;            // Half-t hyperparameters for measurement variances
  double A_V = 1e5;
  std::uint64_t seed = 1;
  double inclusion_threshold = 0.5;
  int record_A_every = 0;       // 0 keeps no A snapshots
  double variance_floor = 1e-12;

  void validate(int components) const;
  double kappa_for(Eigen::Index n) const;
};

struct ModelState {
  Matrix A;                 // R x P*Q
  Matrix M;                 // N x D
  IndicatorMatrix gamma;    // N x D
  Vector pi;                // N
  Vector sigma2_U;          // N
  Vector sigma2_V;          // N
  Vector a_V;               // N
};

struct ChainSamples {
  std::vector<Matrix> M;
  std::vector<IndicatorMatrix> gamma;
  std::vector<Vector> pi;
  std::vector<Vector> sigma2_U;
  std::vector<Vector> sigma2_V;
  std::vector<std::pair<int, Matrix>> A;  // (iteration, snapshot)
  int burn_in = 0;
  int subsample_size = 0;

  std::size_t size() const { return M.size(); }
  bool operator==(const ChainSamples&) const = default;
};

class SamplerError : public std::runtime_error {
 public:
  SamplerError(int iteration, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Everything fixed during sampling. References must outlive the problem.
struct DiscoveryProblem {
  const ObservationSet& obs;
  const BasisEvaluations& ev;
  const FeatureLibrary& lib;
  const CovariateField& cov;
  int time_order = 1;  // J: the LHS is g(d^J u / dt^J)
};

/// Required derivative specs for a library plus the LHS temporal order.
std::vector<DerivSpec> required_derivatives(const FeatureLibrary& lib, int time_order);

/// Sufficient statistics of a regression of y on F restricted to subsets of columns.
struct RegressionStats {
  Matrix FtF;
  Vector Fty;
  double yty = 0.0;
  double n = 0.0;

  static RegressionStats from(const Matrix& F, const Vector& y);
};

struct SubsetFit {
  std::vector<Eigen::Index> active;
  Vector mean;    // g_gamma
  Matrix cov;     // G_gamma
  double scale;   // (y'y - g_gamma' G^{-1} g_gamma) / 2
};

/// g-prior posterior quantities for the active columns.
SubsetFit fit_subset(const RegressionStats& stats, const std::vector<Eigen::Index>& active,
                     double g);

/// Ratio p(data | gamma_d = 0) / p(data | gamma_d = 1) with the RSS exponent n/2 - 1.
double inclusion_ratio(double rss_in, double rss_out, double n, double g);
/// p(gamma = 1 | .) = 1 / (1 + R (1 - pi)/pi).
double inclusion_probability(double ratio, double pi);

/// Ridge fit of each observed component onto the order-0 bases.
Matrix ridge_fit(const ObservationSet& obs, const BasisEvaluations& ev, double penalty);
/// Per-component penalties.
Matrix ridge_fit(const ObservationSet& obs, const BasisEvaluations& ev, const Vector& penalty);
/// Posterior mode of A under the observation model alone: a first ridge pass estimates
/// sigma2_V, then the fit is repeated with penalty 2 sigma2_V lambda2.
Matrix initial_coefficients(const ObservationSet& obs, const BasisEvaluations& ev, double lambda2);

ModelState init_state(const DiscoveryProblem& prob, const ModelConfig& cfg);
/// Same, drawing the initial M from an existing stream.
ModelState init_state(const DiscoveryProblem& prob, const ModelConfig& cfg, Rng& rng);

/// N x |points| LHS response Theta A (phi^(J)(t) (x) g(psi(s)))'.
Matrix build_response(const Matrix& A, const BasisEvaluations& ev, int time_order,
                      const std::vector<SpaceTimePoint>& points);
/// Full-grid LHS response as an S x T x N tensor.
Tensor response_field(const Matrix& A, const BasisEvaluations& ev, int time_order);

/// Random-scan single-site update of gamma on a subsampled design F (n* x D) with
/// responses Y (n* x N). Returns the per-site inclusion probabilities it used.
Matrix update_gamma(ModelState& state, const Matrix& F, const Matrix& Y, double g, Rng& rng);
void update_pi(ModelState& state, const ModelConfig& cfg, Rng& rng);
void update_M(ModelState& state, const Matrix& F, const Matrix& Y, double g, Rng& rng);
/// Same draw from precomputed statistics, one per component.
void update_M(ModelState& state, const std::vector<RegressionStats>& stats, double g, Rng& rng);
void update_sigma_U(ModelState& state, const Matrix& F, const Matrix& Y, double g,
                    const ModelConfig& cfg, Rng& rng);
void update_sigma_U(ModelState& state, const std::vector<RegressionStats>& stats, double g,
                    const ModelConfig& cfg, Rng& rng);
void update_sigma_V(ModelState& state, const ObservationSet& obs, const BasisEvaluations& ev,
                    const ModelConfig& cfg, Rng& rng);

/// Per-component sum of squared residuals over observed entries.
Vector observed_sse(const ObservationSet& obs, const Tensor& u);
/// Gaussian measurement log-likelihood of the observed entries given the field u.
double data_log_likelihood(const ObservationSet& obs, const Tensor& u, const Vector& sigma2_V);

/// Gradient of the per-point negative log posterior with respect to A.
Matrix loss_grad(const ModelState& state, const DiscoveryProblem& prob, const ModelConfig& cfg,
                 const SpaceTimePoint& point);

/// One constant-learning-rate stochastic gradient step on a fresh minibatch.
void update_A(ModelState& state, const DiscoveryProblem& prob, const ModelConfig& cfg, Rng& rng);
/// Same step on a given minibatch.
void update_A(ModelState& state, const DiscoveryProblem& prob, const ModelConfig& cfg,
              const std::vector<Eigen::Index>& minibatch);

/// Full-data design (S*T x D) and response (S*T x N) for the current A.
struct FullDesign {
  Matrix F;
  Matrix Y;
};
FullDesign full_design(const Matrix& A, const DiscoveryProblem& prob);

/// Full-data regression statistics per component and the design/response rows at
/// `subsample`, accumulated over chunks of grid points without storing the full design.
struct DesignPass {
  std::vector<RegressionStats> full;
  Matrix F_sub;
  Matrix Y_sub;
};
DesignPass design_pass(const Matrix& A, const DiscoveryProblem& prob,
                       const std::vector<Eigen::Index>& subsample);

/// Subsample size used by the inclusion update for this problem and config.
int effective_subsample(const DiscoveryProblem& prob, const ModelConfig& cfg);

ChainSamples run_chain(const DiscoveryProblem& prob, const ModelConfig& cfg);

}  // namespace bayespde
