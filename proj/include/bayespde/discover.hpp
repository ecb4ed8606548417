#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bayespde/basis.hpp"
#include "bayespde/dataset.hpp"
#include "bayespde/diagnostics.hpp"
#include "bayespde/io.hpp"
#include "bayespde/library.hpp"
#include "bayespde/sampler.hpp"

namespace bayespde {

/// Bases, library and observations for one dataset, owned together so a
/// DiscoveryProblem can reference them.
struct DiscoverySetup {
  FeatureLibrary lib;
  ObservationSet obs;
  CovariateField cov;
  SpatialBasis space;
  TemporalBasis time;
  BasisEvaluations ev;
  int time_order = 1;
  OperatorSpec op;

  DiscoveryProblem problem() const { return {obs, ev, lib, cov, time_order}; }
  /// "u_t", or "u_xx_t + u_yy_t" style for an operator LHS.
  std::vector<std::string> lhs() const;
};

FeatureLibrary build_library(const RunConfig& cfg, const GridDataset& data);

DiscoverySetup make_setup(const RunConfig& cfg, const GridDataset& data,
                          const std::vector<GridDataset>& covariates = {});

struct Precheck {
  double condition = 0.0;
  double beta = 0.0;
  int subsample = 0;
};

/// Condition number of the library at the ridge initialization, the RSS ratio beta
/// it implies (unless configured) and the resulting subsample size.
Precheck precheck(const DiscoverySetup& setup, const RunConfig& cfg);

struct DiscoveryRun {
  Precheck pre;
  ModelConfig model;
  ChainSamples samples;
  ChainInfo info;
  DiscoverySummary summary;
};

DiscoveryRun run_discovery(const DiscoverySetup& setup, const RunConfig& cfg);

}  // namespace bayespde
