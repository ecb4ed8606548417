#include "bayespde/discover.hpp"

#include <cmath>

#include "bayespde/log.hpp"

namespace bayespde {

std::vector<std::string> DiscoverySetup::lhs() const {
  std::vector<std::string> out;
  const std::string t(static_cast<std::size_t>(time_order), 't');
  for (const std::string& c : lib.component_names()) {
    if (op.is_identity()) {
      out.push_back(c + "_" + t);
      continue;
    }
    std::string s;
    for (const auto& [coef, d] : op.terms) {
      const std::string name = c + "_" + suffix(d) + t;
      if (!s.empty()) s += coef < 0 ? " - " : " + ";
      else if (coef < 0) s += "-";
      if (std::fabs(coef) != 1.0) s += format_coefficient(std::fabs(coef)) + " ";
      s += name;
    }
    out.push_back("(" + s + ")");
  }
  return out;
}

FeatureLibrary build_library(const RunConfig& cfg, const GridDataset& data) {
  std::vector<std::string> covs;
  for (const auto& c : cfg.covariates) covs.push_back(c.name);
  if (cfg.auto_library) {
    const auto& a = *cfg.auto_library;
    return standard_poly_deriv_library(data.components, a.max_power, a.derivs, covs, a.options);
  }
  FeatureLibrary lib(data.components, covs);
  for (std::size_t i = 0; i < cfg.library.size(); ++i) {
    try {
      lib.add(cfg.library[i]);
    } catch (const TermParseError& e) {
      throw ConfigError("model.library[" + std::to_string(i) + "]",
                        std::string(e.what()) + " at column " + std::to_string(e.position() + 1));
    } catch (const LibraryError& e) {
      throw ConfigError("model.library[" + std::to_string(i) + "]", e.what());
    }
  }
  return lib;
}

DiscoverySetup make_setup(const RunConfig& cfg, const GridDataset& data,
                          const std::vector<GridDataset>& covariates) {
  data.validate();
  DiscoverySetup st{build_library(cfg, data), ObservationSet(data.values, data.mask), Tensor(),
                    {}, {}, {}, cfg.time_order, cfg.op};
  if (covariates.size() != cfg.covariates.size())
    throw std::invalid_argument("covariate files do not match the config");
  const Eigen::Index S = data.values.space(), T = data.values.time();
  st.cov = Tensor(S, T, static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t k = 0; k < covariates.size(); ++k) {
    const Tensor& c = covariates[k].values;
    if (c.space() != S || c.time() != T || c.components() != 1)
      throw ConfigError("data.covariates[" + std::to_string(k) + "]",
                        "must be a single-component field on the dataset grid");
    if (covariates[k].missing_count() > 0)
      throw ConfigError("data.covariates[" + std::to_string(k) + "]", "covariates must be complete");
    st.cov.slice(static_cast<Eigen::Index>(k)) = c.slice(0);
  }

  int max_space = cfg.op.max_order(), max_y = 0, max_x = 0;
  for (const DerivSpec& d : st.lib.required_derivatives()) {
    max_space = std::max(max_space, d.spatial_order());
    max_x = std::max(max_x, d.dx);
    max_y = std::max(max_y, d.dy);
    if (d.dt > 0) throw ConfigError("model.library", "temporal derivatives are not supported in the library");
  }
  if (!data.is_2d() && max_y > 0) throw ConfigError("model.library", "y derivative on 1D data");
  const int sdeg = cfg.space_degree > 0 ? cfg.space_degree : default_degree(max_space);
  const int tdeg = cfg.time_degree > 0 ? cfg.time_degree : default_degree(cfg.time_order);
  if (sdeg < max_space) throw ConfigError("basis.space_degree", "must be at least the highest spatial derivative order");
  if (tdeg < cfg.time_order) throw ConfigError("basis.time_degree", "must be at least model.time_order");

  try {
    if (data.is_2d()) {
      int px = cfg.space_count[0], py = cfg.space_count[0];
      if (cfg.space_count.size() == 2) {
        py = cfg.space_count[1];
      } else {
        const int r = static_cast<int>(std::lround(std::sqrt(double(cfg.space_count[0]))));
        if (r * r != cfg.space_count[0])
          throw ConfigError("basis.space", "a single count on 2D data must be a perfect square");
        px = py = r;
      }
      st.space = make_spatial_basis_2d(data.x, data.y, px, py, sdeg);
    } else {
      if (cfg.space_count.size() != 1) throw ConfigError("basis.space", "1D data takes a single count");
      st.space = make_spatial_basis_1d(data.x, cfg.space_count[0], sdeg);
    }
    st.time = make_temporal_basis(data.t, cfg.time_count, tdeg);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("basis", e.what());
  }
  st.ev = evaluate_bases(st.space, st.time, required_derivatives(st.lib, cfg.time_order), cfg.op,
                         static_cast<int>(data.components.size()));
  return st;
}

Precheck precheck(const DiscoverySetup& setup, const RunConfig& cfg) {
  const DiscoveryProblem prob = setup.problem();
  const Matrix A = initial_coefficients(setup.obs, setup.ev, cfg.model.lambda2);
  Precheck out;
  out.condition = condition_number(full_design(A, prob).F).value;
  out.beta = cfg.beta ? *cfg.beta : choose_beta(out.condition);
  ModelConfig m = cfg.model;
  m.beta_rss = out.beta;
  out.subsample = effective_subsample(prob, m);
  return out;
}

DiscoveryRun run_discovery(const DiscoverySetup& setup, const RunConfig& cfg) {
  DiscoveryRun run;
  run.pre = precheck(setup, cfg);
  log_info("condition number " + std::to_string(run.pre.condition) + ", beta " +
           std::to_string(run.pre.beta) + ", subsample size " + std::to_string(run.pre.subsample));
  run.model = cfg.model;
  run.model.beta_rss = run.pre.beta;
  run.model.inclusion_threshold = cfg.threshold;
  run.samples = run_chain(setup.problem(), run.model);
  run.info.components = setup.lib.component_names();
  run.info.lhs = setup.lhs();
  for (const TermSpec& t : setup.lib.terms()) run.info.terms.push_back(t.name);
  run.info.subsample_size = run.samples.subsample_size;
  run.summary = equation_summary(run.samples, setup.lib, cfg.threshold, run.info.lhs);
  return run;
}

}  // namespace bayespde
