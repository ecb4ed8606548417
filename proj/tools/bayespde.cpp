// Command-line front end: simulate datasets, run discovery, re-summarize chains.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "bayespde/discover.hpp"
#include "bayespde/io.hpp"
#include "bayespde/log.hpp"
#include "bayespde/simulators.hpp"

namespace fs = std::filesystem;
using namespace bayespde;

namespace {

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path output_dir(const std::string& flag, const fs::path& from_config) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  if (const char* env = std::getenv("BAYESPDE_OUTPUT_DIR"); env && *env) return env;
  return "bayespde_out";
}

std::string tag(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

int cmd_simulate(const std::string& system, double noise, double missing, std::uint64_t seed,
                 const std::string& out_flag, int points, int outputs, bool global_noise,
                 std::optional<Boundary> boundary) {
  if (noise < 0.0) throw UsageError("--noise must be >= 0");
  if (missing < 0.0 || missing >= 1.0) throw UsageError("--missing must lie in [0, 1)");
  GridDataset clean;
  std::string equation;
  if (system == "burgers") {
    BurgersSpec s;
    if (points > 0) s.points = points;
    if (outputs > 0) s.outputs = outputs;
    clean = simulate_burgers(s);
    equation = true_equation(s);
  } else if (system == "heat") {
    HeatSpec s;
    if (boundary) s.boundary = *boundary;
    if (points > 0) s.points = points;
    if (outputs > 0) s.outputs = outputs;
    clean = simulate_heat2d(s);
    equation = true_equation(s);
  } else if (system == "rd") {
    ReactionDiffusionSpec s;
    if (boundary) s.boundary = *boundary;
    if (points > 0) s.points = points;
    if (outputs > 0) s.outputs = outputs;
    clean = simulate_reaction_diffusion(s);
    equation = true_equation(s);
  } else {
    throw UsageError("unknown system '" + system + "' (expected burgers, heat or rd)");
  }
  const fs::path dir = output_dir(out_flag, {});
  fs::create_directories(dir);
  const fs::path clean_path = dir / (system + ".gt");
  write_grid_file(clean_path, clean);
  std::cout << "wrote " << clean_path.string() << '\n';
  if (noise > 0.0 || missing > 0.0) {
    Rng rng(seed);
    GridDataset v = add_noise(clean, noise, !global_noise, rng);
    v = apply_missingness(v, missing, rng);
    const fs::path path = dir / (system + "_noise" + tag(noise) + "_missing" + tag(missing) + ".gt");
    write_grid_file(path, v);
    std::cout << "wrote " << path.string() << " (" << v.missing_count() << " missing entries)\n";
  }
  std::cout << "true equation:\n" << equation << '\n';
  return 0;
}

void write_summary_files(const fs::path& dir, const DiscoverySummary& summary,
                         const std::vector<std::string>& components) {
  std::ofstream csv(dir / "summary.csv");
  write_summary_csv(csv, summary, components);
  std::ofstream eq(dir / "equations.txt");
  write_equations(eq, summary);
  if (!csv || !eq) throw std::runtime_error("failed writing summary files in " + dir.string());
}

int cmd_discover(const std::string& config_path, const std::string& out_flag) {
  const RunConfig cfg = read_config_file(config_path);
  GridDataset data;
  std::vector<GridDataset> covs;
  try {
    data = read_grid_file(cfg.dataset);
    for (const auto& c : cfg.covariates) covs.push_back(read_grid_file(c.path));
  } catch (const std::exception& e) {
    throw ConfigError("data", e.what());
  }
  const DiscoverySetup setup = make_setup(cfg, data, covs);
  if (setup.lib.components() != static_cast<int>(cfg.model.kappa.size()) && cfg.model.kappa.size() != 1)
    throw ConfigError("sampler.kappa", "needs one value or one per component");
  const fs::path dir = output_dir(out_flag, cfg.output_dir);
  fs::create_directories(dir);

  const DiscoveryRun run = run_discovery(setup, cfg);
  std::cout << "library: " << setup.lib.size() << " terms; condition number " << run.pre.condition
            << "; beta " << run.pre.beta << "; subsample size " << run.pre.subsample << '\n';
  write_chain_file(dir / "chain.csv", run.samples, run.info);
  write_summary_files(dir, run.summary, run.info.components);

  nlohmann::ordered_json m;
  m["tool"] = "bayespde";
  m["version"] = kVersion;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  m["compiler"] = __VERSION__;
  m["config"] = fs::absolute(config_path).string();
  m["config_hash"] = fnv1a_hex(read_text_file(config_path));
  m["dataset"] = cfg.dataset.string();
  m["dataset_hash"] = fnv1a_hex(read_text_file(cfg.dataset));
  m["seed"] = run.model.seed;
  m["iterations"] = run.model.iterations;
  m["burn_in"] = run.model.burn_in;
  m["library_terms"] = run.info.terms;
  m["condition_number"] = run.pre.condition;
  m["beta"] = run.pre.beta;
  m["subsample_size"] = run.pre.subsample;
  m["threshold"] = cfg.threshold;
  std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';

  for (const auto& e : run.summary.equations) std::cout << e << '\n';
  std::cout << "outputs in " << dir.string() << '\n';
  return 0;
}

int cmd_summarize(const std::string& chain_path, double threshold, const std::string& out_flag) {
  if (!(threshold >= 0.0 && threshold < 1.0)) throw UsageError("--threshold must lie in [0, 1)");
  std::pair<ChainSamples, ChainInfo> chain;
  try {
    chain = read_chain_file(chain_path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const auto& [samples, info] = chain;
  const DiscoverySummary summary = equation_summary(samples, info.terms, threshold, info.lhs);
  const fs::path dir = out_flag.empty() ? fs::path(chain_path).parent_path() : fs::path(out_flag);
  if (!dir.empty()) fs::create_directories(dir);
  write_summary_files(dir.empty() ? fs::path(".") : dir, summary, info.components);
  for (const auto& e : summary.equations) std::cout << e << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian discovery of partial differential equations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "progress messages on stderr");
  app.add_flag("-q,--quiet", quiet, "suppress warnings");

  std::string out;
  auto* sim = app.add_subcommand("simulate", "simulate burgers, heat or rd data");
  std::string system;
  double noise = 0.0, missing = 0.0;
  std::uint64_t seed = 1;
  int points = 0, outputs = 0;
  bool global_noise = false;
  sim->add_option("system", system, "burgers | heat | rd")->required();
  sim->add_option("--noise", noise, "noise fraction zeta");
  sim->add_option("--missing", missing, "MCAR missing fraction");
  sim->add_option("--seed", seed, "random seed");
  sim->add_option("--out", out, "output directory");
  sim->add_option("--points", points, "spatial points per axis");
  sim->add_option("--outputs", outputs, "number of output times");
  sim->add_flag("--global-noise", global_noise, "one noise scale for all components");
  std::optional<Boundary> boundary;
  const std::map<std::string, Boundary> boundaries{
      {"periodic", Boundary::Periodic}, {"reflect", Boundary::Reflect}, {"fixed", Boundary::Fixed}};
  sim->add_option("--boundary", boundary, "2D grid edges: periodic | reflect | fixed (default: periodic for heat, reflect for rd)")
      ->transform(CLI::CheckedTransformer(boundaries, CLI::ignore_case));

  auto* disc = app.add_subcommand("discover", "run discovery from a TOML config");
  std::string config;
  disc->add_option("config", config, "config file")->required();
  disc->add_option("--out", out, "output directory (overrides output.dir)");

  auto* summ = app.add_subcommand("summarize", "re-summarize a chain at a new threshold");
  std::string chain;
  double threshold = 0.5;
  summ->add_option("chain", chain, "chain.csv")->required();
  summ->add_option("--threshold", threshold, "inclusion threshold");
  summ->add_option("--out", out, "output directory (defaults to the chain's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  Log::level() = quiet ? LogLevel::Quiet : verbose ? LogLevel::Info : LogLevel::Warning;

  try {
    if (*sim) return cmd_simulate(system, noise, missing, seed, out, points, outputs, global_noise, boundary);
    if (*disc) return cmd_discover(config, out);
    if (*summ) return cmd_summarize(chain, threshold, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
