#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bayespde/basis.hpp"
#include "bayespde/dataset.hpp"
#include "bayespde/diagnostics.hpp"
#include "bayespde/library.hpp"
#include "bayespde/sampler.hpp"

namespace bayespde {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Config problem tied to a dotted field path such as "sampler.kappa".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// GRIDTENSOR v1 text format. Missing entries hold "nan" in the payload and are also
// listed by flat index in the mask section, which is authoritative.
void write_grid(std::ostream& os, const GridDataset& data);
GridDataset read_grid(std::istream& is);
void write_grid_file(const std::filesystem::path& path, const GridDataset& data);
GridDataset read_grid_file(const std::filesystem::path& path);

/// Names and metadata stored alongside a chain.
struct ChainInfo {
  std::vector<std::string> components;  // state symbols, e.g. {"u", "v"}
  std::vector<std::string> lhs;         // e.g. {"u_t", "v_t"}
  std::vector<std::string> terms;       // library term names
  int subsample_size = 0;
};

/// Long format: iteration,parameter,component,term,value with '#' metadata lines.
void write_chain(std::ostream& os, const ChainSamples& samples, const ChainInfo& info);
std::pair<ChainSamples, ChainInfo> read_chain(std::istream& is);
void write_chain_file(const std::filesystem::path& path, const ChainSamples& samples,
                      const ChainInfo& info);
std::pair<ChainSamples, ChainInfo> read_chain_file(const std::filesystem::path& path);

/// Per-term statistics as CSV.
void write_summary_csv(std::ostream& os, const DiscoverySummary& summary,
                       const std::vector<std::string>& components);
/// Mean, lower and upper equations plus warnings.
void write_equations(std::ostream& os, const DiscoverySummary& summary);

struct CovariateSpec {
  std::string name;
  std::filesystem::path path;
};

struct AutoLibrarySpec {
  int max_power = 3;
  std::vector<DerivSpec> derivs;
  PolyLibraryOptions options;
};

struct RunConfig {
  std::filesystem::path dataset;
  std::vector<CovariateSpec> covariates;
  std::vector<int> space_count;  // {P} in 1D, {Px, Py} in 2D; a single value in 2D is split
  int time_count = 20;
  int space_degree = 0;          // 0 picks the default for the library
  int time_degree = 0;
  int time_order = 1;
  OperatorSpec op = OperatorSpec::identity();
  std::vector<std::string> library;   // explicit terms in the config grammar
  std::optional<AutoLibrarySpec> auto_library;
  ModelConfig model;
  std::optional<double> beta;         // unset chooses from the condition number
  std::filesystem::path output_dir;
  double threshold = 0.5;
};

/// Parses a TOML config. Relative paths resolve against base_dir.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig read_config_file(const std::filesystem::path& path);

/// "identity", or a sum such as "u_xx + u_yy" / "2*xx + yy".
OperatorSpec parse_operator(const std::string& text);
/// "x", "xxy", "t" style suffix to a spec.
DerivSpec parse_suffix(const std::string& text);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace bayespde
