#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "bayespde/io.hpp"
#include "bayespde/simulators.hpp"
#include "support.hpp"

using namespace bayespde;

namespace {

GridDataset small_2d(Rng& rng) {
  Tensor v(6, 3, 2);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.values()[i] = rng.normal() * std::pow(10.0, i % 7 - 3);
  GridDataset d = make_dataset(v, Vector::LinSpaced(3, 0, 1), Vector::LinSpaced(2, -1, 1),
                               Vector::LinSpaced(3, 0, 0.2), {"u", "v"});
  d.mask[4] = 0;
  d.mask[31] = 0;
  return d;
}

ChainSamples small_chain(Rng& rng) {
  ChainSamples c;
  c.burn_in = 2;
  c.subsample_size = 17;
  for (int i = 0; i < 5; ++i) {
    IndicatorMatrix g(2, 3);
    g << 1, 0, 1, 0, 1, 1;
    c.gamma.push_back(g);
    Matrix m = testing::random_matrix(2, 3, rng);
    for (Eigen::Index k = 0; k < m.size(); ++k)
      if (!g.data()[k]) m.data()[k] = 0.0;
    c.M.push_back(m);
    c.pi.push_back(Vector::Constant(2, rng.uniform()));
    c.sigma2_U.push_back(Vector::Constant(2, 1e-7 * rng.uniform()));
    c.sigma2_V.push_back(Vector::Constant(2, rng.uniform()));
  }
  return c;
}

}  // namespace

TEST_CASE("grid tensors round-trip exactly, missing entries included") {
  Rng rng(1);
  const GridDataset d = small_2d(rng);
  std::stringstream ss;
  write_grid(ss, d);
  CHECK(ss.str().find("nan") != std::string::npos);
  GridDataset back = read_grid(ss);
  CHECK(back.mask == d.mask);
  CHECK(back.x == d.x);
  CHECK(back.y == d.y);
  CHECK(back.t == d.t);
  CHECK(back.components == d.components);
  for (Eigen::Index i = 0; i < d.values.size(); ++i)
    if (d.mask[static_cast<std::size_t>(i)]) CHECK(back.values.values()[i] == d.values.values()[i]);
}

TEST_CASE("1D simulated data round-trip through files") {
  BurgersSpec spec;
  spec.points = 16;
  spec.t_end = 0.1;
  spec.outputs = 3;
  const GridDataset d = simulate_burgers(spec);
  const auto path = std::filesystem::temp_directory_path() / "bayespde_io_test.gt";
  write_grid_file(path, d);
  CHECK(read_grid_file(path) == d);
  std::filesystem::remove(path);
  CHECK_THROWS(read_grid_file(path));
}

TEST_CASE("malformed grid files are rejected") {
  for (const char* text : {"", "GRIDTENSOR v2\n", "GRIDTENSOR v1\ndims 2 1 1\naxis 1D 2\nx 0 1\nt 0\ncomponents u\ndata\n1\nmask 0\nend\n",
                           "GRIDTENSOR v1\ndims 2 1 1\naxis 1D 2\nx 0 1\nt 0\ncomponents u\ndata\n1 2\nmask 1\n7\nend\n"}) {
    std::stringstream ss(text);
    CHECK_THROWS_AS(read_grid(ss), FormatError);
  }
}

TEST_CASE("chains round-trip with metadata") {
  Rng rng(2);
  const ChainSamples c = small_chain(rng);
  const ChainInfo info{{"u", "v"}, {"u_t", "v_t"}, {"u", "u v", "v_xx"}, 17};
  std::stringstream ss;
  write_chain(ss, c, info);
  const auto [back, binfo] = read_chain(ss);
  CHECK(back == c);
  CHECK(binfo.components == info.components);
  CHECK(binfo.lhs == info.lhs);
  CHECK(binfo.terms == info.terms);
  CHECK(binfo.subsample_size == 17);
}

TEST_CASE("chain header names the long-format columns") {
  Rng rng(3);
  std::stringstream ss;
  write_chain(ss, small_chain(rng), {{"u", "v"}, {"u_t", "v_t"}, {"a", "b", "c"}, 17});
  std::string line, header;
  while (std::getline(ss, line))
    if (!line.empty() && line[0] != '#') {
      header = line;
      break;
    }
  CHECK(header == "iteration,parameter,component,term,value");
}

TEST_CASE("config parsing covers every section") {
  const std::string text = R"(
[data]
path = "data/heat.gt"
covariates = [{ name = "f", path = "/abs/f.gt" }]
[basis]
space = [10, 12]
time = 80
space_degree = 4
[model]
time_order = 2
operator = "u_xx + u_yy"
library = ["u_xx", "u_yy", "f*u"]
[sampler]
iterations = 100
burn_in = 50
kappa = [1e-4, 1e-6]
beta = 0.95
seed = 7
[output]
dir = "out"
threshold = 0.6
)";
  const RunConfig cfg = parse_config(text, "/base");
  CHECK(cfg.dataset == std::filesystem::path("/base/data/heat.gt"));
  REQUIRE(cfg.covariates.size() == 1);
  CHECK(cfg.covariates[0].path == std::filesystem::path("/abs/f.gt"));
  CHECK(cfg.space_count == std::vector<int>{10, 12});
  CHECK(cfg.time_count == 80);
  CHECK(cfg.space_degree == 4);
  CHECK(cfg.time_order == 2);
  CHECK(cfg.op.terms.size() == 2);
  CHECK(cfg.library.size() == 3);
  CHECK(cfg.model.iterations == 100);
  CHECK(cfg.model.kappa == std::vector<double>{1e-4, 1e-6});
  CHECK(cfg.beta == 0.95);
  CHECK(cfg.model.seed == 7);
  CHECK(cfg.output_dir == std::filesystem::path("/base/out"));
  CHECK(cfg.threshold == 0.6);
}

TEST_CASE("config errors name the offending field") {
  auto field_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("none");
  };
  const std::string base = "[data]\npath = \"d.gt\"\n[basis]\nspace = 10\n[model]\nlibrary = [\"u\"]\n";
  CHECK(field_of(base) == "none");
  CHECK(field_of(base + "[sampler]\nkappaa = 1\n") == "sampler.kappaa");
  CHECK(field_of(base + "[sampler]\nbeta = 1.5\n") == "sampler.beta");
  CHECK(field_of("[basis]\nspace = 10\n[model]\nlibrary = [\"u\"]\n") == "data.path");
  CHECK(field_of("[data]\npath = \"d.gt\"\n[model]\nlibrary = [\"u\"]\n") == "basis.space");
  CHECK(field_of("[data]\npath = \"d.gt\"\n[basis]\nspace = 10\n[model]\nlibrary = \"some\"\n") == "model.library");
  CHECK(field_of("not toml = = 1") == "config");
}

TEST_CASE("beta auto and the auto library are accepted") {
  const RunConfig cfg = parse_config(R"(
[data]
path = "d.gt"
[basis]
space = 50
[model]
library = "auto"
[model.auto]
max_power = 2
derivs = ["x", "xx"]
[sampler]
beta = "auto"
)");
  CHECK_FALSE(cfg.beta.has_value());
  REQUIRE(cfg.auto_library.has_value());
  CHECK(cfg.auto_library->max_power == 2);
  CHECK(cfg.auto_library->derivs.size() == 2);
}

TEST_CASE("operator and suffix grammar") {
  CHECK(parse_operator("identity").is_identity());
  const OperatorSpec lap = parse_operator("u_xx + u_yy");
  CHECK(lap.terms == OperatorSpec::laplacian().terms);
  const OperatorSpec w = parse_operator("2*xx + yy");
  CHECK(w.terms[0].first == 2.0);
  CHECK(parse_suffix("xxy") == DerivSpec{2, 1, 0});
  CHECK_THROWS(parse_suffix("q"));
}

TEST_CASE("FNV-1a matches the published test vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}
