#include <doctest.h>

#include <cmath>

#include "bayespde/diagnostics.hpp"
#include "bayespde/log.hpp"
#include "support.hpp"

using namespace bayespde;

namespace {

// Chain with a fixed inclusion pattern and coefficient draws per iteration.
ChainSamples synthetic_chain(int iterations, int burn_in) {
  ChainSamples c;
  c.burn_in = burn_in;
  for (int i = 0; i < iterations; ++i) {
    IndicatorMatrix g(1, 3);
    g << 1, (i % 4 == 0) ? 1 : 0, (i % 10 < 7) ? 1 : 0;
    Matrix m(1, 3);
    m << -1.0 + 0.001 * (i % 7), g(0, 1) ? 0.3 : 0.0, g(0, 2) ? 0.1 + 0.0001 * (i % 5) : 0.0;
    c.gamma.push_back(g);
    c.M.push_back(m);
    c.pi.push_back(Vector::Constant(1, 0.5));
    c.sigma2_U.push_back(Vector::Ones(1));
    c.sigma2_V.push_back(Vector::Ones(1));
  }
  return c;
}

}  // namespace

TEST_CASE("HPD interval is the shortest window holding the mass") {
  std::vector<double> d{5, 1, 2, 3, 4, 100, 3.5, 2.5, 1.5, 4.5};
  const auto [lo, hi] = hpd_interval(d, 0.9);
  CHECK(lo == 1.0);
  CHECK(hi == 5.0);
  const auto [lo2, hi2] = hpd_interval({0, 0.1, 0.2, 0.35, 10}, 0.6);
  CHECK(lo2 == 0.0);
  CHECK(hi2 == 0.2);
  CHECK_THROWS(hpd_interval({1.0}, 0.95));
  CHECK_THROWS(hpd_interval({1.0, 2.0}, 0.0));
}

TEST_CASE("HPD of a symmetric sample covers the central mass") {
  Rng rng(1);
  std::vector<double> draws(20000);
  for (auto& x : draws) x = rng.normal();
  const auto [lo, hi] = hpd_interval(draws, 0.95);
  CHECK(lo == doctest::Approx(-1.96).epsilon(0.05));
  CHECK(hi == doctest::Approx(1.96).epsilon(0.05));
}

TEST_CASE("inclusion probabilities average the retained indicators") {
  const ChainSamples c = synthetic_chain(100, 20);
  const Matrix p = inclusion_probabilities(c);
  CHECK(p(0, 0) == 1.0);
  CHECK(p(0, 1) == doctest::Approx(20.0 / 80.0));
  CHECK(p(0, 2) == doctest::Approx(56.0 / 80.0));
  ChainSamples empty;
  empty.burn_in = 0;
  CHECK_THROWS(inclusion_probabilities(empty));
}

TEST_CASE("equation summary keeps terms above the threshold") {
  const ChainSamples c = synthetic_chain(100, 20);
  const DiscoverySummary s = equation_summary(c, std::vector<std::string>{"u u_x", "u", "u_xx"}, 0.5, {"u_t"});
  REQUIRE(s.equations.size() == 1);
  CHECK(s.equations[0] == "u_t = -0.997 u u_x + 0.1 u_xx");
  CHECK(s.at(0, "u").included == false);
  CHECK(s.at(0, "u_xx").draws == 56);
  CHECK(s.at(0, "u_xx").hpd_lo >= 0.1);
  CHECK(s.at(0, "u_xx").hpd_hi <= 0.1004);
  CHECK(s.retained == 80);
  CHECK(s.lower[0].rfind("u_t = -", 0) == 0);
  CHECK(s.warnings.empty());
}

TEST_CASE("an empty equation is rendered and warned about") {
  Log::level() = LogLevel::Quiet;
  ChainSamples c = synthetic_chain(50, 10);
  for (std::size_t i = 0; i < c.gamma.size(); ++i) {
    c.gamma[i](0, 0) = 0;
    c.M[i](0, 0) = 0.0;
  }
  const DiscoverySummary s = equation_summary(c, std::vector<std::string>{"a", "b", "c"}, 0.999, {"u_t"});
  CHECK(s.equations[0] == "u_t = 0");
  CHECK(s.warnings.size() == 1);
  Log::level() = LogLevel::Warning;
  CHECK_THROWS(equation_summary(c, std::vector<std::string>{"a", "b"}, 0.5, {"u_t"}));
}

TEST_CASE("coefficients print with three significant digits") {
  CHECK(format_coefficient(-0.99412) == "-0.994");
  CHECK(format_coefficient(0.0981) == "0.0981");
  CHECK(format_coefficient(1.0004) == "1");
  CHECK(format_coefficient(-0.0) == "0");
}

TEST_CASE("subsample size equals direct evaluation of the formula") {
  for (double g : {100.0, 25856.0, 16810.0 * 20, 338000.0})
    for (double beta : {0.9, 0.95, 0.99})
      for (double r : {1.0, 0.5, 2.0}) {
        const double direct = 2.0 * (std::log(r / std::sqrt(g + 1.0)) / std::log(beta) + 1.0);
        CHECK(subsample_size(g, beta, r) == static_cast<int>(std::ceil(direct)));
      }
  CHECK(subsample_size(256.0 * 101.0, 0.9) == 99);
  CHECK(subsample_size(1.0, 0.9, 1.0, 17) == 17);
  CHECK_THROWS(subsample_size(10.0, 1.0));
  CHECK_THROWS(subsample_size(0.0, 0.9));
  CHECK_THROWS(subsample_size(10.0, 0.9, 0.0));
}

TEST_CASE("beta bands follow the condition number") {
  CHECK(choose_beta(28940) == 0.9);
  CHECK(choose_beta(6510) == 0.95);
  CHECK(choose_beta(1000) == 0.99);
  CHECK(choose_beta(480) == 0.99);
}
