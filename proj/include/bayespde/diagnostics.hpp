#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bayespde/library.hpp"
#include "bayespde/sampler.hpp"

namespace bayespde {

/// Mean of gamma over the retained (post burn-in) iterations, N x D.
Matrix inclusion_probabilities(const ChainSamples& samples);

/// Shortest interval containing ceil(level * n) of the sorted draws.
std::pair<double, double> hpd_interval(std::vector<double> draws, double level = 0.95);

struct TermSummary {
  int component = 0;
  std::size_t term = 0;
  std::string name;
  double inclusion = 0.0;
  double mean = 0.0;      // over retained draws with gamma = 1
  double hpd_lo = 0.0;
  double hpd_hi = 0.0;
  std::size_t draws = 0;  // retained draws with gamma = 1
  bool included = false;
};

struct DiscoverySummary {
  std::vector<TermSummary> terms;       // N*D entries, component-major
  std::vector<std::string> equations;   // one per component
  std::vector<std::string> lower;       // equation with lower HPD bounds
  std::vector<std::string> upper;       // equation with upper HPD bounds
  std::vector<std::string> warnings;
  double threshold = 0.5;
  int retained = 0;
  int burn_in = 0;

  const TermSummary& at(int component, const std::string& name) const;
};

/// lhs[n] is the rendered left-hand side for component n, e.g. "u_t".
DiscoverySummary equation_summary(const ChainSamples& samples, const FeatureLibrary& lib,
                                  double threshold, const std::vector<std::string>& lhs);
/// Same, from term names alone (used when re-summarizing a stored chain).
DiscoverySummary equation_summary(const ChainSamples& samples,
                                  const std::vector<std::string>& term_names, double threshold,
                                  const std::vector<std::string>& lhs);

/// Three significant digits, trailing zeros trimmed.
std::string format_coefficient(double c);

/// ceil(2 (log(R / sqrt(g + 1)) / log(beta) + 1)), floored at `minimum`.
int subsample_size(double g, double beta, double r_target = 1.0, int minimum = 0);

/// 0.9 above 1e4, 0.95 in (1e3, 1e4], 0.99 otherwise.
double choose_beta(double condition_number);

}  // namespace bayespde
