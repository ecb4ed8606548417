#include "bayespde/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "bayespde/log.hpp"

namespace bayespde {

Matrix inclusion_probabilities(const ChainSamples& samples) {
  const std::size_t start = static_cast<std::size_t>(std::max(samples.burn_in, 0));
  if (samples.gamma.size() <= start) throw std::invalid_argument("no retained samples in chain");
  Matrix sum = Matrix::Zero(samples.gamma[start].rows(), samples.gamma[start].cols());
  for (std::size_t i = start; i < samples.gamma.size(); ++i) sum += samples.gamma[i].cast<double>();
  return sum / static_cast<double>(samples.gamma.size() - start);
}

std::pair<double, double> hpd_interval(std::vector<double> draws, double level) {
  if (draws.size() < 2) throw std::invalid_argument("hpd_interval needs at least 2 draws");
  if (!(level > 0.0 && level <= 1.0)) throw std::invalid_argument("hpd level must lie in (0, 1]");
  std::sort(draws.begin(), draws.end());
  const std::size_t n = draws.size();
  const auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) - 1e-9));
  const std::size_t m = std::clamp<std::size_t>(k, 1, n);
  std::size_t best = 0;
  double width = draws[m - 1] - draws[0];
  for (std::size_t i = 1; i + m <= n; ++i) {
    const double w = draws[i + m - 1] - draws[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {draws[best], draws[best + m - 1]};
}

const TermSummary& DiscoverySummary::at(int component, const std::string& name) const {
  for (const auto& t : terms)
    if (t.component == component && t.name == name) return t;
  throw std::out_of_range("no term '" + name + "' for component " + std::to_string(component));
}

std::string format_coefficient(double c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", c);
  std::string s = buf;
  if (s == "-0") s = "0";
  return s;
}

namespace {

std::string render(const std::string& lhs, const std::vector<std::pair<double, std::string>>& parts) {
  std::string out = lhs + " =";
  if (parts.empty()) return out + " 0";
  bool first = true;
  for (const auto& [c, name] : parts) {
    std::string num = format_coefficient(std::fabs(c));
    const bool neg = c < 0;
    if (first)
      out += neg ? " -" + num : " " + num;
    else
      out += neg ? " - " + num : " + " + num;
    if (name != "1") out += " " + name;
    first = false;
  }
  return out;
}

}  // namespace

DiscoverySummary equation_summary(const ChainSamples& samples, const FeatureLibrary& lib,
                                  double threshold, const std::vector<std::string>& lhs) {
  std::vector<std::string> names;
  for (const TermSpec& t : lib.terms()) names.push_back(t.name);
  return equation_summary(samples, names, threshold, lhs);
}

DiscoverySummary equation_summary(const ChainSamples& samples,
                                  const std::vector<std::string>& term_names, double threshold,
                                  const std::vector<std::string>& lhs) {
  DiscoverySummary out;
  out.threshold = threshold;
  out.burn_in = samples.burn_in;
  const Matrix incl = inclusion_probabilities(samples);
  const std::size_t start = static_cast<std::size_t>(std::max(samples.burn_in, 0));
  out.retained = static_cast<int>(samples.size() - start);
  const int N = static_cast<int>(incl.rows());
  const std::size_t D = term_names.size();
  if (static_cast<std::size_t>(incl.cols()) != D)
    throw std::invalid_argument("chain has " + std::to_string(incl.cols()) + " terms, library has " +
                                std::to_string(D));
  for (int n = 0; n < N; ++n) {
    std::vector<std::pair<double, std::string>> mid, lo, hi;
    for (std::size_t d = 0; d < D; ++d) {
      TermSummary ts;
      ts.component = n;
      ts.term = d;
      ts.name = term_names[d];
      ts.inclusion = incl(n, static_cast<Eigen::Index>(d));
      std::vector<double> draws;
      for (std::size_t i = start; i < samples.size(); ++i)
        if (samples.gamma[i](n, static_cast<Eigen::Index>(d)))
          draws.push_back(samples.M[i](n, static_cast<Eigen::Index>(d)));
      ts.draws = draws.size();
      if (!draws.empty()) {
        double sum = 0.0;
        for (double v : draws) sum += v;
        ts.mean = sum / static_cast<double>(draws.size());
        if (draws.size() >= 2) {
          std::tie(ts.hpd_lo, ts.hpd_hi) = hpd_interval(draws);
        } else {
          ts.hpd_lo = ts.hpd_hi = draws[0];
        }
      }
      ts.included = ts.inclusion > threshold;
      if (ts.included) {
        mid.emplace_back(ts.mean, ts.name);
        lo.emplace_back(ts.hpd_lo, ts.name);
        hi.emplace_back(ts.hpd_hi, ts.name);
      }
      out.terms.push_back(ts);
    }
    const std::string& left = lhs.at(static_cast<std::size_t>(n));
    if (mid.empty()) {
      const std::string msg = "no term of " + left + " exceeds inclusion threshold " +
                              format_coefficient(threshold) + "; equation is empty";
      out.warnings.push_back(msg);
      log_warning(msg);
    }
    out.equations.push_back(render(left, mid));
    out.lower.push_back(render(left, lo));
    out.upper.push_back(render(left, hi));
  }
  return out;
}

int subsample_size(double g, double beta, double r_target, int minimum) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  if (!(g > 0.0)) throw std::invalid_argument("g must be positive");
  if (!(r_target > 0.0)) throw std::invalid_argument("R target must be positive");
  const double n = 2.0 * (std::log(r_target / std::sqrt(g + 1.0)) / std::log(beta) + 1.0);
  const int size = static_cast<int>(std::ceil(n));
  return std::max(size, minimum);
}

double choose_beta(double condition_number) {
  if (condition_number > 1e4) return 0.9;
  if (condition_number > 1e3) return 0.95;
  return 0.99;
}

}  // namespace bayespde
