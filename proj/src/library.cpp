#include "bayespde/library.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace bayespde {

namespace {

bool canonical_less(const Factor& a, const Factor& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  if (!a.is_state()) return a.covariate < b.covariate;
  if (a.component != b.component) return a.component < b.component;
  const int oa = a.deriv.dx + a.deriv.dy + a.deriv.dt;
  const int ob = b.deriv.dx + b.deriv.dy + b.deriv.dt;
  if (oa != ob) return oa < ob;
  if (a.deriv.dt != b.deriv.dt) return a.deriv.dt < b.deriv.dt;
  if (a.deriv.dx != b.deriv.dx) return a.deriv.dx > b.deriv.dx;
  return a.deriv.dy > b.deriv.dy;
}

std::string format_position(const std::string& text, std::size_t position,
                            const std::string& what) {
  std::ostringstream os;
  os << "term '" << text << "', position " << position << ": " << what;
  return os.str();
}

double factor_value(const Factor& f, const std::map<Factor, double>& values) {
  auto it = values.find(f);
  if (it == values.end()) throw std::out_of_range("term_partials: missing factor value");
  return it->second;
}

}  // namespace

TermParseError::TermParseError(const std::string& text, std::size_t position,
                               const std::string& what)
    : LibraryError(format_position(text, position, what)), position_(position) {}

FeatureLibrary::FeatureLibrary(std::vector<std::string> component_names,
                               std::vector<std::string> covariate_names)
    : components_(std::move(component_names)), covariates_(std::move(covariate_names)) {
  if (components_.empty()) throw LibraryError("feature library needs at least one component");
}

std::string FeatureLibrary::name_of(const std::vector<Factor>& factors) const {
  std::ostringstream os;
  for (std::size_t i = 0; i < factors.size();) {
    std::size_t j = i;
    while (j < factors.size() && factors[j] == factors[i]) ++j;
    const Factor& f = factors[i];
    if (i > 0) os << ' ';
    if (f.is_state()) {
      os << components_.at(static_cast<std::size_t>(f.component));
      if (f.deriv != DerivSpec{}) os << '_' << suffix(f.deriv);
    } else {
      os << covariates_.at(static_cast<std::size_t>(f.covariate));
    }
    if (j - i > 1) os << '^' << (j - i);
    i = j;
  }
  return os.str();
}

const TermSpec& FeatureLibrary::add(std::vector<Factor> factors) {
  if (factors.empty()) throw LibraryError("library term needs at least one factor");
  for (const Factor& f : factors) {
    if (f.is_state()) {
      if (f.component < 0 || f.component >= components())
        throw LibraryError("factor references unknown component " + std::to_string(f.component));
      if (f.deriv.dx < 0 || f.deriv.dy < 0 || f.deriv.dt < 0)
        throw LibraryError("negative derivative order");
    } else if (f.covariate < 0 || f.covariate >= static_cast<int>(covariates_.size())) {
      throw LibraryError("factor references unknown covariate " + std::to_string(f.covariate));
    }
  }
  std::sort(factors.begin(), factors.end(), canonical_less);
  std::string name = name_of(factors);
  if (index_of(name) >= 0) throw LibraryError("duplicate library term '" + name + "'");
  terms_.push_back({std::move(factors), std::move(name)});
  return terms_.back();
}

const TermSpec& FeatureLibrary::add(const std::string& text) { return add(parse(text)); }

std::ptrdiff_t FeatureLibrary::index_of(const std::string& name) const {
  for (std::size_t d = 0; d < terms_.size(); ++d)
    if (terms_[d].name == name) return static_cast<std::ptrdiff_t>(d);
  return -1;
}

std::vector<DerivSpec> FeatureLibrary::required_derivatives() const {
  std::set<DerivSpec> specs;
  for (const TermSpec& t : terms_)
    for (const Factor& f : t.factors)
      if (f.is_state()) specs.insert(f.deriv);
  return {specs.begin(), specs.end()};
}

// Grammar: term := factor ('*' factor)* ; factor := atom ('^' integer)? ;
// atom := covariate-name | component ('_' [xyt]+)?
std::vector<Factor> FeatureLibrary::parse(const std::string& text) const {
  std::vector<Factor> out;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  auto is_ident = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  };
  auto longest_match = [&](const std::vector<std::string>& names) -> std::ptrdiff_t {
    std::ptrdiff_t best = -1;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const std::string& n = names[i];
      if (text.compare(pos, n.size(), n) != 0) continue;
      if (best >= 0 && names[static_cast<std::size_t>(best)].size() >= n.size()) continue;
      best = static_cast<std::ptrdiff_t>(i);
    }
    return best;
  };

  skip_ws();
  if (pos == text.size()) throw TermParseError(text, pos, "empty term");
  while (true) {
    skip_ws();
    const std::size_t start = pos;
    Factor f;
    const std::ptrdiff_t cov = longest_match(covariates_);
    const std::ptrdiff_t comp = longest_match(components_);
    const std::size_t cov_len = cov >= 0 ? covariates_[static_cast<std::size_t>(cov)].size() : 0;
    const bool cov_ok = cov >= 0 && (start + cov_len == text.size() || !is_ident(text[start + cov_len]));
    if (cov_ok) {
      f = Factor::cov(static_cast<int>(cov));
      pos += cov_len;
    } else if (comp >= 0) {
      f = Factor::state(static_cast<int>(comp));
      pos += components_[static_cast<std::size_t>(comp)].size();
      if (pos < text.size() && text[pos] == '_') {
        ++pos;
        const std::size_t dstart = pos;
        while (pos < text.size() && (text[pos] == 'x' || text[pos] == 'y' || text[pos] == 't')) {
          if (text[pos] == 'x') ++f.deriv.dx;
          if (text[pos] == 'y') ++f.deriv.dy;
          if (text[pos] == 't') ++f.deriv.dt;
          ++pos;
        }
        if (pos == dstart) throw TermParseError(text, pos, "expected derivative letters x, y or t");
      }
      if (pos < text.size() && is_ident(text[pos]))
        throw TermParseError(text, start, "unknown symbol");
    } else {
      throw TermParseError(text, start, "unknown symbol");
    }
    skip_ws();
    int power = 1;
    if (pos < text.size() && text[pos] == '^') {
      ++pos;
      skip_ws();
      const std::size_t nstart = pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
      if (pos == nstart) throw TermParseError(text, pos, "expected integer exponent");
      power = std::stoi(text.substr(nstart, pos - nstart));
      if (power < 1) throw TermParseError(text, nstart, "exponent must be positive");
    }
    out.insert(out.end(), static_cast<std::size_t>(power), f);
    skip_ws();
    if (pos == text.size()) break;
    if (text[pos] != '*') throw TermParseError(text, pos, "expected '*'");
    ++pos;
  }
  return out;
}

Vector basis_kron(const BasisEvaluations& ev, const DerivSpec& d, const SpaceTimePoint& p) {
  const Matrix& psi = ev.spatial(d);
  const Matrix& phi = ev.temporal(d.dt);
  Vector b(psi.cols() * phi.cols());
  for (Eigen::Index q = 0; q < phi.cols(); ++q)
    b.segment(q * psi.cols(), psi.cols()) = phi(p.t, q) * psi.row(p.s).transpose();
  return b;
}

double eval_factor(const Factor& f, const Matrix& A, const BasisEvaluations& ev,
                   const CovariateField& cov, const SpaceTimePoint& p) {
  if (!f.is_state()) {
    if (f.covariate >= cov.components())
      throw std::out_of_range("covariate index " + std::to_string(f.covariate) + " out of range");
    return cov(p.s, p.t, f.covariate);
  }
  const Vector b = basis_kron(ev, f.deriv, p);
  return ev.theta.row(f.component).dot(A * b);
}

double eval_term(const TermSpec& term, const Matrix& A, const BasisEvaluations& ev,
                 const CovariateField& cov, const SpaceTimePoint& p) {
  double v = 1.0;
  for (const Factor& f : term.factors) v *= eval_factor(f, A, ev, cov, p);
  return v;
}

Matrix eval_library(const FeatureLibrary& lib, const Matrix& A, const BasisEvaluations& ev,
                    const CovariateField& cov, const std::vector<SpaceTimePoint>& points) {
  Matrix out(static_cast<Eigen::Index>(lib.size()), static_cast<Eigen::Index>(points.size()));
  for (std::size_t j = 0; j < points.size(); ++j) {
    std::map<Factor, double> values;
    for (const TermSpec& t : lib.terms())
      for (const Factor& f : t.factors)
        if (!values.contains(f)) values.emplace(f, eval_factor(f, A, ev, cov, points[j]));
    for (std::size_t d = 0; d < lib.size(); ++d) {
      double v = 1.0;
      for (const Factor& f : lib[d].factors) v *= values.at(f);
      out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return out;
}

std::map<Factor, double> term_partials(const TermSpec& term,
                                       const std::map<Factor, double>& values) {
  std::map<Factor, double> partials;
  const auto& fs = term.factors;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    if (!fs[i].is_state()) continue;
    double prod = 1.0;
    for (std::size_t j = 0; j < fs.size(); ++j)
      if (j != i) prod *= factor_value(fs[j], values);
    partials[fs[i]] += prod;
  }
  return partials;
}

Matrix grad_term(const TermSpec& term, const Matrix& A, const BasisEvaluations& ev,
                 const CovariateField& cov, const SpaceTimePoint& p) {
  std::map<Factor, double> values;
  for (const Factor& f : term.factors)
    if (!values.contains(f)) values.emplace(f, eval_factor(f, A, ev, cov, p));
  Matrix grad = Matrix::Zero(A.rows(), A.cols());
  for (const auto& [f, w] : term_partials(term, values)) {
    const Vector b = basis_kron(ev, f.deriv, p);
    grad.noalias() += w * ev.theta.row(f.component).transpose() * b.transpose();
  }
  return grad;
}

StateFields::StateFields(const FeatureLibrary& lib, const Matrix& A, const BasisEvaluations& ev) {
  std::set<std::pair<int, DerivSpec>> wanted;
  for (const TermSpec& t : lib.terms())
    for (const Factor& f : t.factors)
      if (f.is_state()) wanted.insert({f.component, f.deriv});
  std::map<DerivSpec, Tensor> by_spec;
  for (const auto& [n, d] : wanted) {
    auto it = by_spec.find(d);
    if (it == by_spec.end()) it = by_spec.emplace(d, reconstruct_field(A, ev, d)).first;
    fields_.emplace(std::make_pair(n, d), Matrix(it->second.slice(n)));
  }
}

const Matrix& StateFields::field(int component, const DerivSpec& d) const {
  auto it = fields_.find({component, d});
  if (it == fields_.end())
    throw std::out_of_range("state field for component " + std::to_string(component) + " '" +
                            suffix(d) + "' was not reconstructed");
  return it->second;
}

Matrix design_matrix(const FeatureLibrary& lib, const StateFields& fields,
                     const CovariateField& cov, const std::vector<Eigen::Index>& flat_points) {
  const Eigen::Index n = static_cast<Eigen::Index>(flat_points.size());
  Matrix F = Matrix::Ones(n, static_cast<Eigen::Index>(lib.size()));
  for (std::size_t d = 0; d < lib.size(); ++d) {
    auto col = F.col(static_cast<Eigen::Index>(d));
    for (const Factor& f : lib[d].factors) {
      if (f.is_state()) {
        const Matrix& field = fields.field(f.component, f.deriv);
        for (Eigen::Index i = 0; i < n; ++i) col[i] *= field.data()[flat_points[static_cast<std::size_t>(i)]];
      } else {
        if (f.covariate >= cov.components())
          throw std::out_of_range("covariate index " + std::to_string(f.covariate) + " out of range");
        const auto slice = cov.slice(f.covariate);
        for (Eigen::Index i = 0; i < n; ++i) col[i] *= slice.data()[flat_points[static_cast<std::size_t>(i)]];
      }
    }
  }
  return F;
}

FeatureLibrary standard_poly_deriv_library(const std::vector<std::string>& components,
                                           int max_power, const std::vector<DerivSpec>& derivs,
                                           const std::vector<std::string>& covariates,
                                           const PolyLibraryOptions& options) {
  if (max_power < 1) throw LibraryError("max_power must be >= 1");
  FeatureLibrary lib(components, covariates);
  const int N = lib.components();
  const int inter_power = options.interaction_power < 0 ? max_power : options.interaction_power;

  // Monomials: pure powers of each component first, then mixed products by degree.
  std::vector<std::vector<Factor>> monomials;
  for (int n = 0; n < N; ++n)
    for (int k = 1; k <= max_power; ++k)
      monomials.emplace_back(static_cast<std::size_t>(k), Factor::state(n));
  for (int degree = 2; degree <= max_power; ++degree) {
    // multisets of size `degree` over N components with at least two distinct ones
    std::vector<int> counts(static_cast<std::size_t>(N), 0);
    std::vector<std::vector<Factor>> mixed;
    auto recurse = [&](auto&& self, int comp, int remaining) -> void {
      if (comp == N - 1) {
        counts[static_cast<std::size_t>(comp)] = remaining;
        int distinct = 0;
        for (int c : counts) distinct += c > 0;
        if (distinct >= 2) {
          std::vector<Factor> m;
          for (int c = 0; c < N; ++c)
            m.insert(m.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(c)]), Factor::state(c));
          mixed.push_back(std::move(m));
        }
        return;
      }
      for (int k = remaining; k >= 0; --k) {
        counts[static_cast<std::size_t>(comp)] = k;
        self(self, comp + 1, remaining - k);
      }
    };
    recurse(recurse, 0, degree);
    monomials.insert(monomials.end(), mixed.begin(), mixed.end());
  }
  for (const auto& m : monomials) lib.add(m);

  auto interacts = [&](const DerivSpec& d) {
    return options.interaction_derivs.empty() ||
           std::find(options.interaction_derivs.begin(), options.interaction_derivs.end(), d) !=
               options.interaction_derivs.end();
  };
  auto mono_components = [](const std::vector<Factor>& m) {
    std::set<int> cs;
    for (const Factor& f : m) cs.insert(f.component);
    return cs;
  };

  for (int n = 0; n < N; ++n)
    for (const DerivSpec& d : derivs) {
      lib.add({Factor::state(n, d)});
      if (!interacts(d)) continue;
      for (const auto& m : monomials) {
        if (static_cast<int>(m.size()) > inter_power) continue;
        if (options.same_component_only && mono_components(m) != std::set<int>{n}) continue;
        std::vector<Factor> t = m;
        t.push_back(Factor::state(n, d));
        lib.add(t);
      }
    }

  for (int k = 0; k < static_cast<int>(covariates.size()); ++k) {
    for (const auto& m : monomials) {
      std::vector<Factor> t = m;
      t.push_back(Factor::cov(k));
      lib.add(t);
    }
    for (int n = 0; n < N; ++n)
      for (const DerivSpec& d : derivs) lib.add({Factor::state(n, d), Factor::cov(k)});
  }
  return lib;
}

ConditionNumber condition_number(const Matrix& design) {
  ConditionNumber out;
  const Eigen::Index n = design.rows();
  Matrix Z = design.rowwise() - design.colwise().mean();
  for (Eigen::Index j = 0; j < Z.cols(); ++j) {
    const double sd = std::sqrt(Z.col(j).squaredNorm() / static_cast<double>(n));
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      out.constant_columns.push_back(static_cast<std::size_t>(j));
      Z.col(j).setZero();
    } else {
      Z.col(j) /= sd;
    }
  }
  if (!out.constant_columns.empty()) {
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  const Matrix corr = Z.transpose() * Z / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Matrix> es(corr, Eigen::EigenvaluesOnly);
  const double hi = es.eigenvalues().maxCoeff();
  const double lo = es.eigenvalues().minCoeff();
  out.value = (lo <= hi * 1e-14) ? std::numeric_limits<double>::infinity() : hi / lo;
  return out;
}

ConditionNumber condition_number(const FeatureLibrary& lib, const Matrix& A,
                                 const BasisEvaluations& ev, const CovariateField& cov,
                                 const std::vector<SpaceTimePoint>& points) {
  if (points.size() <= lib.size())
    throw std::invalid_argument("condition_number: need more points than library terms");
  return condition_number(Matrix(eval_library(lib, A, ev, cov, points).transpose()));
}

}  // namespace bayespde
