#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bayespde/basis.hpp"
#include "bayespde/tensor.hpp"

namespace bayespde {

/// One multiplicative factor of a library term: a derivative of a state component,
/// or a known covariate field.
struct Factor {
  enum class Kind { State = 0, Covariate = 1 };
  Kind kind = Kind::State;
  int component = 0;  // state factors
  DerivSpec deriv;    // state factors
  int covariate = 0;  // covariate factors

  static Factor state(int component, DerivSpec d = {}) { return {Kind::State, component, d, 0}; }
  static Factor cov(int index) { return {Kind::Covariate, 0, {}, index}; }
  bool is_state() const { return kind == Kind::State; }
  auto operator<=>(const Factor&) const = default;
};

/// Product of factors; powers are repeated factors. Factors are kept sorted so the
/// name is canonical.
struct TermSpec {
  std::vector<Factor> factors;
  std::string name;
};

class LibraryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parse failure with the 0-based character offset into the term string.
class TermParseError : public LibraryError {
 public:
  TermParseError(const std::string& text, std::size_t position, const std::string& what);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class FeatureLibrary {
 public:
  FeatureLibrary(std::vector<std::string> component_names,
                 std::vector<std::string> covariate_names = {});

  /// Sorts the factors, names the term and appends it. Throws on duplicates.
  const TermSpec& add(std::vector<Factor> factors);
  /// Parses a term in the config grammar ("u^2*u_x", "psi_y*f_y") and appends it.
  const TermSpec& add(const std::string& text);

  std::size_t size() const { return terms_.size(); }
  const std::vector<TermSpec>& terms() const { return terms_; }
  const TermSpec& operator[](std::size_t d) const { return terms_.at(d); }
  const std::vector<std::string>& component_names() const { return components_; }
  const std::vector<std::string>& covariate_names() const { return covariates_; }
  int components() const { return static_cast<int>(components_.size()); }

  /// Every state derivative referenced by some term.
  std::vector<DerivSpec> required_derivatives() const;
  std::string name_of(const std::vector<Factor>& factors) const;
  std::vector<Factor> parse(const std::string& text) const;
  std::ptrdiff_t index_of(const std::string& name) const;

 private:
  std::vector<std::string> components_;
  std::vector<std::string> covariates_;
  std::vector<TermSpec> terms_;
};

/// Known covariates, S x T x K.
using CovariateField = Tensor;

struct SpaceTimePoint {
  Eigen::Index s = 0;
  Eigen::Index t = 0;
  auto operator<=>(const SpaceTimePoint&) const = default;
};

/// Basis Kronecker vector phi^(dt)(t) (x) psi^(d)(s), length P*Q.
Vector basis_kron(const BasisEvaluations& ev, const DerivSpec& d, const SpaceTimePoint& p);

/// Value of one factor at a point.
double eval_factor(const Factor& f, const Matrix& A, const BasisEvaluations& ev,
                   const CovariateField& cov, const SpaceTimePoint& p);

double eval_term(const TermSpec& term, const Matrix& A, const BasisEvaluations& ev,
                 const CovariateField& cov, const SpaceTimePoint& p);

/// D x |points|.
Matrix eval_library(const FeatureLibrary& lib, const Matrix& A, const BasisEvaluations& ev,
                    const CovariateField& cov, const std::vector<SpaceTimePoint>& points);

/// d term / dA, same shape as A.
Matrix grad_term(const TermSpec& term, const Matrix& A, const BasisEvaluations& ev,
                 const CovariateField& cov, const SpaceTimePoint& p);

/// Partial derivative of a term with respect to each distinct state factor, given factor
/// values. Covariate factors are constants and never appear in the result.
std::map<Factor, double> term_partials(const TermSpec& term, const std::map<Factor, double>& values);

/// Full-grid reconstructions of every state factor a library needs.
class StateFields {
 public:
  StateFields(const FeatureLibrary& lib, const Matrix& A, const BasisEvaluations& ev);
  const Matrix& field(int component, const DerivSpec& d) const;  // S x T

 private:
  std::map<std::pair<int, DerivSpec>, Matrix> fields_;
};

/// |points| x D design matrix from precomputed fields. Points are flat indices s + S*t.
Matrix design_matrix(const FeatureLibrary& lib, const StateFields& fields,
                     const CovariateField& cov, const std::vector<Eigen::Index>& flat_points);

struct PolyLibraryOptions {
  int interaction_power = -1;                // highest monomial degree multiplying a derivative
  std::vector<DerivSpec> interaction_derivs;  // derivatives that get monomial products (all if empty)
  bool same_component_only = false;          // monomial x derivative only within a component
};

/// Monomials of the components up to max_power, each listed derivative alone and times
/// each monomial, plus covariate interactions with every monomial and derivative.
FeatureLibrary standard_poly_deriv_library(const std::vector<std::string>& components,
                                           int max_power, const std::vector<DerivSpec>& derivs,
                                           const std::vector<std::string>& covariates = {},
                                           const PolyLibraryOptions& options = {});

struct ConditionNumber {
  double value = 1.0;
  std::vector<std::size_t> constant_columns;
};

/// Condition number of the correlation matrix of column-standardized library values.
/// Exact collinearity or a constant column yields +infinity.
ConditionNumber condition_number(const Matrix& design);
ConditionNumber condition_number(const FeatureLibrary& lib, const Matrix& A,
                                 const BasisEvaluations& ev, const CovariateField& cov,
                                 const std::vector<SpaceTimePoint>& points);

}  // namespace bayespde
