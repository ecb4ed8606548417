#include "bayespde/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#define TOML_HEADER_ONLY 1
#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace bayespde {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw FormatError(where + ": cannot parse number '" + s + "'");
  }
}

long parse_long(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw FormatError(where + ": cannot parse integer '" + s + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Reads the next line that is not blank; throws at end of input.
std::string next_line(std::istream& is, const std::string& expecting) {
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (!line.empty()) return line;
  }
  throw FormatError("unexpected end of file, expected " + expecting);
}

std::vector<std::string> words(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

Vector read_axis(std::istream& is, const std::string& name, Eigen::Index expected) {
  const auto w = words(next_line(is, name + " coordinates"));
  if (w.empty() || w[0] != name)
    throw FormatError("expected '" + name + "' coordinate line");
  if (static_cast<Eigen::Index>(w.size()) - 1 != expected)
    throw FormatError(name + " has " + std::to_string(w.size() - 1) + " coordinates, expected " +
                      std::to_string(expected));
  Vector v(expected);
  for (Eigen::Index i = 0; i < expected; ++i)
    v[i] = parse_double(w[static_cast<std::size_t>(i + 1)], name + " coordinate");
  return v;
}

void write_axis(std::ostream& os, const std::string& name, const Vector& v) {
  os << name;
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << fmt(v[i]);
  os << '\n';
}

}  // namespace

// ---------------------------------------------------------------------------
// GRIDTENSOR

void write_grid(std::ostream& os, const GridDataset& data) {
  data.validate();
  const Tensor& v = data.values;
  os << "GRIDTENSOR v1\n";
  os << "dims " << v.space() << ' ' << v.time() << ' ' << v.components() << '\n';
  if (data.is_2d())
    os << "axis 2D " << data.x.size() << ' ' << data.y.size() << '\n';
  else
    os << "axis 1D " << data.x.size() << '\n';
  write_axis(os, "x", data.x);
  if (data.is_2d()) write_axis(os, "y", data.y);
  write_axis(os, "t", data.t);
  os << "components " << join(data.components, ' ') << '\n';
  os << "data\n";
  const Eigen::Index S = v.space();
  for (Eigen::Index n = 0; n < v.components(); ++n)
    for (Eigen::Index t = 0; t < v.time(); ++t) {
      for (Eigen::Index s = 0; s < S; ++s) {
        const Eigen::Index i = v.flat_index(s, t, n);
        if (s) os << ' ';
        os << (data.mask[static_cast<std::size_t>(i)] ? fmt(v.values()[i]) : std::string("nan"));
      }
      os << '\n';
    }
  os << "mask " << data.missing_count() << '\n';
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < data.mask.size(); ++i) {
    if (data.mask[i]) continue;
    os << (col ? " " : "") << i;
    if (++col == 20) {
      os << '\n';
      col = 0;
    }
  }
  if (col) os << '\n';
  os << "end\n";
}

GridDataset read_grid(std::istream& is) {
  if (next_line(is, "header") != "GRIDTENSOR v1") throw FormatError("missing 'GRIDTENSOR v1' header");
  auto w = words(next_line(is, "dims"));
  if (w.size() != 4 || w[0] != "dims") throw FormatError("expected 'dims S T N'");
  const long S = parse_long(w[1], "dims"), T = parse_long(w[2], "dims"), N = parse_long(w[3], "dims");
  if (S <= 0 || T <= 0 || N <= 0) throw FormatError("dims must be positive");
  w = words(next_line(is, "axis"));
  GridDataset d;
  if (w.size() == 3 && w[0] == "axis" && w[1] == "1D") {
    d.x = read_axis(is, "x", parse_long(w[2], "axis"));
  } else if (w.size() == 4 && w[0] == "axis" && w[1] == "2D") {
    d.x = read_axis(is, "x", parse_long(w[2], "axis"));
    d.y = read_axis(is, "y", parse_long(w[3], "axis"));
  } else {
    throw FormatError("expected 'axis 1D nx' or 'axis 2D nx ny'");
  }
  d.t = read_axis(is, "t", T);
  w = words(next_line(is, "components"));
  if (w.empty() || w[0] != "components") throw FormatError("expected 'components' line");
  d.components.assign(w.begin() + 1, w.end());
  if (next_line(is, "data") != "data") throw FormatError("expected 'data' section");
  d.values = Tensor(S, T, N);
  Eigen::Index read = 0;
  const Eigen::Index total = S * T * N;
  std::string tok;
  while (read < total && is >> tok) {
    const Eigen::Index s = read % S, t = (read / S) % T, n = read / (S * T);
    d.values(s, t, n) = parse_double(tok, "data value " + std::to_string(read));
    ++read;
  }
  if (read != total)
    throw FormatError("payload has " + std::to_string(read) + " values, expected " + std::to_string(total));
  w = words(next_line(is, "mask"));
  if (w.size() != 2 || w[0] != "mask") throw FormatError("expected 'mask K' after data");
  const long missing = parse_long(w[1], "mask");
  d.mask.assign(static_cast<std::size_t>(total), 1);
  for (long k = 0; k < missing; ++k) {
    if (!(is >> tok)) throw FormatError("mask section is truncated");
    const long i = parse_long(tok, "mask index");
    if (i < 0 || i >= total) throw FormatError("mask index " + tok + " out of range");
    d.mask[static_cast<std::size_t>(i)] = 0;
    d.values.values()[i] = 0.0;
  }
  if (next_line(is, "end") != "end") throw FormatError("expected 'end'");
  for (Eigen::Index i = 0; i < total; ++i)
    if (d.mask[static_cast<std::size_t>(i)] && std::isnan(d.values.values()[i]))
      throw FormatError("nan at index " + std::to_string(i) + " is not listed in the mask");
  try {
    d.validate();
  } catch (const DimensionError& e) {
    throw FormatError(e.what());
  }
  return d;
}

void write_grid_file(const std::filesystem::path& path, const GridDataset& data) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_grid(os, data);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

GridDataset read_grid_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset " + path.string());
  try {
    return read_grid(is);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// chain CSV

void write_chain(std::ostream& os, const ChainSamples& samples, const ChainInfo& info) {
  os << "# bayespde chain v1\n";
  os << "# iterations: " << samples.size() << '\n';
  os << "# burn_in: " << samples.burn_in << '\n';
  os << "# subsample_size: " << samples.subsample_size << '\n';
  os << "# components: " << join(info.components, '|') << '\n';
  os << "# lhs: " << join(info.lhs, '|') << '\n';
  os << "# terms: " << join(info.terms, '|') << '\n';
  os << "iteration,parameter,component,term,value\n";
  const std::size_t N = info.components.size();
  for (std::size_t it = 0; it < samples.size(); ++it) {
    for (std::size_t n = 0; n < N; ++n) {
      const auto r = static_cast<Eigen::Index>(n);
      const std::string& c = info.components[n];
      for (std::size_t d = 0; d < info.terms.size(); ++d) {
        const auto k = static_cast<Eigen::Index>(d);
        os << it << ",gamma," << c << ',' << info.terms[d] << ',' << int(samples.gamma[it](r, k)) << '\n';
        os << it << ",M," << c << ',' << info.terms[d] << ',' << fmt(samples.M[it](r, k)) << '\n';
      }
      os << it << ",pi," << c << ",," << fmt(samples.pi[it][r]) << '\n';
      os << it << ",sigma2_U," << c << ",," << fmt(samples.sigma2_U[it][r]) << '\n';
      os << it << ",sigma2_V," << c << ",," << fmt(samples.sigma2_V[it][r]) << '\n';
    }
  }
}

std::pair<ChainSamples, ChainInfo> read_chain(std::istream& is) {
  std::map<std::string, std::string> meta;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon != std::string::npos)
        meta[trim(line.substr(1, colon - 1))] = trim(line.substr(colon + 1));
      continue;
    }
    if (line != "iteration,parameter,component,term,value")
      throw FormatError("chain file lacks the CSV header");
    header = true;
    break;
  }
  if (!header) throw FormatError("chain file lacks the CSV header");
  for (const char* key : {"iterations", "burn_in", "components", "terms", "lhs"})
    if (!meta.contains(key)) throw FormatError(std::string("chain metadata lacks '") + key + "'");

  ChainInfo info;
  info.components = split(meta["components"], '|');
  info.lhs = split(meta["lhs"], '|');
  info.terms = split(meta["terms"], '|');
  const long iters = parse_long(meta["iterations"], "iterations");
  ChainSamples s;
  s.burn_in = static_cast<int>(parse_long(meta["burn_in"], "burn_in"));
  if (meta.contains("subsample_size"))
    s.subsample_size = static_cast<int>(parse_long(meta["subsample_size"], "subsample_size"));
  info.subsample_size = s.subsample_size;
  if (iters < 0) throw FormatError("negative iteration count");
  const auto N = static_cast<Eigen::Index>(info.components.size());
  const auto D = static_cast<Eigen::Index>(info.terms.size());
  std::map<std::string, Eigen::Index> comp_idx, term_idx;
  for (Eigen::Index n = 0; n < N; ++n) comp_idx[info.components[static_cast<std::size_t>(n)]] = n;
  for (Eigen::Index d = 0; d < D; ++d) term_idx[info.terms[static_cast<std::size_t>(d)]] = d;
  const auto U = static_cast<std::size_t>(iters);
  s.M.assign(U, Matrix::Zero(N, D));
  s.gamma.assign(U, IndicatorMatrix::Zero(N, D));
  s.pi.assign(U, Vector::Zero(N));
  s.sigma2_U.assign(U, Vector::Zero(N));
  s.sigma2_V.assign(U, Vector::Zero(N));

  long row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    const std::string where = "chain row " + std::to_string(row);
    if (f.size() != 5) throw FormatError(where + ": expected 5 fields");
    const long it = parse_long(f[0], where);
    if (it < 0 || it >= iters) throw FormatError(where + ": iteration out of range");
    const auto ci = comp_idx.find(f[2]);
    if (ci == comp_idx.end()) throw FormatError(where + ": unknown component '" + f[2] + "'");
    const auto u = static_cast<std::size_t>(it);
    const double value = parse_double(f[4], where);
    if (f[1] == "gamma" || f[1] == "M") {
      const auto ti = term_idx.find(f[3]);
      if (ti == term_idx.end()) throw FormatError(where + ": unknown term '" + f[3] + "'");
      if (f[1] == "gamma")
        s.gamma[u](ci->second, ti->second) = value != 0.0 ? 1 : 0;
      else
        s.M[u](ci->second, ti->second) = value;
    } else if (f[1] == "pi") {
      s.pi[u][ci->second] = value;
    } else if (f[1] == "sigma2_U") {
      s.sigma2_U[u][ci->second] = value;
    } else if (f[1] == "sigma2_V") {
      s.sigma2_V[u][ci->second] = value;
    } else {
      throw FormatError(where + ": unknown parameter '" + f[1] + "'");
    }
  }
  return {std::move(s), std::move(info)};
}

void write_chain_file(const std::filesystem::path& path, const ChainSamples& samples,
                      const ChainInfo& info) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_chain(os, samples, info);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::pair<ChainSamples, ChainInfo> read_chain_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open chain " + path.string());
  try {
    return read_chain(is);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_summary_csv(std::ostream& os, const DiscoverySummary& summary,
                       const std::vector<std::string>& components) {
  os << "component,term,inclusion,mean,hpd_lower,hpd_upper,draws,included\n";
  for (const TermSummary& t : summary.terms)
    os << components.at(static_cast<std::size_t>(t.component)) << ',' << t.name << ','
       << fmt(t.inclusion) << ',' << fmt(t.mean) << ',' << fmt(t.hpd_lo) << ',' << fmt(t.hpd_hi)
       << ',' << t.draws << ',' << (t.included ? 1 : 0) << '\n';
}

void write_equations(std::ostream& os, const DiscoverySummary& summary) {
  os << "# inclusion threshold " << format_coefficient(summary.threshold) << ", " << summary.retained
     << " retained draws after " << summary.burn_in << " burn-in\n";
  os << "mean:\n";
  for (const auto& e : summary.equations) os << "  " << e << '\n';
  os << "lower 95% HPD:\n";
  for (const auto& e : summary.lower) os << "  " << e << '\n';
  os << "upper 95% HPD:\n";
  for (const auto& e : summary.upper) os << "  " << e << '\n';
  for (const auto& w : summary.warnings) os << "warning: " << w << '\n';
}

// ---------------------------------------------------------------------------
// config

DerivSpec parse_suffix(const std::string& text) {
  DerivSpec d;
  if (text.empty()) throw std::invalid_argument("empty derivative suffix");
  for (char c : text) {
    if (c == 'x')
      ++d.dx;
    else if (c == 'y')
      ++d.dy;
    else if (c == 't')
      ++d.dt;
    else
      throw std::invalid_argument("bad derivative letter '" + std::string(1, c) + "' in '" + text + "'");
  }
  return d;
}

OperatorSpec parse_operator(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty() || t == "identity") return OperatorSpec::identity();
  if (t == "laplacian") return OperatorSpec::laplacian();
  OperatorSpec op;
  for (std::string part : split(t, '+')) {
    part = trim(part);
    double coef = 1.0;
    const auto star = part.find('*');
    if (star != std::string::npos) {
      coef = parse_double(trim(part.substr(0, star)), "operator coefficient");
      part = trim(part.substr(star + 1));
    }
    const auto us = part.find('_');
    if (us != std::string::npos) part = part.substr(us + 1);
    const DerivSpec d = parse_suffix(part);
    if (d.dt != 0) throw std::invalid_argument("operator terms must be spatial");
    op.terms.emplace_back(coef, d);
  }
  return op;
}

namespace {

struct Reader {
  const toml::table& root;

  const toml::node* at(const std::string& path) const {
    const toml::node_view<const toml::node> v = root.at_path(path);
    return v.node();
  }
  template <typename T>
  std::optional<T> get(const std::string& path) const {
    const toml::node* n = at(path);
    if (!n) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = n->value<double>()) return *v;
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
      if (n->is_integer()) return n->value<std::int64_t>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (n->is_boolean()) return n->value<bool>();
    } else {
      if (n->is_string()) return n->value<std::string>();
    }
    throw ConfigError(path, std::string("has the wrong type (expected ") +
                                (std::is_same_v<T, double>          ? "number"
                                 : std::is_same_v<T, std::int64_t> ? "integer"
                                 : std::is_same_v<T, bool>         ? "boolean"
                                                                   : "string") +
                                ")");
  }
  int get_int(const std::string& path, int fallback) const {
    const auto v = get<std::int64_t>(path);
    return v ? static_cast<int>(*v) : fallback;
  }
  double get_double(const std::string& path, double fallback) const {
    const auto v = get<double>(path);
    return v ? *v : fallback;
  }
  std::vector<double> get_numbers(const std::string& path) const {
    const toml::node* n = at(path);
    if (!n) return {};
    if (auto v = n->value<double>()) return {*v};
    const toml::array* arr = n->as_array();
    if (!arr) throw ConfigError(path, "expected a number or an array of numbers");
    std::vector<double> out;
    for (const auto& e : *arr) {
      const auto v = e.value<double>();
      if (!v) throw ConfigError(path, "expected an array of numbers");
      out.push_back(*v);
    }
    return out;
  }
  std::vector<std::string> get_strings(const std::string& path) const {
    const toml::node* n = at(path);
    if (!n) return {};
    const toml::array* arr = n->as_array();
    if (!arr) throw ConfigError(path, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *arr) {
      const auto v = e.value<std::string>();
      if (!v) throw ConfigError(path, "expected an array of strings");
      out.push_back(*v);
    }
    return out;
  }
};

void check_keys(const toml::table& t, const std::string& prefix,
                const std::vector<std::string>& allowed) {
  for (const auto& [k, v] : t) {
    const std::string key(k.str());
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(prefix.empty() ? key : prefix + "." + key, "unknown key");
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError("config", msg.str());
  }
  check_keys(root, "", {"data", "basis", "model", "sampler", "output"});
  auto section = [&](const char* name) -> const toml::table* {
    const toml::node* n = root.get(name);
    if (!n) return nullptr;
    if (!n->is_table()) throw ConfigError(name, "must be a table");
    return n->as_table();
  };
  if (auto s = section("data")) check_keys(*s, "data", {"path", "covariates"});
  if (auto s = section("basis"))
    check_keys(*s, "basis", {"space", "time", "space_degree", "time_degree"});
  if (auto s = section("model"))
    check_keys(*s, "model", {"time_order", "operator", "library", "auto"});
  if (auto s = section("sampler"))
    check_keys(*s, "sampler",
               {"iterations", "burn_in", "minibatch", "kappa", "lambda1", "lambda2", "a", "b", "g",
                "subsample_g", "beta", "subsample", "nu_V", "A_V", "seed", "record_A_every"});
  if (auto s = section("output")) check_keys(*s, "output", {"dir", "threshold"});

  const Reader r{root};
  RunConfig cfg;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  const auto data_path = r.get<std::string>("data.path");
  if (!data_path) throw ConfigError("data.path", "is required");
  cfg.dataset = resolve(*data_path);
  if (const toml::node* cov = r.at("data.covariates")) {
    const toml::array* arr = cov->as_array();
    if (!arr) throw ConfigError("data.covariates", "expected an array of {name, path} tables");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const std::string where = "data.covariates[" + std::to_string(i) + "]";
      const toml::table* t = (*arr)[i].as_table();
      if (!t) throw ConfigError(where, "expected a table with name and path");
      const auto name = (*t)["name"].value<std::string>();
      const auto path = (*t)["path"].value<std::string>();
      if (!name || !path) throw ConfigError(where, "needs string fields name and path");
      cfg.covariates.push_back({*name, resolve(*path)});
    }
  }

  if (const toml::node* sp = r.at("basis.space")) {
    if (auto v = sp->value<std::int64_t>()) {
      cfg.space_count = {static_cast<int>(*v)};
    } else if (const toml::array* arr = sp->as_array()) {
      for (const auto& e : *arr) {
        const auto v2 = e.value<std::int64_t>();
        if (!v2) throw ConfigError("basis.space", "expected integers");
        cfg.space_count.push_back(static_cast<int>(*v2));
      }
    } else {
      throw ConfigError("basis.space", "expected an integer or [Px, Py]");
    }
    if (cfg.space_count.empty() || cfg.space_count.size() > 2)
      throw ConfigError("basis.space", "expected one or two counts");
    for (int c : cfg.space_count)
      if (c < 2) throw ConfigError("basis.space", "counts must be >= 2");
  } else {
    throw ConfigError("basis.space", "is required");
  }
  cfg.time_count = r.get_int("basis.time", 20);
  if (cfg.time_count < 2) throw ConfigError("basis.time", "must be >= 2");
  cfg.space_degree = r.get_int("basis.space_degree", 0);
  cfg.time_degree = r.get_int("basis.time_degree", 0);
  if (cfg.space_degree < 0) throw ConfigError("basis.space_degree", "must be >= 0");
  if (cfg.time_degree < 0) throw ConfigError("basis.time_degree", "must be >= 0");

  cfg.time_order = r.get_int("model.time_order", 1);
  if (cfg.time_order < 1) throw ConfigError("model.time_order", "must be >= 1");
  if (auto op = r.get<std::string>("model.operator")) {
    try {
      cfg.op = parse_operator(*op);
    } catch (const std::exception& e) {
      throw ConfigError("model.operator", e.what());
    }
  }
  const toml::node* lib = r.at("model.library");
  if (!lib) throw ConfigError("model.library", "is required (a list of terms or \"auto\")");
  if (auto s = lib->value<std::string>()) {
    if (*s != "auto") throw ConfigError("model.library", "string value must be \"auto\"");
    AutoLibrarySpec a;
    if (const toml::node* an = r.at("model.auto"); an && !an->is_table())
      throw ConfigError("model.auto", "must be a table");
    if (auto t = root.at_path("model.auto").as_table())
      check_keys(*t, "model.auto",
                 {"max_power", "derivs", "interaction_power", "interaction_derivs",
                  "same_component_only"});
    a.max_power = r.get_int("model.auto.max_power", 3);
    auto derivs = [&](const std::string& path) {
      std::vector<DerivSpec> out;
      for (const auto& d : r.get_strings(path)) {
        try {
          out.push_back(parse_suffix(d));
        } catch (const std::exception& e) {
          throw ConfigError(path, e.what());
        }
      }
      return out;
    };
    a.derivs = derivs("model.auto.derivs");
    if (a.derivs.empty()) throw ConfigError("model.auto.derivs", "is required for an auto library");
    a.options.interaction_power = r.get_int("model.auto.interaction_power", -1);
    a.options.interaction_derivs = derivs("model.auto.interaction_derivs");
    a.options.same_component_only = r.get<bool>("model.auto.same_component_only").value_or(false);
    cfg.auto_library = a;
  } else {
    cfg.library = r.get_strings("model.library");
    if (cfg.library.empty()) throw ConfigError("model.library", "must list at least one term");
  }

  ModelConfig& m = cfg.model;
  m.iterations = r.get_int("sampler.iterations", m.iterations);
  m.burn_in = r.get_int("sampler.burn_in", m.burn_in);
  m.minibatch = r.get_int("sampler.minibatch", m.minibatch);
  if (auto k = r.get_numbers("sampler.kappa"); !k.empty()) m.kappa = k;
  m.lambda1 = r.get_double("sampler.lambda1", m.lambda1);
  m.lambda2 = r.get_double("sampler.lambda2", m.lambda2);
  m.a = r.get_double("sampler.a", m.a);
  m.b = r.get_double("sampler.b", m.b);
  m.g = r.get_double("sampler.g", m.g);
  m.subsample_g = r.get<bool>("sampler.subsample_g").value_or(m.subsample_g);
  if (const toml::node* b = r.at("sampler.beta")) {
    if (auto s = b->value<std::string>()) {
      if (*s != "auto") throw ConfigError("sampler.beta", "must be a number in (0,1) or \"auto\"");
    } else if (auto v = b->value<double>()) {
      cfg.beta = *v;
    } else {
      throw ConfigError("sampler.beta", "must be a number in (0,1) or \"auto\"");
    }
  }
  m.subsample = r.get_int("sampler.subsample", m.subsample);
  m.nu_V = r.get_double("sampler.nu_V", m.nu_V);
  m.A_V = r.get_double("sampler.A_V", m.A_V);
  const auto seed = r.get<std::int64_t>("sampler.seed");
  if (seed && *seed < 0) throw ConfigError("sampler.seed", "must be >= 0");
  if (seed) m.seed = static_cast<std::uint64_t>(*seed);
  m.record_A_every = r.get_int("sampler.record_A_every", 0);
  cfg.threshold = r.get_double("output.threshold", 0.5);
  m.inclusion_threshold = cfg.threshold;
  if (auto dir = r.get<std::string>("output.dir")) cfg.output_dir = resolve(*dir);
  if (cfg.beta) m.beta_rss = *cfg.beta;

  auto field_of = [](const std::string& msg) -> std::string {
    for (const char* k : {"beta", "iterations", "burn_in", "kappa", "minibatch", "Beta", "penalties",
                          "Half-t", "g ", "inclusion_threshold"}) {
      if (msg.find(k) == std::string::npos) continue;
      const std::string key = k;
      if (key == "beta") return "sampler.beta";
      if (key == "Beta") return "sampler.a";
      if (key == "penalties") return "sampler.lambda1";
      if (key == "Half-t") return "sampler.nu_V";
      if (key == "g ") return "sampler.g";
      if (key == "inclusion_threshold") return "output.threshold";
      return "sampler." + key;
    }
    return "sampler";
  };
  try {
    m.validate(static_cast<int>(m.kappa.size()));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field_of(e.what()), e.what());
  }
  return cfg;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

RunConfig read_config_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError("config", e.what());
  }
  return parse_config(text, path.parent_path());
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace bayespde
