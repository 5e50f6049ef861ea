#pragma once

// Experiment configuration: `key = value` lines under [section] headers.
// Parsing goes through Boost.PropertyTree's INI reader; every value is then
// validated with its location ([section] key) in the error. `serialize` prints
// the canonical form, which parses back to an equal configuration.

#include <cstdint>
#include <istream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "blil/csv.hpp"
#include "blil/error.hpp"
#include "blil/weights.hpp"

namespace blil {

struct FieldSpec {
  std::string kind = "lacunary";  ///< lacunary, constant, weight, weight2, boundary
  int terms = 20;                 ///< lacunary terms K
  double value = 1.0;             ///< constant field value
  int count = 1;                  ///< fields with seeds seed, seed + 1, ...
  std::string boundary;           ///< CSV path for kind = boundary
  bool operator==(const FieldSpec&) const = default;
};

struct SampleSpec {
  int count = 64;  ///< x_i = lo + (hi - lo)(i + 1/2)/count
  double lo = 0.0;
  double hi = 2 * std::numbers::pi;
  bool operator==(const SampleSpec&) const = default;
  std::vector<double> points() const {
    std::vector<double> xs;
    for (int i = 0; i < count; ++i) xs.push_back(lo + (hi - lo) * (i + 0.5) / count);
    return xs;
  }
};

/// Levels w(delta) = 2^k for k = from..to, i.e. delta = s_k.
struct LevelSpec {
  int from = 1;
  int to = 12;
  bool operator==(const LevelSpec&) const = default;
};

/// Whitney grid for growth norms: heights 2^-depth..4, x spacing h/ratio.
struct GridConfig {
  int depth = 24;
  int heights = 30;
  double ratio = 8.0;
  int cap = 128;
  bool operator==(const GridConfig&) const = default;
};

struct MartingaleSpec {
  int depth = 10;   ///< levels 0..depth
  int points = 64;  ///< boundary points (i + 0.37)/points
  bool operator==(const MartingaleSpec&) const = default;
};

struct CounterexampleSpec {
  std::string weight = "loglin:72";
  int a = 0;               ///< 0: smallest admissible
  std::vector<int> beta;   ///< empty: chosen from the weight
  int j_max = 4;
  bool relax_bracket_upper = false;
  bool relax_j0 = false;
  bool disable_stopping = false;
  int samples = 400;
  bool operator==(const CounterexampleSpec&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string out = "out";
  std::uint64_t seed = 1;
  double tol = 1e-9;
  std::string weight = "w0";
  FieldSpec field;
  SampleSpec samples;
  LevelSpec levels;
  GridConfig grid;
  MartingaleSpec martingale;
  CounterexampleSpec counterexample;
  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

using boost::property_tree::ptree;

inline std::string where(const std::string& path) {
  const auto dot = path.find('.');
  return "[" + path.substr(0, dot) + "] " + path.substr(dot + 1);
}

template <class T>
T read_value(const ptree& pt, const std::string& path, const T& fallback) {
  const auto node = pt.get_child_optional(ptree::path_type(path, '.'));
  if (!node) return fallback;
  const std::string text = node->data();
  std::istringstream is(text);
  is.imbue(std::locale::classic());
  T v{};
  if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ParseError(where(path) + ": expected true or false", text);
  } else {
    is >> v;
    if (!is || !(is >> std::ws).eof()) throw ParseError(where(path) + ": expected a number", text);
  }
  return v;
}

inline std::vector<int> read_ints(const ptree& pt, const std::string& path) {
  const auto text = read_value<std::string>(pt, path, "");
  std::vector<int> out;
  for (const auto& cell : split_csv_line(text)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::logic_error&) {
      throw ParseError(where(path) + ": expected comma-separated integers", text);
    }
  }
  return out;
}

inline void require(bool ok, const std::string& path, const std::string& what, const std::string& text) {
  if (!ok) throw ParseError(where(path) + ": " + what, text);
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "experiment.name", "experiment.out", "experiment.seed", "experiment.tol", "weight.token", "field.kind",
      "field.terms", "field.value", "field.count", "field.boundary", "samples.count", "samples.lo", "samples.hi",
      "levels.from", "levels.to", "grid.depth", "grid.heights", "grid.ratio", "grid.cap", "martingale.depth",
      "martingale.points", "counterexample.weight", "counterexample.a", "counterexample.beta",
      "counterexample.j_max", "counterexample.relax_bracket_upper", "counterexample.relax_j0",
      "counterexample.disable_stopping", "counterexample.samples"};
  return keys;
}

inline void set_key(ptree& pt, const std::string& path, const std::string& value) {
  if (!known_keys().count(path)) throw ParseError("unknown config key", path);
  pt.put(ptree::path_type(path, '.'), value);
}

}  // namespace detail

/// Validated configuration from a parsed tree.
inline ExperimentConfig config_from_tree(const boost::property_tree::ptree& pt) {
  static const std::set<std::string> sections = {"experiment", "weight",     "field",         "samples",
                                                  "levels",     "grid",       "martingale",    "counterexample"};
  for (const auto& [section, body] : pt) {
    if (!sections.count(section)) throw ParseError("unknown section, or a key outside any [section]", section);
    for (const auto& [key, leaf] : body) {
      if (!detail::known_keys().count(section + "." + key)) {
        throw ParseError("unknown config key [" + section + "] " + key, key);
      }
    }
  }
  using detail::read_value;
  using detail::require;
  ExperimentConfig c;
  c.name = read_value(pt, "experiment.name", c.name);
  c.out = read_value(pt, "experiment.out", c.out);
  c.seed = read_value(pt, "experiment.seed", c.seed);
  c.tol = read_value(pt, "experiment.tol", c.tol);
  require(c.tol > 0.0 && c.tol < 1.0, "experiment.tol", "must lie in (0, 1)", fmt17(c.tol));
  c.weight = read_value(pt, "weight.token", c.weight);
  try {
    parse_weight(c.weight);
  } catch (const ParseError& e) {
    throw ParseError(detail::where("weight.token") + ": " + e.message(), c.weight);
  }
  c.field.kind = read_value(pt, "field.kind", c.field.kind);
  require(std::set<std::string>{"lacunary", "constant", "weight", "weight2", "boundary"}.count(c.field.kind),
          "field.kind", "expected lacunary, constant, weight, weight2 or boundary", c.field.kind);
  c.field.terms = read_value(pt, "field.terms", c.field.terms);
  require(c.field.terms >= 1 && c.field.terms <= 60, "field.terms", "must lie in 1..60", std::to_string(c.field.terms));
  c.field.value = read_value(pt, "field.value", c.field.value);
  c.field.count = read_value(pt, "field.count", c.field.count);
  require(c.field.count >= 1, "field.count", "must be positive", std::to_string(c.field.count));
  c.field.boundary = read_value(pt, "field.boundary", c.field.boundary);
  require(c.field.kind != "boundary" || !c.field.boundary.empty(), "field.boundary",
          "needed for kind = boundary", c.field.boundary);
  c.samples.count = read_value(pt, "samples.count", c.samples.count);
  require(c.samples.count >= 1, "samples.count", "must be positive", std::to_string(c.samples.count));
  c.samples.lo = read_value(pt, "samples.lo", c.samples.lo);
  c.samples.hi = read_value(pt, "samples.hi", c.samples.hi);
  require(c.samples.lo < c.samples.hi, "samples.hi", "must exceed samples.lo", fmt17(c.samples.hi));
  c.levels.from = read_value(pt, "levels.from", c.levels.from);
  c.levels.to = read_value(pt, "levels.to", c.levels.to);
  require(c.levels.from >= 1 && c.levels.from <= c.levels.to && c.levels.to <= 1000, "levels.to",
          "need 1 <= from <= to <= 1000", std::to_string(c.levels.to));
  c.grid.depth = read_value(pt, "grid.depth", c.grid.depth);
  require(c.grid.depth >= 1 && c.grid.depth <= 60, "grid.depth", "must lie in 1..60", std::to_string(c.grid.depth));
  c.grid.heights = read_value(pt, "grid.heights", c.grid.heights);
  require(c.grid.heights >= 2, "grid.heights", "must be at least 2", std::to_string(c.grid.heights));
  c.grid.ratio = read_value(pt, "grid.ratio", c.grid.ratio);
  require(c.grid.ratio > 0.0, "grid.ratio", "must be positive", fmt17(c.grid.ratio));
  c.grid.cap = read_value(pt, "grid.cap", c.grid.cap);
  require(c.grid.cap >= 1, "grid.cap", "must be positive", std::to_string(c.grid.cap));
  c.martingale.depth = read_value(pt, "martingale.depth", c.martingale.depth);
  require(c.martingale.depth >= 3 && c.martingale.depth <= 30, "martingale.depth", "must lie in 3..30",
          std::to_string(c.martingale.depth));
  c.martingale.points = read_value(pt, "martingale.points", c.martingale.points);
  require(c.martingale.points >= 1, "martingale.points", "must be positive", std::to_string(c.martingale.points));
  auto& ce = c.counterexample;
  ce.weight = read_value(pt, "counterexample.weight", ce.weight);
  try {
    parse_weight(ce.weight);
  } catch (const ParseError& e) {
    throw ParseError(detail::where("counterexample.weight") + ": " + e.message(), ce.weight);
  }
  ce.a = read_value(pt, "counterexample.a", ce.a);
  require(ce.a >= 0, "counterexample.a", "must be >= 0", std::to_string(ce.a));
  ce.beta = detail::read_ints(pt, "counterexample.beta");
  ce.j_max = read_value(pt, "counterexample.j_max", ce.j_max);
  require(ce.j_max >= 2, "counterexample.j_max", "must be >= 2", std::to_string(ce.j_max));
  ce.relax_bracket_upper = read_value(pt, "counterexample.relax_bracket_upper", ce.relax_bracket_upper);
  ce.relax_j0 = read_value(pt, "counterexample.relax_j0", ce.relax_j0);
  ce.disable_stopping = read_value(pt, "counterexample.disable_stopping", ce.disable_stopping);
  ce.samples = read_value(pt, "counterexample.samples", ce.samples);
  require(ce.samples >= 1, "counterexample.samples", "must be positive", std::to_string(ce.samples));
  return c;
}

/// Parses config text and then applies `SECTION.KEY=VALUE` overrides in order.
inline ExperimentConfig parse_config(std::istream& in, const std::vector<std::string>& overrides = {}) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError("config line " + std::to_string(e.line()) + ": " + e.message(), e.message());
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("override must be SECTION.KEY=VALUE", ov);
    detail::set_key(pt, ov.substr(0, eq), ov.substr(eq + 1));
  }
  return config_from_tree(pt);
}

inline ExperimentConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides = {}) {
  std::istringstream is(text);
  return parse_config(is, overrides);
}

/// Canonical text: every key in a fixed order, reals at 17 significant digits.
inline std::string serialize(const ExperimentConfig& c) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  auto b = [](bool v) { return v ? "true" : "false"; };
  std::string beta;
  for (std::size_t i = 0; i < c.counterexample.beta.size(); ++i) {
    beta += (i ? "," : "") + std::to_string(c.counterexample.beta[i]);
  }
  os << "[experiment]\nname = " << c.name << "\nout = " << c.out << "\nseed = " << c.seed
     << "\ntol = " << fmt17(c.tol) << "\n\n[weight]\ntoken = " << c.weight << "\n\n[field]\nkind = " << c.field.kind
     << "\nterms = " << c.field.terms << "\nvalue = " << fmt17(c.field.value) << "\ncount = " << c.field.count
     << "\nboundary = " << c.field.boundary << "\n\n[samples]\ncount = " << c.samples.count
     << "\nlo = " << fmt17(c.samples.lo) << "\nhi = " << fmt17(c.samples.hi) << "\n\n[levels]\nfrom = " << c.levels.from
     << "\nto = " << c.levels.to << "\n\n[grid]\ndepth = " << c.grid.depth << "\nheights = " << c.grid.heights
     << "\nratio = " << fmt17(c.grid.ratio) << "\ncap = " << c.grid.cap << "\n\n[martingale]\ndepth = "
     << c.martingale.depth << "\npoints = " << c.martingale.points << "\n\n[counterexample]\nweight = "
     << c.counterexample.weight << "\na = " << c.counterexample.a << "\nbeta = " << beta
     << "\nj_max = " << c.counterexample.j_max << "\nrelax_bracket_upper = " << b(c.counterexample.relax_bracket_upper)
     << "\nrelax_j0 = " << b(c.counterexample.relax_j0) << "\ndisable_stopping = " << b(c.counterexample.disable_stopping)
     << "\nsamples = " << c.counterexample.samples << "\n";
  return os.str();
}

}  // namespace blil
