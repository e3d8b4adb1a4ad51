#pragma once

// Flat `key = value` scenario files. `#` starts a comment outside quotes.
// Expression values are quoted; list values are comma separated. A piecewise
// initial profile is written as quoted pieces separated by ';' together with
// `jumps = xi_1, xi_2, ...`.
//
//   problem = continuity
//   rho_s = 1
//   v = "1 + x"
//   b = "0"
//   rho0 = "1/(1+x)"
//   nx = 200
//   dt = 0.002
//   horizon = 2
//   p = 2, inf
//   mu = 0.1, 1

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "contlab/bounds.hpp"
#include "contlab/continuity.hpp"
#include "contlab/expr.hpp"
#include "contlab/fields.hpp"
#include "contlab/manufacturing.hpp"
#include "contlab/norms.hpp"
#include "contlab/transport.hpp"

namespace contlab {

enum class ProblemKind { transport, continuity, manufacturing };

inline std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::transport: return "transport";
    case ProblemKind::continuity: return "continuity";
    case ProblemKind::manufacturing: return "manufacturing";
  }
  return "?";
}

/// One or more problems found while loading a scenario.
class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& ps) {
    std::string s;
    for (const auto& p : ps) s += (s.empty() ? "" : "; ") + p;
    return s;
  }
  std::vector<std::string> problems_;
};

struct Scenario {
  std::string name = "scenario";
  ProblemKind problem = ProblemKind::continuity;
  double rho_s = 1.0;
  std::string v = "1";
  std::string b = "0";
  std::string rho0 = "1";
  std::vector<std::string> phi{"0"};
  std::vector<double> jumps;
  std::string a = "0";
  std::string f = "0";
  std::string lambda = "1/(1+W)";
  Grid grid{200, 0.01, 2.0};
  double fd_step = fd::default_step;

  std::vector<Estimate> estimates;  // empty: every estimate of the problem kind
  std::vector<NormOrder> orders{NormOrder::lp(2.0), NormOrder::sup()};
  std::vector<double> mus{0.1, 1.0};
  std::vector<double> thetas{0.25, 0.5, 0.75};
  std::vector<double> gain_mus{1.0, 0.1, 0.01, 1e-4};

  double cfl = 0.5;           // upwind oracle Courant number
  double oracle_tol = 2e-2;   // max-abs discrepancy allowed at the scenario nx
  int oracle_rows = 10;       // compared rows, evenly spread over the horizon
  int campaign = 0;           // random scenarios per sweep (0: sweep the listed values)
  std::string sweep_key = "mu";
  std::vector<double> sweep_values;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

/// Splits on `sep` outside double quotes.
inline std::vector<std::string> split_outside_quotes(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : s) {
    if (c == '"') quoted = !quoted;
    if (c == sep && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

inline std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  if (v.find('"') != std::string::npos) throw std::invalid_argument("unbalanced quotes");
  return v;
}

inline double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  if (ec != std::errc() || ptr != end || s.empty()) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return out;
}

inline int parse_int(const std::string& s) {
  int out = 0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  if (ec != std::errc() || ptr != end || s.empty()) {
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  }
  return out;
}

inline std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_outside_quotes(s, ',')) out.push_back(parse_double(item));
  return out;
}

inline NormOrder parse_order(const std::string& s) {
  if (s == "inf" || s == "sup") return NormOrder::sup();
  return NormOrder::lp(parse_double(s));
}

}  // namespace detail

/// Parses scenario text. Every malformed line is reported, each prefixed with
/// its line number.
inline Scenario parse_scenario(std::string_view text, const std::string& default_name = "scenario") {
  Scenario sc;
  sc.name = default_name;
  std::vector<std::string> problems;
  std::map<std::string, int> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back(where + "expected 'key = value'");
      continue;
    }
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh) {
      problems.push_back(where + "duplicate key '" + key + "' (first on line " +
                         std::to_string(it->second) + ")");
      continue;
    }
    if (value.empty()) {
      problems.push_back(where + "empty value for '" + key + "'");
      continue;
    }
    try {
      if (key == "name") {
        sc.name = detail::unquote(value);
      } else if (key == "problem") {
        const auto p = detail::unquote(value);
        if (p == "transport") {
          sc.problem = ProblemKind::transport;
        } else if (p == "continuity") {
          sc.problem = ProblemKind::continuity;
        } else if (p == "manufacturing") {
          sc.problem = ProblemKind::manufacturing;
        } else {
          throw std::invalid_argument("unknown problem '" + p + "'");
        }
      } else if (key == "rho_s") {
        sc.rho_s = detail::parse_double(value);
      } else if (key == "v") {
        sc.v = detail::unquote(value);
        SpaceTimeField::parse(sc.v);
      } else if (key == "b") {
        sc.b = detail::unquote(value);
        ScalarSignal::parse(sc.b);
      } else if (key == "rho0") {
        sc.rho0 = detail::unquote(value);
        ScalarProfile::parse(sc.rho0);
      } else if (key == "phi") {
        sc.phi.clear();
        for (const auto& piece : detail::split_outside_quotes(value, ';')) {
          sc.phi.push_back(detail::unquote(piece));
          ScalarProfile::parse(sc.phi.back());
        }
      } else if (key == "jumps") {
        sc.jumps = detail::parse_doubles(value);
      } else if (key == "a") {
        sc.a = detail::unquote(value);
        SpaceTimeField::parse(sc.a);
      } else if (key == "f") {
        sc.f = detail::unquote(value);
        SpaceTimeField::parse(sc.f);
      } else if (key == "lambda") {
        sc.lambda = detail::unquote(value);
        LoadVelocity::parse(sc.lambda);
      } else if (key == "nx") {
        sc.grid.nx = detail::parse_int(value);
      } else if (key == "dt") {
        sc.grid.dt = detail::parse_double(value);
      } else if (key == "horizon") {
        sc.grid.horizon = detail::parse_double(value);
      } else if (key == "fd_step") {
        sc.fd_step = detail::parse_double(value);
      } else if (key == "estimates") {
        sc.estimates.clear();
        for (const auto& id : detail::split_outside_quotes(value, ',')) {
          const auto e = estimate_from_string(id);
          if (!e) throw std::invalid_argument("unknown estimate '" + id + "'");
          sc.estimates.push_back(*e);
        }
      } else if (key == "p") {
        sc.orders.clear();
        for (const auto& item : detail::split_outside_quotes(value, ',')) {
          sc.orders.push_back(detail::parse_order(item));
        }
      } else if (key == "mu") {
        sc.mus = detail::parse_doubles(value);
      } else if (key == "theta") {
        sc.thetas = detail::parse_doubles(value);
      } else if (key == "gain_mu") {
        sc.gain_mus = detail::parse_doubles(value);
      } else if (key == "cfl") {
        sc.cfl = detail::parse_double(value);
      } else if (key == "oracle_tol") {
        sc.oracle_tol = detail::parse_double(value);
      } else if (key == "oracle_rows") {
        sc.oracle_rows = detail::parse_int(value);
      } else if (key == "campaign") {
        sc.campaign = detail::parse_int(value);
      } else if (key == "sweep") {
        sc.sweep_key = detail::unquote(value);
      } else if (key == "sweep_values") {
        sc.sweep_values = detail::parse_doubles(value);
      } else {
        problems.push_back(where + "unknown key '" + key + "'");
      }
    } catch (const ExprSyntaxError& e) {
      problems.push_back(where + key + ": " + e.what());
    } catch (const std::exception& e) {
      problems.push_back(where + key + ": " + e.what());
    }
  }
  if (!problems.empty()) throw ScenarioError(std::move(problems));
  return sc;
}

// Builders. Each throws on the first structural problem; validate_scenario
// collects them all.

inline InitialProfile build_profile(const std::vector<std::string>& pieces,
                                    const std::vector<double>& jumps) {
  std::vector<ScalarProfile> ps;
  ps.reserve(pieces.size());
  for (const auto& src : pieces) ps.push_back(ScalarProfile::parse(src));
  return InitialProfile(std::move(ps), jumps);
}

inline VelocityField build_velocity(const Scenario& sc) {
  return VelocityField(SpaceTimeField::parse(sc.v), sc.grid, sc.fd_step);
}

inline TransportProblem build_transport(const Scenario& sc) {
  TransportProblem p{build_velocity(sc), build_profile(sc.phi, sc.jumps), ScalarSignal::parse(sc.b)};
  p.a = SpaceTimeField::parse(sc.a);
  p.f = SpaceTimeField::parse(sc.f);
  BoundarySignal(p.b, sc.grid);
  TransportCoefficients{p.a, p.f}.validate(sc.grid);
  return p;
}

inline ContinuityProblem build_continuity(const Scenario& sc) {
  ContinuityProblem p{sc.rho_s, ScalarProfile::parse(sc.rho0), ScalarSignal::parse(sc.b),
                      build_velocity(sc)};
  BoundarySignal(p.b, sc.grid);
  p.validate();
  return p;
}

inline ProductionScenario build_production(const Scenario& sc) {
  ProductionScenario p;
  p.rho_s = sc.rho_s;
  p.rho0 = ScalarProfile::parse(sc.rho0);
  p.b = ScalarSignal::parse(sc.b);
  p.lambda = LoadVelocity::parse(sc.lambda);
  p.grid = sc.grid;
  BoundarySignal(p.b, sc.grid);
  loop_constants(p);  // positivity of rho0 and lambda on the envelope
  return p;
}

/// Every validation failure, or an empty list.
inline std::vector<std::string> validation_problems(const Scenario& sc) {
  std::vector<std::string> problems;
  auto attempt = [&](const std::string& what, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      problems.push_back(what + ": " + e.what());
    }
  };
  attempt("grid", [&] { sc.grid.validate(); });
  if (!problems.empty()) return problems;
  if (!(sc.rho_s > 0.0)) problems.push_back("rho_s: must be > 0");
  if (!(sc.fd_step > 0.0)) problems.push_back("fd_step: must be > 0");
  if (sc.orders.empty()) problems.push_back("p: at least one norm order is required");
  for (double mu : sc.mus) {
    if (!(mu >= 0.0)) problems.push_back("mu: values must be >= 0");
  }
  for (double th : sc.thetas) {
    if (!(th > 0.0 && th < 1.0)) problems.push_back("theta: values must lie in (0,1)");
  }
  if (!(sc.cfl > 0.0 && sc.cfl <= 1.0)) problems.push_back("cfl: must lie in (0,1]");
  if (sc.oracle_rows < 1) problems.push_back("oracle_rows: must be >= 1");

  switch (sc.problem) {
    case ProblemKind::transport:
      attempt("v", [&] { build_velocity(sc); });
      attempt("phi", [&] { build_profile(sc.phi, sc.jumps); });
      attempt("b", [&] { BoundarySignal(ScalarSignal::parse(sc.b), sc.grid); });
      attempt("a", [&] { SpaceTimeField::parse(sc.a); });
      attempt("f", [&] { SpaceTimeField::parse(sc.f); });
      if (problems.empty()) attempt("coefficients", [&] { build_transport(sc); });
      break;
    case ProblemKind::continuity:
      attempt("v", [&] { build_velocity(sc); });
      attempt("rho0", [&] {
        ScalarProfile::parse(sc.rho0);
        InitialProfile(ScalarProfile::parse(sc.rho0)).require_positive_smooth(sc.grid);
      });
      attempt("b", [&] { BoundarySignal(ScalarSignal::parse(sc.b), sc.grid); });
      break;
    case ProblemKind::manufacturing:
      attempt("lambda", [&] { LoadVelocity::parse(sc.lambda); });
      attempt("rho0", [&] {
        InitialProfile(ScalarProfile::parse(sc.rho0)).require_positive_smooth(sc.grid);
      });
      attempt("b", [&] { BoundarySignal(ScalarSignal::parse(sc.b), sc.grid); });
      if (problems.empty()) attempt("lambda", [&] { build_production(sc); });
      break;
  }
  for (const Estimate e : sc.estimates) {
    const std::string id = to_string(e);
    const bool ok = (sc.problem == ProblemKind::transport && id.starts_with("transport")) ||
                    (sc.problem == ProblemKind::continuity && id.starts_with("continuity")) ||
                    (sc.problem == ProblemKind::manufacturing && id.starts_with("loop"));
    if (!ok) problems.push_back("estimates: '" + id + "' does not apply to a " +
                                to_string(sc.problem) + " problem");
  }
  return problems;
}

inline Scenario load_scenario_text(std::string_view text, const std::string& name = "scenario") {
  Scenario sc = parse_scenario(text, name);
  auto problems = validation_problems(sc);
  if (!problems.empty()) throw ScenarioError(std::move(problems));
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({"cannot open scenario file '" + path + "'"});
  std::stringstream buf;
  buf << in.rdbuf();
  std::string stem = path;
  if (const auto slash = stem.find_last_of('/'); slash != std::string::npos) {
    stem = stem.substr(slash + 1);
  }
  if (const auto dot = stem.find_last_of('.'); dot != std::string::npos && dot > 0) {
    stem = stem.substr(0, dot);
  }
  return load_scenario_text(buf.str(), stem);
}

/// Writes a scenario back in the file format.
inline std::string format_scenario(const Scenario& sc) {
  std::ostringstream o;
  auto list = [](const std::vector<double>& xs) {
    std::string s;
    for (double x : xs) s += (s.empty() ? "" : ", ") + detail::format_number(x);
    return s;
  };
  o << "name = " << sc.name << "\n";
  o << "problem = " << to_string(sc.problem) << "\n";
  o << "rho_s = " << detail::format_number(sc.rho_s) << "\n";
  switch (sc.problem) {
    case ProblemKind::transport: {
      o << "v = \"" << sc.v << "\"\n";
      std::string pieces;
      for (const auto& p : sc.phi) pieces += (pieces.empty() ? "\"" : "; \"") + p + "\"";
      o << "phi = " << pieces << "\n";
      if (!sc.jumps.empty()) o << "jumps = " << list(sc.jumps) << "\n";
      o << "a = \"" << sc.a << "\"\n";
      o << "f = \"" << sc.f << "\"\n";
      break;
    }
    case ProblemKind::continuity:
      o << "v = \"" << sc.v << "\"\n";
      o << "rho0 = \"" << sc.rho0 << "\"\n";
      break;
    case ProblemKind::manufacturing:
      o << "lambda = \"" << sc.lambda << "\"\n";
      o << "rho0 = \"" << sc.rho0 << "\"\n";
      break;
  }
  o << "b = \"" << sc.b << "\"\n";
  o << "nx = " << sc.grid.nx << "\n";
  o << "dt = " << detail::format_number(sc.grid.dt) << "\n";
  o << "horizon = " << detail::format_number(sc.grid.horizon) << "\n";
  std::string orders;
  for (const auto& ord : sc.orders) orders += (orders.empty() ? "" : ", ") + ord.label();
  o << "p = " << orders << "\n";
  o << "mu = " << list(sc.mus) << "\n";
  return o.str();
}

}  // namespace contlab
