#pragma once

// w_t + v w_x = a w + f on [0,1], w(0,x) = phi(x), w(t,0) = b(t), solved by
// evaluating the explicit characteristic formulas: the value at (t, x) is the
// foot value (phi(x0) or b(t0)) carried along the characteristic with growth
// exp(int a), plus the source f accumulated along the same curve.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "contlab/characteristics.hpp"
#include "contlab/fields.hpp"

namespace contlab {

struct TransportProblem {
  VelocityField v;
  InitialProfile phi;
  ScalarSignal b;
  SpaceTimeField a = SpaceTimeField::constant(0.0);
  SpaceTimeField f = SpaceTimeField::constant(0.0);

  const Grid& grid() const noexcept { return v.grid(); }

  TransportProblem with_grid(const Grid& g) const {
    TransportProblem p = *this;
    p.v = v.with_grid(g);
    return p;
  }

  CompatibilityReport compatibility(double tolerance = 1e-8) const {
    return check_compatibility_transport(phi, b, v.field(), a, f, tolerance, v.fd_step());
  }
};

enum class Component { full, boundary, initial, source };

inline std::string to_string(Component c) {
  switch (c) {
    case Component::full: return "full";
    case Component::boundary: return "w1";
    case Component::initial: return "w2";
    case Component::source: return "w3";
  }
  return "?";
}

/// Values on a subset of grid rows (all rows for solve_field), row-major over x.
struct SolutionField {
  Grid grid;
  Component component = Component::full;
  std::vector<int> rows;
  std::vector<double> times;
  std::vector<double> xs;
  std::vector<double> values;
  std::vector<JumpLocus> loci;  // separatrix first, then one per interior jump

  std::size_t row_count() const noexcept { return rows.size(); }
  std::size_t width() const noexcept { return xs.size(); }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * width(), width()};
  }
  std::span<double> row(std::size_t i) { return {values.data() + i * width(), width()}; }
  double at(std::size_t i, std::size_t j) const { return values[i * width() + j]; }
};

namespace detail {

struct PathIntegrals {
  double carry = 1.0;   // exp of the integral of a over the whole path
  double source = 0.0;  // accumulated f, each contribution grown from its time to the end
};

/// Composite trapezoid along the path samples (absolute time, position).
inline PathIntegrals integrate_along(const TransportProblem& p, std::span<const PathSample> path) {
  PathIntegrals out;
  const std::size_t n = path.size();
  if (n < 2) return out;
  const bool a_zero = p.a.is_zero();
  const bool f_zero = p.f.is_zero();
  if (a_zero && f_zero) return out;

  if (a_zero) {
    double prev = p.f(path[0].s, path[0].x);
    for (std::size_t i = 1; i < n; ++i) {
      const double cur = p.f(path[i].s, path[i].x);
      out.source += 0.5 * (path[i].s - path[i - 1].s) * (prev + cur);
      prev = cur;
    }
    return out;
  }

  // Walk from the end: growth(i) = exp(int_{tau_i}^{t} a).
  double a_next = p.a(path[n - 1].s, path[n - 1].x);
  double f_next = f_zero ? 0.0 : p.f(path[n - 1].s, path[n - 1].x);
  double integral = 0.0;
  double g_next = 1.0;
  for (std::size_t i = n - 1; i-- > 0;) {
    const double a_i = p.a(path[i].s, path[i].x);
    const double h = path[i + 1].s - path[i].s;
    integral += 0.5 * h * (a_i + a_next);
    const double g_i = std::exp(integral);
    if (!f_zero) {
      const double f_i = p.f(path[i].s, path[i].x);
      out.source += 0.5 * h * (g_i * f_i + g_next * f_next);
      f_next = f_i;
    }
    a_next = a_i;
    g_next = g_i;
  }
  out.carry = std::exp(integral);
  return out;
}

inline std::vector<double> locus_points(const InitialProfile& phi) {
  std::vector<double> pts{0.0};
  pts.insert(pts.end(), phi.jumps().begin(), phi.jumps().end());
  return pts;
}

}  // namespace detail

/// w(t, x) with the foot located by the bisection inverses (x0 or t0). The
/// line integrals run along the backward RK4 path through (t, x), the same
/// samples the field solver uses, so both routes share one quadrature.
inline double solve_point(const TransportProblem& p, double t, double x,
                          const CharacteristicMap* map = nullptr) {
  CharacteristicMap local(p.v);
  const CharacteristicMap& cm = map ? *map : local;
  const double r0 = cm.r0(t);
  double foot_value = 0.0;
  if (x > r0) {
    double x0 = cm.backtrace_x0(t, x);
    for (double xi : p.phi.jumps()) {
      if (std::fabs(x0 - xi) <= 1e-10) x0 = xi;
    }
    foot_value = p.phi(x0);
  } else {
    foot_value = p.b(cm.backtrace_t0(t, x));
  }
  const auto bt = trace_back(t, x, p.v, p.phi.jumps());
  const auto in = detail::integrate_along(p, bt.path);
  return in.carry * foot_value + in.source;
}

/// Evaluates the solution on the requested grid rows by tracing each node's
/// characteristic back to its foot.
inline SolutionField solve_rows(const TransportProblem& p, std::span<const int> rows,
                                Component tag = Component::full) {
  const Grid& g = p.grid();
  SolutionField out;
  out.grid = g;
  out.component = tag;
  out.rows.assign(rows.begin(), rows.end());
  out.xs = g.xs();
  out.values.assign(rows.size() * out.xs.size(), 0.0);
  const auto pts = detail::locus_points(p.phi);
  out.loci = jump_loci(pts, p.v, g.horizon);
  for (int k : rows) out.times.push_back(g.t(k));

  const bool zero_data = p.phi.is_zero() && p.b.is_zero() && p.f.is_zero();
  if (zero_data) return out;

  const std::span<const double> snap(p.phi.jumps());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double t = out.times[i];
    auto dst = out.row(i);
    for (std::size_t j = 0; j < out.xs.size(); ++j) {
      const auto bt = trace_back(t, out.xs[j], p.v, snap);
      const double foot_value = bt.from_boundary ? p.b(bt.foot) : p.phi(bt.foot);
      const auto in = detail::integrate_along(p, bt.path);
      dst[j] = in.carry * foot_value + in.source;
    }
  }
  return out;
}

inline SolutionField solve_field(const TransportProblem& p, Component tag = Component::full) {
  std::vector<int> rows(p.grid().nt() + 1);
  std::iota(rows.begin(), rows.end(), 0);
  return solve_rows(p, rows, tag);
}

struct Decomposition {
  SolutionField boundary;  // w1: phi = 0, f = 0
  SolutionField initial;   // w2: b = 0, f = 0
  SolutionField source;    // w3: phi = 0, b = 0
};

inline Decomposition decompose(const TransportProblem& p) {
  TransportProblem w1 = p;
  w1.phi = InitialProfile(std::vector<ScalarProfile>(p.phi.pieces().size(), ScalarProfile::constant(0.0)),
                          p.phi.jumps());
  w1.f = SpaceTimeField::constant(0.0);
  TransportProblem w2 = p;
  w2.b = ScalarSignal::constant(0.0);
  w2.f = SpaceTimeField::constant(0.0);
  TransportProblem w3 = p;
  w3.phi = w1.phi;
  w3.b = ScalarSignal::constant(0.0);
  return {solve_field(w1, Component::boundary), solve_field(w2, Component::initial),
          solve_field(w3, Component::source)};
}

}  // namespace contlab
