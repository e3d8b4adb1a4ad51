#pragma once

// Characteristic curves dX/ds = v(t0 + s, X), X(0) = x0 of the transport
// operator, integrated with classical RK4 at the grid time step. Because v > 0
// the flow is strictly increasing in s and in x0, which is what makes the
// bisection inverses below certifiably convergent.

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "contlab/fields.hpp"

namespace contlab {

struct PathSample {
  double s;  // elapsed time along the path (forward flow) or absolute time (back traces)
  double x;
};

enum class PathExit { outlet, alive };

struct CharacteristicPath {
  double t0 = 0.0;
  double x0 = 0.0;
  std::vector<PathSample> samples;
  PathExit exit = PathExit::alive;

  bool exited() const noexcept { return exit == PathExit::outlet; }
  /// Elapsed time at which x = 1 was reached. Only meaningful when exited().
  double s_max() const noexcept { return samples.back().s; }
  double end_position() const noexcept { return samples.back().x; }
};

/// One RK4 step of dX/dt = v(t, X) from (t, x) with signed step h.
inline double rk4_step(const VelocityField& v, double t, double x, double h) {
  const double k1 = v(t, x);
  const double k2 = v(t + 0.5 * h, x + 0.5 * h * k1);
  const double k3 = v(t + 0.5 * h, x + 0.5 * h * k2);
  const double k4 = v(t + h, x + h * k3);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace detail {

inline constexpr double kExitTolerance = 1e-10;
inline constexpr double kInverseTolerance = 1e-12;
inline constexpr double kSnap = 1e-12;

/// Step length for the next step so that a sliver shorter than 1e-9 dt is never left.
inline double next_step(double remaining, double dt) {
  return remaining - dt <= 1e-9 * dt ? remaining : dt;
}

/// Finds the partial step h* in (0, h] at which the outlet x = 1 is hit,
/// landing within kExitTolerance below it.
inline std::pair<double, double> locate_exit(const VelocityField& v, double t, double x,
                                             double h) {
  double lo = 0.0;
  double x_lo = x;
  double hi = h;
  for (int it = 0; it < 200 && 1.0 - x_lo > kExitTolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double xm = rk4_step(v, t, x, mid);
    if (xm >= 1.0) {
      hi = mid;
    } else {
      lo = mid;
      x_lo = xm;
    }
    if (hi - lo <= 1e-300) break;
  }
  return {lo, x_lo};
}

/// X(until; t0, x0) without storing the path. Returns 1 if the outlet is reached first.
inline double flow_endpoint(const VelocityField& v, double t0, double x0, double until) {
  if (x0 >= 1.0) return 1.0;
  const double dt = v.grid().dt;
  double s = 0.0;
  double x = x0;
  while (until - s > 0.0) {
    const double h = next_step(until - s, dt);
    const double xn = rk4_step(v, t0 + s, x, h);
    if (xn >= 1.0) return 1.0;
    x = xn;
    s += h;
  }
  return x;
}

}  // namespace detail

/// Forward characteristic from (t0, x0) up to elapsed time `until`, or until x = 1.
inline CharacteristicPath flow(double t0, double x0, const VelocityField& v, double until) {
  if (!(x0 >= 0.0 && x0 <= 1.0)) throw PreconditionError("flow: x0 must lie in [0,1]");
  if (!(t0 >= 0.0)) throw PreconditionError("flow: t0 must be >= 0");
  CharacteristicPath path;
  path.t0 = t0;
  path.x0 = x0;
  path.samples.push_back({0.0, x0});
  if (x0 >= 1.0) {
    path.exit = PathExit::outlet;
    return path;
  }
  const double dt = v.grid().dt;
  double s = 0.0;
  double x = x0;
  while (until - s > 0.0) {
    const double h = detail::next_step(until - s, dt);
    const double xn = rk4_step(v, t0 + s, x, h);
    if (xn >= 1.0) {
      const auto [h_exit, x_exit] = detail::locate_exit(v, t0 + s, x, h);
      path.samples.push_back({s + h_exit, x_exit});
      path.exit = PathExit::outlet;
      return path;
    }
    x = xn;
    s = (h == until - s) ? until : s + h;
    path.samples.push_back({s, x});
  }
  return path;
}

/// Sampled curve r(t_k) at the grid times of v, held at 1 once it reaches the outlet.
struct JumpLocus {
  double xi = 0.0;
  std::vector<double> r;
};

inline JumpLocus trace_locus(double xi, const VelocityField& v, double horizon) {
  const Grid& g = v.grid();
  const int nt = std::min(g.nt(), static_cast<int>(std::ceil(horizon / g.dt - 1e-9)));
  JumpLocus locus{xi, std::vector<double>(nt + 1, 1.0)};
  const auto path = flow(0.0, xi, v, g.t(nt));
  // Steps are exactly dt from t = 0, so sample k sits on grid time t_k.
  for (std::size_t k = 0; k < path.samples.size() && k <= static_cast<std::size_t>(nt); ++k) {
    locus.r[k] = path.samples[k].x;
  }
  if (path.exited()) {
    // The final sample is the partial exit step; everything from it on is 1.
    const auto last = path.samples.size() - 1;
    if (last <= static_cast<std::size_t>(nt)) locus.r[last] = 1.0;
  }
  return locus;
}

inline std::vector<JumpLocus> jump_loci(std::span<const double> xi, const VelocityField& v,
                                        double horizon) {
  std::vector<JumpLocus> out;
  out.reserve(xi.size());
  for (double p : xi) {
    if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("jump_loci: points must lie in [0,1]");
    out.push_back(trace_locus(p, v, horizon));
  }
  return out;
}

/// r0(t) = X(t; 0, 0), clamped to 1 after the outlet is reached.
inline double separatrix_at(double t, const VelocityField& v) {
  return detail::flow_endpoint(v, 0.0, 0.0, t);
}

/// Memoizes the separatrix at grid times for repeated point inversions.
class CharacteristicMap {
 public:
  explicit CharacteristicMap(VelocityField v)
      : v_(std::move(v)), memo_(std::make_shared<Memo>()) {}

  const VelocityField& velocity() const noexcept { return v_; }

  const JumpLocus& separatrix() const {
    std::call_once(memo_->once, [&] { memo_->r0 = trace_locus(0.0, v_, v_.grid().horizon); });
    return memo_->r0;
  }

  double r0(double t) const {
    const Grid& g = v_.grid();
    const double kf = t / g.dt;
    const double kr = std::round(kf);
    if (std::fabs(kf - kr) < 1e-12 && kr <= g.nt()) {
      return separatrix().r[static_cast<std::size_t>(kr)];
    }
    return separatrix_at(t, v_);
  }

  /// x0 with X(t; 0, x0) = x, for x > r0(t).
  double backtrace_x0(double t, double x) const {
    const double r0t = r0(t);
    if (!(x > r0t)) throw PreconditionError("backtrace_x0: requires x > r0(t)");
    if (t <= 0.0) return x;
    if (x >= 1.0) return outlet_foot(t);
    double lo = 0.0;
    double hi = x;
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      mid = 0.5 * (lo + hi);
      const double end = detail::flow_endpoint(v_, 0.0, mid, t);
      if (std::fabs(end - x) <= detail::kInverseTolerance && end < 1.0) return mid;
      if (end > x) {
        hi = mid;
      } else {
        lo = mid;
      }
      if (hi - lo <= 0.0) break;
    }
    return mid;
  }

  /// t0 with X(t - t0; t0, 0) = x, for x <= r0(t).
  double backtrace_t0(double t, double x) const {
    const double r0t = r0(t);
    if (!(x <= r0t + detail::kSnap)) throw PreconditionError("backtrace_t0: requires x <= r0(t)");
    if (x <= 0.0) return t;
    const double vmin = v_.running_min(t);
    double lo = std::max(0.0, t - x / vmin);
    double hi = t;
    auto reach = [&](double t0) { return detail::flow_endpoint(v_, t0, 0.0, t - t0); };
    if (reach(lo) < x) lo = 0.0;  // sampled vmin can overstate the true minimum
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      mid = 0.5 * (lo + hi);
      const double end = reach(mid);
      if (std::fabs(end - x) <= detail::kInverseTolerance) return mid;
      if (end > x) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (hi - lo <= 0.0) break;
    }
    return mid;
  }

 private:
  // The forward flow is clamped at the outlet, so bisection cannot resolve
  // x = 1; integrate back from (t, 1) instead.
  double outlet_foot(double t) const {
    const Grid& g = v_.grid();
    double pos = 1.0;
    double s = t;
    while (s > 0.0) {
      const double h = detail::next_step(s, g.dt);
      pos = rk4_step(v_, s, pos, -h);
      s = (h == s) ? 0.0 : s - h;
    }
    return pos;
  }

  struct Memo {
    std::once_flag once;
    JumpLocus r0;
  };
  VelocityField v_;
  std::shared_ptr<Memo> memo_;
};

inline double backtrace_x0(double t, double x, const VelocityField& v) {
  return CharacteristicMap(v).backtrace_x0(t, x);
}

inline double backtrace_t0(double t, double x, const VelocityField& v) {
  return CharacteristicMap(v).backtrace_t0(t, x);
}

/// dX/dx0 (s; t0, x0) = exp(int_0^s dv/dx along the path), trapezoid on the path samples.
inline double flow_sensitivity(double s, double t0, double x0, const VelocityField& v) {
  if (s <= 0.0) return 1.0;
  const auto path = flow(t0, x0, v, s);
  if (v.field().uniform_in_x()) return 1.0;
  double integral = 0.0;
  double prev = v.dvdx(t0, path.samples.front().x);
  for (std::size_t i = 1; i < path.samples.size(); ++i) {
    const double cur = v.dvdx(t0 + path.samples[i].s, path.samples[i].x);
    integral += 0.5 * (path.samples[i].s - path.samples[i - 1].s) * (prev + cur);
    prev = cur;
  }
  return std::exp(integral);
}

/// Where the characteristic through (t, x) came from.
struct BackTrace {
  bool from_boundary = false;  // entered at x = 0 (time t0) rather than starting at t = 0
  double foot = 0.0;           // t0 when from_boundary, x0 otherwise
  std::vector<PathSample> path;  // s = absolute time, increasing; front() is the foot
};

/// Integrates the characteristic through (t, x) backward in time until it meets
/// t = 0 or x = 0, one RK4 step of the grid dt at a time. Nodes on the
/// separatrix are assigned to the boundary side. A foot within 1e-12 of a
/// point in `snap` is moved onto it so that nodes on a jump locus take the
/// left-continuous value.
inline BackTrace trace_back(double t, double x, const VelocityField& v,
                            std::span<const double> snap = {}) {
  BackTrace bt;
  const double dt = v.grid().dt;
  if (x <= detail::kSnap) {
    bt.from_boundary = true;
    bt.foot = t;
    bt.path.push_back({t, 0.0});
    return bt;
  }
  bt.path.push_back({t, x});
  double s = t;
  double pos = x;
  while (s > 0.0) {
    const double h = detail::next_step(s, dt);
    const double pn = rk4_step(v, s, pos, -h);
    if (pn <= detail::kSnap) {
      double lo = 0.0;
      double hi = h;
      if (pn <= 0.0) {
        for (int it = 0; it < 200; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double pm = rk4_step(v, s, pos, -mid);
          if (pm > 0.0) {
            lo = mid;
          } else {
            hi = mid;
          }
          if (std::fabs(pm) <= 1e-15 || hi - lo <= 1e-16 * std::max(1.0, s)) break;
        }
      }
      const double t0 = std::max(0.0, s - hi);
      bt.from_boundary = true;
      bt.foot = t0;
      bt.path.push_back({t0, 0.0});
      std::reverse(bt.path.begin(), bt.path.end());
      return bt;
    }
    s = (h == s) ? 0.0 : s - h;
    pos = pn;
    bt.path.push_back({s, pos});
  }
  std::reverse(bt.path.begin(), bt.path.end());
  for (double p : snap) {
    if (std::fabs(pos - p) <= detail::kSnap) {
      pos = p;
      bt.path.front().x = p;
    }
  }
  bt.foot = pos;
  return bt;
}

}  // namespace contlab
