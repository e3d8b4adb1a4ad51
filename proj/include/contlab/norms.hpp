#pragma once

// State norms on uniformly sampled profiles over [0,1], the running extremals
// of the velocity and growth coefficient, and the fading-memory maxima that
// appear in the stability bounds.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "contlab/fields.hpp"

namespace contlab {

/// Either a finite p > 1 or the sup norm. The sup norm is not a large p.
class NormOrder {
 public:
  static NormOrder lp(double p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("norm order p must be > 1");
    return NormOrder(p);
  }
  static NormOrder sup() { return NormOrder(std::numeric_limits<double>::infinity()); }

  bool is_sup() const noexcept { return std::isinf(p_); }
  double p() const noexcept { return p_; }
  std::string label() const { return is_sup() ? "inf" : detail::format_number(p_); }

  friend bool operator==(const NormOrder&, const NormOrder&) = default;

 private:
  explicit NormOrder(double p) : p_(p) {}
  double p_;
};

/// Composite trapezoid of |w|^p over [0,1] on uniform samples, then the p-th root.
inline double lp_norm(std::span<const double> row, double p) {
  const std::size_t n = row.size();
  if (n < 2) throw std::invalid_argument("lp_norm: need at least two samples");
  const double h = 1.0 / static_cast<double>(n - 1);
  double sum = 0.5 * (std::pow(std::fabs(row.front()), p) + std::pow(std::fabs(row.back()), p));
  for (std::size_t i = 1; i + 1 < n; ++i) sum += std::pow(std::fabs(row[i]), p);
  return std::pow(sum * h, 1.0 / p);
}

inline double sup_norm(std::span<const double> row) {
  double m = 0.0;
  for (double v : row) m = std::max(m, std::fabs(v));
  return m;
}

inline double norm(std::span<const double> row, NormOrder order) {
  return order.is_sup() ? sup_norm(row) : lp_norm(row, order.p());
}

inline std::vector<double> log_deviation(std::span<const double> rho_row, double rho_s) {
  std::vector<double> w(rho_row.size());
  for (std::size_t i = 0; i < rho_row.size(); ++i) {
    if (!(rho_row[i] > 0.0)) throw std::domain_error("log norm of a non-positive density sample");
    w[i] = std::log(rho_row[i] / rho_s);
  }
  return w;
}

inline double lp_log_norm(std::span<const double> rho_row, double rho_s, double p) {
  return lp_norm(log_deviation(rho_row, rho_s), p);
}

inline double sup_log_norm(std::span<const double> rho_row, double rho_s) {
  return sup_norm(log_deviation(rho_row, rho_s));
}

inline double log_norm(std::span<const double> rho_row, double rho_s, NormOrder order) {
  return norm(log_deviation(rho_row, rho_s), order);
}

/// h(s) = 1 for s < 0, 0 for s >= 0.
inline int heaviside_h(double s) noexcept { return s < 0.0 ? 1 : 0; }

struct ExtremalsAt {
  double vmin = 1.0;  // min of v over [0,t] x [0,1]
  double vmax = 0.0;  // max of dv/dx over [0,t] x [0,1]
  double A = 0.0;     // max of a over [0,t] x [0,1]
};

/// Running extremals at every grid time.
struct Extremals {
  std::vector<double> times;
  std::vector<double> vmin;
  std::vector<double> vmax;
  std::vector<double> A;

  ExtremalsAt at(std::size_t k) const { return {vmin[k], vmax[k], A[k]}; }
};

/// Grid minimum of v, grid maximum of the finite-differenced dv/dx and grid
/// maximum of a (0 when absent), each accumulated over the rows t_0..t_k.
inline Extremals extremals(const VelocityField& v, const SpaceTimeField* a = nullptr) {
  const Grid& g = v.grid();
  const int nt = g.nt();
  Extremals e;
  e.times = g.ts();
  e.vmin.resize(nt + 1);
  e.vmax.resize(nt + 1);
  e.A.resize(nt + 1);
  double run_min = std::numeric_limits<double>::infinity();
  double run_max = -std::numeric_limits<double>::infinity();
  double run_a = -std::numeric_limits<double>::infinity();
  const bool v_const = v.field().is_constant();
  const bool v_uniform = v.field().uniform_in_x();
  for (int k = 0; k <= nt; ++k) {
    const double t = g.t(k);
    for (int j = 0; j <= g.nx; ++j) {
      const double x = g.x(j);
      run_min = std::min(run_min, v(t, x));
      run_max = std::max(run_max, v_uniform ? 0.0 : v.dvdx(t, x));
      if (a) run_a = std::max(run_a, (*a)(t, x));
      if (v_const && !a) break;
    }
    e.vmin[k] = run_min;
    e.vmax[k] = run_max;
    e.A[k] = a ? run_a : 0.0;
  }
  return e;
}

namespace detail {

/// Golden-section search for the maximum of g on [a, b]; g is assumed unimodal there.
template <class F>
std::pair<double, double> golden_max(F&& g, double a, double b) {
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double gc = g(c);
  double gd = g(d);
  for (int it = 0; it < 80 && b - a > 1e-14 * std::max(1.0, std::fabs(a)); ++it) {
    if (gc >= gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - kInvPhi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + kInvPhi * (b - a);
      gd = g(d);
    }
  }
  return gc >= gd ? std::pair{c, gc} : std::pair{d, gd};
}

}  // namespace detail

/// max over samples s in [window_start, t] of g(s) exp(-mu (t - s)).
inline double fading_memory_max(std::span<const double> times, std::span<const double> g, double t,
                                double mu, double window_start) {
  if (!(mu >= 0.0)) throw std::invalid_argument("fading_memory_max: mu must be >= 0");
  const double tol = 1e-12 * std::max(1.0, std::fabs(t));
  double best = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double s = times[i];
    if (s < window_start - tol || s > t + tol) continue;
    const double val = g[i] * std::exp(-mu * (t - s));
    best = any ? std::max(best, val) : val;
    any = true;
  }
  return best;
}

/// Left-hand sides per time for one norm, with optional right-hand sides.
struct NormTrace {
  NormOrder order = NormOrder::sup();
  std::vector<double> times;
  std::vector<double> lhs;
  std::vector<double> rhs;

  std::vector<double> margins() const {
    std::vector<double> m(rhs.size());
    for (std::size_t i = 0; i < rhs.size(); ++i) m[i] = rhs[i] - lhs[i];
    return m;
  }
};

}  // namespace contlab
