#pragma once

// First-order explicit upwind schemes, kept independent of the
// characteristic solver so that agreement between the two means something.
//   w_j^{n+1} = w_j^n - (dt/dx) v(t_n, x_j) (w_j^n - w_{j-1}^n) + dt (a w_j^n + f)
// with the inflow node set from b(t_{n+1}).

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "contlab/fields.hpp"
#include "contlab/manufacturing.hpp"
#include "contlab/transport.hpp"

namespace contlab {

class CflError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

namespace detail {

inline std::vector<int> strided_rows(int nt, int stride) {
  if (stride < 1) throw std::invalid_argument("output stride must be >= 1");
  std::vector<int> rows;
  for (int k = 0; k <= nt; k += stride) rows.push_back(k);
  return rows;
}

inline void throw_cfl(double courant, double t, double x) {
  throw CflError("upwind: CFL number " + format_number(courant) + " > 1 at t=" + format_number(t) +
                 ", x=" + format_number(x));
}

}  // namespace detail

/// Upwind solution of the transport problem on `g`, storing every
/// `stride`-th time row. The velocity is only sampled, never integrated.
inline SolutionField upwind_solve(const TransportProblem& p, const Grid& g, int stride = 1) {
  g.validate();
  const int nx = g.nx;
  const int nt = g.nt();
  const double lam = g.dt / g.dx();
  SolutionField out;
  out.grid = g;
  out.rows = detail::strided_rows(nt, stride);
  out.xs = g.xs();
  for (int k : out.rows) out.times.push_back(g.t(k));
  out.values.reserve(out.rows.size() * (nx + 1));

  std::vector<double> w(nx + 1);
  std::vector<double> next(nx + 1);
  for (int j = 0; j <= nx; ++j) w[j] = p.phi(out.xs[j]);
  w[0] = p.b(0.0);  // corner convention shared with the characteristic solver
  const bool a_zero = p.a.is_zero();
  const bool f_zero = p.f.is_zero();
  std::size_t next_row = 0;
  auto store = [&](int k) {
    if (next_row < out.rows.size() && out.rows[next_row] == k) {
      out.values.insert(out.values.end(), w.begin(), w.end());
      ++next_row;
    }
  };
  store(0);
  for (int n = 0; n < nt; ++n) {
    const double t = g.t(n);
    for (int j = 1; j <= nx; ++j) {
      const double x = out.xs[j];
      const double c = lam * p.v(t, x);
      if (c > 1.0 + 1e-12) detail::throw_cfl(c, t, x);
      double val = w[j] - c * (w[j] - w[j - 1]);
      if (!a_zero) val += g.dt * p.a(t, x) * w[j];
      if (!f_zero) val += g.dt * p.f(t, x);
      next[j] = val;
    }
    next[0] = p.b(g.t(n + 1));
    w.swap(next);
    store(n + 1);
  }
  return out;
}

/// Upwind closed loop: the velocity lambda(W^n) uses the trapezoid load of
/// the current row; inflow rho_s exp(b(t_{n+1})).
struct UpwindLoop {
  SolutionField rho;
  std::vector<double> times;  // every step
  std::vector<double> W;
  std::vector<double> v;
};

inline UpwindLoop upwind_closed_loop(const ProductionScenario& sc, const Grid& g, int stride = 1) {
  g.validate();
  const int nx = g.nx;
  const int nt = g.nt();
  const double lam = g.dt / g.dx();
  UpwindLoop out;
  out.rho.grid = g;
  out.rho.rows = detail::strided_rows(nt, stride);
  out.rho.xs = g.xs();
  for (int k : out.rho.rows) out.rho.times.push_back(g.t(k));

  std::vector<double> rho(nx + 1);
  std::vector<double> next(nx + 1);
  for (int j = 0; j <= nx; ++j) rho[j] = sc.rho0(out.rho.xs[j]);
  std::size_t next_row = 0;
  auto store = [&](int k) {
    const double W = detail::trapezoid_unit(rho);
    out.times.push_back(g.t(k));
    out.W.push_back(W);
    out.v.push_back(sc.lambda(W));
    if (next_row < out.rho.rows.size() && out.rho.rows[next_row] == k) {
      out.rho.values.insert(out.rho.values.end(), rho.begin(), rho.end());
      ++next_row;
    }
  };
  store(0);
  for (int n = 0; n < nt; ++n) {
    const double c = lam * out.v.back();
    if (c > 1.0 + 1e-12) detail::throw_cfl(c, g.t(n), 0.0);
    for (int j = 1; j <= nx; ++j) next[j] = rho[j] - c * (rho[j] - rho[j - 1]);
    next[0] = sc.rho_s * std::exp(sc.b(g.t(n + 1)));
    rho.swap(next);
    store(n + 1);
  }
  return out;
}

/// Per-row discrepancy between two fields sampled on the same x nodes.
struct DiscrepancyRow {
  double t = 0.0;
  double max_abs = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
};

/// Compares rows of `a` and `b` whose times agree within 1e-9.
inline std::vector<DiscrepancyRow> discrepancy(const SolutionField& a, const SolutionField& b) {
  if (a.width() != b.width()) throw std::invalid_argument("discrepancy: x grids differ");
  std::vector<DiscrepancyRow> rows;
  std::size_t jb = 0;
  for (std::size_t ia = 0; ia < a.row_count(); ++ia) {
    while (jb < b.row_count() && b.times[jb] < a.times[ia] - 1e-9) ++jb;
    if (jb == b.row_count()) break;
    if (std::fabs(b.times[jb] - a.times[ia]) > 1e-9) continue;
    std::vector<double> diff(a.width());
    const auto ra = a.row(ia);
    const auto rb = b.row(jb);
    DiscrepancyRow d;
    d.t = a.times[ia];
    for (std::size_t j = 0; j < diff.size(); ++j) {
      diff[j] = ra[j] - rb[j];
      d.max_abs = std::max(d.max_abs, std::fabs(diff[j]));
    }
    d.l2 = lp_norm(diff, 2.0);
    const double h = 1.0 / static_cast<double>(diff.size() - 1);
    d.l1 = 0.5 * (std::fabs(diff.front()) + std::fabs(diff.back()));
    for (std::size_t j = 1; j + 1 < diff.size(); ++j) d.l1 += std::fabs(diff[j]);
    d.l1 *= h;
    rows.push_back(d);
  }
  return rows;
}

}  // namespace contlab
