#pragma once

// Right-hand sides of the input-to-state stability estimates for the
// transport, continuity and closed-loop production problems, and the
// certification of LHS <= RHS along computed trajectories.
//
// Boundary gain: the estimates are certified with the coefficient
//   (vmin (exp(p (mu + A) / vmin) - 1) / (p (mu + A)))^(1/p),
// which is what bounding the boundary-driven component over [0, r0(t)]
// actually yields. The variant without the leading vmin is kept alongside in
// every certificate as `rhs_displayed`.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "contlab/continuity.hpp"
#include "contlab/norms.hpp"
#include "contlab/transport.hpp"

namespace contlab {

enum class Estimate { continuity_lp, continuity_sup, transport_lp, transport_sup, loop_lp, loop_sup };

inline std::string to_string(Estimate e) {
  switch (e) {
    case Estimate::continuity_lp: return "continuity-lp";
    case Estimate::continuity_sup: return "continuity-sup";
    case Estimate::transport_lp: return "transport-lp";
    case Estimate::transport_sup: return "transport-sup";
    case Estimate::loop_lp: return "loop-lp";
    case Estimate::loop_sup: return "loop-sup";
  }
  return "?";
}

inline std::optional<Estimate> estimate_from_string(const std::string& s) {
  for (auto e : {Estimate::continuity_lp, Estimate::continuity_sup, Estimate::transport_lp,
                 Estimate::transport_sup, Estimate::loop_lp, Estimate::loop_sup}) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

inline bool is_sup_estimate(Estimate e) {
  return e == Estimate::continuity_sup || e == Estimate::transport_sup || e == Estimate::loop_sup;
}

class InvalidMuError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Samples of a nonnegative signal at grid times (|b(s)|, ||f[s]||, ...).
struct SampledSignal {
  std::vector<double> times;
  std::vector<double> values;
  // Set for |b|, which the solvers evaluate at off-grid entry times: memory
  // maxima are then refined between samples instead of read off them.
  std::function<double(double)> exact;
  std::vector<double> log_values;
};

struct RhsTerms {
  double initial = 0.0;
  double source = 0.0;
  double boundary = 0.0;
  double boundary_displayed = 0.0;  // boundary term with the coefficient lacking the vmin factor

  double total() const noexcept { return initial + source + boundary; }
  double total_displayed() const noexcept { return initial + source + boundary_displayed; }
};

// mu >= 0, mu > -A, mu > -vmax/p - A - vmin (the last with 1/p = 0 for sup).
inline bool mu_valid_transport(NormOrder order, double mu, const ExtremalsAt& e) {
  const double inv_p = order.is_sup() ? 0.0 : 1.0 / order.p();
  return mu >= 0.0 && mu > -e.A && mu > -inv_p * e.vmax - e.A - e.vmin;
}

// mu > 0, mu > -vmax/p - vmin.
inline bool mu_valid_continuity(NormOrder order, double mu, const ExtremalsAt& e) {
  const double inv_p = order.is_sup() ? 0.0 : 1.0 / order.p();
  return mu > 0.0 && mu > -inv_p * e.vmax - e.vmin;
}

inline bool mu_valid_loop(double mu) { return mu > 0.0; }

enum class CoefficientForm { proof, displayed };

/// Gain on the fading-memory max of |b|.
inline double boundary_coefficient(NormOrder order, double mu, double vmin, double A,
                                   CoefficientForm form = CoefficientForm::proof) {
  const double rate = mu + A;
  if (order.is_sup()) return std::exp(rate / vmin);
  const double p = order.p();
  const double z = p * rate;
  // expm1(z / vmin) / z, continuous at z = 0 with value 1 / vmin.
  const double ratio = std::fabs(z) < 1e-300 ? 1.0 / vmin : std::expm1(z / vmin) / z;
  const double inner = form == CoefficientForm::proof ? vmin * ratio : ratio;
  return std::pow(inner, 1.0 / p);
}

/// Overshoot factor on the initial-data norm.
inline double overshoot_factor(NormOrder order, double t, const ExtremalsAt& e) {
  const double growth = order.is_sup() ? e.A : e.A + e.vmax / order.p();
  return std::exp(growth * t) * heaviside_h(t - 1.0 / e.vmin);
}

/// Source gain (1/vmin) exp(1 + (mu + vmax/p + A) / vmin).
inline double source_coefficient(NormOrder order, double mu, const ExtremalsAt& e) {
  const double inv_p = order.is_sup() ? 0.0 : 1.0 / order.p();
  return std::exp(1.0 + (mu + inv_p * e.vmax + e.A) / e.vmin) / e.vmin;
}

namespace detail {
inline double memory_max(const SampledSignal& sig, double t, double mu, double window_start);
}  // namespace detail

inline RhsTerms rhs_transport(NormOrder order, double mu, double t, const ExtremalsAt& e,
                              double phi_norm, const SampledSignal& f_norm,
                              const SampledSignal& b_abs) {
  if (!mu_valid_transport(order, mu, e)) {
    throw InvalidMuError("mu=" + detail::format_number(mu) + " is not admissible at t=" +
                         detail::format_number(t));
  }
  const double window = std::max(0.0, t - 1.0 / e.vmin);
  RhsTerms r;
  r.initial = overshoot_factor(order, t, e) * phi_norm;
  r.source = source_coefficient(order, mu, e) *
             fading_memory_max(f_norm.times, f_norm.values, t, mu, window);
  const double b_mem = detail::memory_max(b_abs, t, mu, window);
  r.boundary = boundary_coefficient(order, mu, e.vmin, e.A, CoefficientForm::proof) * b_mem;
  r.boundary_displayed =
      boundary_coefficient(order, mu, e.vmin, e.A, CoefficientForm::displayed) * b_mem;
  return r;
}

/// The transport right-hand side with A = 0 and the source signal ||dv/dx[s]||.
inline RhsTerms rhs_continuity(NormOrder order, double mu, double t, const ExtremalsAt& e,
                               double log_rho0_norm, const SampledSignal& dvdx_norm,
                               const SampledSignal& b_abs) {
  if (!mu_valid_continuity(order, mu, e)) {
    throw InvalidMuError("mu=" + detail::format_number(mu) + " is not admissible at t=" +
                         detail::format_number(t));
  }
  ExtremalsAt e0 = e;
  e0.A = 0.0;
  return rhs_transport(order, mu, t, e0, log_rho0_norm, dvdx_norm, b_abs);
}

/// Coefficient ((exp(p mu r) - 1) / (p mu r))^(1/p), or exp(mu r) for sup.
inline double loop_boundary_coefficient(NormOrder order, double mu, double r) {
  if (order.is_sup()) return std::exp(mu * r);
  const double z = order.p() * mu * r;
  return std::pow(z == 0.0 ? 1.0 : std::expm1(z) / z, 1.0 / order.p());
}

inline RhsTerms rhs_manufacturing(NormOrder order, double mu, double t, double r,
                                  double log_rho0_norm, const SampledSignal& b_abs) {
  if (!mu_valid_loop(mu)) {
    throw InvalidMuError("mu must be > 0 for the closed-loop estimate");
  }
  RhsTerms out;
  out.initial = heaviside_h(t - r) * log_rho0_norm;
  const double window = std::max(0.0, t - r);
  out.boundary = loop_boundary_coefficient(order, mu, r) *
                 detail::memory_max(b_abs, t, mu, window);
  out.boundary_displayed = out.boundary;
  return out;
}

enum class CellStatus { pass, fail, not_applicable };

struct CertificationSettings {
  std::vector<NormOrder> orders{NormOrder::lp(2.0), NormOrder::sup()};
  std::vector<double> mus{0.1, 1.0};
  double base_slack = 1e-6;
  double indicator_weight = 10.0;
};

struct BoundCertificate {
  Estimate estimate = Estimate::transport_lp;
  NormOrder order = NormOrder::sup();
  double mu = 0.0;
  std::vector<double> times;
  std::vector<double> lhs;
  std::vector<double> rhs;
  std::vector<double> rhs_displayed;
  std::vector<double> margin;
  std::vector<double> slack;
  std::vector<CellStatus> status;
  int fail_cells = 0;
  int na_cells = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_margin_time = 0.0;
  double slack_at_worst = 0.0;
  bool compatible = true;

  bool mu_valid_everywhere() const noexcept { return na_cells == 0; }
  bool pass() const noexcept { return fail_cells == 0; }
};

/// RHS for (order, mu, row index), or nullopt when mu is not admissible there.
using RhsFunction = std::function<std::optional<RhsTerms>(NormOrder, double, std::size_t)>;

/// Certifies LHS = ||dev[t]|| <= RHS on every stored row. `fine` and `coarse`
/// hold the deviation (w or ln(rho/rho_s)) on the same rows at nx and nx/2;
/// their norm difference is the discretization indicator that sizes the slack.
inline std::vector<BoundCertificate> certify_rows(Estimate lp_id, Estimate sup_id,
                                                  const SolutionField& fine,
                                                  const SolutionField* coarse,
                                                  const RhsFunction& rhs_at,
                                                  const CertificationSettings& settings,
                                                  bool compatible) {
  std::vector<BoundCertificate> out;
  for (const NormOrder order : settings.orders) {
    std::vector<double> lhs(fine.row_count());
    std::vector<double> indicator(fine.row_count(), 0.0);
    for (std::size_t k = 0; k < fine.row_count(); ++k) {
      lhs[k] = norm(fine.row(k), order);
      if (coarse) indicator[k] = std::fabs(lhs[k] - norm(coarse->row(k), order));
    }
    for (const double mu : settings.mus) {
      BoundCertificate c;
      c.estimate = order.is_sup() ? sup_id : lp_id;
      c.order = order;
      c.mu = mu;
      c.compatible = compatible;
      c.times = fine.times;
      c.lhs = lhs;
      const std::size_t n = fine.row_count();
      c.rhs.assign(n, std::numeric_limits<double>::quiet_NaN());
      c.rhs_displayed.assign(n, std::numeric_limits<double>::quiet_NaN());
      c.margin.assign(n, std::numeric_limits<double>::quiet_NaN());
      c.slack.resize(n);
      c.status.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        c.slack[k] = settings.base_slack + settings.indicator_weight * indicator[k];
        const auto terms = rhs_at(order, mu, k);
        if (!terms) {
          c.status[k] = CellStatus::not_applicable;
          ++c.na_cells;
          continue;
        }
        c.rhs[k] = terms->total();
        c.rhs_displayed[k] = terms->total_displayed();
        c.margin[k] = c.rhs[k] - lhs[k];
        const bool ok = c.margin[k] >= -c.slack[k];
        c.status[k] = ok ? CellStatus::pass : CellStatus::fail;
        if (!ok) ++c.fail_cells;
        if (c.margin[k] < c.worst_margin) {
          c.worst_margin = c.margin[k];
          c.worst_margin_time = c.times[k];
          c.slack_at_worst = c.slack[k];
        }
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

namespace detail {

inline std::vector<double> sample_profile(const InitialProfile& p, const Grid& g) {
  std::vector<double> out(g.nx + 1);
  for (int j = 0; j <= g.nx; ++j) out[j] = p(g.x(j));
  return out;
}

/// ||g(t_k, .)|| on the x grid for every stored time.
inline SampledSignal row_norms(const std::vector<double>& times, const Grid& g, NormOrder order,
                               const std::function<double(double, double)>& field) {
  SampledSignal s;
  s.times = times;
  s.values.resize(times.size());
  std::vector<double> row(g.nx + 1);
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (int j = 0; j <= g.nx; ++j) row[j] = field(times[k], g.x(j));
    s.values[k] = norm(row, order);
  }
  return s;
}

inline constexpr int kBoundarySubsamples = 4;

/// |b| at the grid times and kBoundarySubsamples points per step in between.
inline SampledSignal abs_samples(const std::vector<double>& times, const ScalarSignal& b) {
  SampledSignal s;
  s.exact = [b](double t) { return std::fabs(b(t)); };
  for (std::size_t k = 0; k < times.size(); ++k) {
    const int sub = (k + 1 < times.size() && !b.is_constant()) ? kBoundarySubsamples : 1;
    for (int q = 0; q < sub; ++q) {
      const double t = q == 0 ? times[k] : times[k] + (times[k + 1] - times[k]) * q / sub;
      s.times.push_back(t);
      s.values.push_back(s.exact(t));
      s.log_values.push_back(std::log(s.values.back()));
    }
  }
  return s;
}

/// max over s in [window_start, t] of g(s) exp(-mu (t - s)). With an exact
/// signal the window ends are evaluated exactly and every sampled peak close
/// to the best one is refined by golden section on ln g(s) + mu s.
inline double memory_max(const SampledSignal& sig, double t, double mu, double window_start) {
  if (!sig.exact) return fading_memory_max(sig.times, sig.values, t, mu, window_start);
  auto F = [&](double u) { return std::log(sig.exact(u)) + mu * u; };
  double best = std::max(F(window_start), F(t));
  const auto lo = std::upper_bound(sig.times.begin(), sig.times.end(), window_start) - sig.times.begin();
  const auto hi = std::lower_bound(sig.times.begin(), sig.times.end(), t) - sig.times.begin();
  auto L = [&](std::ptrdiff_t i) { return sig.log_values[i] + mu * sig.times[i]; };
  double sampled = -std::numeric_limits<double>::infinity();
  for (auto i = lo; i < hi; ++i) sampled = std::max(sampled, L(i));
  best = std::max(best, sampled);
  if (lo >= hi) {
    if (t > window_start) best = std::max(best, golden_max(F, window_start, t).second);
    return std::exp(best - mu * t);
  }
  // Neighbours outside the window are ignored so that a peak between the
  // outermost sample and a window end is still refined.
  for (auto i = lo; i < hi; ++i) {
    const double li = L(i);
    if (li < sampled - 1e-3) continue;
    if ((i > lo && L(i - 1) > li) || (i + 1 < hi && L(i + 1) > li)) continue;
    const double a = i > lo ? sig.times[i - 1] : window_start;
    const double b = i + 1 < hi ? sig.times[i + 1] : t;
    best = std::max(best, golden_max(F, a, b).second);
  }
  return std::exp(best - mu * t);
}

inline SolutionField log_deviation_field(SolutionField rho, double rho_s) {
  for (double& v : rho.values) v = std::log(v / rho_s);
  return rho;
}

}  // namespace detail

/// Transport-problem estimates on a field solved on all grid rows.
inline std::vector<BoundCertificate> certify_transport(const TransportProblem& p,
                                                       const SolutionField& fine,
                                                       const SolutionField* coarse,
                                                       const CertificationSettings& settings) {
  const Grid& g = p.grid();
  const Extremals ext = extremals(p.v, &p.a);
  const auto phi_row = detail::sample_profile(p.phi, g);
  const SampledSignal b_abs = detail::abs_samples(g.ts(), p.b);
  std::vector<std::pair<NormOrder, SampledSignal>> f_norms;
  for (const auto order : settings.orders) {
    f_norms.emplace_back(order, detail::row_norms(g.ts(), g, order,
                                                  [&](double t, double x) { return p.f(t, x); }));
  }
  auto rhs_at = [&](NormOrder order, double mu, std::size_t i) -> std::optional<RhsTerms> {
    const int k = fine.rows[i];
    const auto e = ext.at(k);
    if (!mu_valid_transport(order, mu, e)) return std::nullopt;
    const auto& fn = std::find_if(f_norms.begin(), f_norms.end(),
                                  [&](const auto& pr) { return pr.first == order; })
                         ->second;
    return rhs_transport(order, mu, g.t(k), e, norm(phi_row, order), fn, b_abs);
  };
  return certify_rows(Estimate::transport_lp, Estimate::transport_sup, fine, coarse, rhs_at,
                      settings, p.compatibility().pass());
}

/// Continuity-problem estimates; `fine`/`coarse` hold densities.
inline std::vector<BoundCertificate> certify_continuity(const ContinuityProblem& p,
                                                        const SolutionField& fine_rho,
                                                        const SolutionField* coarse_rho,
                                                        const CertificationSettings& settings) {
  const Grid& g = p.grid();
  const Extremals ext = extremals(p.v);
  const auto fine = detail::log_deviation_field(fine_rho, p.rho_s);
  std::optional<SolutionField> coarse;
  if (coarse_rho) coarse = detail::log_deviation_field(*coarse_rho, p.rho_s);
  std::vector<double> log_rho0(g.nx + 1);
  for (int j = 0; j <= g.nx; ++j) log_rho0[j] = std::log(p.rho0(g.x(j)) / p.rho_s);
  const SampledSignal b_abs = detail::abs_samples(g.ts(), p.b);
  std::vector<std::pair<NormOrder, SampledSignal>> dv_norms;
  for (const auto order : settings.orders) {
    dv_norms.emplace_back(order, detail::row_norms(g.ts(), g, order, [&](double t, double x) {
                            return p.v.dvdx(t, x);
                          }));
  }
  auto rhs_at = [&](NormOrder order, double mu, std::size_t i) -> std::optional<RhsTerms> {
    const int k = fine.rows[i];
    const auto e = ext.at(k);
    if (!mu_valid_continuity(order, mu, e)) return std::nullopt;
    const auto& dn = std::find_if(dv_norms.begin(), dv_norms.end(),
                                  [&](const auto& pr) { return pr.first == order; })
                         ->second;
    return rhs_continuity(order, mu, g.t(k), e, norm(log_rho0, order), dn, b_abs);
  };
  return certify_rows(Estimate::continuity_lp, Estimate::continuity_sup, fine,
                      coarse ? &*coarse : nullptr, rhs_at, settings, p.compatibility().pass());
}

// ---------------------------------------------------------------------------
// Experiments

struct QuadratureEstimate {
  double value = 0.0;           // Richardson-extrapolated trapezoid
  double trapezoid = 0.0;       // n intervals
  double trapezoid_half = 0.0;  // n/2 intervals
  double error_estimate = 0.0;  // |T_n - T_{n/2}| / 3
};

template <class F>
QuadratureEstimate trapezoid_richardson(F&& g, int intervals) {
  auto trap = [&](int n) {
    const double h = 1.0 / n;
    double s = 0.5 * (g(0.0) + g(1.0));
    for (int i = 1; i < n; ++i) s += g(i * h);
    return s * h;
  };
  QuadratureEstimate q;
  q.trapezoid = trap(intervals);
  q.trapezoid_half = trap(intervals / 2);
  q.error_estimate = std::fabs(q.trapezoid - q.trapezoid_half) / 3.0;
  q.value = (4.0 * q.trapezoid - q.trapezoid_half) / 3.0;
  return q;
}

/// Gains of dv/dx for the decreasing velocity 1 + (theta-1)x (gamma1) and the
/// increasing velocity theta + (1-theta)x (gamma2), read as L^p gains.
struct BiasResult {
  double theta = 0.0;
  double p = 2.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double raw1 = 0.0;  // the integrals without the p-th root, scaled by 1/(1-theta)
  double raw2 = 0.0;
  double error1 = 0.0;  // Richardson error estimates of the integrals
  double error2 = 0.0;
  double measured1 = std::numeric_limits<double>::quiet_NaN();  // LHS / ||dv/dx||_p from a run
  double measured2 = std::numeric_limits<double>::quiet_NaN();

  bool ordered() const noexcept { return gamma2 > gamma1; }
};

inline BiasResult bias_experiment(double theta, double p, int nodes = 10000,
                                  std::optional<Grid> run_grid = Grid{200, 0.01, 0.5},
                                  double rho_s = 1.0) {
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must lie in (0,1)");
  if (!(p > 1.0)) throw std::invalid_argument("p must be > 1");
  BiasResult r;
  r.theta = theta;
  r.p = p;
  const double scale = 1.0 / (1.0 - theta);
  const auto q1 = trapezoid_richardson(
      [&](double x) { return std::pow(-std::log1p((theta - 1.0) * x), p); }, nodes);
  const auto q2 = trapezoid_richardson(
      [&](double x) { return std::pow(std::log1p((1.0 / theta - 1.0) * x), p); }, nodes);
  r.raw1 = scale * q1.value;
  r.raw2 = scale * q2.value;
  r.error1 = q1.error_estimate;
  r.error2 = q2.error_estimate;
  r.gamma1 = scale * std::pow(q1.value, 1.0 / p);
  r.gamma2 = scale * std::pow(q2.value, 1.0 / p);

  if (run_grid) {
    auto measure = [&](SpaceTimeField v) {
      VelocityField vf(v, *run_grid);
      ContinuityProblem cp{rho_s, equilibrium_profile(rho_s, 0.0, vf), ScalarSignal::constant(0.0),
                           vf};
      const std::vector<int> rows{run_grid->nt()};
      const auto rho = solve_continuity_rows(cp, rows);
      return lp_log_norm(rho.row(0), rho_s, p) / (1.0 - theta);
    };
    const double th = theta;
    r.measured1 = measure(SpaceTimeField([th](double, double x) { return 1.0 + (th - 1.0) * x; },
                                         "1+(theta-1)x"));
    r.measured2 = measure(SpaceTimeField([th](double, double x) { return th + (1.0 - th) * x; },
                                         "theta+(1-theta)x"));
  }
  return r;
}

/// Constant velocity vs, constant boundary disturbance c and the matching
/// constant initial density: the measured gain RHS/LHS after the transient.
struct GainRow {
  NormOrder order = NormOrder::sup();
  double mu = 0.0;
  double coefficient = 0.0;            // boundary coefficient, vmin-factor form
  double coefficient_displayed = 0.0;  // without the vmin factor
  double lhs = 0.0;                    // ||ln(rho/rho_s)|| after the transient
  double rhs = 0.0;
  double ratio = 0.0;                  // max over t >= 1/vs + 2dt of RHS / LHS
};

inline std::vector<GainRow> gain_experiment(double rho_s, double c, double vs,
                                            const std::vector<NormOrder>& orders,
                                            const std::vector<double>& mus, const Grid& grid) {
  VelocityField v(SpaceTimeField::constant(vs), grid);
  ContinuityProblem cp{rho_s, ScalarProfile::constant(rho_s * std::exp(c)),
                       ScalarSignal::constant(c), v};
  const auto rho = solve_continuity(cp);
  CertificationSettings s;
  s.orders = orders;
  s.mus = mus;
  const auto certs = certify_continuity(cp, rho, nullptr, s);
  std::vector<GainRow> rows;
  const double t_settled = 1.0 / vs + 2.0 * grid.dt;
  for (const auto& cert : certs) {
    GainRow row;
    row.order = cert.order;
    row.mu = cert.mu;
    row.coefficient = boundary_coefficient(cert.order, cert.mu, vs, 0.0, CoefficientForm::proof);
    row.coefficient_displayed =
        boundary_coefficient(cert.order, cert.mu, vs, 0.0, CoefficientForm::displayed);
    row.ratio = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < cert.times.size(); ++k) {
      if (cert.times[k] < t_settled - 1e-12 || cert.status[k] == CellStatus::not_applicable) {
        continue;
      }
      const double ratio = cert.rhs[k] / cert.lhs[k];
      if (std::isnan(row.ratio) || ratio > row.ratio) {
        row.ratio = ratio;
        row.lhs = cert.lhs[k];
        row.rhs = cert.rhs[k];
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace contlab
