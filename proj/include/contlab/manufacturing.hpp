#pragma once

// Re-entrant production line: rho_t + lambda(W(t)) rho_x = 0, W = int rho,
// influx u = rho_s lambda(W) exp(b), i.e. rho(t,0) = rho_s exp(b(t)).
//
// The velocity is found window by window as the fixed point of
//   G v (t) = lambda( int_0^1 rho_v(t,x) dx ),
// where rho_v is the transported density for a given velocity history v.
// Histories are sampled on a uniform time step and treated as piecewise
// linear, so the cumulative Phi(t) = int_0^t v is piecewise quadratic and the
// entry time t0 with Phi(t) - Phi(t0) = x is solved in closed form.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "contlab/bounds.hpp"
#include "contlab/continuity.hpp"
#include "contlab/fields.hpp"
#include "contlab/norms.hpp"

namespace contlab {

/// lambda(W) > 0, the processing speed as a function of the total load.
class LoadVelocity : public detail::Field<std::function<double(double)>> {
 public:
  LoadVelocity() = default;
  LoadVelocity(std::function<double(double)> fn, std::string label = "<fn>")
      : Field(std::move(fn), std::move(label)) {}

  static LoadVelocity constant(double c) {
    LoadVelocity s([c](double) { return c; }, detail::format_number(c));
    s.constant_ = c;
    return s;
  }
  static LoadVelocity from_expression(const Expression& e) {
    LoadVelocity s([e](double w) { return e(w); }, e.source());
    if (e.is_constant()) s.constant_ = e(0.0);
    return s;
  }
  static LoadVelocity parse(std::string_view src) {
    return from_expression(Expression::parse(src, {"W"}));
  }

  double operator()(double w) const { return fn_(w); }
  double derivative(double w, double h = fd::default_step) const {
    if (constant_) return 0.0;
    return fd::central(fn_, w, h);
  }
};

struct ProductionScenario {
  double rho_s = 1.0;
  InitialProfile rho0 = ScalarProfile::constant(1.0);
  ScalarSignal b;
  LoadVelocity lambda = LoadVelocity::constant(1.0);
  Grid grid;
};

namespace detail {

inline constexpr int kRangeSamples = 10000;
inline constexpr double kLipschitzSafety = 1.1;

template <class F>
double sampled_max(F&& g, double lo, double hi, int n = kRangeSamples) {
  double m = -std::numeric_limits<double>::infinity();
  if (hi <= lo) return g(lo);
  for (int i = 0; i <= n; ++i) m = std::max(m, g(i == n ? hi : lo + (hi - lo) * i / n));
  return m;
}

inline double trapezoid_unit(std::span<const double> row) {
  const double h = 1.0 / static_cast<double>(row.size() - 1);
  double s = 0.5 * (row.front() + row.back());
  for (std::size_t i = 1; i + 1 < row.size(); ++i) s += row[i];
  return s * h;
}

/// Range of b over [0, until]: 32 samples per grid step, with every sampled
/// extremum refined by golden section, since the solution reads b off-grid.
inline std::pair<double, double> signal_range(const ScalarSignal& b, double until, double dt) {
  if (b.is_constant()) return {*b.constant_value(), *b.constant_value()};
  const int n = std::max(2, static_cast<int>(std::ceil(until / dt * 32.0 - 1e-9)));
  std::vector<double> v(n + 1);
  auto at = [&](int i) { return until * i / n; };
  for (int i = 0; i <= n; ++i) v[i] = b(at(i));
  double lo = *std::min_element(v.begin(), v.end());
  double hi = *std::max_element(v.begin(), v.end());
  for (int i = 0; i <= n; ++i) {
    const double a = at(std::max(0, i - 1));
    const double c = at(std::min(n, i + 1));
    const bool peak = (i == 0 || v[i] >= v[i - 1]) && (i == n || v[i] >= v[i + 1]);
    const bool dip = (i == 0 || v[i] <= v[i - 1]) && (i == n || v[i] <= v[i + 1]);
    if (peak) hi = std::max(hi, golden_max([&](double t) { return b(t); }, a, c).second);
    if (dip) lo = std::min(lo, -golden_max([&](double t) { return -b(t); }, a, c).second);
  }
  return {lo, hi};
}

}  // namespace detail

/// Density envelope and velocity bounds implied by the data over the grid horizon.
struct LoopConstants {
  double rho_min = 0.0;
  double rho_max = 0.0;
  double v_min = 0.0;  // min of lambda over [rho_min, rho_max]
  double v_max = 0.0;
  double b_inf = 0.0;
  double b_sup = 0.0;
  double L_lambda = 0.0;  // all three Lipschitz constants include the 1.1 safety factor
  double L_rho0 = 0.0;
  double L_btilde = 0.0;
  double window = 0.0;  // T = 1 / (1 + L_lambda (max(L_rho0, L_btilde/v_min) + L_btilde/v_min))
};

inline LoopConstants loop_constants(const ProductionScenario& sc) {
  if (!(sc.rho_s > 0.0)) throw ValidationError("rho_s must be > 0");
  sc.rho0.require_positive_smooth(sc.grid);
  LoopConstants c;
  const auto [b_lo, b_hi] = detail::signal_range(sc.b, sc.grid.horizon, sc.grid.dt);
  c.b_inf = b_lo;
  c.b_sup = b_hi;
  double r0_lo = std::numeric_limits<double>::infinity();
  double r0_hi = -r0_lo;
  const int n = std::max(detail::kRangeSamples, sc.grid.nx);
  for (int i = 0; i <= n; ++i) {
    const double v = sc.rho0(static_cast<double>(i) / n);
    r0_lo = std::min(r0_lo, v);
    r0_hi = std::max(r0_hi, v);
  }
  c.rho_min = std::min(r0_lo, sc.rho_s * std::exp(b_lo));
  c.rho_max = std::max(r0_hi, sc.rho_s * std::exp(b_hi));

  c.v_min = -detail::sampled_max([&](double s) { return -sc.lambda(s); }, c.rho_min, c.rho_max);
  c.v_max = detail::sampled_max([&](double s) { return sc.lambda(s); }, c.rho_min, c.rho_max);
  if (!(c.v_min > 0.0) || !std::isfinite(c.v_max)) {
    throw ValidationError("lambda must be positive and finite on [" +
                          detail::format_number(c.rho_min) + ", " +
                          detail::format_number(c.rho_max) + "]");
  }
  c.L_lambda = detail::kLipschitzSafety *
               detail::sampled_max([&](double s) { return std::fabs(sc.lambda.derivative(s)); },
                                   c.rho_min, c.rho_max);
  c.L_rho0 = detail::kLipschitzSafety *
             detail::sampled_max([&](double x) { return std::fabs(sc.rho0.derivative(x)); }, 0.0,
                                 1.0, n);
  const double rho_s = sc.rho_s;
  const auto& b = sc.b;
  const double until = sc.grid.horizon + 1.0;
  c.L_btilde =
      b.is_constant()
          ? 0.0
          : detail::kLipschitzSafety *
                detail::sampled_max(
                    [&](double t) { return std::fabs(rho_s * std::exp(b(t)) * b.derivative(t)); },
                    0.0, until,
                    std::max(detail::kRangeSamples,
                             static_cast<int>(std::ceil(4.0 * until / sc.grid.dt))));
  const double lb = c.L_btilde / c.v_min;
  c.window = 1.0 / (1.0 + c.L_lambda * (std::max(c.L_rho0, lb) + lb));
  return c;
}

/// r = 1 / min lambda over [s_lo, s_hi], the closed-loop settling time.
inline double terminal_time(const ProductionScenario& sc) {
  const auto c = loop_constants(sc);
  return 1.0 / c.v_min;
}

/// Corner conditions rho_s exp(b(0)) = rho0(0) and
/// b'(0) = -lambda(int rho0) rho0'(0) / rho0(0).
inline CompatibilityReport check_compatibility_loop(const ProductionScenario& sc,
                                                    double tolerance = 1e-8) {
  CompatibilityReport r;
  r.tolerance = tolerance;
  const double r00 = sc.rho0(0.0);
  r.value_residual = std::fabs(sc.rho_s * std::exp(sc.b(0.0)) - r00);
  std::vector<double> samples(detail::kRangeSamples + 1);
  for (int i = 0; i <= detail::kRangeSamples; ++i) {
    samples[i] = sc.rho0(static_cast<double>(i) / detail::kRangeSamples);
  }
  const double w0 = detail::trapezoid_unit(samples);
  r.derivative_residual =
      std::fabs(sc.b.derivative(0.0) + sc.lambda(w0) * sc.rho0.derivative(0.0) / r00);
  r.value_ok = r.value_residual <= tolerance;
  r.derivative_ok = r.derivative_residual <= tolerance;
  r.regularity = !r.value_ok ? RegularityClass::pc1
                 : r.derivative_ok ? RegularityClass::c1
                                   : RegularityClass::c0;
  return r;
}

/// v sampled at multiples of `step`, with the cumulative integral of its
/// piecewise-linear interpolant.
class VelocityHistory {
 public:
  explicit VelocityHistory(double step) : step_(step), phi_{0.0} {}

  double step() const noexcept { return step_; }
  std::size_t size() const noexcept { return v_.size(); }
  const std::vector<double>& samples() const noexcept { return v_; }
  const std::vector<double>& cumulative() const noexcept { return phi_; }

  void push(double v) {
    if (!v_.empty()) phi_.push_back(phi_.back() + 0.5 * step_ * (v_.back() + v));
    v_.push_back(v);
  }
  void truncate(std::size_t n) {
    v_.resize(n);
    phi_.resize(std::max<std::size_t>(n, 1));
  }
  void set(std::size_t i, double v) {
    v_[i] = v;
    for (std::size_t k = std::max<std::size_t>(i, 1); k < v_.size(); ++k) {
      phi_[k] = phi_[k - 1] + 0.5 * step_ * (v_[k - 1] + v_[k]);
    }
  }

  /// v(t) by linear interpolation, held constant past the last sample.
  double operator()(double t) const {
    if (v_.empty()) return 0.0;
    const double kf = t / step_;
    if (kf <= 0.0) return v_.front();
    const auto i = static_cast<std::size_t>(kf);
    if (i + 1 >= v_.size()) return v_.back();
    const double frac = kf - static_cast<double>(i);
    return v_[i] + frac * (v_[i + 1] - v_[i]);
  }

  /// Entry time t0 with Phi(t_n) - Phi(t0) = x, for x <= Phi(t_n).
  double entry_time(std::size_t n, double x) const {
    const double target = phi_[n] - x;
    if (target <= 0.0) return 0.0;
    // First index with phi > target, so phi[i] <= target < phi[i+1].
    const auto it = std::upper_bound(phi_.begin(), phi_.begin() + n + 1, target);
    const std::size_t i = static_cast<std::size_t>(it - phi_.begin()) - 1;
    if (i >= n) return static_cast<double>(n) * step_;
    const double rhs = target - phi_[i];
    const double slope = (v_[i + 1] - v_[i]) / step_;
    const double disc = std::max(0.0, v_[i] * v_[i] + 2.0 * slope * rhs);
    const double tau = 2.0 * rhs / (v_[i] + std::sqrt(disc));
    return static_cast<double>(i) * step_ + std::min(tau, step_);
  }

 private:
  double step_;
  std::vector<double> v_;
  std::vector<double> phi_;
};

struct FixedPointReport {
  double window_start = 0.0;
  double window_end = 0.0;
  double T = 0.0;  // admissible window length
  int iterations = 0;
  double residual = 0.0;  // ||v_{k+1} - v_k||_inf at the last iteration
  double contraction_observed = 0.0;  // max ratio of successive iterate distances
  double contraction_bound = 0.0;     // T L_lambda (L_rho + L_btilde / v_min)
  double L_lambda = 0.0;
  double L_rho = 0.0;  // Lipschitz constant of the state at the window start
  double L_btilde = 0.0;
  bool converged = false;
};

class FixedPointError : public std::runtime_error {
 public:
  FixedPointError(const std::string& what, FixedPointReport report)
      : std::runtime_error(what), report_(report) {}
  const FixedPointReport& report() const noexcept { return report_; }

 private:
  FixedPointReport report_;
};

struct FixedPointSettings {
  double tolerance = 1e-12;
  int max_iterations = 200;
};

namespace detail {

/// W(t_n) = int_0^1 rho_v(t_n, x) dx on the grid nodes for history prefix [0, n].
inline double load_at(const ProductionScenario& sc, const VelocityHistory& h, std::size_t n,
                      std::span<const double> xs, std::vector<double>& scratch) {
  const double shift = h.cumulative()[n];
  scratch.resize(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double x = xs[j];
    if (x > shift) {
      scratch[j] = sc.rho0(x - shift);
    } else {
      scratch[j] = sc.rho_s * std::exp(sc.b(h.entry_time(n, x)));
    }
  }
  return trapezoid_unit(scratch);
}

}  // namespace detail

/// Solves the fixed point on samples (n_from, n_to] of `h`, whose prefix
/// [0, n_from] is already final. Appends or overwrites the window samples.
/// `W_out` receives the loads computed inside G at the accepted iterate.
inline FixedPointReport fixed_point_window(const ProductionScenario& sc, VelocityHistory& h,
                                           std::size_t n_from, std::size_t n_to,
                                           const LoopConstants& c, double L_rho,
                                           std::span<const double> xs,
                                           std::vector<double>* W_out = nullptr,
                                           const FixedPointSettings& settings = {}) {
  FixedPointReport rep;
  rep.window_start = static_cast<double>(n_from) * h.step();
  rep.window_end = static_cast<double>(n_to) * h.step();
  rep.T = c.window;
  rep.L_lambda = c.L_lambda;
  rep.L_rho = L_rho;
  rep.L_btilde = c.L_btilde;
  rep.contraction_bound =
      (rep.window_end - rep.window_start) * c.L_lambda * (L_rho + c.L_btilde / c.v_min);
  if (rep.window_end - rep.window_start > c.window * (1.0 + 1e-12)) {
    throw FixedPointError("window longer than the contraction length", rep);
  }

  std::vector<double> scratch;
  const double v0 = sc.lambda(detail::load_at(sc, h, n_from, xs, scratch));
  h.truncate(n_from + 1);
  for (std::size_t n = n_from + 1; n <= n_to; ++n) h.push(v0);

  std::vector<double> next(n_to - n_from);
  std::vector<double> loads(n_to - n_from);
  double prev_dist = -1.0;
  for (int it = 1; it <= settings.max_iterations; ++it) {
    for (std::size_t n = n_from + 1; n <= n_to; ++n) {
      loads[n - n_from - 1] = detail::load_at(sc, h, n, xs, scratch);
      next[n - n_from - 1] = sc.lambda(loads[n - n_from - 1]);
    }
    double dist = 0.0;
    for (std::size_t n = n_from + 1; n <= n_to; ++n) {
      dist = std::max(dist, std::fabs(next[n - n_from - 1] - h.samples()[n]));
    }
    h.truncate(n_from + 1);
    for (double v : next) h.push(v);
    // Ratios of distances near rounding level are noise.
    if (prev_dist > 1e-10 && dist > 0.0) {
      rep.contraction_observed = std::max(rep.contraction_observed, dist / prev_dist);
    }
    prev_dist = dist;
    rep.iterations = it;
    rep.residual = dist;
    if (dist <= settings.tolerance) {
      rep.converged = true;
      break;
    }
  }
  if (!rep.converged) {
    throw FixedPointError("fixed point did not converge in " +
                              std::to_string(settings.max_iterations) +
                              " iterations (observed contraction " +
                              detail::format_number(rep.contraction_observed) + ")",
                          rep);
  }
  if (W_out) {
    // Loads at the accepted iterate, for the self-consistency check.
    for (std::size_t n = n_from + 1; n <= n_to; ++n) {
      (*W_out)[n] = detail::load_at(sc, h, n, xs, scratch);
    }
  }
  return rep;
}

/// Closed-loop trajectory on the scenario grid.
struct LoopRun {
  Grid grid;
  LoopConstants constants;
  double terminal_time = 0.0;
  std::vector<double> times;
  std::vector<double> W;        // trapezoid of the final density rows
  std::vector<double> W_inner;  // loads computed inside G at the accepted iterates
  std::vector<double> v;
  std::vector<double> u;
  SolutionField rho;
  std::vector<FixedPointReport> windows;
  CompatibilityReport compatibility;

  double consistency() const {
    double m = 0.0;
    for (std::size_t k = 0; k < W.size(); ++k) m = std::max(m, std::fabs(W[k] - W_inner[k]));
    return m;
  }
  /// Samples of v outside [v_min, v_max], with a 1e-12 tolerance.
  int velocity_violations() const {
    int n = 0;
    for (double s : v) {
      if (s < constants.v_min - 1e-12 || s > constants.v_max + 1e-12) ++n;
    }
    return n;
  }
};

/// Chains fixed-point windows over [0, horizon], then solves the density as a
/// continuity problem with the spatially uniform velocity v(t).
inline LoopRun simulate_closed_loop(const ProductionScenario& sc,
                                    const FixedPointSettings& settings = {}) {
  const Grid& g = sc.grid;
  g.validate();
  LoopRun run;
  run.grid = g;
  run.constants = loop_constants(sc);
  run.terminal_time = 1.0 / run.constants.v_min;
  run.compatibility = check_compatibility_loop(sc);
  const auto& c = run.constants;

  // Sub-steps per grid step so that a window holds at least one sample.
  const int q = std::max(1, static_cast<int>(std::ceil(g.dt / c.window - 1e-12)));
  const double step = g.dt / q;
  const std::size_t per_window =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(c.window / step + 1e-9)));
  const std::size_t total = static_cast<std::size_t>(g.nt()) * q;

  const auto xs = g.xs();
  VelocityHistory h(step);
  std::vector<double> scratch;
  std::vector<double> W_sub(total + 1, 0.0);
  {
    VelocityHistory start(step);
    start.push(0.0);
    W_sub[0] = detail::load_at(sc, start, 0, xs, scratch);
    h.push(sc.lambda(W_sub[0]));
  }
  const double lb = c.L_btilde / c.v_min;
  std::size_t n = 0;
  while (n < total) {
    const std::size_t n_to = std::min(total, n + per_window);
    const double L_rho = n == 0 ? c.L_rho0 : std::max(c.L_rho0, lb);
    run.windows.push_back(fixed_point_window(sc, h, n, n_to, c, L_rho, xs, &W_sub, settings));
    n = n_to;
  }

  const int nt = g.nt();
  run.times = g.ts();
  run.v.resize(nt + 1);
  run.W_inner.resize(nt + 1);
  for (int k = 0; k <= nt; ++k) {
    run.v[k] = h.samples()[static_cast<std::size_t>(k) * q];
    run.W_inner[k] = W_sub[static_cast<std::size_t>(k) * q];
  }

  VelocityHistory frozen = h;
  SpaceTimeField vfield([frozen](double t, double) { return frozen(t); }, "lambda(W(t))", true);
  ContinuityProblem cp{sc.rho_s, sc.rho0, sc.b, VelocityField(vfield, g)};
  run.rho = solve_continuity(cp);
  run.W.resize(nt + 1);
  run.u.resize(nt + 1);
  for (int k = 0; k <= nt; ++k) {
    run.W[k] = detail::trapezoid_unit(run.rho.row(k));
    run.u[k] = sc.rho_s * sc.lambda(run.W[k]) * std::exp(sc.b(g.t(k)));
  }
  return run;
}

struct EnvelopeReport {
  double rho_min = 0.0;
  double rho_max = 0.0;
  double observed_min = 0.0;
  double observed_max = 0.0;
  int violations = 0;
  double tolerance = 0.0;

  bool pass() const noexcept { return violations == 0; }
};

/// rho_min <= rho(t,x) <= rho_max on every node. The tolerance absorbs the
/// sampling of b used for the envelope.
inline EnvelopeReport envelope_check(const LoopRun& run, double rel_tolerance = 1e-7) {
  EnvelopeReport r;
  r.rho_min = run.constants.rho_min;
  r.rho_max = run.constants.rho_max;
  r.tolerance = rel_tolerance * std::max(1.0, r.rho_max);
  r.observed_min = std::numeric_limits<double>::infinity();
  r.observed_max = -r.observed_min;
  for (double v : run.rho.values) {
    r.observed_min = std::min(r.observed_min, v);
    r.observed_max = std::max(r.observed_max, v);
    if (v < r.rho_min - r.tolerance || v > r.rho_max + r.tolerance) ++r.violations;
  }
  return r;
}

/// Closed-loop estimates; `coarse` is the same scenario run at nx/2.
inline std::vector<BoundCertificate> certify_manufacturing(const ProductionScenario& sc,
                                                           const LoopRun& run,
                                                           const LoopRun* coarse,
                                                           const CertificationSettings& settings) {
  const Grid& g = run.grid;
  const auto fine = detail::log_deviation_field(run.rho, sc.rho_s);
  std::optional<SolutionField> coarse_dev;
  if (coarse) coarse_dev = detail::log_deviation_field(coarse->rho, sc.rho_s);
  std::vector<double> log_rho0(g.nx + 1);
  for (int j = 0; j <= g.nx; ++j) log_rho0[j] = std::log(sc.rho0(g.x(j)) / sc.rho_s);
  const SampledSignal b_abs = detail::abs_samples(g.ts(), sc.b);
  const double r = run.terminal_time;
  auto rhs_at = [&](NormOrder order, double mu, std::size_t i) -> std::optional<RhsTerms> {
    if (!mu_valid_loop(mu)) return std::nullopt;
    return rhs_manufacturing(order, mu, fine.times[i], r, norm(log_rho0, order), b_abs);
  };
  return certify_rows(Estimate::loop_lp, Estimate::loop_sup, fine,
                      coarse_dev ? &*coarse_dev : nullptr, rhs_at, settings,
                      run.compatibility.pass());
}

}  // namespace contlab
