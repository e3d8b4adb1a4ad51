#pragma once

// Problem data for the transport and continuity problems: scalar signals,
// profiles and space-time fields, the sampling grid, and the validated
// velocity, boundary and initial-data objects built from them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "contlab/expr.hpp"

namespace contlab {

/// Input data that failed a structural requirement (positivity, ordering, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

template <class Fn>
class Field {
 public:
  Field() : fn_([](auto...) { return 0.0; }), constant_(0.0), label_("0") {}
  Field(Fn fn, std::string label) : fn_(std::move(fn)), label_(std::move(label)) {}

  const std::string& label() const noexcept { return label_; }
  std::optional<double> constant_value() const noexcept { return constant_; }
  bool is_constant() const noexcept { return constant_.has_value(); }
  bool is_zero() const noexcept { return constant_ && *constant_ == 0.0; }

 protected:
  Fn fn_;
  std::optional<double> constant_;
  std::string label_;
};

}  // namespace detail

/// b(t), u(t), ... A scalar function of time.
class ScalarSignal : public detail::Field<std::function<double(double)>> {
 public:
  ScalarSignal() = default;
  ScalarSignal(std::function<double(double)> fn, std::string label = "<fn>")
      : Field(std::move(fn), std::move(label)) {}

  static ScalarSignal constant(double c) {
    ScalarSignal s([c](double) { return c; }, detail::format_number(c));
    s.constant_ = c;
    return s;
  }
  static ScalarSignal from_expression(const Expression& e) {
    ScalarSignal s([e](double t) { return e(t); }, e.source());
    if (e.is_constant()) s.constant_ = e(0.0);
    return s;
  }
  static ScalarSignal parse(std::string_view src) {
    return from_expression(Expression::parse(src, {"t"}));
  }

  double operator()(double t) const { return fn_(t); }

  /// One-sided in t so that only t >= t0 is sampled.
  double derivative(double t, double h = fd::default_step) const {
    if (constant_) return 0.0;
    return fd::forward(fn_, t, h);
  }
};

/// phi(x), rho0(x), ... A scalar function on [0, 1].
class ScalarProfile : public detail::Field<std::function<double(double)>> {
 public:
  ScalarProfile() = default;
  ScalarProfile(std::function<double(double)> fn, std::string label = "<fn>")
      : Field(std::move(fn), std::move(label)) {}

  static ScalarProfile constant(double c) {
    ScalarProfile s([c](double) { return c; }, detail::format_number(c));
    s.constant_ = c;
    return s;
  }
  static ScalarProfile from_expression(const Expression& e) {
    ScalarProfile s([e](double x) { return e(x); }, e.source());
    if (e.is_constant()) s.constant_ = e(0.0);
    return s;
  }
  static ScalarProfile parse(std::string_view src) {
    return from_expression(Expression::parse(src, {"x"}));
  }

  double operator()(double x) const { return fn_(x); }

  double derivative(double x, double h = fd::default_step) const {
    if (constant_) return 0.0;
    return fd::within(fn_, x, 0.0, 1.0, h);
  }
};

/// v(t,x), a(t,x), f(t,x).
class SpaceTimeField : public detail::Field<std::function<double(double, double)>> {
 public:
  SpaceTimeField() = default;
  SpaceTimeField(std::function<double(double, double)> fn, std::string label = "<fn>",
                 bool uniform_in_x = false)
      : Field(std::move(fn), std::move(label)), uniform_in_x_(uniform_in_x) {}

  static SpaceTimeField constant(double c) {
    SpaceTimeField s([c](double, double) { return c; }, detail::format_number(c), true);
    s.constant_ = c;
    s.time_invariant_ = true;
    return s;
  }
  static SpaceTimeField from_expression(const Expression& e) {
    const auto vars = e.free_variables();
    const bool has_x = std::find(vars.begin(), vars.end(), "x") != vars.end();
    const bool has_t = std::find(vars.begin(), vars.end(), "t") != vars.end();
    SpaceTimeField s([e](double t, double x) { return e(t, x); }, e.source(), !has_x);
    if (e.is_constant()) s.constant_ = e(0.0, 0.0);
    s.time_invariant_ = !has_t;
    return s;
  }
  static SpaceTimeField parse(std::string_view src) {
    return from_expression(Expression::parse(src, {"t", "x"}));
  }

  double operator()(double t, double x) const { return fn_(t, x); }

  /// True when the field is known not to depend on x (derivative in x is 0).
  bool uniform_in_x() const noexcept { return uniform_in_x_; }
  /// True when the field is known not to depend on t. False means "unknown".
  bool known_time_invariant() const noexcept { return time_invariant_; }

  double dx(double t, double x, double h = fd::default_step) const {
    if (uniform_in_x_) return 0.0;
    return fd::within([&](double y) { return fn_(t, y); }, x, 0.0, 1.0, h);
  }
  double dt(double t, double x, double h = fd::default_step) const {
    if (constant_) return 0.0;
    return fd::forward([&](double s) { return fn_(s, x); }, t, h);
  }

 private:
  bool uniform_in_x_ = false;
  bool time_invariant_ = false;
};

/// Uniform space-time sampling: x_j = j/nx for j = 0..nx, t_k = k*dt for k = 0..nt.
struct Grid {
  int nx = 100;
  double dt = 0.01;
  double horizon = 1.0;

  double dx() const noexcept { return 1.0 / nx; }
  double x(int j) const noexcept { return j == nx ? 1.0 : static_cast<double>(j) / nx; }
  int nt() const noexcept {
    if (horizon <= 0.0) return 0;
    return static_cast<int>(std::ceil(horizon / dt - 1e-9));
  }
  double t(int k) const noexcept { return k * dt; }
  int index_of_time(double t) const noexcept {
    return std::clamp(static_cast<int>(std::floor(t / dt + 1e-9)), 0, nt());
  }

  std::vector<double> xs() const {
    std::vector<double> out(nx + 1);
    for (int j = 0; j <= nx; ++j) out[j] = x(j);
    return out;
  }
  std::vector<double> ts() const {
    std::vector<double> out(nt() + 1);
    for (int k = 0; k <= nt(); ++k) out[k] = t(k);
    return out;
  }

  Grid with_nx(int n) const { return Grid{n, dt, horizon}; }

  void validate() const {
    if (nx < 2) throw ValidationError("grid: nx must be >= 2");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("grid: dt must be > 0");
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
      throw ValidationError("grid: horizon must be >= 0");
    }
  }

  /// dt <= cfl_fraction * dx / v_max.
  void check_cfl(double v_max, double cfl_fraction) const {
    if (!(cfl_fraction > 0.0 && cfl_fraction <= 1.0)) {
      throw ValidationError("grid: cfl fraction must lie in (0, 1]");
    }
    if (dt * v_max > cfl_fraction * dx() * (1.0 + 1e-12)) {
      throw ValidationError("grid: dt=" + detail::format_number(dt) + " violates CFL " +
                            detail::format_number(cfl_fraction) + " for v_max=" +
                            detail::format_number(v_max));
    }
  }
};

/// v(t,x) > 0, checked on every node of its grid. Carries the grid that
/// characteristic integration and derivative sampling use.
class VelocityField {
 public:
  VelocityField(SpaceTimeField v, Grid grid, double fd_step = fd::default_step)
      : v_(std::move(v)), grid_(grid), fd_step_(fd_step) {
    grid_.validate();
    const int nt = grid_.nt();
    row_min_.assign(nt + 1, std::numeric_limits<double>::infinity());
    row_max_.assign(nt + 1, -std::numeric_limits<double>::infinity());
    for (int k = 0; k <= nt; ++k) {
      const double t = grid_.t(k);
      if (v_.is_constant()) {
        row_min_[k] = row_max_[k] = *v_.constant_value();
        continue;
      }
      for (int j = 0; j <= grid_.nx; ++j) {
        const double val = v_(t, grid_.x(j));
        if (!std::isfinite(val)) {
          throw ValidationError("velocity is not finite at t=" + detail::format_number(t) +
                                ", x=" + detail::format_number(grid_.x(j)));
        }
        row_min_[k] = std::min(row_min_[k], val);
        row_max_[k] = std::max(row_max_[k], val);
        if (v_.uniform_in_x()) break;
      }
    }
    for (int k = 0; k <= nt; ++k) {
      if (!(row_min_[k] > 0.0)) {
        throw ValidationError("velocity not positive on grid: min " +
                              detail::format_number(row_min_[k]) + " at t=" +
                              detail::format_number(grid_.t(k)));
      }
    }
  }

  double operator()(double t, double x) const { return v_(t, x); }
  double dvdx(double t, double x) const { return v_.dx(t, x, fd_step_); }

  const SpaceTimeField& field() const noexcept { return v_; }
  const Grid& grid() const noexcept { return grid_; }
  double fd_step() const noexcept { return fd_step_; }

  VelocityField with_grid(const Grid& g) const { return VelocityField(v_, g, fd_step_); }

  /// Smallest sampled velocity: the positivity floor.
  double floor() const { return *std::min_element(row_min_.begin(), row_min_.end()); }
  double max_on_grid() const { return *std::max_element(row_max_.begin(), row_max_.end()); }

  /// Minimum over grid rows with t_k <= t.
  double running_min(double t) const {
    const int kmax = grid_.index_of_time(t);
    return *std::min_element(row_min_.begin(), row_min_.begin() + kmax + 1);
  }
  double running_max(double t) const {
    const int kmax = grid_.index_of_time(t);
    return *std::max_element(row_max_.begin(), row_max_.begin() + kmax + 1);
  }

 private:
  SpaceTimeField v_;
  Grid grid_;
  double fd_step_;
  std::vector<double> row_min_;
  std::vector<double> row_max_;
};

/// b(t). Finite on the grid times.
class BoundarySignal {
 public:
  BoundarySignal(ScalarSignal b, const Grid& grid) : b_(std::move(b)) {
    for (int k = 0; k <= grid.nt(); ++k) {
      if (!std::isfinite(b_(grid.t(k)))) {
        throw ValidationError("boundary signal not finite at t=" +
                              detail::format_number(grid.t(k)));
      }
    }
  }
  double operator()(double t) const { return b_(t); }
  const ScalarSignal& signal() const noexcept { return b_; }

 private:
  ScalarSignal b_;
};

/// Piecewise-C1, left-continuous initial data. Piece i covers (xi_i, xi_{i+1}],
/// with piece 0 covering [0, xi_1].
class InitialProfile {
 public:
  InitialProfile() : pieces_{ScalarProfile::constant(0.0)} {}
  InitialProfile(ScalarProfile smooth) : pieces_{std::move(smooth)} {}  // NOLINT(implicit)
  InitialProfile(std::vector<ScalarProfile> pieces, std::vector<double> jumps)
      : pieces_(std::move(pieces)), jumps_(std::move(jumps)) {
    if (pieces_.size() != jumps_.size() + 1) {
      throw ValidationError("initial profile: need one more piece than jump points (" +
                            std::to_string(pieces_.size()) + " pieces, " +
                            std::to_string(jumps_.size()) + " jumps)");
    }
    for (std::size_t i = 0; i < jumps_.size(); ++i) {
      if (!(jumps_[i] > 0.0 && jumps_[i] < 1.0)) {
        throw ValidationError("initial profile: jump point " + detail::format_number(jumps_[i]) +
                              " is not interior to (0,1)");
      }
      if (i > 0 && !(jumps_[i] > jumps_[i - 1])) {
        throw ValidationError("initial profile: jump points must be strictly increasing");
      }
    }
  }

  double operator()(double x) const { return pieces_[piece_index(x)](x); }

  double derivative(double x, double h = fd::default_step) const {
    const std::size_t i = piece_index(x);
    const double lo = i == 0 ? 0.0 : jumps_[i - 1];
    const double hi = i == jumps_.size() ? 1.0 : jumps_[i];
    const auto& p = pieces_[i];
    if (p.is_constant()) return 0.0;
    return fd::within([&](double y) { return p(y); }, x, lo, hi, h);
  }

  const std::vector<double>& jumps() const noexcept { return jumps_; }
  const std::vector<ScalarProfile>& pieces() const noexcept { return pieces_; }
  bool smooth() const noexcept { return jumps_.empty(); }
  bool is_zero() const {
    return std::all_of(pieces_.begin(), pieces_.end(), [](const auto& p) { return p.is_zero(); });
  }

  /// Applies g to every piece, keeping the jump structure.
  InitialProfile map(const std::function<double(double)>& g, const std::string& tag) const {
    std::vector<ScalarProfile> out;
    out.reserve(pieces_.size());
    for (const auto& p : pieces_) {
      out.emplace_back([p, g](double x) { return g(p(x)); }, tag + "(" + p.label() + ")");
    }
    return InitialProfile(std::move(out), jumps_);
  }

  /// Positive on the grid and C1 (no jumps): the continuity-problem requirement.
  void require_positive_smooth(const Grid& grid) const {
    if (!smooth()) throw ValidationError("initial density must be C1 (no jump points)");
    for (int j = 0; j <= grid.nx; ++j) {
      const double v = (*this)(grid.x(j));
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError("initial density not positive at x=" +
                              detail::format_number(grid.x(j)));
      }
    }
  }

 private:
  std::size_t piece_index(double x) const {
    return static_cast<std::size_t>(std::lower_bound(jumps_.begin(), jumps_.end(), x) -
                                    jumps_.begin());
  }

  std::vector<ScalarProfile> pieces_;
  std::vector<double> jumps_;
};

struct TransportCoefficients {
  SpaceTimeField a;
  SpaceTimeField f;

  void validate(const Grid& grid) const {
    for (int k = 0; k <= grid.nt(); ++k) {
      for (int j = 0; j <= grid.nx; ++j) {
        const double t = grid.t(k);
        const double x = grid.x(j);
        if (!std::isfinite(a(t, x)) || !std::isfinite(f(t, x))) {
          throw ValidationError("transport coefficients not finite at t=" +
                                detail::format_number(t) + ", x=" + detail::format_number(x));
        }
      }
    }
  }
};

enum class RegularityClass { c1, c0, pc1 };

inline std::string to_string(RegularityClass r) {
  switch (r) {
    case RegularityClass::c1: return "C1";
    case RegularityClass::c0: return "C0";
    case RegularityClass::pc1: return "PC1";
  }
  return "?";
}

/// Corner conditions at (t, x) = (0, 0). Report only; never throws.
struct CompatibilityReport {
  double value_residual = 0.0;
  double derivative_residual = 0.0;
  double tolerance = 1e-8;
  bool value_ok = true;
  bool derivative_ok = true;
  RegularityClass regularity = RegularityClass::c1;

  bool pass() const noexcept { return value_ok && derivative_ok; }
};

/// rho_s * exp(b(0)) = rho0(0) and dv/dx(0,0) + b'(0) + v(0,0) rho0'(0)/rho0(0) = 0.
inline CompatibilityReport check_compatibility_continuity(double rho_s,
                                                          const InitialProfile& rho0,
                                                          const ScalarSignal& b,
                                                          const SpaceTimeField& v,
                                                          double tolerance = 1e-8,
                                                          double h = fd::default_step) {
  CompatibilityReport r;
  r.tolerance = tolerance;
  const double r00 = rho0(0.0);
  r.value_residual = std::fabs(rho_s * std::exp(b(0.0)) - r00);
  const double dv = v.uniform_in_x() ? 0.0 : fd::forward([&](double x) { return v(0.0, x); }, 0.0, h);
  r.derivative_residual =
      std::fabs(dv + b.derivative(0.0, h) + v(0.0, 0.0) * rho0.derivative(0.0, h) / r00);
  r.value_ok = r.value_residual <= tolerance;
  r.derivative_ok = r.derivative_residual <= tolerance;
  r.regularity = !rho0.smooth() || !r.value_ok ? RegularityClass::pc1
                 : r.derivative_ok             ? RegularityClass::c1
                                               : RegularityClass::c0;
  return r;
}

/// b(0) = phi(0) and b'(0) + v(0,0) phi'(0) = a(0,0) b(0) + f(0,0).
inline CompatibilityReport check_compatibility_transport(const InitialProfile& phi,
                                                         const ScalarSignal& b,
                                                         const SpaceTimeField& v,
                                                         const SpaceTimeField& a,
                                                         const SpaceTimeField& f,
                                                         double tolerance = 1e-8,
                                                         double h = fd::default_step) {
  CompatibilityReport r;
  r.tolerance = tolerance;
  const double b0 = b(0.0);
  r.value_residual = std::fabs(b0 - phi(0.0));
  r.derivative_residual = std::fabs(b.derivative(0.0, h) + v(0.0, 0.0) * phi.derivative(0.0, h) -
                                    a(0.0, 0.0) * b0 - f(0.0, 0.0));
  r.value_ok = r.value_residual <= tolerance;
  r.derivative_ok = r.derivative_residual <= tolerance;
  if (!r.value_ok) {
    r.regularity = RegularityClass::pc1;
  } else if (!phi.smooth()) {
    // Interior jumps travel into the domain regardless of the corner.
    r.regularity = RegularityClass::pc1;
  } else {
    r.regularity = r.derivative_ok ? RegularityClass::c1 : RegularityClass::c0;
  }
  return r;
}

}  // namespace contlab
