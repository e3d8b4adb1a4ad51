#pragma once

// rho_t + (v rho)_x = 0 with rho(t,0) = rho_s exp(b(t)). Under
// w = ln(rho / rho_s) this is the transport problem with a = 0 and
// f = -dv/dx, so rho = rho_s exp(w) stays positive by construction.

#include <cmath>
#include <string>

#include "contlab/fields.hpp"
#include "contlab/transport.hpp"

namespace contlab {

struct ContinuityProblem {
  double rho_s = 1.0;
  InitialProfile rho0 = ScalarProfile::constant(1.0);
  ScalarSignal b;
  VelocityField v;

  const Grid& grid() const noexcept { return v.grid(); }

  ContinuityProblem with_grid(const Grid& g) const {
    ContinuityProblem p = *this;
    p.v = v.with_grid(g);
    return p;
  }

  void validate() const {
    if (!(rho_s > 0.0)) throw ValidationError("rho_s must be > 0");
    rho0.require_positive_smooth(grid());
  }

  CompatibilityReport compatibility(double tolerance = 1e-8) const {
    return check_compatibility_continuity(rho_s, rho0, b, v.field(), tolerance, v.fd_step());
  }
};

/// -dv/dx, finite-differenced from v with the velocity's step.
inline SpaceTimeField negative_divergence(const VelocityField& v) {
  if (v.field().uniform_in_x()) return SpaceTimeField::constant(0.0);
  return SpaceTimeField([v](double t, double x) { return -v.dvdx(t, x); },
                        "-d/dx(" + v.field().label() + ")");
}

inline TransportProblem to_transport(const ContinuityProblem& p) {
  TransportProblem tp{p.v, {}, p.b};
  const double rho_s = p.rho_s;
  tp.phi = p.rho0.map([rho_s](double r) { return std::log(r / rho_s); }, "ln");
  tp.a = SpaceTimeField::constant(0.0);
  tp.f = negative_divergence(p.v);
  return tp;
}

/// Maps a log-deviation field w back to densities in place.
inline SolutionField to_density(SolutionField w, double rho_s) {
  for (double& val : w.values) val = rho_s * std::exp(val);
  return w;
}

inline SolutionField solve_continuity(const ContinuityProblem& p) {
  p.validate();
  return to_density(solve_field(to_transport(p)), p.rho_s);
}

inline SolutionField solve_continuity_rows(const ContinuityProblem& p, std::span<const int> rows) {
  p.validate();
  return to_density(solve_rows(to_transport(p), rows), p.rho_s);
}

/// rho(x) = rho_s exp(b) v(0) / v(x): the stationary density for time-invariant inputs.
inline ScalarProfile equilibrium_profile(double rho_s, double b_const, const VelocityField& v) {
  const SpaceTimeField& field = v.field();
  if (!field.known_time_invariant()) {
    const Grid& g = v.grid();
    const double t1 = 0.0;
    const double t2 = g.horizon > 0.0 ? g.horizon : 1.0;
    for (int j = 0; j <= g.nx; ++j) {
      const double x = g.x(j);
      if (std::fabs(field(t1, x) - field(t2, x)) > 1e-12) {
        throw ValidationError("equilibrium_profile: velocity is not time-invariant");
      }
    }
  }
  const double scale = rho_s * std::exp(b_const) * field(0.0, 0.0);
  return ScalarProfile([field, scale](double x) { return scale / field(0.0, x); },
                       "equilibrium(" + field.label() + ")");
}

}  // namespace contlab
