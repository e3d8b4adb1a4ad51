#pragma once

// Seeded random scenarios with low-order trigonometric coefficients. Velocities
// stay inside [0.5, 2]; boundary data are built to satisfy the C1 corner
// conditions, so every generated scenario is smooth and compatible.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "contlab/scenario.hpp"

namespace contlab {

struct RandomScenarioOptions {
  Grid grid{400, 0.025, 2.5};
  bool with_coefficients = true;  // random a and f for transport problems
};

namespace detail {

inline std::string num(double x) { return "(" + format_number(x) + ")"; }

/// c0 + A1 sin(w1 x + p1) + A2 cos(w2 t + p2) + A3 sin(w3 x + w4 t + p3) with
/// c0 +- (|A1|+|A2|+|A3|) inside [0.5, 2].
struct RandomVelocity {
  double c0, A1, w1, p1, A2, w2, p2, A3, w3, w4, p3;

  static RandomVelocity draw(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RandomVelocity v{};
    v.c0 = 0.8 + 0.9 * u(rng);
    const double room = 0.95 * std::min(v.c0 - 0.5, 2.0 - v.c0);
    double w[3] = {u(rng), u(rng), u(rng)};
    const double total = w[0] + w[1] + w[2];
    const double budget = room * u(rng);
    auto sign = [&] { return u(rng) < 0.5 ? -1.0 : 1.0; };
    v.A1 = sign() * budget * w[0] / total;
    v.A2 = sign() * budget * w[1] / total;
    v.A3 = sign() * budget * w[2] / total;
    v.w1 = 0.5 + 3.0 * u(rng);
    v.p1 = 6.283185307179586 * u(rng);
    v.w2 = 0.5 + 3.0 * u(rng);
    v.p2 = 6.283185307179586 * u(rng);
    v.w3 = 0.5 + 2.5 * u(rng);
    v.w4 = 0.5 + 2.5 * u(rng);
    v.p3 = 6.283185307179586 * u(rng);
    return v;
  }

  std::string source() const {
    return num(c0) + " + " + num(A1) + "*sin(" + num(w1) + "*x + " + num(p1) + ") + " + num(A2) +
           "*cos(" + num(w2) + "*t + " + num(p2) + ") + " + num(A3) + "*sin(" + num(w3) + "*x + " +
           num(w4) + "*t + " + num(p3) + ")";
  }
  double at00() const { return c0 + A1 * std::sin(p1) + A2 * std::cos(p2) + A3 * std::sin(p3); }
  double dx00() const { return A1 * w1 * std::cos(p1) + A3 * w3 * std::cos(p3); }
};

/// d0 + d1 sin(e1 x + q1) + d2 cos(e2 x + q2).
struct RandomProfile {
  double d0, d1, e1, q1, d2, e2, q2;

  static RandomProfile draw(std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RandomProfile p{};
    p.d0 = scale * u(rng);
    p.d1 = 0.5 * scale * u(rng);
    p.e1 = 2.0 + 2.0 * u(rng);
    p.q1 = 3.0 * u(rng);
    p.d2 = 0.5 * scale * u(rng);
    p.e2 = 2.0 + 2.0 * u(rng);
    p.q2 = 3.0 * u(rng);
    return p;
  }

  std::string source() const {
    return num(d0) + " + " + num(d1) + "*sin(" + num(e1) + "*x + " + num(q1) + ") + " + num(d2) +
           "*cos(" + num(e2) + "*x + " + num(q2) + ")";
  }
  double at0() const { return d0 + d1 * std::sin(q1) + d2 * std::cos(q2); }
  double d0x() const { return d1 * e1 * std::cos(q1) - d2 * e2 * std::sin(q2); }
};

/// b(t) = b0 + slope t + beta sin(omega t)^2, whose derivative at 0 is `slope`.
inline std::string boundary_source(double b0, double slope, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double beta = 0.3 * u(rng);
  const double omega = 2.0 + 1.5 * u(rng);
  return num(b0) + " + " + num(slope) + "*t + " + num(beta) + "*sin(" + num(omega) + "*t)^2";
}

}  // namespace detail

/// Transport scenario: w(0,x) = phi, w(t,0) = b with b(0) = phi(0) and
/// b'(0) + v phi'(0) = a b(0) + f at the corner.
inline Scenario random_transport(std::uint64_t seed, const RandomScenarioOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Scenario sc;
  sc.name = "random-transport-" + std::to_string(seed);
  sc.problem = ProblemKind::transport;
  sc.grid = opt.grid;
  const auto v = detail::RandomVelocity::draw(rng);
  const auto phi = detail::RandomProfile::draw(rng, 0.8);
  sc.v = v.source();
  sc.phi = {phi.source()};
  double a00 = 0.0;
  double f00 = 0.0;
  if (opt.with_coefficients) {
    const double al0 = 0.3 * u(rng);
    const double al1 = 0.3 * u(rng);
    const double fb0 = 0.4 * u(rng);
    const double fw = 1.0 + 2.0 * std::fabs(u(rng));
    sc.a = detail::num(al0) + " + " + detail::num(al1) + "*sin(x + t)";
    sc.f = detail::num(fb0) + "*cos(" + detail::num(fw) + "*x + t)";
    a00 = al0;
    f00 = fb0;
  }
  const double b0 = phi.at0();
  const double slope = a00 * b0 + f00 - v.at00() * phi.d0x();
  sc.b = detail::boundary_source(b0, slope, rng);
  return sc;
}

/// Continuity scenario with rho0 = rho_s exp(phi) and
/// dv/dx(0,0) + b'(0) + v(0,0) phi'(0) = 0.
inline Scenario random_continuity(std::uint64_t seed, const RandomScenarioOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scenario sc;
  sc.name = "random-continuity-" + std::to_string(seed);
  sc.problem = ProblemKind::continuity;
  sc.grid = opt.grid;
  sc.rho_s = 0.5 + 1.5 * u(rng);
  const auto v = detail::RandomVelocity::draw(rng);
  const auto phi = detail::RandomProfile::draw(rng, 0.6);
  sc.v = v.source();
  sc.rho0 = detail::num(sc.rho_s) + "*exp(" + phi.source() + ")";
  const double slope = -v.dx00() - v.at00() * phi.d0x();
  sc.b = detail::boundary_source(phi.at0(), slope, rng);
  return sc;
}

/// Closed-loop scenario with lambda = c / (1 + k W) and the corner
/// condition b'(0) = -lambda(int rho0) phi'(0).
inline Scenario random_manufacturing(std::uint64_t seed, const RandomScenarioOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scenario sc;
  sc.name = "random-manufacturing-" + std::to_string(seed);
  sc.problem = ProblemKind::manufacturing;
  sc.grid = opt.grid;
  sc.rho_s = 0.5 + u(rng);
  const double c = 1.0 + u(rng);
  const double k = 0.2 + 0.8 * u(rng);
  sc.lambda = detail::num(c) + "/(1 + " + detail::num(k) + "*W)";
  const auto phi = detail::RandomProfile::draw(rng, 0.4);
  sc.rho0 = detail::num(sc.rho_s) + "*exp(" + phi.source() + ")";
  // int rho0 by Richardson-extrapolated trapezoid, as in the corner check.
  const auto rho0 = ScalarProfile::parse(sc.rho0);
  const auto q = trapezoid_richardson([&](double x) { return rho0(x); }, 10000);
  const double w0 = q.trapezoid;
  const double slope = -(c / (1.0 + k * w0)) * phi.d0x();
  sc.b = detail::boundary_source(phi.at0(), slope, rng);
  return sc;
}

inline Scenario random_scenario(ProblemKind kind, std::uint64_t seed,
                                const RandomScenarioOptions& opt = {}) {
  switch (kind) {
    case ProblemKind::transport: return random_transport(seed, opt);
    case ProblemKind::continuity: return random_continuity(seed, opt);
    case ProblemKind::manufacturing: return random_manufacturing(seed, opt);
  }
  return random_continuity(seed, opt);
}

}  // namespace contlab
