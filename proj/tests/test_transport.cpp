#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "contlab/transport.hpp"

using namespace contlab;
using Catch::Matchers::WithinAbs;

namespace {

TransportProblem make(const char* v, InitialProfile phi, const char* b, const char* a = "0",
                      const char* f = "0", Grid g = {50, 0.02, 1.5}) {
  return {VelocityField(SpaceTimeField::parse(v), g), std::move(phi), ScalarSignal::parse(b),
          SpaceTimeField::parse(a), SpaceTimeField::parse(f)};
}

InitialProfile prof(const char* src) { return ScalarProfile::parse(src); }

}  // namespace

TEST_CASE("pure advection at unit speed") {
  const auto p = make("1", prof("sin(3*x) + x"), "cos(2*t)");
  const auto w = solve_field(p);
  const Grid& g = p.grid();
  for (std::size_t i = 0; i < w.row_count(); ++i) {
    const double t = w.times[i];
    for (int j = 0; j <= g.nx; ++j) {
      const double x = g.x(j);
      const double expect = x > t ? std::sin(3 * (x - t)) + (x - t) : std::cos(2 * (t - x));
      CHECK_THAT(w.at(i, j), WithinAbs(expect, 1e-9));
    }
  }
  CHECK_THAT(solve_point(p, 0.3, 0.8, nullptr), WithinAbs(std::sin(1.5) + 0.5, 1e-9));
  CHECK_THAT(solve_point(p, 0.7, 0.2, nullptr), WithinAbs(std::cos(1.0), 1e-9));
}

TEST_CASE("exponential growth along characteristics") {
  const auto p = make("1", prof("1"), "0", "0.5");
  CHECK_THAT(solve_point(p, 0.4, 0.9), WithinAbs(std::exp(0.2), 1e-9));
  const auto w = solve_field(p);
  CHECK_THAT(w.at(20, 45), WithinAbs(std::exp(0.2), 1e-9));
}

TEST_CASE("initial row and inflow column are exact") {
  const auto p = make("1 + 0.3*sin(t + x)", prof("exp(x) - 1"), "sin(5*t)", "0.2*cos(x)", "t*x");
  const auto w = solve_field(p);
  for (int j = 1; j <= p.grid().nx; ++j) CHECK(w.at(0, j) == std::exp(p.grid().x(j)) - 1.0);
  for (std::size_t i = 0; i < w.row_count(); ++i) CHECK(w.at(i, 0) == std::sin(5 * w.times[i]));
}

TEST_CASE("zero data gives the zero field") {
  const auto p = make("1 + x", prof("0"), "0", "0.4");
  const auto w = solve_field(p);
  for (double v : w.values) CHECK(v == 0.0);
  const auto d = decompose(p);
  for (const auto* c : {&d.boundary, &d.initial, &d.source}) {
    for (double v : c->values) CHECK(v == 0.0);
  }
}

TEST_CASE("finite-time flush of the initial condition") {
  const auto p = make("1", prof("sin(pi*x)"), "0", "0", "0", {50, 0.02, 1.0});
  const auto w = solve_field(p);
  const auto last = w.row(w.row_count() - 1);
  for (double v : last) CHECK(std::fabs(v) <= 1e-9);
}

TEST_CASE("flush holds once every characteristic has crossed") {
  const auto p = make("0.8 + 0.3*x + 0.2*sin(2*t)", prof("1 + x*x"), "0", "0.3*sin(x)", "0",
                      {80, 0.01, 2.5});
  const auto w = solve_field(p);
  const auto& v = p.v;
  for (std::size_t i = 0; i < w.row_count(); ++i) {
    const double t = w.times[i];
    if (t < 1.0 / v.running_min(t) + 2 * p.grid().dt) continue;
    for (double val : w.row(i)) CHECK(std::fabs(val) <= 1e-9);
  }
}

TEST_CASE("unit source accumulates the time spent in the domain") {
  const auto p = make("1", prof("0"), "0", "0", "1");
  const auto w = solve_field(p);
  const Grid& g = p.grid();
  for (std::size_t i = 0; i < w.row_count(); ++i) {
    for (int j = 0; j <= g.nx; ++j) {
      CHECK_THAT(w.at(i, j), WithinAbs(std::min(w.times[i], g.x(j)), 1e-9));
    }
  }
}

TEST_CASE("boundary response is the region indicator") {
  const auto p = make("1", prof("0"), "1");
  const auto d = decompose(p);
  const Grid& g = p.grid();
  for (std::size_t i = 0; i < d.boundary.row_count(); ++i) {
    const double t = d.boundary.times[i];
    for (int j = 0; j <= g.nx; ++j) {
      const double x = g.x(j);
      CHECK(d.boundary.at(i, j) == (x <= t + 1e-12 ? 1.0 : 0.0));
      CHECK(d.initial.at(i, j) == 0.0);
      CHECK(d.source.at(i, j) == 0.0);
    }
  }
  CHECK(d.boundary.component == Component::boundary);
}

TEST_CASE("superposition of the three responses") {
  const char* velocities[] = {"1 + x", "1 + 0.5*sin(3*t)*x", "0.7 + 0.3*cos(t + 2*x)"};
  for (const char* v : velocities) {
    INFO(v);
    const auto p = make(v, prof("cos(2*x)"), "1 + 0.5*sin(4*t)", "0.3*x - 0.1*t", "sin(t + x)");
    const auto full = solve_field(p);
    const auto d = decompose(p);
    double err = 0.0;
    for (std::size_t k = 0; k < full.values.size(); ++k) {
      err = std::max(err, std::fabs(full.values[k] -
                                    (d.boundary.values[k] + d.initial.values[k] + d.source.values[k])));
    }
    CHECK(err <= 1e-9);
  }
}

TEST_CASE("point solver agrees with the field solver") {
  const auto p = make("1 + 0.5*sin(3*t)*x + 0.2*x*x", prof("cos(2*x)"), "1 + 0.5*sin(4*t)",
                      "0.3*x", "sin(t + x)");
  const auto w = solve_field(p);
  const CharacteristicMap cm(p.v);
  const Grid& g = p.grid();
  for (int k : {3, 17, 40, 75}) {
    for (int j = 1; j <= g.nx; j += 3) {
      const double x = g.x(j);
      // a node within bisection tolerance of the separatrix may legitimately flip sides
      if (std::fabs(x - cm.r0(g.t(k))) < 1e-6) continue;
      CHECK_THAT(solve_point(p, g.t(k), x, &cm), WithinAbs(w.at(k, j), 1e-9));
    }
  }
}

TEST_CASE("jump loci are recorded and nodes on them take the left value") {
  InitialProfile phi({ScalarProfile::constant(1.0), ScalarProfile::constant(3.0)}, {0.5});
  const auto p = make("1", phi, "1", "0", "0", {10, 0.1, 1.0});
  const auto w = solve_field(p);
  REQUIRE(w.loci.size() == 2);
  CHECK(w.loci[1].xi == 0.5);
  // at t = 0.2 the jump sits exactly on node x = 0.7
  CHECK(w.at(2, 7) == 1.0);
  CHECK(w.at(2, 8) == 3.0);
  CHECK(w.at(2, 6) == 1.0);
}

TEST_CASE("PDE residual shrinks under refinement") {
  auto residual = [](int nx, double dt) {
    const auto p = make("1 + 0.3*sin(t)*x + 0.2*x", prof("cos(2*x)"), "cos(2*t)*(1 + 0.2*t)",
                        "0.2*x", "0.5*sin(t)", {nx, dt, 1.0});
    const auto w = solve_field(p);
    const Grid& g = p.grid();
    double worst = 0.0;
    for (int k = 1; k < g.nt(); ++k) {
      const double t = g.t(k);
      const double r0 = CharacteristicMap(p.v).r0(t);
      for (int j = 1; j < g.nx; ++j) {
        const double x = g.x(j);
        if (std::fabs(x - r0) <= 2 * g.dx()) continue;
        const double wt = (w.at(k + 1, j) - w.at(k - 1, j)) / (2 * dt);
        const double wx = (w.at(k, j + 1) - w.at(k, j - 1)) / (2 * g.dx());
        const double res = wt + p.v(t, x) * wx - p.a(t, x) * w.at(k, j) - p.f(t, x);
        worst = std::max(worst, std::fabs(res));
      }
    }
    return worst;
  };
  const double coarse = residual(40, 0.025);
  const double fine = residual(80, 0.0125);
  INFO("coarse " << coarse << " fine " << fine);
  CHECK(coarse / fine >= 1.5);
}
