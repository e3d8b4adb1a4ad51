#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "contlab/oracle.hpp"

using namespace contlab;
using Catch::Matchers::WithinAbs;

namespace {

TransportProblem make(const char* v, const char* phi, const char* b, const char* a, const char* f,
                      Grid g) {
  return {VelocityField(SpaceTimeField::parse(v), g), ScalarProfile::parse(phi),
          ScalarSignal::parse(b), SpaceTimeField::parse(a), SpaceTimeField::parse(f)};
}

double max_error_vs(const SolutionField& w, double (*exact)(double, double)) {
  double m = 0.0;
  for (std::size_t i = 0; i < w.row_count(); ++i) {
    for (std::size_t j = 0; j < w.width(); ++j) m = std::max(m, std::fabs(w.at(i, j) - exact(w.times[i], w.xs[j])));
  }
  return m;
}

}  // namespace

TEST_CASE("unit CFL upwind is an exact shift") {
  const Grid g{50, 0.02, 1.5};
  const auto p = make("1", "sin(3*x) + x", "cos(2*t)", "0", "0", g);
  const auto w = upwind_solve(p, g);
  const auto ref = solve_field(p);
  for (std::size_t i = 0; i < w.row_count(); ++i) {
    const double t = w.times[i];
    for (int j = 0; j <= g.nx; ++j) {
      const double x = g.x(j);
      const double expect = x > t + 1e-12 ? std::sin(3 * (x - t)) + (x - t) : std::cos(2 * (t - x));
      CHECK_THAT(w.at(i, j), WithinAbs(expect, 1e-12));
    }
  }
  for (const auto& d : discrepancy(ref, w)) CHECK(d.max_abs <= 1e-9);
}

TEST_CASE("zero data stays zero") {
  const Grid g{40, 0.01, 1.0};
  const auto w = upwind_solve(make("1 + x", "0", "0", "0.3", "0", g), g, 5);
  CHECK(w.row_count() == 21);
  for (double v : w.values) CHECK(v == 0.0);
}

TEST_CASE("first-order convergence against exact advection") {
  // v = 1, smooth compatible data: w = phi(x - t) or b(t - x)
  auto run = [](int nx) {
    const Grid g{nx, 0.5 / nx, 1.5};
    const auto p = make("1", "sin(2*x)", "-sin(2*t)", "0", "0", g);
    return max_error_vs(upwind_solve(p, g), [](double t, double x) { return std::sin(2 * (x - t)); });
  };
  const double e1 = run(100);
  const double e2 = run(200);
  const double e3 = run(400);
  INFO(e1 << " " << e2 << " " << e3);
  CHECK(e1 / e2 >= 1.5);
  CHECK(e1 / e2 <= 2.5);
  CHECK(e2 / e3 >= 1.5);
  CHECK(e2 / e3 <= 2.5);
}

TEST_CASE("agreement with the characteristic solver improves under refinement") {
  auto gap = [](int nx) {
    const Grid g{nx, 0.5 / (2.0 * nx), 1.5};
    const auto p = make("1 + 0.5*sin(2*t)*x + 0.3*x", "cos(2*x)", "cos(t)*(1 + 0.1*t)", "0.2*x",
                        "0.3*sin(t + x)", g);
    // characteristic field on a coarser row set to keep the test quick
    std::vector<int> rows;
    for (int k = 0; k <= g.nt(); k += g.nt() / 6) rows.push_back(k);
    const auto ref = solve_rows(p, rows);
    const auto up = upwind_solve(p, g);
    double m = 0.0;
    for (const auto& d : discrepancy(ref, up)) m = std::max(m, d.max_abs);
    return m;
  };
  const double a = gap(100);
  const double b = gap(200);
  INFO(a << " -> " << b);
  CHECK(a <= 2e-2);
  CHECK(a / b >= 1.5);
  CHECK(a / b <= 2.5);
}

TEST_CASE("discrete maximum principle") {
  const Grid g{80, 0.004, 2.0};
  const auto p = make("1.2 + sin(3*t + 2*x)", "sin(7*x)", "0.8*cos(5*t)", "0", "0", g);
  const auto w = upwind_solve(p, g);
  double lo = 1e300;
  double hi = -1e300;
  for (int j = 0; j <= g.nx; ++j) {
    lo = std::min(lo, p.phi(g.x(j)));
    hi = std::max(hi, p.phi(g.x(j)));
  }
  for (int k = 0; k <= g.nt(); ++k) {
    lo = std::min(lo, p.b(g.t(k)));
    hi = std::max(hi, p.b(g.t(k)));
  }
  for (double v : w.values) {
    CHECK(v >= lo - 1e-14);
    CHECK(v <= hi + 1e-14);
  }
}

TEST_CASE("CFL violations are reported") {
  const Grid g{50, 0.05, 1.0};
  CHECK_THROWS_AS(upwind_solve(make("1", "0", "0", "0", "0", g), g), CflError);
  const Grid ok{50, 0.01, 1.0};
  CHECK_NOTHROW(upwind_solve(make("1", "0", "0", "0", "0", ok), ok));
  CHECK_THROWS_AS(upwind_solve(make("1", "0", "0", "0", "0", ok), ok, 0), std::invalid_argument);
}

TEST_CASE("upwind closed loop matches the fixed-point construction") {
  auto gap = [](int nx) {
    const Grid g{nx, 0.02, 3.0};
    const ProductionScenario sc{1.0, ScalarProfile::parse("1 + 0.5*x*x"),
                                ScalarSignal::parse("0.1*sin(3*t)^2"), LoadVelocity::parse("1/(1+W)"), g};
    const auto run = simulate_closed_loop(sc);
    const Grid fine{nx, 0.5 / nx, 3.0};
    const auto up = upwind_closed_loop(sc, fine);
    double m = 0.0;
    for (const auto& d : discrepancy(run.rho, up.rho)) m = std::max(m, d.max_abs);
    double dv = 0.0;
    for (std::size_t k = 0; k < run.times.size(); ++k) {
      const auto it = std::lower_bound(up.times.begin(), up.times.end(), run.times[k] - 1e-9);
      dv = std::max(dv, std::fabs(up.v[it - up.times.begin()] - run.v[k]));
    }
    return std::pair{m, dv};
  };
  const auto [m1, v1] = gap(100);
  const auto [m2, v2] = gap(200);
  INFO(m1 << " " << m2 << " | " << v1 << " " << v2);
  CHECK(m2 <= 2e-2);
  CHECK(m1 / m2 >= 1.5);
  CHECK(v1 / v2 >= 1.5);
  CHECK(v2 <= 1e-2);
}

TEST_CASE("discrepancy rows") {
  SolutionField a;
  a.xs = {0.0, 0.5, 1.0};
  a.rows = {0, 1, 2};
  a.times = {0.0, 0.1, 0.2};
  a.values = {0, 0, 0, 1, 1, 1, 0, 2, 0};
  SolutionField b = a;
  b.rows = {1, 2};
  b.times = {0.1, 0.2};
  b.values = {0, 0, 0, 0, 0, 0};
  const auto rows = discrepancy(a, b);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].t == 0.1);
  CHECK(rows[0].max_abs == 1.0);
  CHECK(rows[0].l1 == 1.0);
  CHECK_THAT(rows[0].l2, WithinAbs(1.0, 1e-15));
  CHECK(rows[1].max_abs == 2.0);
  CHECK(rows[1].l1 == 1.0);
}
