#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "contlab/continuity.hpp"

using namespace contlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ContinuityProblem make(double rho_s, const char* rho0, const char* b, const char* v,
                       Grid g = {50, 0.02, 2.0}) {
  return {rho_s, ScalarProfile::parse(rho0), ScalarSignal::parse(b),
          VelocityField(SpaceTimeField::parse(v), g)};
}

double max_dev(const SolutionField& rho, const ScalarProfile& target, double t_from = 0.0) {
  double m = 0.0;
  for (std::size_t i = 0; i < rho.row_count(); ++i) {
    if (rho.times[i] < t_from) continue;
    for (std::size_t j = 0; j < rho.width(); ++j) m = std::max(m, std::fabs(rho.at(i, j) - target(rho.xs[j])));
  }
  return m;
}

}  // namespace

TEST_CASE("nominal equilibrium") {
  const auto rho = solve_continuity(make(1.0, "1", "0", "1"));
  for (double v : rho.values) CHECK(v == 1.0);
}

TEST_CASE("constant disturbed equilibrium") {
  const auto rho = solve_continuity(make(1.0, "exp(0.1)", "0.1", "1"));
  for (double v : rho.values) CHECK_THAT(v, WithinRel(std::exp(0.1), 1e-14));
}

TEST_CASE("shaped equilibrium is stationary") {
  const auto rho = solve_continuity(make(1.0, "1/(1+x)", "0", "1 + x"));
  CHECK(max_dev(rho, ScalarProfile::parse("1/(1+x)")) <= 1e-6);
}

TEST_CASE("equilibrium_profile examples") {
  const Grid g{50, 0.02, 1.0};
  auto v = [&](const char* s) { return VelocityField(SpaceTimeField::parse(s), g); };
  const auto e1 = equilibrium_profile(1.0, 0.0, v("1"));
  const auto e2 = equilibrium_profile(1.0, 0.0, v("1 + x"));
  const auto e3 = equilibrium_profile(2.0, std::log(3.0), v("2 - x"));
  for (double x : {0.0, 0.3, 0.77, 1.0}) {
    CHECK_THAT(e1(x), WithinAbs(1.0, 1e-14));
    CHECK_THAT(e2(x), WithinRel(1.0 / (1.0 + x), 1e-14));
    CHECK_THAT(e3(x), WithinRel(12.0 / (2.0 - x), 1e-14));
  }
  CHECK_THROWS_AS(equilibrium_profile(1.0, 0.0, v("1 + 0.1*t*x")), ValidationError);
}

// Curved velocities make -dv/dx vary along paths, so the trapezoid error is
// O(dt^2); those cases run at dt = 1e-3 on a few sampled rows.
static std::vector<int> sample_rows(const Grid& g, double from) {
  std::vector<int> rows;
  const int k0 = static_cast<int>(std::ceil(from / g.dt - 1e-9));
  for (int i = 0; i < 6; ++i) rows.push_back(k0 + (g.nt() - k0) * i / 5);
  return rows;
}

TEST_CASE("equilibrium stationarity for shaped velocities") {
  const char* velocities[] = {"1 + x", "2 - x", "1 + 0.5*sin(3*x)", "0.6 + x*x"};
  for (const char* src : velocities) {
    INFO(src);
    const Grid g{50, 0.001, 2.0};
    const VelocityField v(SpaceTimeField::parse(src), g);
    const double b = 0.2;
    const auto eq = equilibrium_profile(1.5, b, v);
    const ContinuityProblem p{1.5, eq, ScalarSignal::constant(b), v};
    const auto rows = sample_rows(g, 0.0);
    CHECK(max_dev(solve_continuity_rows(p, rows), eq) <= 1e-6);
  }
}

TEST_CASE("finite-time convergence to the shaped equilibrium") {
  const char* velocities[] = {"1 + x", "1 + 0.5*sin(3*x)", "0.8 + 0.4*x*x"};
  for (const char* src : velocities) {
    INFO(src);
    const Grid g{50, 0.001, 3.0};
    const VelocityField v(SpaceTimeField::parse(src), g);
    const auto eq = equilibrium_profile(1.0, 0.0, v);
    // same inflow value and slope as the equilibrium, different interior
    const ScalarProfile rho0([eq](double x) { return eq(x) * (1.0 + 0.5 * x * x * (1.0 - x)); }, "bump");
    const ContinuityProblem p{1.0, rho0, ScalarSignal::constant(0.0), v};
    const double t_settle = 1.0 / v.running_min(g.horizon) + 2 * g.dt;
    const auto early = std::vector<int>{0, 200};
    CHECK(max_dev(solve_continuity_rows(p, early), eq) > 1e-2);  // not trivially at rest
    CHECK(max_dev(solve_continuity_rows(p, sample_rows(g, t_settle)), eq) <= 1e-6);
  }
}

TEST_CASE("densities stay positive") {
  const auto p = make(0.5, "0.5*exp(2*sin(5*x))", "3*sin(4*t)", "1 + 0.8*sin(6*x + t)", {60, 0.01, 2.0});
  const auto rho = solve_continuity(p);
  for (double v : rho.values) CHECK(v > 0.0);
}

TEST_CASE("invalid density data is rejected") {
  CHECK_THROWS_AS(solve_continuity(make(1.0, "x - 0.5", "0", "1")), ValidationError);
  CHECK_THROWS_AS(solve_continuity(make(0.0, "1", "0", "1")), ValidationError);
}
