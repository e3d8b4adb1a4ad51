#pragma once

// Random well-defined expressions in t and x for round-trip checks. Every
// generated expression is finite on [0,1]^2: divisions, logs and roots only
// see arguments bounded away from their singularities.

#include <random>
#include <string>

namespace contlab::testing {

class RandomExpr {
 public:
  explicit RandomExpr(std::uint64_t seed) : rng_(seed) {}

  std::string operator()(int depth = 4) { return node(depth); }

 private:
  std::string leaf() {
    switch (pick(5)) {
      case 0: return "t";
      case 1: return "x";
      case 2: return "pi";
      case 3: return std::to_string(pick(9) + 1);
      default: {
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", u(rng_));
        return std::string("(") + buf + ")";
      }
    }
  }

  std::string node(int depth) {
    if (depth <= 0) return leaf();
    const std::string a = node(depth - 1);
    switch (pick(12)) {
      case 0: return a + " + " + node(depth - 1);
      case 1: return a + " - " + node(depth - 1);
      case 2: return a + "*" + node(depth - 1);
      case 3: return "(" + a + ")/(1.5 + sin(" + node(depth - 1) + "))";
      case 4: return "-" + a;
      case 5: return "sin(" + a + ")";
      case 6: return "cos(" + a + ")";
      case 7: return "exp(sin(" + a + "))";
      case 8: return "ln(1 + abs(" + a + "))";
      case 9: return "sqrt(abs(" + a + "))";
      case 10: return (pick(2) ? "min(" : "max(") + a + ", " + node(depth - 1) + ")";
      default: return "(0.5 + abs(sin(" + a + ")))^" + std::to_string(pick(3) + 1);
    }
  }

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  std::mt19937_64 rng_;
};

}  // namespace contlab::testing
