#include <doctest.h>

#include <cmath>

#include "fluctlab/error.hpp"
#include "fluctlab/experiments.hpp"
#include "fluctlab/lattice.hpp"

using namespace fluctlab;

TEST_SUITE("lattice") {
  TEST_CASE("model names") {
    CHECK(parse_model("ssep") == Model::ssep);
    CHECK(parse_model("wasep") == Model::ssep);
    CHECK(parse_model("kmp") == Model::kmp);
    CHECK_THROWS_AS(parse_model("zrp"), InvalidArgument);
    CHECK(model_name(Model::kmp) == "kmp");
  }

  TEST_CASE("built-in coefficients and their derivatives") {
    const auto ssep = coefficients_for(Model::ssep);
    const auto kmp = coefficients_for(Model::kmp);
    for (double r : {0.1, 0.3, 0.5, 0.9}) {
      CHECK(ssep.chi(r) == doctest::Approx(r * (1 - r)));
      CHECK(ssep.D(r) == 1.0);
      const double h = 1e-5;
      CHECK(ssep.dchi(r) == doctest::Approx((ssep.chi(r + h) - ssep.chi(r - h)) / (2 * h)));
      CHECK(kmp.chi(3 * r) == doctest::Approx(9 * r * r));
      CHECK(kmp.dchi(3 * r) == doctest::Approx((kmp.chi(3 * r + h) - kmp.chi(3 * r - h)) / (2 * h)));
      CHECK(kmp.d2chi(r) == doctest::Approx(2.0));
      CHECK(ssep.d_potential(r) == doctest::Approx(r));
    }
    CHECK(ssep.interior(0.5));
    CHECK_FALSE(ssep.interior(1.0));
    CHECK_FALSE(kmp.bounded_above());
  }

  TEST_CASE("inverse mobility convexity") {
    CHECK(coefficients_for(Model::ssep).inverse_mobility_convex());
    CHECK(coefficients_for(Model::kmp).inverse_mobility_convex());
    // 1/chi = exp(-r^2) is concave below 1/sqrt(2)
    const auto odd = coefficients_custom([](double r) { return std::exp(r * r); }, [](double) { return 1.0; }, 0.0, 2.0);
    CHECK_FALSE(odd.inverse_mobility_convex());
  }

  TEST_CASE("custom coefficients fall back to finite differences") {
    const auto c = coefficients_custom([](double r) { return r * r * r; }, [](double r) { return 1.0 + r; }, 0.0, 3.0);
    CHECK(c.dchi(1.5) == doctest::Approx(3 * 1.5 * 1.5).epsilon(1e-6));
    CHECK(c.d2chi(1.5) == doctest::Approx(6 * 1.5).epsilon(1e-5));
    CHECK(c.d_potential(2.0) == doctest::Approx(4.0));
    CHECK_THROWS_AS(coefficients_custom([](double r) { return r - 1.0; }, [](double) { return 1.0; }, 0.0, 2.0),
                    InvalidArgument);
  }

  TEST_CASE("product states have the requested marginals") {
    const TorusGrid g(1, 20000);
    const auto s = random_state(g, StateKind::exclusion, 0.3, 7);
    s.validate();
    CHECK(s.conserved == s.total());
    const double p = s.total() / 20000.0;
    CHECK(std::fabs(p - 0.3) < 4 * std::sqrt(0.3 * 0.7 / 20000.0));

    const auto e = random_state(g, StateKind::energy, 2.0, 7);
    e.validate();
    double mean = 0.0, sq = 0.0;
    for (double v : e.values) {
      mean += v;
      sq += v * v;
    }
    mean /= 20000.0;
    sq /= 20000.0;
    // exponential law: mean 2, second moment 8
    CHECK(std::fabs(mean - 2.0) < 4 * 2.0 / std::sqrt(20000.0));
    CHECK(sq == doctest::Approx(8.0).epsilon(0.1));
  }

  TEST_CASE("product states are deterministic in the seed") {
    const TorusGrid g(2, 16);
    const auto prof = [](const Point& u) { return 0.5 + 0.4 * std::sin(6.283185307179586 * u[1]); };
    CHECK(random_state(g, StateKind::exclusion, prof, 3).values == random_state(g, StateKind::exclusion, prof, 3).values);
    CHECK(random_state(g, StateKind::exclusion, prof, 3).values != random_state(g, StateKind::exclusion, prof, 4).values);
    CHECK_THROWS_AS(random_state(g, StateKind::exclusion, 1.5, 1), InvalidArgument);
  }

  TEST_CASE("validate rejects bad site values") {
    LatticeState s(TorusGrid(1, 4), StateKind::exclusion);
    s.values[2] = 0.5;
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    LatticeState e(TorusGrid(1, 4), StateKind::energy);
    e.values[1] = -1.0;
    CHECK_THROWS_AS(e.validate(), InvalidArgument);
  }

  TEST_CASE("canonical states hold the exact particle count") {
    const TorusGrid g(1, 17);
    const auto s = canonical_state(g, 0.5, 9);
    s.validate();
    CHECK(s.total() == std::round(0.5 * 17));
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  }
}
