#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fluctlab/error.hpp"
#include "fluctlab/functionals.hpp"
#include "fluctlab/observables.hpp"
#include "fluctlab/pde.hpp"

using namespace fluctlab;

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

ScalarField bump(const TorusGrid& g) {
  return ScalarField::sample(g, [](const Point& u) { return 0.5 + 0.2 * std::cos(kTwoPi * u[0]) + 0.05 * std::sin(kTwoPi * 2 * u[0]); });
}

PathDiscretization flat_path(const TorusGrid& g, double m, const Point& j, double T, std::size_t K) {
  const auto time = TimeGrid::uniform(T, K);
  return solve_continuity(ScalarField::constant(g, m), time, std::vector<VectorField>(K, VectorField::constant(g, j)));
}

}  // namespace

TEST_SUITE("functionals") {
  TEST_CASE("hydrodynamic trajectories cost nothing") {
    const TorusGrid g(1, 64);
    const auto ssep = coefficients_for(Model::ssep);
    const auto path = solve_heat(bump(g), 0.02, 0.5 * cfl_limit(g));
    const auto rep = eval_I(path, ssep);
    CHECK(std::fabs(rep.value) < 1e-20);
    CHECK(rep.validated());
    CHECK(rep.recompute(path, ssep) == doctest::Approx(rep.value));
  }

  TEST_CASE("flat profile with a constant current") {
    const TorusGrid g(2, 8);
    const auto ssep = coefficients_for(Model::ssep);
    const auto path = flat_path(g, 0.3, {0.4, -0.1, 0}, 2.0, 5);
    const double chi = 0.3 * 0.7;
    CHECK(eval_I(path, ssep).value == doctest::Approx(2.0 * (0.16 + 0.01) / (2 * chi)));
    CHECK(static_integrand(path.initial(), path.currents[0], ssep) == doctest::Approx((0.16 + 0.01) / (2 * chi)));
  }

  TEST_CASE("forced path pays half of chi F^2") {
    const TorusGrid g(1, 32);
    const auto ssep = coefficients_for(Model::ssep);
    const auto F = DriftField::stationary(1, [](const Point& u) { return Point{1.5 * std::sin(kTwoPi * u[0]), 0, 0}; }, 1.5);
    const auto path = solve_driven_parabolic(bump(g), F, ssep, 0.01, 0.5 * cfl_limit(g));
    const auto Fh = sample_field(F, g, 0.0);
    double expect = 0.0;
    for (std::size_t k = 0; k < path.steps(); ++k) {
      const auto& pi = path.densities[k];
      double s = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = 0.5 * (pi[i] + pi[(i + 1) % g.size()]);
        s += r * (1 - r) * Fh[0][i] * Fh[0][i];
      }
      expect += 0.5 * path.time.step(k) * s / g.size();
    }
    const auto rep = eval_I(path, ssep);
    CHECK(rep.value == doctest::Approx(expect).epsilon(1e-12));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(rep.G[3][0][i] == doctest::Approx(Fh[0][i]).scale(1.0));
  }

  TEST_CASE("constant external field in the reference current") {
    const TorusGrid g(1, 16);
    const auto kmp = coefficients_for(Model::kmp);
    const auto path = solve_driven_parabolic(bump(g), DriftField::constant(1, {0.7, 0, 0}), kmp, 0.005, 0.5 * cfl_limit(g));
    RateOptions opts;
    opts.E = {0.7, 0, 0};
    CHECK(std::fabs(eval_I(path, kmp, opts).value) < 1e-20);
    CHECK(eval_I(path, kmp).value > 0.0);
  }

  TEST_CASE("paths off the continuity set are rejected") {
    const TorusGrid g(1, 16);
    auto path = solve_heat(bump(g), 0.005, 0.5 * cfl_limit(g));
    path.densities[3][5] += 1e-3;
    CHECK_THROWS_AS(eval_I(path, coefficients_for(Model::ssep)), InfeasiblePath);
  }

  TEST_CASE("J_F is maximized near the driving field") {
    // I = sup_F J_F; at F = the driving field the two agree up to the time quadrature.
    const TorusGrid g(1, 32);
    const auto ssep = coefficients_for(Model::ssep);
    const auto E = DriftField::constant(1, {1.0, 0, 0});
    const auto path = solve_driven_parabolic(bump(g), E, ssep, 0.05, 0.5 * cfl_limit(g));
    const double I = eval_I(path, ssep).value;
    CHECK(eval_JF(path, E, ssep) == doctest::Approx(I).epsilon(2e-3));
    for (double a : {0.5, 1.5}) CHECK(eval_JF(path, DriftField::constant(1, {a, 0, 0}), ssep) < I);
    const auto wiggle = DriftField::stationary(1, [](const Point& u) { return Point{1.0 + 0.5 * std::cos(kTwoPi * u[0]), 0, 0}; }, 1.5);
    CHECK(eval_JF(path, wiggle, ssep) < I);
    CHECK(eval_JF(path, DriftField::zero(1), ssep) == 0.0);
  }

  TEST_CASE("density rate is the cheapest compatible current") {
    const TorusGrid g(1, 32);
    const auto ssep = coefficients_for(Model::ssep);
    const auto F = DriftField::stationary(1, [](const Point& u) { return Point{2.0 * std::cos(kTwoPi * u[0]), 0, 0}; }, 2.0);
    const auto path = solve_driven_parabolic(bump(g), F, ssep, 0.01, 0.5 * cfl_limit(g));
    const auto dr = eval_density_rate(path, ssep);
    CHECK(dr.max_elliptic_residual < 1e-8);
    const double I = eval_I(path, ssep).value;
    CHECK(dr.value <= I * (1 + 1e-12));
    auto recon = path;
    recon.currents = dr.gradient_currents(path, ssep);
    CHECK(eval_I(recon, ssep).value == doctest::Approx(dr.value).epsilon(1e-9));
    // shifting every current by a constant (divergence free in 1d) costs more
    auto shifted = path;
    for (auto& w : shifted.currents)
      for (double& v : w[0]) v += 0.3;
    CHECK(eval_I(shifted, ssep).value > dr.value);
  }

  TEST_CASE("relative entropy") {
    const TorusGrid g(1, 50);
    CHECK(entropy_Sm(ScalarField::constant(g, 0.3), 0.3) == doctest::Approx(0.0).scale(1.0));
    const auto rho = bump(g);
    double s = 0.0;
    for (double r : rho.values) s += r * std::log(r / 0.5) + (1 - r) * std::log((1 - r) / 0.5);
    CHECK(entropy_Sm(rho, 0.5) == doctest::Approx(s / 50.0));
    CHECK(entropy_Sm(rho, 0.5) > 0.0);
    ScalarField edge(g, 0.0);
    for (std::size_t i = 0; i < 25; ++i) edge[i] = 1.0;
    CHECK(entropy_Sm(edge, 0.5) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(entropy_Sm(rho, 1.0), InvalidArgument);
  }

  TEST_CASE("report text") {
    const TorusGrid g(1, 8);
    const auto rep = eval_I(flat_path(g, 0.5, {1, 0, 0}, 1.0, 2), coefficients_for(Model::ssep));
    CHECK(rep.to_text().find("value=2\n") != std::string::npos);
    CHECK(rep.to_text().find("validated=true") != std::string::npos);
  }
}
