#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fluctlab/error.hpp"
#include "fluctlab/observables.hpp"
#include "fluctlab/pde.hpp"

using namespace fluctlab;

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

ScalarField cosine(const TorusGrid& g, double m, double a, int k) {
  return ScalarField::sample(g, [=](const Point& u) { return m + a * std::cos(kTwoPi * k * u[0]); });
}

}  // namespace

TEST_SUITE("pde") {
  TEST_CASE("time grids") {
    const auto t = TimeGrid::with_max_step(1.0, 0.3);
    CHECK(t.size() == 4);
    CHECK(t.horizon() == doctest::Approx(1.0));
    CHECK(t.times().back() == doctest::Approx(1.0));
    CHECK(TimeGrid::uniform(2.0, 8).step(3) == doctest::Approx(0.25));
    CHECK_THROWS_AS(TimeGrid::uniform(0.0, 8), InvalidArgument);
  }

  TEST_CASE("heat solver reproduces the discrete Fourier decay") {
    // pi_K = m + a (1 + dt lambda / 2)^K cos, lambda the grid Laplacian eigenvalue.
    const int M = 64, k = 2;
    const TorusGrid g(1, M);
    const double dt = 0.5 * cfl_limit(g), T = 0.01;
    const auto path = solve_heat(cosine(g, 0.5, 0.2, k), T, dt);
    const double lam = -4.0 * M * M * std::pow(std::sin(std::numbers::pi * k / M), 2);
    double amp = 0.2;
    for (std::size_t s = 0; s < path.steps(); ++s) amp *= 1.0 + 0.5 * path.time.step(s) * lam;
    const auto expect = cosine(g, 0.5, amp, k);
    CHECK((path.final() - expect).max_abs() < 1e-13);
    // and the continuum decay to O(h^2)
    CHECK(std::fabs(amp - 0.2 * std::exp(-0.5 * kTwoPi * kTwoPi * k * k * T)) < 1e-2 * 0.2);
    CHECK(path.continuity_residual() < 1e-9);
    CHECK(path.mass_drift() < 1e-14);
  }

  TEST_CASE("heat current is minus half the gradient") {
    const TorusGrid g(2, 16);
    const auto gamma = ScalarField::sample(g, [](const Point& u) { return 0.5 + 0.1 * std::sin(kTwoPi * (u[0] + u[1])); });
    const auto path = solve_heat(gamma, 0.001, 0.5 * cfl_limit(g));
    for (std::size_t s = 0; s < path.steps(); ++s)
      CHECK((path.currents[s] + 0.5 * gradient(path.densities[s])).max_abs() == 0.0);
  }

  TEST_CASE("explicit step above the stability limit is refused") {
    const TorusGrid g(1, 32);
    CHECK_THROWS_AS(solve_heat(cosine(g, 0.5, 0.1, 1), 0.01, 1.5 * cfl_limit(g)), NumericalError);
  }

  TEST_CASE("driven solver against a hand-rolled scheme") {
    const int M = 24;
    const TorusGrid g(1, M);
    const auto ssep = coefficients_for(Model::ssep);
    const auto F = DriftField::stationary(1, [](const Point& u) { return Point{2.0 * std::sin(kTwoPi * u[0]), 0, 0}; }, 2.0);
    const double dt = 0.5 * cfl_limit(g), T = 0.02;
    const auto gamma = cosine(g, 0.5, 0.25, 1);
    const auto path = solve_driven_parabolic(gamma, F, ssep, T, dt);

    std::vector<double> rho = gamma.values;
    const auto time = TimeGrid::with_max_step(T, dt);
    for (std::size_t s = 0; s < time.size(); ++s) {
      std::vector<double> w(M);
      for (int i = 0; i < M; ++i) {
        const int u = (i + 1) % M;
        const double r = 0.5 * (rho[i] + rho[u]);
        const double face = (i + 1.0) / M;
        w[i] = -0.5 * (rho[u] - rho[i]) * M + r * (1 - r) * 2.0 * std::sin(kTwoPi * face);
      }
      for (int i = 0; i < M; ++i) rho[i] -= time.step(s) * (w[i] - w[(i + M - 1) % M]) * M;
    }
    for (int i = 0; i < M; ++i) CHECK(path.final()[i] == doctest::Approx(rho[i]).epsilon(1e-13));
    CHECK(path.mass_drift() < 1e-14);
    CHECK(path.continuity_residual() < 1e-8);
  }

  TEST_CASE("constant field on a flat profile keeps it flat") {
    const TorusGrid g(2, 8);
    const auto kmp = coefficients_for(Model::kmp);
    const auto path = solve_driven_parabolic(ScalarField::constant(g, 2.0), DriftField::constant(2, {1.0, -0.5, 0}), kmp,
                                             0.01, 0.5 * cfl_limit(g));
    CHECK((path.final() - ScalarField::constant(g, 2.0)).max_abs() < 1e-14);
    CHECK(path.currents[0][0][3] == doctest::Approx(4.0));
    CHECK(path.currents[0][1][3] == doctest::Approx(-2.0));
  }

  TEST_CASE("continuity solve counts range violations") {
    const TorusGrid g(1, 8);
    const auto time = TimeGrid::uniform(1.0, 2);
    VectorField w(g);
    w[0][0] = 1.0;  // pushes mass from cell 0 into cell 1
    const auto ssep = coefficients_for(Model::ssep);
    const auto path = solve_continuity(ScalarField::constant(g, 0.5), time, {w, w}, &ssep);
    CHECK(path.final()[0] == doctest::Approx(0.5 - 8.0));
    CHECK(path.final()[1] == doctest::Approx(0.5 + 8.0));
    CHECK(path.range_violations == 4);
    CHECK(path.continuity_residual() < 1e-12);
    CHECK(path.integrated_current()[0][0] == doctest::Approx(1.0));
  }

  TEST_CASE("elliptic solve with flat mobility is a scaled Poisson solve") {
    const TorusGrid g(2, 16);
    const auto ssep = coefficients_for(Model::ssep);
    auto rhs = ScalarField::sample(g, [](const Point& u) { return std::cos(kTwoPi * u[0]) * std::sin(kTwoPi * 2 * u[1]) + 0.3 * std::cos(kTwoPi * 3 * u[1]); });
    const auto res = solve_elliptic_chi(ScalarField::constant(g, 0.5), rhs, ssep);
    const auto phi = solve_poisson(rhs);
    CHECK((res.H - 4.0 * phi).max_abs() < 1e-9);
    CHECK(res.residual < 1e-9);
    CHECK(res.clamps == 0);
  }

  TEST_CASE("elliptic solve with varying mobility") {
    const TorusGrid g(1, 64);
    const auto ssep = coefficients_for(Model::ssep);
    const auto pi = cosine(g, 0.5, 0.3, 1);
    const auto rhs = ScalarField::sample(g, [](const Point& u) { return std::sin(kTwoPi * 2 * u[0]); });
    const auto res = solve_elliptic_chi(pi, rhs, ssep);
    // independent check of div(chi grad H) through the field operators
    std::size_t clamps = 0;
    const auto chi = face_mobility(pi, ssep, 1e-10, &clamps);
    auto flux = gradient(res.H);
    for (std::size_t i = 0; i < g.size(); ++i) flux[0][i] *= chi[0][i];
    CHECK((divergence(flux) - rhs).max_abs() < 1e-8);
    CHECK(std::fabs(res.H.mass()) < 1e-14);
    CHECK_THROWS_AS(solve_elliptic_chi(pi, ScalarField::constant(g, 1.0), ssep), InvalidArgument);
  }

  TEST_CASE("face mobility floors and counts") {
    const TorusGrid g(1, 4);
    ScalarField pi(g);
    pi.values = {0.0, 0.0, 0.5, 1.0};
    std::size_t clamps = 0;
    const auto chi = face_mobility(pi, coefficients_for(Model::ssep), 1e-6, &clamps);
    CHECK(chi[0][0] == 1e-6);
    CHECK(chi[0][1] == doctest::Approx(0.25 * 0.75));
    CHECK(clamps == 1);
  }
}
