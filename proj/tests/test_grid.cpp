#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fluctlab/error.hpp"
#include "fluctlab/grid.hpp"
#include "fluctlab/kernels.hpp"

using namespace fluctlab;

namespace {

ScalarField random_scalar(const TorusGrid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  ScalarField f(g);
  for (auto& v : f.values) v = n(rng);
  return f;
}

VectorField random_vector(const TorusGrid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  VectorField w(g);
  for (auto& c : w.components)
    for (auto& v : c) v = n(rng);
  return w;
}

}  // namespace

TEST_SUITE("grid") {
  TEST_CASE("construction rejects bad shapes") {
    CHECK_THROWS_AS(TorusGrid(0, 8), InvalidArgument);
    CHECK_THROWS_AS(TorusGrid(4, 8), InvalidArgument);
    CHECK_THROWS_AS(TorusGrid(1, 1), InvalidArgument);
    CHECK(TorusGrid(3, 4).size() == 64);
  }

  TEST_CASE("index and coords round trip, neighbors wrap") {
    for (int d = 1; d <= 3; ++d) {
      const TorusGrid g(d, 5);
      for (std::size_t s = 0; s < g.size(); ++s) {
        CHECK(g.index(g.coords(s)) == s);
        for (int a = 0; a < d; ++a) {
          CHECK(g.neighbor(g.neighbor(s, a), a, -1) == s);
          CHECK(g.neighbor(s, a, 5) == s);
          auto c = g.coords(s);
          c[a] = (c[a] + 1) % 5;
          CHECK(g.neighbor(s, a) == g.index(c));
        }
      }
    }
  }

  TEST_CASE("axis 0 is the slowest index") {
    const TorusGrid g(2, 4);
    CHECK(g.index({1, 0, 0}) == 4);
    CHECK(g.index({0, 1, 0}) == 1);
    CHECK(g.center(0)[0] == doctest::Approx(0.125));
    CHECK(g.face_center(0, 0)[0] == doctest::Approx(0.25));
    CHECK(g.face_center(0, 0)[1] == doctest::Approx(0.125));
  }

  TEST_CASE("gradient matches a hand-written difference") {
    const TorusGrid g(2, 6);
    const auto f = random_scalar(g, 3);
    const auto gr = gradient(f);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto c = g.coords(i);
      const std::size_t right = g.index({(c[0] + 1) % 6, c[1], 0});
      const std::size_t up = g.index({c[0], (c[1] + 1) % 6, 0});
      CHECK(gr[0][i] == doctest::Approx((f[right] - f[i]) * 6));
      CHECK(gr[1][i] == doctest::Approx((f[up] - f[i]) * 6));
    }
  }

  TEST_CASE("div is the negative adjoint of grad") {
    for (int d = 1; d <= 3; ++d) {
      const TorusGrid g(d, 7);
      const auto f = random_scalar(g, 11 + d);
      const auto w = random_vector(g, 23 + d);
      const double lhs = inner(gradient(f), w);
      const double rhs = -inner(f, divergence(w));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }

  TEST_CASE("discrete Laplacian eigenvalue on a Fourier mode") {
    const int M = 32;
    const TorusGrid g(1, M);
    const auto f = ScalarField::sample(g, [](const Point& u) { return std::cos(2 * std::numbers::pi * 3 * u[0]); });
    const auto L = laplacian(f);
    const double lam = -4.0 * M * M * std::pow(std::sin(std::numbers::pi * 3 / M), 2);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(L[i] == doctest::Approx(lam * f[i]).epsilon(1e-10).scale(1.0));
  }

  TEST_CASE("serial and OpenMP kernels agree bit for bit") {
    const TorusGrid g(3, 9);
    const auto f = random_scalar(g, 5);
    const auto w = random_vector(g, 6);
    VectorField a(g), b(g);
    double* pa[3] = {a[0].data(), a[1].data(), a[2].data()};
    double* pb[3] = {b[0].data(), b[1].data(), b[2].data()};
    kernels::serial::gradient(g, f.values.data(), pa);
    kernels::omp::gradient(g, f.values.data(), pb);
    CHECK(a.components == b.components);

    const double* pw[3] = {w[0].data(), w[1].data(), w[2].data()};
    ScalarField da(g), db(g);
    kernels::serial::divergence(g, pw, da.values.data());
    kernels::omp::divergence(g, pw, db.values.data());
    CHECK(da.values == db.values);

    ScalarField la(g), lb(g);
    kernels::serial::weighted_laplacian(g, pw, f.values.data(), la.values.data());
    kernels::omp::weighted_laplacian(g, pw, f.values.data(), lb.values.data());
    CHECK(la.values == lb.values);
  }

  TEST_CASE("replica maps keep index order and rethrow") {
    auto sq = [](std::size_t i) { return static_cast<double>(i * i); };
    CHECK(kernels::map_replicas_omp(50, sq) == kernels::map_replicas_serial(50, sq));
    auto bad = [](std::size_t i) -> int {
      if (i == 7) throw NumericalError("boom");
      return 0;
    };
    CHECK_THROWS_AS(kernels::map_replicas_omp(10, bad), NumericalError);
  }

  TEST_CASE("field arithmetic and grid mismatch") {
    const TorusGrid g(1, 8), h(1, 9);
    const auto a = ScalarField::constant(g, 2.0);
    CHECK((a + a).mass() == doctest::Approx(4.0));
    CHECK((3.0 * a - a).max() == doctest::Approx(4.0));
    CHECK_THROWS_AS(a + ScalarField::constant(h, 1.0), InvalidArgument);
    const auto pi = ScalarField::sample(g, [](const Point& u) { return u[0]; });
    // midpoint rule: exact on u, error -h^2/12 on u^2
    CHECK(pi.pair([](const Point& u) { return 1.0 + u[0]; }) ==
          doctest::Approx(1.0 / 2 + 1.0 / 3 - 1.0 / (12.0 * 64)));
  }
}
