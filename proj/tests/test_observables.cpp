#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "fluctlab/error.hpp"
#include "fluctlab/lattice.hpp"
#include "fluctlab/observables.hpp"

using namespace fluctlab;

namespace {

LatticeState random_config(const TorusGrid& g, double p, unsigned seed) {
  std::mt19937 rng(seed);
  std::bernoulli_distribution b(p);
  LatticeState s(g, StateKind::exclusion);
  for (auto& v : s.values) v = b(rng) ? 1.0 : 0.0;
  s.refresh_total();
  return s;
}

}  // namespace

TEST_SUITE("observables") {
  TEST_CASE("coarse density is the block average") {
    const TorusGrid g(2, 12);
    const auto s = random_config(g, 0.5, 1);
    const auto c = coarse_density(s, 4);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        double sum = 0.0;
        for (int x = 0; x < 3; ++x)
          for (int y = 0; y < 3; ++y) sum += s.values[g.index({3 * a + x, 3 * b + y, 0})];
        CHECK(c[c.grid.index({a, b, 0})] == doctest::Approx(sum / 9.0));
      }
    CHECK(c.mass() == doctest::Approx(empirical_density(s).mass()));
    CHECK_THROWS_AS(coarse_density(s, 5), InvalidArgument);
  }

  TEST_CASE("empirical current pairs bond atoms at x/N") {
    const TorusGrid g(1, 8);
    EmpiricalCurrent W;
    W.lattice = g;
    W.net.assign(8, 0.0);
    W.net[3] = 2.0;
    W.net[5] = -1.0;
    auto G = [](const Point& u) { return Point{std::cos(2 * std::numbers::pi * u[0]), 0, 0}; };
    const double expect = (2.0 * std::cos(2 * std::numbers::pi * 3 / 8) - std::cos(2 * std::numbers::pi * 5 / 8)) / 64.0;
    CHECK(W.pair(G) == doctest::Approx(expect));
  }

  TEST_CASE("coarse current carries a full cell crossing") {
    // a particle walking through every bond of one coarse cell crosses one coarse face
    const TorusGrid g(1, 8);
    EmpiricalCurrent W;
    W.lattice = g;
    W.net.assign(8, 0.0);
    W.net[0] = W.net[1] = 1.0;
    const auto w = W.to_vector_field(4);
    auto one = [](const Point&) { return Point{1, 0, 0}; };
    CHECK(w.pair(one) == doctest::Approx(W.pair(one)));
    CHECK(w[0][0] != 0.0);
    CHECK(w[0][1] == 0.0);
  }

  TEST_CASE("block density against a direct sum") {
    const TorusGrid g(2, 9);
    const auto s = random_config(g, 0.4, 2);
    for (std::size_t x : {0u, 13u, 80u}) {
      const auto c = g.coords(x);
      double sum = 0.0;
      for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b) sum += s.values[g.index({c[0] + a, c[1] + b, 0})];
      CHECK(block_density(s, x, 2) == doctest::Approx(sum / 25.0));
    }
    CHECK_THROWS_AS(block_density(s, 0, 5), InvalidArgument);
  }

  TEST_CASE("two-block observable against a naive evaluation") {
    const TorusGrid g(2, 10);
    const auto s = random_config(g, 0.5, 3);
    const double eps = 0.2;
    const int ell = 2;
    for (int j = 0; j < 2; ++j) {
      double naive = 0.0;
      for (std::size_t x = 0; x < g.size(); ++x) {
        const auto c = g.coords(x);
        double pairs = 0.0, dens = 0.0;
        for (int a = -ell; a <= ell; ++a)
          for (int b = -ell; b <= ell; ++b) {
            const std::size_t y = g.index({c[0] + a, c[1] + b, 0});
            pairs += s.values[y] * s.values[g.neighbor(y, j)];
            dens += s.values[y];
          }
        pairs /= 25.0;
        dens /= 25.0;
        naive += std::fabs(pairs - dens * dens);
      }
      CHECK(two_block_observable(s, j, eps) == doctest::Approx(naive / 100.0));
    }
    LatticeState full(g, StateKind::exclusion);
    for (auto& v : full.values) v = 1.0;
    CHECK(two_block_observable(full, 0, eps) == doctest::Approx(0.0));
  }

  TEST_CASE("test field family ordering") {
    const TestFieldFamily f1(1, 10);
    REQUIRE(f1.size() == 10);
    CHECK(f1.member(0).k[0] == 0);
    CHECK(f1.member(1).k[0] == 1);
    CHECK_FALSE(f1.member(1).sine);
    CHECK(f1.member(2).sine);
    CHECK(f1.member(9).k[0] == 5);

    const TestFieldFamily f2(2, 30);
    std::set<std::tuple<int, int, int, bool>> seen;
    int last = 0;
    for (std::size_t i = 0; i < f2.size(); ++i) {
      const auto& m = f2.member(i);
      const int n = std::abs(m.k[0]) + std::abs(m.k[1]);
      CHECK(n >= last);
      last = n;
      CHECK(seen.insert({m.k[0], m.k[1], m.component, m.sine}).second);
      const int first = m.k[0] != 0 ? m.k[0] : m.k[1];
      CHECK(first >= 0);
    }
  }

  TEST_CASE("current metric") {
    const TorusGrid g(1, 16);
    const TestFieldFamily fam(1, 20);
    const auto a = VectorField::constant(g, {0.3, 0, 0});
    const auto b = VectorField::constant(g, {0.1, 0, 0});
    CHECK(current_metric(a, a, fam) == 0.0);
    CHECK(current_metric(a, b, fam) == doctest::Approx(current_metric(b, a, fam)));
    // only the k = 0 cosine sees a constant difference
    CHECK(current_metric(a, b, fam) == doctest::Approx(0.5 * 0.2));
    CHECK(current_metric(VectorField::constant(g, {50, 0, 0}), b, fam) <= 1.0);
  }

  TEST_CASE("Poisson solve and divergence-free projection") {
    const TorusGrid g(2, 16);
    std::mt19937 rng(4);
    std::normal_distribution<double> n;
    ScalarField f(g);
    for (auto& v : f.values) v = n(rng);
    const auto phi = solve_poisson(f);
    const auto L = laplacian(phi);
    const double mean = f.mass();
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(L[i] == doctest::Approx(f[i] - mean).scale(1.0).epsilon(1e-9));
    CHECK(std::fabs(phi.mass()) < 1e-12);

    VectorField w(g);
    for (auto& c : w.components)
      for (auto& v : c) v = n(rng);
    const auto p = divergence_free_projection(w);
    CHECK(divergence(p).max_abs() < 1e-9);
    CHECK((divergence_free_projection(p) - p).max_abs() < 1e-10);
    CHECK(divergence_free_projection(gradient(f)).max_abs() < 1e-10);
    const auto c = VectorField::constant(g, {0.7, -0.2, 0});
    CHECK((divergence_free_projection(c) - c).max_abs() < 1e-12);
  }

  TEST_CASE("spectral derivative is exact on resolved modes") {
    const TorusGrid g(1, 32);
    const auto f = ScalarField::sample(g, [](const Point& u) { return std::sin(2 * std::numbers::pi * 3 * u[0]); });
    const auto df = spectral_derivative(f, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double u = g.center(i)[0];
      CHECK(df[i] == doctest::Approx(6 * std::numbers::pi * std::cos(6 * std::numbers::pi * u)).scale(1.0).epsilon(1e-11));
    }
  }
}
