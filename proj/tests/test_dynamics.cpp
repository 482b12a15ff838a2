#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fluctlab/dynamics.hpp"
#include "fluctlab/error.hpp"
#include "fluctlab/experiments.hpp"
#include "fluctlab/lattice.hpp"

using namespace fluctlab;

namespace {

// Brute-force replay of N^{-d} log dP_F/dP for a stationary field: after every
// event recount the open bonds from scratch.
double naive_log_rn(const CurrentLedger& L, const DriftField& F, double T) {
  const TorusGrid& g = L.grid;
  const int d = g.dim();
  const double N = g.side();
  std::vector<double> eta = L.initial.values;
  auto compensator_rate = [&] {
    double s = 0.0;
    for (std::size_t x = 0; x < g.size(); ++x)
      for (int j = 0; j < d; ++j) {
        const std::size_t y = g.neighbor(x, j);
        const double Fj = F(0.0, g.corner(x))[j];
        if (eta[x] == 1.0 && eta[y] == 0.0) s += 0.5 * N * N * (std::exp(Fj / N) - 1.0);
        if (eta[x] == 0.0 && eta[y] == 1.0) s += 0.5 * N * N * (std::exp(-Fj / N) - 1.0);
      }
    return s;
  };
  double t = 0.0, total = 0.0;
  for (const auto& ev : L.events) {
    if (ev.time > T) break;
    total -= compensator_rate() * (ev.time - t);
    t = ev.time;
    const double Fj = F(0.0, g.corner(ev.site))[ev.direction];
    total += ev.amount * Fj / N;
    const std::size_t y = g.neighbor(ev.site, ev.direction);
    std::swap(eta[ev.site], eta[y]);
  }
  total -= compensator_rate() * (T - t);
  return total * g.cell_volume();
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("exclusion dynamics conserve particles and current bookkeeping") {
    const TorusGrid g(2, 12);
    const auto init = random_state(g, StateKind::exclusion, 0.4, 1);
    SimulationOptions so;
    so.record_events = true;
    const auto F = DriftField::stationary(2, [](const Point& u) { return Point{std::sin(6.283185307179586 * u[1]), 1.0, 0.0}; }, 1.0);
    const auto tr = simulate_exclusion(init, 0.05, F, 2, so);
    tr.final_state.validate();
    CHECK(tr.final_state.total() == init.total());
    CHECK(tr.ledger.conservation_defect(tr.final_state) == 0.0);
    CHECK(tr.ledger.gross_net_mismatch() == 0.0);
    CHECK(tr.ledger.state_at(0.05).values == tr.final_state.values);
    CHECK(tr.ledger.state_at(0.0).values == init.values);
    CHECK_FALSE(tr.ledger.events.empty());
    for (std::size_t k = 1; k < tr.ledger.events.size(); ++k)
      CHECK(tr.ledger.events[k - 1].time <= tr.ledger.events[k].time);
  }

  TEST_CASE("same seed, same trajectory") {
    const TorusGrid g(1, 40);
    const auto init = random_state(g, StateKind::exclusion, 0.5, 3);
    const auto a = simulate_exclusion(init, 0.02, DriftField::zero(1), 9);
    const auto b = simulate_exclusion(init, 0.02, DriftField::zero(1), 9);
    const auto c = simulate_exclusion(init, 0.02, DriftField::zero(1), 10);
    CHECK(a.ledger.net == b.ledger.net);
    CHECK(a.final_state.values == b.final_state.values);
    CHECK(a.ledger.net != c.ledger.net);
  }

  TEST_CASE("a lone walker has the prescribed jump rates") {
    // One particle: no exclusion, so its displacement X_T (lattice units) is a
    // difference of Poisson variables with means (N^2/2) e^{+-E/N} T.
    const int N = 10;
    const double T = 0.2, E = 3.0;
    const TorusGrid g(1, N);
    LatticeState s(g, StateKind::exclusion);
    s.values[0] = 1.0;
    s.refresh_total();
    const int reps = 4000;
    double sum = 0.0, sq = 0.0;
    for (int r = 0; r < reps; ++r) {
      const auto tr = simulate_exclusion(s, T, DriftField::constant(1, {E, 0, 0}), derive_seed(5, r));
      double X = 0.0;
      for (double w : tr.ledger.net) X += w;
      sum += X;
      sq += X * X;
    }
    const double mean = sum / reps;
    const double var = sq / reps - mean * mean;
    const double lp = 0.5 * N * N * std::exp(E / N) * T, lm = 0.5 * N * N * std::exp(-E / N) * T;
    CHECK(std::fabs(mean - (lp - lm)) < 4 * std::sqrt((lp + lm) / reps));
    CHECK(var == doctest::Approx(lp + lm).epsilon(0.08));
  }

  TEST_CASE("KMP conserves energy and stays non-negative") {
    const TorusGrid g(1, 30);
    const auto init = random_state(g, StateKind::energy, 1.5, 4);
    SimulationOptions so;
    so.record_events = true;
    const auto tr = simulate_kmp(init, 0.05, 8, so);
    tr.final_state.validate();
    CHECK(tr.final_state.total() == doctest::Approx(init.total()).epsilon(1e-12));
    CHECK(tr.ledger.conservation_defect(tr.final_state) < 1e-10);
    const auto replay = tr.ledger.state_at(0.05);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(replay.values[i] == doctest::Approx(tr.final_state.values[i]));
    CHECK_THROWS_AS(simulate_kmp(init, 0.05, 1, so).ledger.state_at(1.0), InvalidArgument);
  }

  TEST_CASE("KMP is one-dimensional") {
    const auto init = random_state(TorusGrid(2, 6), StateKind::energy, 1.0, 1);
    CHECK_THROWS_AS(simulate_kmp(init, 0.01, 1), InvalidArgument);
  }

  TEST_CASE("log Radon-Nikodym derivative against a brute-force replay") {
    SimulationOptions so;
    so.record_events = true;
    const TorusGrid g(1, 8);
    const auto init = random_state(g, StateKind::exclusion, 0.5, 2);
    const auto F = DriftField::stationary(1, [](const Point& u) { return Point{1.0 + std::cos(2 * std::numbers::pi * u[0]), 0, 0}; }, 2.0);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto tr = simulate_exclusion(init, 0.3, F, seed, so);
      const auto terms = log_rn_terms(tr.ledger, F, 0.3);
      CHECK(terms.total == doctest::Approx(terms.stochastic - terms.forward_rate - terms.backward_rate));
      CHECK(terms.total == doctest::Approx(naive_log_rn(tr.ledger, F, 0.3)).epsilon(1e-10));
      CHECK(log_rn_derivative(tr.ledger, F, 0.15) == doctest::Approx(naive_log_rn(tr.ledger, F, 0.15)).epsilon(1e-10));
    }
    const auto tr = simulate_exclusion(init, 0.3, F, 1, so);
    CHECK(log_rn_derivative(tr.ledger, DriftField::zero(1), 0.3) == 0.0);
  }

  TEST_CASE("the tilted measure has mean likelihood ratio one") {
    // E_P[dP_F/dP] = 1, written as E_{P_F}[exp(-N^d log dP_F/dP)] = 1.
    SimulationOptions so;
    so.record_events = true;
    const TorusGrid g(1, 6);
    const auto init = canonical_state(g, 0.5, 1);
    const auto F = DriftField::constant(1, {1.0, 0, 0});
    const int reps = 4000;
    double s = 0.0, s2 = 0.0;
    for (int r = 0; r < reps; ++r) {
      const auto tr = simulate_exclusion(init, 0.05, F, derive_seed(17, r), so);
      const double w = std::exp(-6.0 * log_rn_derivative(tr.ledger, F, 0.05));
      s += w;
      s2 += w * w;
    }
    const double mean = s / reps;
    const double se = std::sqrt((s2 / reps - mean * mean) / reps);
    CHECK(std::fabs(mean - 1.0) < 4 * se + 1e-3);
  }

  TEST_CASE("RN derivative needs the event log") {
    const auto init = random_state(TorusGrid(1, 8), StateKind::exclusion, 0.5, 2);
    const auto tr = simulate_exclusion(init, 0.01, DriftField::constant(1, {1, 0, 0}), 1);
    CHECK_THROWS_AS(log_rn_derivative(tr.ledger, DriftField::constant(1, {1, 0, 0}), 0.01), InvalidArgument);
  }
}
