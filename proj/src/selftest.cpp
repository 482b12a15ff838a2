#include "fluctlab/selftest.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fluctlab/dynamics.hpp"
#include "fluctlab/error.hpp"
#include "fluctlab/functionals.hpp"
#include "fluctlab/grid.hpp"
#include "fluctlab/lattice.hpp"
#include "fluctlab/observables.hpp"
#include "fluctlab/pde.hpp"
#include "fluctlab/variational.hpp"

namespace fluctlab {

namespace {

struct Outcome {
  bool ok;
  std::string detail;
};

Outcome expect(bool ok, std::string detail = {}) { return {ok, std::move(detail)}; }

template <class F>
Outcome expect_throw(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return {true, e.what()};
  }
  return {false, "no exception"};
}

using Check = std::function<Outcome()>;

const double kPi = std::numbers::pi;

LatticeState sites_state(int N, std::initializer_list<std::size_t> occupied) {
  LatticeState s(TorusGrid(1, N), StateKind::exclusion);
  for (auto x : occupied) s.values[x] = 1.0;
  s.refresh_total();
  return s;
}

LatticeState filled(int d, int N, double v) {
  LatticeState s(TorusGrid(d, N), StateKind::exclusion);
  for (double& x : s.values) x = v;
  s.refresh_total();
  return s;
}

ScalarField cosine(const TorusGrid& g, double m, double a, int k = 1) {
  return ScalarField::sample(g, [=](const Point& u) { return m + a * std::cos(2 * kPi * k * u[0]); });
}

double sup_diff(const ScalarField& a, const ScalarField& b) { return (a - b).max_abs(); }

std::vector<std::pair<std::pair<std::string, std::string>, Check>> checks() {
  std::vector<std::pair<std::pair<std::string, std::string>, Check>> c;
  auto add = [&](const char* module, const char* name, Check f) { c.push_back({{module, name}, std::move(f)}); };
  const auto ssep = coefficients_for(Model::ssep);
  const auto kmp = coefficients_for(Model::kmp);

  // lattice-model
  add("lattice-model", "torus d=1 N=8: site 7 has +e_1 neighbour 0", [] {
    const TorusGrid g(1, 8);
    return expect(g.size() == 8 && g.neighbor(7, 0) == 0);
  });
  add("lattice-model", "torus d=2 N=3: 9 sites with 4 distinct neighbours", [] {
    const TorusGrid g(2, 3);
    bool ok = g.size() == 9;
    for (std::size_t x = 0; x < g.size(); ++x) {
      std::vector<std::size_t> n{g.neighbor(x, 0), g.neighbor(x, 0, -1), g.neighbor(x, 1), g.neighbor(x, 1, -1)};
      std::sort(n.begin(), n.end());
      ok = ok && std::adjacent_find(n.begin(), n.end()) == n.end();
    }
    return expect(ok);
  });
  add("lattice-model", "torus N=1 rejected", [] { return expect_throw([] { make_torus(1, 1); }); });
  add("lattice-model", "ssep chi(0) = 0", [ssep] { return expect(ssep.chi(0.0) == 0.0); });
  add("lattice-model", "random_state m=1 fills every site", [] {
    const auto s = random_state(TorusGrid(2, 16), StateKind::exclusion, 1.0, 7);
    return expect(s.total() == 256.0);
  });
  add("lattice-model", "random_state m=0 is empty", [] {
    const auto s = random_state(TorusGrid(2, 16), StateKind::exclusion, 0.0, 7);
    return expect(s.total() == 0.0);
  });
  add("lattice-model", "+e_j then -e_j is the identity", [] {
    const TorusGrid g(3, 5);
    bool ok = true;
    for (std::size_t x = 0; x < g.size(); ++x)
      for (int j = 0; j < 3; ++j) ok = ok && g.neighbor(g.neighbor(x, j), j, -1) == x;
    return expect(ok);
  });

  // dynamics-sim
  add("dynamics-sim", "exclusion conserves the particle count", [] {
    const auto init = random_state(TorusGrid(1, 64), StateKind::exclusion, 0.3, 11);
    const auto tr = simulate_exclusion(init, 0.2, DriftField::zero(1), 12);
    return expect(tr.final_state.total() == init.total() && tr.ledger.conservation_defect(tr.final_state) == 0.0);
  });
  add("dynamics-sim", "single particle: mean of W paired with a constant field is 0", [] {
    const int N = 32, runs = 200;
    const TorusGrid g(1, N);
    double s = 0.0, s2 = 0.0;
    for (int r = 0; r < runs; ++r) {
      LatticeState init(g, StateKind::exclusion);
      init.values[5] = 1.0;
      init.refresh_total();
      const auto tr = simulate_exclusion(init, 1.0, DriftField::zero(1), 1000 + r);
      const double p = empirical_current(tr.ledger, 1.0).pair([](const Point&) { return Point{1.0, 0.0, 0.0}; });
      s += p;
      s2 += p * p;
    }
    const double mean = s / runs;
    const double se = std::sqrt((s2 / runs - mean * mean) / (runs - 1));
    return expect(std::fabs(mean) <= 4 * se, fmt::format("mean {:.3e}, stderr {:.3e}", mean, se));
  });
  add("dynamics-sim", "KMP conserves the total energy", [] {
    const auto init = random_state(TorusGrid(1, 32), StateKind::energy, 1.0, 3);
    const auto tr = simulate_kmp(init, 0.5, 4);
    const double e0 = init.total(), e1 = tr.final_state.total();
    return expect(std::fabs(e1 - e0) <= 1e-12 * e0, fmt::format("drift {:.3e}", e1 - e0));
  });
  add("dynamics-sim", "KMP energies stay non-negative along the trajectory", [] {
    const auto init = random_state(TorusGrid(1, 16), StateKind::energy, 1.0, 5);
    SimulationOptions so;
    so.record_events = true;
    const auto tr = simulate_kmp(init, 0.3, 6, so);
    bool ok = true;
    for (double t : {0.05, 0.1, 0.2, 0.3})
      for (double v : tr.ledger.state_at(t).values) ok = ok && v >= 0.0;
    for (double v : tr.final_state.values) ok = ok && v >= 0.0;
    return expect(ok);
  });
  add("dynamics-sim", "log_rn_derivative with zero field is exactly 0", [] {
    SimulationOptions so;
    so.record_events = true;
    const auto init = random_state(TorusGrid(1, 16), StateKind::exclusion, 0.5, 8);
    const auto tr = simulate_exclusion(init, 0.5, DriftField::zero(1), 9, so);
    return expect(log_rn_derivative(tr.ledger, DriftField::zero(1), 0.5) == 0.0);
  });
  add("dynamics-sim", "F -> -F negates the stochastic term and swaps the rate terms", [] {
    SimulationOptions so;
    so.record_events = true;
    const auto init = random_state(TorusGrid(1, 16), StateKind::exclusion, 0.5, 10);
    const auto F = DriftField::constant(1, {0.7, 0.0, 0.0});
    const auto tr = simulate_exclusion(init, 0.5, F, 11, so);
    const auto a = log_rn_terms(tr.ledger, F, 0.5);
    const auto b = log_rn_terms(tr.ledger, F.negated(), 0.5);
    // In d=1 with a constant field the numbers of right-movable and
    // left-movable particles coincide, so the swap is exact.
    const double e1 = std::fabs(a.stochastic + b.stochastic);
    const double e2 = std::fabs(a.forward_rate - b.backward_rate) + std::fabs(a.backward_rate - b.forward_rate);
    return expect(e1 <= 1e-12 && e2 <= 1e-12 * std::fabs(a.forward_rate), fmt::format("{:.2e} {:.2e}", e1, e2));
  });

  // observables
  add("observables", "full lattice density is 1", [] {
    const auto f = empirical_density(filled(2, 8, 1.0));
    return expect(f.min() == 1.0 && f.max() == 1.0);
  });
  add("observables", "empty lattice density is 0", [] {
    const auto f = empirical_density(filled(2, 8, 0.0));
    return expect(f.max_abs() == 0.0);
  });
  add("observables", "N=4, occupied {0,2}: mass 0.5, cells (1,0,1,0)", [] {
    const auto f = empirical_density(sites_state(4, {0, 2}));
    return expect(f.mass() == 0.5 && f[0] == 1 && f[1] == 0 && f[2] == 1 && f[3] == 0);
  });
  add("observables", "empirical current at t=0 is zero", [] {
    const auto init = random_state(TorusGrid(1, 16), StateKind::exclusion, 0.5, 1);
    SimulationOptions so;
    so.record_events = true;
    const auto tr = simulate_exclusion(init, 0.1, DriftField::zero(1), 2, so);
    const auto W = empirical_current(tr.ledger, 0.0);
    bool ok = true;
    for (double v : W.net) ok = ok && v == 0.0;
    return expect(ok);
  });
  add("observables", "jump then reverse jump cancels", [] {
    CurrentLedger L;
    L.grid = TorusGrid(1, 8);
    L.horizon = 1.0;
    L.net.assign(8, 0.0);
    L.has_log = true;
    L.events = {{0.1, 3, 0, 1.0}, {0.2, 3, 0, -1.0}};
    const auto W = empirical_current(L, 0.5);
    bool ok = true;
    for (double v : W.net) ok = ok && v == 0.0;
    return expect(ok);
  });
  add("observables", "block density of the full lattice is 1", [] {
    return expect(block_density(filled(2, 9, 1.0), 4, 2) == 1.0);
  });
  add("observables", "block density with l=0 is eta(x)", [] {
    const auto s = sites_state(6, {1, 4});
    bool ok = true;
    for (std::size_t x = 0; x < 6; ++x) ok = ok && block_density(s, x, 0) == s.values[x];
    return expect(ok);
  });
  add("observables", "N=4, occupied {0,2}, x=1, l=1 gives 2/3", [] {
    const double v = block_density(sites_state(4, {0, 2}), 1, 1);
    return expect(std::fabs(v - 2.0 / 3.0) < 1e-15, fmt::format("{}", v));
  });
  add("observables", "two-block observable vanishes on full and empty lattices", [] {
    return expect(two_block_observable(filled(1, 64, 1.0), 0, 0.1) == 0.0 &&
                  two_block_observable(filled(1, 64, 0.0), 0, 0.1) == 0.0);
  });
  const TorusGrid g16(2, 16);
  const VectorField J1 = VectorField::sample(g16, [](const Point& u) {
    return Point{std::sin(2 * kPi * u[1]), 0.3 * std::cos(2 * kPi * u[0]), 0.0};
  });
  const VectorField J2 = VectorField::sample(g16, [](const Point& u) {
    return Point{2.0 + std::cos(2 * kPi * (u[0] + u[1])), -1.0, 0.0};
  });
  const TestFieldFamily fam(2, 20);
  add("observables", "metric rho(J,J) = 0", [=] { return expect(current_metric(J1, J1, fam) == 0.0); });
  add("observables", "metric is symmetric", [=] {
    return expect(current_metric(J1, J2, fam) == current_metric(J2, J1, fam));
  });
  add("observables", "metric is at most 1", [=] {
    const VectorField big = 1e6 * J2;
    return expect(current_metric(J1, big, fam) <= 1.0);
  });
  add("observables", "projection keeps constant fields", [=] {
    const auto c = VectorField::constant(g16, {0.3, -1.2, 0.0});
    return expect((divergence_free_projection(c) - c).max_abs() <= 1e-12);
  });
  add("observables", "projection removes pure gradients", [=] {
    const auto f = ScalarField::sample(g16, [](const Point& u) { return std::sin(2 * kPi * u[0]) * std::cos(4 * kPi * u[1]); });
    return expect(divergence_free_projection(gradient(f)).max_abs() <= 1e-10);
  });
  add("observables", "projection is idempotent", [=] {
    const auto p = divergence_free_projection(J2);
    return expect((divergence_free_projection(p) - p).max_abs() <= 1e-10);
  });

  // pde
  const TorusGrid g64(1, 64);
  add("pde", "heat flow fixes constant profiles", [=] {
    const auto p = solve_heat(ScalarField::constant(g64, 0.3), 0.05, 0.5 * cfl_limit(g64));
    double e = 0.0;
    for (const auto& d : p.densities) e = std::max(e, sup_diff(d, ScalarField::constant(g64, 0.3)));
    return expect(e == 0.0, fmt::format("{:.2e}", e));
  });
  add("pde", "heat flow conserves mass to 1e-12", [=] {
    const auto gam = cosine(g64, 0.5, 0.3, 2);
    const auto p = solve_heat(gam, 0.05, 0.5 * cfl_limit(g64));
    return expect(std::fabs(p.final().mass() - gam.mass()) <= 1e-12);
  });
  add("pde", "driven solve with F=0 equals the heat solve", [=] {
    const auto gam = cosine(g64, 0.5, 0.3);
    const double dt = 0.5 * cfl_limit(g64);
    const auto a = solve_heat(gam, 0.02, dt);
    const auto b = solve_driven_parabolic(gam, DriftField::zero(1), ssep, 0.02, dt);
    return expect(sup_diff(a.final(), b.final()) <= 1e-12);
  });
  add("pde", "constant profile under constant field stays constant", [=] {
    const auto gam = ScalarField::constant(g64, 0.4);
    const auto p = solve_driven_parabolic(gam, DriftField::constant(1, {1.5, 0, 0}), ssep, 0.02,
                                          0.5 * cfl_limit(g64));
    return expect(sup_diff(p.final(), gam) <= 1e-12);
  });
  add("pde", "zero current keeps the density", [=] {
    const auto gam = cosine(g64, 0.5, 0.2);
    const auto p = solve_continuity(gam, TimeGrid::uniform(1.0, 10), std::vector<VectorField>(10, VectorField(g64)));
    double e = 0.0;
    for (const auto& d : p.densities) e = std::max(e, sup_diff(d, gam));
    return expect(e == 0.0);
  });
  add("pde", "divergence-free current keeps the density", [=] {
    const auto gam = cosine(g16, 0.5, 0.2);
    const auto w = divergence_free_projection(J2);
    const auto p = solve_continuity(gam, TimeGrid::uniform(1.0, 10), std::vector<VectorField>(10, w));
    double e = 0.0;
    for (const auto& d : p.densities) e = std::max(e, sup_diff(d, gam));
    return expect(e <= 1e-12, fmt::format("{:.2e}", e));
  });
  add("pde", "elliptic solve with zero rhs gives H = 0", [=] {
    const auto r = solve_elliptic_chi(cosine(g64, 0.5, 0.2), ScalarField(g64), ssep);
    return expect(r.H.max_abs() == 0.0);
  });
  add("pde", "elliptic solve rejects a rhs with integral 0.1", [=] {
    return expect_throw([&] { solve_elliptic_chi(cosine(g64, 0.5, 0.2), ScalarField::constant(g64, 0.1), ssep); });
  });

  // functionals
  add("functionals", "J_F with F=0 is 0", [=] {
    const auto p = solve_heat(cosine(g64, 0.5, 0.2), 0.01, 0.5 * cfl_limit(g64));
    return expect(eval_JF(p, DriftField::zero(1), ssep) == 0.0);
  });
  add("functionals", "time-independent F: the d_t F term is not evaluated", [] {
    const auto F = DriftField::stationary(1, [](const Point&) { return Point{1.0, 0, 0}; }, 1.0);
    return expect(!F.time_dependent);
  });
  add("functionals", "continuity violation by 10x tolerance is rejected", [=] {
    auto p = solve_heat(cosine(g64, 0.5, 0.2), 0.01, 0.5 * cfl_limit(g64));
    const double tol = RateOptions{}.continuity_factor * 64;
    p.densities[1][0] += 10 * tol * p.time.step(0);
    return expect_throw([&] { eval_I(p, ssep); });
  });
  add("functionals", "density rate of the heat path is 0 within 1e-6", [=] {
    const auto p = solve_heat(cosine(g64, 0.5, 0.2), 0.01, 0.5 * cfl_limit(g64));
    const double v = eval_density_rate(p, ssep).value;
    return expect(std::fabs(v) <= 1e-6, fmt::format("{:.3e}", v));
  });
  add("functionals", "static integrand at rho = m, j = 0 is 0", [=] {
    return expect(static_integrand(ScalarField::constant(g64, 0.3), VectorField(g64), ssep) == 0.0);
  });
  add("functionals", "S_m(m) = 0", [=] { return expect(entropy_Sm(ScalarField::constant(g64, 0.3), 0.3) == 0.0); });
  add("functionals", "S_m >= 0 on 100 random profiles", [=] {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    for (int r = 0; r < 100; ++r) {
      ScalarField f(g64);
      for (double& v : f.values) v = U(rng);
      worst = std::min(worst, entropy_Sm(f, 0.05 + 0.9 * U(rng)));
    }
    return expect(worst >= 0.0, fmt::format("{:.3e}", worst));
  });

  // variational
  add("variational", "U_m(0) = 0 with the constant minimizer", [=] {
    ProfileOptions o;
    o.parallel = false;
    const auto r = minimize_Um(VectorField(g64), 0.3, ssep, o);
    return expect(r.value == 0.0 && sup_diff(r.rho, ScalarField::constant(g64, 0.3)) <= 1e-12);
  });
  add("variational", "closed form at j = 0 is 0", [ssep] { return expect(closed_form_Um_1d(0.0, 0.4, ssep) == 0.0); });
  add("variational", "Psi_0 agrees with U_m", [kmp] {
    ProfileOptions o;
    o.resolution = 64;
    o.parallel = false;
    const double psi = eval_Psi_v(3.0, 0.0, 1.0, kmp, o).value;
    const double u = minimize_Um(VectorField::constant(TorusGrid(1, 64), {3.0, 0, 0}), 1.0, kmp, o).value;
    return expect(std::fabs(psi - u) <= 1e-9 * std::max(1.0, u), fmt::format("{:.12g} vs {:.12g}", psi, u));
  });
  add("variational", "Psi_v never exceeds J^2/(2 chi(m))", [kmp, ssep] {
    ProfileOptions o;
    o.resolution = 64;
    o.parallel = false;
    bool ok = true;
    for (double v : {-3.0, 0.5, 4.0}) {
      ok = ok && eval_Psi_v(2.0, v, 1.0, kmp, o).value <= 2.0 * 2.0 / 2.0 + 1e-12;
      ok = ok && eval_Psi_v(2.0, v, 0.3, ssep, o).value <= 4.0 / (2 * 0.21) + 1e-12;
    }
    return expect(ok);
  });
  add("variational", "F''(m) is minimal over lambda at lambda*", [kmp, ssep] {
    bool ok = true;
    for (const auto* c : {&kmp, &ssep})
      for (double m : {0.3, 0.6}) {
        const auto r = second_derivative_criterion(m, *c);
        for (double dl : {-1.0, -0.1, 0.1, 1.0}) ok = ok && criterion_Fpp(r.lambda + dl, m, *c) > r.Fpp;
      }
    return expect(ok);
  });
  add("variational", "scan at J = 0 has zero gap", [kmp] {
    ScanOptions o;
    o.profile.resolution = 32;
    o.profile.parallel = false;
    const auto row = scan_point(0.0, 1.0, kmp, o);
    return expect(row.U == 0.0 && std::fabs(row.gap) <= 1e-14, fmt::format("U {} psi {}", row.U, row.psi_min));
  });
  add("variational", "Phi_T(0 | m) = 0 with w = 0", [ssep] {
    const TorusGrid g(1, 16);
    const auto r = optimize_PhiT(VectorField(g), ScalarField::constant(g, 0.5), 1.0, 8, ssep);
    double wmax = 0.0;
    for (const auto& w : r.path.currents) wmax = std::max(wmax, w.max_abs());
    return expect(r.value <= 1e-14 && wmax <= 1e-12, fmt::format("value {:.3e} |w| {:.3e}", r.value, wmax));
  });
  add("variational", "Phi_T is below the straight-path cost", [ssep] {
    const TorusGrid g(1, 16);
    const auto gam = cosine(g, 0.5, 0.1);
    const auto J = VectorField::constant(g, {0.5, 0, 0});
    const auto r = optimize_PhiT(J, gam, 3.0, 24, ssep);
    const auto sp = build_straight_path(gam, ScalarField::constant(g, 0.5), J, 3.0, 8);
    const double s = eval_I(sp, ssep).value / 3.0;
    return expect(r.value <= s + 1e-12, fmt::format("{:.8g} vs {:.8g}", r.value, s));
  });
  add("variational", "relaxation path between equal flat profiles is free", [=] {
    const auto c = ScalarField::constant(g64, 0.5);
    const auto r = build_relaxation_path(c, c, 0.5, 0.05, ssep);
    return expect(r.cost <= 1e-6, fmt::format("{:.3e}", r.cost));
  });
  add("variational", "bridge current reproduces the density change", [=] {
    const auto r = build_relaxation_path(cosine(g64, 0.5, 0.2, 2), cosine(g64, 0.5, 0.1), 0.5, 0.05, ssep);
    return expect(r.path.continuity_residual() <= 1e-6, fmt::format("{:.3e}", r.path.continuity_residual()));
  });
  add("variational", "straight path with gamma = rho has constant density", [=] {
    const auto rho = cosine(g64, 0.5, 0.2);
    const auto p = build_straight_path(rho, rho, VectorField::constant(g64, {0.3, 0, 0}), 4.0, 8);
    double e = 0.0;
    for (const auto& d : p.densities) e = std::max(e, sup_diff(d, rho));
    return expect(e <= 1e-12, fmt::format("{:.2e}", e));
  });
  add("variational", "straight path endpoint current is divergence free", [=] {
    const auto p = build_straight_path(cosine(g16, 0.5, 0.2), cosine(g16, 0.5, -0.1, 2),
                                       VectorField::constant(g16, {0.3, 0.1, 0}), 4.0, 8);
    return expect(divergence(p.integrated_current()).max_abs() <= 1e-10);
  });
  add("variational", "flat traveling wave: w = J, cost/T = static integrand", [=] {
    const auto p = traveling_wave_path(ScalarField::constant(g64, 0.4), 2.0, 0.7);
    double e = 0.0;
    for (const auto& w : p.currents) e = std::max(e, (w - VectorField::constant(g64, {0.7, 0, 0})).max_abs());
    const double c = eval_I(p, ssep).value / p.horizon();
    const double s = static_integrand(ScalarField::constant(g64, 0.4), VectorField::constant(g64, {0.7, 0, 0}), ssep);
    return expect(e <= 1e-15 && std::fabs(c - s) <= 1e-12 * s, fmt::format("{:.12g} vs {:.12g}", c, s));
  });
  add("variational", "gluing a zero-current path keeps the cost", [=] {
    const auto flat = ScalarField::constant(g64, 0.5);
    const auto p = solve_continuity(flat, TimeGrid::uniform(1.0, 8),
                                    std::vector<VectorField>(8, VectorField::constant(g64, {0.3, 0, 0})));
    const auto z = solve_continuity(p.final(), TimeGrid::uniform(0.5, 5), std::vector<VectorField>(5, VectorField(g64)));
    const double a = eval_I(p, ssep).value;
    const double b = eval_I(glue_paths(p, z), ssep).value;
    return expect(a == b, fmt::format("{:.17g} vs {:.17g}", a, b));
  });
  add("variational", "glued endpoint current is the sum", [=] {
    const double dt = 0.5 * cfl_limit(g64);
    const auto p = solve_heat(cosine(g64, 0.5, 0.2), 0.01, dt);
    const auto q = solve_driven_parabolic(p.final(), DriftField::constant(1, {1, 0, 0}), ssep, 0.01, dt);
    const auto W = glue_paths(p, q).integrated_current();
    return expect((W - (p.integrated_current() + q.integrated_current())).max_abs() <= 1e-14);
  });

  return c;
}

}  // namespace

std::vector<SelfTestResult> run_selftests() {
  std::vector<SelfTestResult> out;
  for (auto& [id, f] : checks()) {
    SelfTestResult r;
    r.module = id.first;
    r.name = id.second;
    try {
      const Outcome o = f();
      r.passed = o.ok;
      r.detail = o.detail;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace fluctlab
