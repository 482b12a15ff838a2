#include "fluctlab/experiments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fluctlab/error.hpp"
#include "fluctlab/kernels.hpp"
#include "fluctlab/observables.hpp"
#include "fluctlab/pde.hpp"
#include "fluctlab/variational.hpp"

namespace fluctlab {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(base ^ mix(stream + 1));
}

LatticeState canonical_state(const TorusGrid& grid, double m, std::uint64_t seed) {
  require(m >= 0.0 && m <= 1.0, "canonical_state: m must lie in [0,1]");
  LatticeState s(grid, StateKind::exclusion);
  const auto count = static_cast<std::size_t>(std::lround(m * static_cast<double>(grid.size())));
  std::vector<std::size_t> sites(grid.size());
  std::iota(sites.begin(), sites.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(sites.begin(), sites.end(), rng);
  for (std::size_t i = 0; i < count; ++i) s.values[sites[i]] = 1.0;
  s.refresh_total();
  return s;
}

double LlnRow::density_error() const { return std::fabs(density_micro - density_pde); }
double LlnRow::current_error() const { return std::fabs(current_micro - current_pde); }

LlnReport run_lln(const LlnOptions& opts) {
  const int d = opts.field.dim;
  require(opts.replicas >= 1, "run_lln: need at least one replica");
  require(opts.N >= 2, "run_lln: N must be at least 2");
  const TorusGrid lattice(d, opts.N);
  const TestFieldFamily family(d, opts.tests);
  const ScalarFunction profile = opts.profile.function();

  struct Sample {
    std::vector<double> density, current;
    double defect = 0.0;
  };
  auto replica = [&](std::size_t r) {
    const LatticeState init =
        random_state(lattice, StateKind::exclusion, profile, derive_seed(opts.seed, 2 * r));
    const Trajectory tr = simulate_exclusion(init, opts.T, opts.field, derive_seed(opts.seed, 2 * r + 1));
    Sample s;
    s.defect = std::max(tr.ledger.conservation_defect(tr.final_state),
                        std::fabs(tr.final_state.total() - init.total()));
    const EmpiricalCurrent W = empirical_current(tr.ledger, opts.T);
    for (std::size_t k = 0; k < family.size(); ++k) {
      const int c = family.member(k).component;
      double dens = 0.0;
      for (std::size_t x = 0; x < lattice.size(); ++x)
        if (tr.final_state.values[x] != 0.0) dens += tr.final_state.values[x] * family(k, lattice.corner(x))[c];
      s.density.push_back(dens * lattice.cell_volume());
      s.current.push_back(W.pair(family.field(k)));
    }
    return s;
  };
  const auto samples = opts.parallel ? kernels::map_replicas_omp(opts.replicas, replica)
                                     : kernels::map_replicas_serial(opts.replicas, replica);

  // Macroscopic reference.
  const TorusGrid grid(d, opts.pde_M);
  const ScalarField gamma = ScalarField::sample(grid, profile);
  const double dt = 0.5 * cfl_limit(grid);
  const PathDiscretization path =
      opts.field.is_zero() ? solve_heat(gamma, opts.T, dt)
                           : solve_driven_parabolic(gamma, opts.field, coefficients_for(Model::ssep), opts.T, dt);
  const VectorField WT = path.integrated_current();

  LlnReport rep;
  for (const auto& s : samples) rep.max_conservation_defect = std::max(rep.max_conservation_defect, s.defect);
  for (std::size_t k = 0; k < family.size(); ++k) {
    LlnRow row;
    row.test = k;
    const auto& mem = family.member(k);
    row.label = fmt::format("{}({} {} {})e{}", mem.sine ? "sin" : "cos", mem.k[0], mem.k[1], mem.k[2], mem.component);
    for (const auto& s : samples) {
      row.density_micro += s.density[k];
      row.current_micro += s.current[k];
    }
    row.density_micro /= static_cast<double>(samples.size());
    row.current_micro /= static_cast<double>(samples.size());
    const int c = mem.component;
    row.density_pde = path.final().pair([&](const Point& u) { return family(k, u)[c]; });
    row.current_pde = WT.pair(family.field(k));
    rep.max_density_error = std::max(rep.max_density_error, row.density_error());
    rep.max_current_error = std::max(rep.max_current_error, row.current_error());
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

IsReport run_is_estimate(const IsOptions& opts) {
  require(opts.replicas >= 2, "run_is_estimate: need at least two replicas");
  require(opts.T > 0, "run_is_estimate: T must be positive");
  const TorusGrid lattice(opts.d, opts.N);
  const DriftField E = DriftField::constant(opts.d, opts.E);
  const double scale = std::pow(static_cast<double>(opts.N), -(opts.d + 1));
  SimulationOptions so;
  so.record_events = true;

  auto replica = [&](std::size_t r) {
    const LatticeState init = canonical_state(lattice, opts.m, derive_seed(opts.seed, 2 * r));
    const Trajectory tr = simulate_exclusion(init, opts.T, E, derive_seed(opts.seed, 2 * r + 1), so);
    IsReplica out;
    out.log_rn = log_rn_derivative(tr.ledger, E, opts.T);
    double w = 0.0;
    for (std::size_t x = 0; x < lattice.size(); ++x) w += tr.ledger.net[tr.ledger.bond(x, 0)];
    out.current = w * scale / opts.T;
    return out;
  };
  IsReport rep;
  rep.replicas = opts.parallel ? kernels::map_replicas_omp(opts.replicas, replica)
                               : kernels::map_replicas_serial(opts.replicas, replica);
  const double n = static_cast<double>(rep.replicas.size());
  double sum = 0.0, sum2 = 0.0, cur = 0.0;
  for (const auto& r : rep.replicas) {
    sum += r.log_rn;
    sum2 += r.log_rn * r.log_rn;
    cur += r.current;
  }
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0));
  rep.mean_current = cur / n;
  rep.rate_estimate = mean / opts.T;
  rep.rate_stderr = std::sqrt(var / n) / opts.T;
  // Realized mass of the canonical state.
  const double m = std::lround(opts.m * static_cast<double>(lattice.size())) / static_cast<double>(lattice.size());
  rep.U = closed_form_Um_1d(rep.mean_current, m, coefficients_for(Model::ssep));
  rep.relative_difference = std::fabs(rep.rate_estimate - rep.U) / rep.U;
  return rep;
}

}  // namespace fluctlab
