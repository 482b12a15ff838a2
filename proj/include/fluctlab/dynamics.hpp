#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fluctlab/field.hpp"
#include "fluctlab/grid.hpp"
#include "fluctlab/lattice.hpp"

namespace fluctlab {

/// One jump across bond (site, site + e_direction). For exclusion `amount`
/// is +1 (moved along +e_j) or -1; for KMP it is the signed energy transfer.
struct JumpEvent {
  double time = 0.0;
  std::uint32_t site = 0;
  std::uint8_t direction = 0;
  double amount = 0.0;
};

/// Per-bond current bookkeeping. Bond b = site * d + j.
struct CurrentLedger {
  TorusGrid grid;
  StateKind kind = StateKind::exclusion;
  double horizon = 0.0;
  std::vector<double> net;       // W^{x,x+e_j}
  std::vector<double> forward;   // J^{x,x+e_j}
  std::vector<double> backward;  // J^{x+e_j,x}
  bool has_log = false;
  std::vector<JumpEvent> events;
  LatticeState initial;

  std::size_t bond(std::size_t site, int j) const { return site * static_cast<std::size_t>(grid.dim()) + j; }

  /// max |W - (J+ - J-)| over bonds.
  double gross_net_mismatch() const;
  /// max over sites of |sum_j (W^{x-e_j,x} - W^{x,x+e_j}) - (eta_t(x) - eta_0(x))|.
  double conservation_defect(const LatticeState& final_state) const;
  /// Rebuilds the state at time t by replaying the event log.
  LatticeState state_at(double t) const;
};

struct SimulationOptions {
  bool record_events = false;
  // Full rebuild of the sampling tree every this many events.
  std::size_t rebuild_interval = 1u << 20;
};

struct Trajectory {
  LatticeState final_state;
  CurrentLedger ledger;
};

/// Exact continuous-time exclusion dynamics with rates (N^2/2) exp(+-F_j(t,x/N)/N)
/// in macroscopic time.
Trajectory simulate_exclusion(const LatticeState& initial, double T, const DriftField& field,
                              std::uint64_t seed, const SimulationOptions& opts = {});

/// KMP chain, d = 1: each bond rings at rate N^2 and redistributes the pair
/// energy uniformly.
Trajectory simulate_kmp(const LatticeState& initial, double T, std::uint64_t seed,
                        const SimulationOptions& opts = {});

/// Terms of N^{-d} log dP_F/dP. total = stochastic - forward_rate - backward_rate.
struct RnTerms {
  double stochastic = 0.0;     // N^{-d} sum_events sign * F_j(t, x/N) / N
  double forward_rate = 0.0;   // N^{-d} int sum_b (N^2/2) 1{x->x+e_j allowed} (e^{F/N} - 1)
  double backward_rate = 0.0;  // same with the reverse jump and e^{-F/N}
  double total = 0.0;
};

/// Exact exponential-martingale form, computed by replaying the event log.
RnTerms log_rn_terms(const CurrentLedger& ledger, const DriftField& field, double T);
double log_rn_derivative(const CurrentLedger& ledger, const DriftField& field, double T);

}  // namespace fluctlab
