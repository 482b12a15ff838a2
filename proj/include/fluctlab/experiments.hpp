#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fluctlab/dynamics.hpp"
#include "fluctlab/field.hpp"
#include "fluctlab/grid.hpp"
#include "fluctlab/io.hpp"
#include "fluctlab/lattice.hpp"

namespace fluctlab {

/// Independent 64-bit seed for stream `stream` of a run seeded with `base` (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Exclusion state with exactly round(m N^d) particles at uniformly random sites.
LatticeState canonical_state(const TorusGrid& grid, double m, std::uint64_t seed);

/// Law-of-large-numbers comparison of exclusion dynamics (field zero: SSEP,
/// otherwise WASEP) against the macroscopic solver started from the same profile.
struct LlnOptions {
  int N = 1000;
  double T = 0.05;
  ProfileSpec profile{"cosine", 0.5, 0.25, 1};
  DriftField field = DriftField::zero(1);
  int replicas = 20;
  std::uint64_t seed = 1;
  std::size_t tests = 10;
  int pde_M = 200;
  bool parallel = true;
};

struct LlnRow {
  std::size_t test = 0;
  std::string label;
  double density_micro = 0.0;  // replica average of <pi^N_T, f>
  double density_pde = 0.0;
  double current_micro = 0.0;  // replica average of <W^N_T, G>
  double current_pde = 0.0;
  double density_error() const;
  double current_error() const;
};

struct LlnReport {
  std::vector<LlnRow> rows;
  double max_density_error = 0.0;
  double max_current_error = 0.0;
  double max_conservation_defect = 0.0;
};

LlnReport run_lln(const LlnOptions& opts);

/// Importance-sampling estimate of the current rate: WASEP with constant field
/// E, averaged N^{-d} log dP_E/dP over tilted trajectories, divided by T.
struct IsOptions {
  int d = 1;
  int N = 16;
  double T = 5.0;
  Point E{1.0, 0.0, 0.0};
  double m = 0.5;
  int replicas = 500;
  std::uint64_t seed = 1;
  bool parallel = true;
};

struct IsReplica {
  double log_rn = 0.0;   // N^{-d} log dP_E/dP
  double current = 0.0;  // N^{-(d+1)} sum_x W^{x,x+e_0} / T
};

struct IsReport {
  std::vector<IsReplica> replicas;
  double mean_current = 0.0;
  double rate_estimate = 0.0;  // mean(log_rn) / T
  double rate_stderr = 0.0;
  double U = 0.0;  // U_m at the realized mean current (J e_0)
  double relative_difference = 0.0;
};

IsReport run_is_estimate(const IsOptions& opts);

}  // namespace fluctlab
