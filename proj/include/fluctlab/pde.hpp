#pragma once

#include <cstddef>
#include <vector>

#include "fluctlab/field.hpp"
#include "fluctlab/grid.hpp"
#include "fluctlab/lattice.hpp"

namespace fluctlab {

/// Sample times t_0 = 0 < t_1 < ... < t_K. Steps need not be uniform
/// (glued paths mix step sizes).
struct TimeGrid {
  std::vector<double> steps;

  static TimeGrid uniform(double T, std::size_t K);
  /// K = ceil(T / dt) uniform steps of size T / K (<= dt).
  static TimeGrid with_max_step(double T, double dt);

  std::size_t size() const { return steps.size(); }
  double step(std::size_t k) const { return steps[k]; }
  double horizon() const;
  /// t_k, k = 0..K.
  std::vector<double> times() const;
};

/// Densities pi_0..pi_K and increment currents w_0..w_{K-1}, with w_k the
/// instantaneous current on [t_k, t_{k+1}).
struct PathDiscretization {
  TimeGrid time;
  std::vector<ScalarField> densities;
  std::vector<VectorField> currents;
  // Number of density values found outside the admissible interval.
  std::size_t range_violations = 0;

  const ScalarField& initial() const { return densities.front(); }
  const ScalarField& final() const { return densities.back(); }
  const TorusGrid& grid() const { return densities.front().grid; }
  std::size_t steps() const { return currents.size(); }
  double horizon() const { return time.horizon(); }

  /// W at time t_k: sum_{l<k} dt_l w_l.
  VectorField integrated_current(std::size_t k) const;
  VectorField integrated_current() const { return integrated_current(steps()); }
  /// max_k sup |(pi_{k+1} - pi_k)/dt_k + div w_k|.
  double continuity_residual() const;
  /// max_k |mass(pi_k) - mass(pi_0)|.
  double mass_drift() const;
};

/// Largest stable explicit step 0.5 h^2 / d.
double cfl_limit(const TorusGrid& g);

/// Explicit Euler for d_t rho = (1/2) Laplacian rho, with w_k = -(1/2) grad pi_k.
PathDiscretization solve_heat(const ScalarField& gamma, double T, double dt);

/// d_t rho = (1/2) div(D grad rho) - div(chi(rho) F), with
/// w_k = -(1/2) D grad pi_k + chi(pi_k) F(t_k) on faces.
PathDiscretization solve_driven_parabolic(const ScalarField& gamma, const DriftField& F,
                                          const TransportCoefficients& coeffs, double T, double dt);

/// pi_{k+1} = pi_k - dt_k div w_k. Out-of-range densities are counted, not clamped.
PathDiscretization solve_continuity(const ScalarField& gamma, const TimeGrid& time,
                                    std::vector<VectorField> currents,
                                    const TransportCoefficients* coeffs = nullptr);

struct EllipticOptions {
  double chi_floor = 1e-10;
  bool allow_clamp = true;
  double solvability_tolerance = 1e-9;
  double tolerance = 1e-13;  // relative CG tolerance
  int max_iterations = 0;    // 0: 10 * unknowns
};

struct EllipticResult {
  ScalarField H;
  double residual = 0.0;  // sup |div(chi grad H) - rhs|
  int iterations = 0;
  std::size_t clamps = 0;
};

/// Face mobility chi((pi_i + pi_{i+e_j})/2), floored at `floor`. Adds the
/// number of floored faces to *clamps.
VectorField face_mobility(const ScalarField& pi, const TransportCoefficients& coeffs, double floor,
                          std::size_t* clamps);
/// Face diffusion D((pi_i + pi_{i+e_j})/2).
VectorField face_diffusion(const ScalarField& pi, const TransportCoefficients& coeffs);

/// Solves div(chi(pi) grad H) = rhs with mean(H) = 0.
EllipticResult solve_elliptic_chi(const ScalarField& pi, const ScalarField& rhs,
                                  const TransportCoefficients& coeffs, const EllipticOptions& opts = {});

}  // namespace fluctlab
