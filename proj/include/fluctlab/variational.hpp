#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fluctlab/grid.hpp"
#include "fluctlab/lattice.hpp"
#include "fluctlab/pde.hpp"

namespace fluctlab {

struct ProfileOptions {
  int resolution = 128;  // M, for the 1d scalar entry points
  int max_iterations = 20000;
  double tolerance = 1e-9;  // sup-norm of the projected L2 gradient step
  double margin = 1e-6;     // box shrink inside the admissible interval
  double chi_floor = 1e-10;
  std::vector<double> amplitudes{0.05, 0.1, 0.2};
  std::vector<int> frequencies{1, 2};
  int cosine_starts = 8;
  std::uint64_t seed = 12345;
  std::vector<ScalarField> warm_starts;
  bool parallel = true;
};

struct ProfileOptimizationResult {
  ScalarField rho;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  int start_index = 0;
  std::size_t clamps = 0;
};

/// Euclidean projection onto {mean = m, lo <= x <= hi}.
void project_mass_box(std::vector<double>& x, double m, double lo, double hi);

/// U_m(j) = inf over mass-m profiles of static_integrand(rho, j).
/// Returns value +inf when j is not divergence free.
ProfileOptimizationResult minimize_Um(const VectorField& j, double m, const TransportCoefficients& coeffs,
                                      const ProfileOptions& opts = {});

/// j^2 / (2 chi(m)); refuses (InvalidArgument) when 1/chi is not convex.
double closed_form_Um_1d(double j, double m, const TransportCoefficients& coeffs);

/// Discrete Psi_v objective on a 1d profile. The v-term uses the upwind cell
/// so that the one-cell-per-step traveling wave has exactly this cost per unit time.
double psi_objective(const ScalarField& rho, double J, double v, double m, const TransportCoefficients& coeffs,
                     double chi_floor = 1e-10, std::vector<double>* grad = nullptr, std::size_t* clamps = nullptr);

ProfileOptimizationResult eval_Psi_v(double J, double v, double m, const TransportCoefficients& coeffs,
                                     const ProfileOptions& opts = {});

struct CriterionResult {
  double lambda = 0.0;
  double Fpp = 0.0;
  bool transition_possible = false;
};

/// F(r) = (1 + lambda (r - m))^2 / chi(r).
double criterion_F(double r, double lambda, double m, const TransportCoefficients& coeffs);
/// Closed form of F''(m) for a given lambda.
double criterion_Fpp(double lambda, double m, const TransportCoefficients& coeffs);
CriterionResult second_derivative_criterion(double m, const TransportCoefficients& coeffs);

/// Cross term of the expanded square, 2 J int (1 + lambda(rho - m)) (1/2) d(rho)' / chi(rho),
/// with a spectral derivative of d(rho). Vanishes for periodic rho.
double psi_cross_term(const ScalarField& rho, double J, double lambda, double m,
                      const TransportCoefficients& coeffs);

struct ScanOptions {
  ProfileOptions profile;
  double golden_tolerance = 1e-4;  // on v, relative to the bracket
  double gap_threshold = 0.01;     // relative gap defining J*
  double bisection_resolution = 0.05;
};

struct ScanRow {
  double J = 0.0;
  double U = 0.0;
  double psi_min = 0.0;
  double v_star = 0.0;
  double gap = 0.0;
  std::size_t clamps = 0;
  ScalarField witness;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  bool transition_found = false;
  // Smallest J (to `resolution`) whose relative gap exceeds the threshold.
  double J_star = 0.0;
  double resolution = 0.0;
};

/// U(J) and min over v of Psi_v(J) on a J grid.
ScanRow scan_point(double J, double m, const TransportCoefficients& coeffs, const ScanOptions& opts);
ScanResult phase_transition_scan(double m, const std::vector<double>& J_grid, const TransportCoefficients& coeffs,
                                 const ScanOptions& opts = {});

struct PathOptions {
  int max_iterations = 2000;
  double gradient_tolerance = 1e-12;
  double function_tolerance = 1e-14;
  double chi_floor = 1e-10;
};

struct PathOptimizationResult {
  PathDiscretization path;
  double value = 0.0;  // I / T
  int iterations = 0;
  bool converged = false;
  double endpoint_error = 0.0;  // sup |W_T - T J|
  std::string message;
};

/// Discrete cost (1/2) sum dt_k <(w_k - hydrodynamic(pi_k))^2 / chi(pi_k)> and its
/// gradient with respect to all K increments (adjoint sweep over the continuity map).
double path_cost(const ScalarField& gamma, const TimeGrid& time, const std::vector<VectorField>& w,
                 const TransportCoefficients& coeffs, double chi_floor, std::vector<VectorField>* grad);

/// Phi_T(J | gamma) by L-BFGS over w_0..w_{K-2}; w_{K-1} closes sum dt w = T J.
PathOptimizationResult optimize_PhiT(const VectorField& J, const ScalarField& gamma, double T, std::size_t K,
                                     const TransportCoefficients& coeffs, const PathOptions& opts = {});

struct RelaxationResult {
  PathDiscretization path;
  double relaxation_time = 0.0;
  double cost = 0.0;
  double bound = 0.0;  // S_m(gamma2) + delta
};

/// Heat flow from gamma1, linear bridge with gradient-form current, time-reversed
/// heat flow into gamma2. Doubles the relaxation time until the cost bound holds.
RelaxationResult build_relaxation_path(const ScalarField& gamma1, const ScalarField& gamma2, double m, double delta,
                                       const TransportCoefficients& coeffs);

/// Ramp gamma -> rho over [0,1) with w = w_hat (div w_hat = gamma - rho), current
/// T/(T-2) j on [1, T-1], ramp back with -w_hat.
PathDiscretization build_straight_path(const ScalarField& gamma, const ScalarField& rho, const VectorField& j,
                                       double T, int steps_per_unit = 32);

/// rho0 moved by one cell per step at speed v for one period T = 1/|v|, with the
/// upwind current J + v (rho_up - m).
PathDiscretization traveling_wave_path(const ScalarField& rho0, double v, double J);

/// Concatenation; requires final(p1) == initial(p2) to 1e-8.
PathDiscretization glue_paths(const PathDiscretization& p1, const PathDiscretization& p2);

}  // namespace fluctlab
