#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fluctlab/field.hpp"
#include "fluctlab/grid.hpp"
#include "fluctlab/lattice.hpp"
#include "fluctlab/pde.hpp"

namespace fluctlab {

struct RateOptions {
  double chi_floor = 1e-10;
  Point E{0.0, 0.0, 0.0};  // constant external field in the hydrodynamic current
  // A path is in the continuity set when its residual is <= factor * M.
  double continuity_factor = 1e-8;
};

struct RateEvalReport {
  double value = 0.0;
  std::vector<VectorField> G;  // control field per time step
  std::size_t clamps = 0;
  double continuity_residual = 0.0;
  double continuity_tolerance = 0.0;
  double mass_drift = 0.0;

  bool validated() const { return clamps == 0; }
  /// (1/2) sum_k dt_k <chi(pi_k), |G_k|^2> recomputed from G.
  double recompute(const PathDiscretization& path, const TransportCoefficients& coeffs,
                   double chi_floor = 1e-10) const;
  /// Flat key=value lines.
  std::string to_text() const;
};

/// Hydrodynamic current -(1/2) D grad rho + chi(rho) E on faces.
VectorField hydrodynamic_current(const ScalarField& rho, const TransportCoefficients& coeffs,
                                 const Point& E = {0.0, 0.0, 0.0});

/// I(W, pi) = (1/2) sum_k dt_k <chi(pi_k), |G_k|^2>, G_k = (w_k - hydrodynamic(pi_k)) / chi(pi_k).
/// Throws InfeasiblePath when the continuity residual exceeds the tolerance.
RateEvalReport eval_I(const PathDiscretization& path, const TransportCoefficients& coeffs,
                      const RateOptions& opts = {});

/// <W_T, F_T> - int <W_t, d_t F_t> - (1/2) int <pi_t, div F_t> - (1/2) int <chi(pi_t), |F_t|^2>,
/// trapezoid in time.
double eval_JF(const PathDiscretization& path, const DriftField& F, const TransportCoefficients& coeffs);

struct DensityRateResult {
  double value = 0.0;
  std::vector<ScalarField> H;
  std::size_t clamps = 0;
  double max_elliptic_residual = 0.0;

  /// Gradient-form current w_k = -(1/2) grad pi_k - chi(pi_k) grad H_k.
  std::vector<VectorField> gradient_currents(const PathDiscretization& path,
                                             const TransportCoefficients& coeffs) const;
};

/// inf over currents compatible with the densities: per step solve
/// div(chi grad H_k) = (pi_{k+1} - pi_k)/dt_k - (1/2) Laplacian pi_k, then
/// (1/2) sum dt_k <chi |grad H_k|^2>. Only the densities of `path` are used.
DensityRateResult eval_density_rate(const PathDiscretization& path, const TransportCoefficients& coeffs,
                                    const EllipticOptions& opts = {});

/// (1/2) <(j - hydrodynamic(rho)), (j - hydrodynamic(rho)) / chi(rho)> on faces.
double static_integrand(const ScalarField& rho, const VectorField& j, const TransportCoefficients& coeffs,
                        double chi_floor = 1e-10, std::size_t* clamps = nullptr);

/// int rho log(rho/m) + (1-rho) log((1-rho)/(1-m)), with 0 log 0 = 0.
double entropy_Sm(const ScalarField& rho, double m);

}  // namespace fluctlab
