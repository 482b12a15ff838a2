#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fluctlab/grid.hpp"

namespace fluctlab {

enum class Model { ssep, kmp, custom };

Model parse_model(const std::string& name);
std::string model_name(Model m);

/// Mobility chi, diffusion D and derivatives, plus the admissible density
/// interval [lo, hi]. hi may be +inf.
struct TransportCoefficients {
  Model model = Model::custom;
  std::function<double(double)> chi;
  std::function<double(double)> D;
  // Empty means "use central finite differences".
  std::function<double(double)> chi_d1;
  std::function<double(double)> chi_d2;
  double lo = 0.0;
  double hi = 1.0;

  double mobility(double r) const { return chi(r); }
  double diffusion(double r) const { return D(r); }
  double dchi(double r) const;
  double d2chi(double r) const;

  bool bounded_above() const { return hi < std::numeric_limits<double>::infinity(); }
  bool interior(double r) const { return r > lo && r < hi; }
  /// True when rho -> 1/chi(rho) is convex on a probe grid of the open interval.
  bool inverse_mobility_convex() const;
  /// Antiderivative of D with d(0) = 0 (closed form for the built-in models).
  double d_potential(double r) const;
};

TransportCoefficients coefficients_for(Model model);
/// Custom coefficients; rejects chi < 0 anywhere on a probe grid of [lo, hi].
TransportCoefficients coefficients_custom(std::function<double(double)> chi,
                                          std::function<double(double)> D, double lo, double hi);

enum class StateKind { exclusion, energy };

/// Occupations (0/1) or energies (>= 0) per site, with the conserved total.
struct LatticeState {
  TorusGrid grid;
  StateKind kind = StateKind::exclusion;
  std::vector<double> values;
  double conserved = 0.0;

  LatticeState() = default;
  LatticeState(const TorusGrid& g, StateKind k) : grid(g), kind(k), values(g.size(), 0.0) {}

  double total() const;
  /// Recomputes `conserved` from the values.
  void refresh_total() { conserved = total(); }
  /// Throws InvalidArgument when a value leaves {0,1} or [0, inf).
  void validate() const;
};

/// Product state with site marginal profile(x/N): Bernoulli for exclusion,
/// exponential with that mean for energy. Deterministic in `seed`.
LatticeState random_state(const TorusGrid& grid, StateKind kind, const ScalarFunction& profile,
                          std::uint64_t seed);
LatticeState random_state(const TorusGrid& grid, StateKind kind, double m, std::uint64_t seed);

}  // namespace fluctlab
