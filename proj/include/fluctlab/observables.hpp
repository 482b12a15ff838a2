#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fluctlab/dynamics.hpp"
#include "fluctlab/grid.hpp"
#include "fluctlab/lattice.hpp"

namespace fluctlab {

/// pi^N on the lattice cells (side N).
ScalarField empirical_density(const LatticeState& state);
/// pi^N averaged onto an M-grid; requires N % M == 0.
ScalarField coarse_density(const LatticeState& state, int M);

/// Integrated current as bond atoms. Atom (x, j) sits at x/N and carries
/// N^{-(d+1)} W^{x,x+e_j}.
struct EmpiricalCurrent {
  TorusGrid lattice;
  std::vector<double> net;  // bond = site * d + j

  double pair(const VectorFunction& F) const;
  /// Face fluxes on an M-grid: crossings of coarse faces, scaled so that
  /// the result pairs like the continuum current; N % M == 0.
  VectorField to_vector_field(int M) const;
};

EmpiricalCurrent empirical_current(const CurrentLedger& ledger, double t);

/// Average of eta over the periodic box |y - x|_inf <= ell.
double block_density(const LatticeState& state, std::size_t x, int ell);

/// V_{j,N,eps}: lattice average of |box average of eta(y) eta(y+e_j) - (eta^{l}(x))^2|
/// with l = floor(eps N). `j` is 0-based.
double two_block_observable(const LatticeState& state, int j, double eps);

/// Trigonometric vector fields e_c * cos(2 pi k.u) or e_c * sin(2 pi k.u),
/// ordered by |k|_1, then k lexicographically (first nonzero entry
/// positive), then component c, cosine before sine. Sup norm 1.
class TestFieldFamily {
 public:
  struct Member {
    std::array<int, 3> k{};
    int component = 0;
    bool sine = false;
  };

  TestFieldFamily(int dim, std::size_t count);
  static TestFieldFamily trigonometric(int dim, std::size_t count = 20) { return {dim, count}; }

  int dim() const { return dim_; }
  std::size_t size() const { return members_.size(); }
  const Member& member(std::size_t i) const { return members_[i]; }
  Point operator()(std::size_t i, const Point& u) const;
  VectorFunction field(std::size_t i) const;

 private:
  int dim_;
  std::vector<Member> members_;
};

inline double current_pairing(const VectorField& J, const VectorFunction& G) { return J.pair(G); }
inline double current_pairing(const EmpiricalCurrent& J, const VectorFunction& G) { return J.pair(G); }

/// rho_K(J1, J2) = sum_{k<=K} 2^{-k} min(1, |<J1 - J2, G_k>|).
template <class A, class B>
double current_metric(const A& J1, const B& J2, const TestFieldFamily& family, std::size_t K = 20) {
  if (K < 1) K = 1;
  K = std::min(K, family.size());
  double sum = 0.0;
  double weight = 0.5;
  for (std::size_t k = 0; k < K; ++k, weight *= 0.5) {
    const auto G = family.field(k);
    const double diff = current_pairing(J1, G) - current_pairing(J2, G);
    sum += weight * std::min(1.0, std::fabs(diff));
  }
  return sum;
}

/// Removes the gradient part of J: J - grad(phi) with div grad(phi) = div J,
/// solved spectrally with a zero-mean potential.
VectorField divergence_free_projection(const VectorField& J);

/// Fourier derivative along `axis`, evaluated at the cell centres.
ScalarField spectral_derivative(const ScalarField& f, int axis);

/// Solves the grid Poisson problem div grad(phi) = f (mean of f removed),
/// zero-mean phi.
ScalarField solve_poisson(const ScalarField& f);

}  // namespace fluctlab
