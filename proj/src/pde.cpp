#include "fluctlab/pde.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <string>

#include "fluctlab/error.hpp"
#include "fluctlab/kernels.hpp"

namespace fluctlab {

TimeGrid TimeGrid::uniform(double T, std::size_t K) {
  require(T > 0 && K >= 1, "TimeGrid: need T > 0 and K >= 1");
  TimeGrid g;
  g.steps.assign(K, T / static_cast<double>(K));
  return g;
}

TimeGrid TimeGrid::with_max_step(double T, double dt) {
  require(T > 0 && dt > 0, "TimeGrid: need T > 0 and dt > 0");
  const auto K = static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
  return uniform(T, std::max<std::size_t>(K, 1));
}

double TimeGrid::horizon() const {
  double s = 0.0;
  for (double h : steps) s += h;
  return s;
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> t(steps.size() + 1, 0.0);
  for (std::size_t k = 0; k < steps.size(); ++k) t[k + 1] = t[k] + steps[k];
  return t;
}

VectorField PathDiscretization::integrated_current(std::size_t k) const {
  require(k <= steps(), "integrated_current: step out of range");
  VectorField W(grid());
  for (std::size_t l = 0; l < k; ++l)
    for (int j = 0; j < W.dim(); ++j)
      for (std::size_t i = 0; i < W.grid.size(); ++i) W[j][i] += time.step(l) * currents[l][j][i];
  return W;
}

double PathDiscretization::continuity_residual() const {
  double r = 0.0;
  for (std::size_t k = 0; k < steps(); ++k) {
    const ScalarField dv = divergence(currents[k]);
    const double inv = 1.0 / time.step(k);
    for (std::size_t i = 0; i < dv.size(); ++i)
      r = std::max(r, std::fabs((densities[k + 1][i] - densities[k][i]) * inv + dv[i]));
  }
  return r;
}

double PathDiscretization::mass_drift() const {
  const double m0 = densities.front().mass();
  double r = 0.0;
  for (const auto& p : densities) r = std::max(r, std::fabs(p.mass() - m0));
  return r;
}

double cfl_limit(const TorusGrid& g) {
  const double h = g.spacing();
  return 0.5 * h * h / g.dim();
}

VectorField face_mobility(const ScalarField& pi, const TransportCoefficients& coeffs, double floor,
                          std::size_t* clamps) {
  const TorusGrid& g = pi.grid;
  VectorField out(g);
  std::size_t n = 0;
  for (int j = 0; j < g.dim(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double c = coeffs.chi(0.5 * (pi[i] + pi[g.neighbor(i, j)]));
      if (!(c >= floor)) {
        out[j][i] = floor;
        ++n;
      } else {
        out[j][i] = c;
      }
    }
  if (clamps) *clamps += n;
  return out;
}

VectorField face_diffusion(const ScalarField& pi, const TransportCoefficients& coeffs) {
  const TorusGrid& g = pi.grid;
  VectorField out(g);
  for (int j = 0; j < g.dim(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i) out[j][i] = coeffs.D(0.5 * (pi[i] + pi[g.neighbor(i, j)]));
  return out;
}

namespace {

bool all_finite(const ScalarField& f) {
  return std::all_of(f.values.begin(), f.values.end(), [](double v) { return std::isfinite(v); });
}

// Shared explicit Euler stepper; coeffs == nullptr means the plain heat equation.
PathDiscretization evolve(const ScalarField& gamma, const DriftField* F, const TransportCoefficients* coeffs,
                          double T, double dt) {
  const TorusGrid& g = gamma.grid;
  require(T > 0 && dt > 0, "parabolic solve: need T > 0 and dt > 0");
  const double cfl = cfl_limit(g);
  if (dt > cfl * (1.0 + 1e-12))
    throw NumericalError("unstable explicit step: dt = " + std::to_string(dt) +
                         " exceeds 0.5 h^2 / d = " + std::to_string(cfl));
  const bool driven = F != nullptr && !F->is_zero();
  if (driven) require(F->dim == g.dim(), "field dimension does not match the grid");

  PathDiscretization path;
  path.time = TimeGrid::with_max_step(T, dt);
  const std::size_t K = path.time.size();
  const auto times = path.time.times();
  path.densities.reserve(K + 1);
  path.currents.reserve(K);
  path.densities.push_back(gamma);
  for (std::size_t k = 0; k < K; ++k) {
    const ScalarField& pi = path.densities.back();
    VectorField w = gradient(pi);
    if (coeffs == nullptr) {
      for (int j = 0; j < g.dim(); ++j)
        for (double& v : w[j]) v = -0.5 * v;
    } else {
      for (int j = 0; j < g.dim(); ++j)
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double r = 0.5 * (pi[i] + pi[g.neighbor(i, j)]);
          if (r < coeffs->lo || r > coeffs->hi)
            throw NumericalError("density left the admissible interval during the parabolic solve");
          w[j][i] = -0.5 * coeffs->D(r) * w[j][i];
        }
      if (driven) {
        const VectorField Fk = sample_field(*F, g, times[k]);
        for (int j = 0; j < g.dim(); ++j)
          for (std::size_t i = 0; i < g.size(); ++i)
            w[j][i] += coeffs->chi(0.5 * (pi[i] + pi[g.neighbor(i, j)])) * Fk[j][i];
      }
    }
    const ScalarField dv = divergence(w);
    ScalarField next(g);
    const double h = path.time.step(k);
    for (std::size_t i = 0; i < g.size(); ++i) next[i] = pi[i] - h * dv[i];
    if (!all_finite(next)) throw NumericalError("parabolic solve produced non-finite values");
    path.currents.push_back(std::move(w));
    path.densities.push_back(std::move(next));
  }
  return path;
}

}  // namespace

PathDiscretization solve_heat(const ScalarField& gamma, double T, double dt) {
  return evolve(gamma, nullptr, nullptr, T, dt);
}

PathDiscretization solve_driven_parabolic(const ScalarField& gamma, const DriftField& F,
                                          const TransportCoefficients& coeffs, double T, double dt) {
  return evolve(gamma, &F, &coeffs, T, dt);
}

PathDiscretization solve_continuity(const ScalarField& gamma, const TimeGrid& time, std::vector<VectorField> currents,
                                    const TransportCoefficients* coeffs) {
  require(currents.size() == time.size(), "solve_continuity: one current per time step required");
  for (const auto& w : currents) require_same_grid(w.grid, gamma.grid, "solve_continuity");
  PathDiscretization path;
  path.time = time;
  path.densities.reserve(time.size() + 1);
  path.densities.push_back(gamma);
  for (std::size_t k = 0; k < time.size(); ++k) {
    const ScalarField dv = divergence(currents[k]);
    ScalarField next(gamma.grid);
    const ScalarField& pi = path.densities.back();
    for (std::size_t i = 0; i < pi.size(); ++i) next[i] = pi[i] - time.step(k) * dv[i];
    path.densities.push_back(std::move(next));
  }
  path.currents = std::move(currents);
  if (coeffs)
    for (const auto& p : path.densities)
      for (double v : p.values)
        if (v < coeffs->lo || v > coeffs->hi) ++path.range_violations;
  return path;
}

EllipticResult solve_elliptic_chi(const ScalarField& pi, const ScalarField& rhs, const TransportCoefficients& coeffs,
                                  const EllipticOptions& opts) {
  require_same_grid(pi.grid, rhs.grid, "solve_elliptic_chi");
  const TorusGrid& g = pi.grid;
  const double mean = rhs.mass();
  if (std::fabs(mean) > opts.solvability_tolerance)
    throw InvalidArgument("solve_elliptic_chi: right-hand side has nonzero mean " + std::to_string(mean));

  EllipticResult res;
  res.H = ScalarField(g);
  if (rhs.max_abs() == 0.0) return res;

  std::size_t clamps = 0;
  const VectorField chi = face_mobility(pi, coeffs, opts.chi_floor, &clamps);
  if (clamps > 0 && !opts.allow_clamp)
    throw NumericalError("solve_elliptic_chi: mobility below the floor with clamping disabled");
  res.clamps = clamps;

  // A = -div(chi grad), symmetric positive semidefinite with constants in the kernel.
  const std::size_t n = g.size();
  const double M2 = static_cast<double>(g.side()) * g.side();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * (2 * g.dim() + 1));
  for (std::size_t i = 0; i < n; ++i) {
    double diag = 0.0;
    for (int j = 0; j < g.dim(); ++j) {
      const std::size_t up = g.neighbor(i, j), dn = g.neighbor(i, j, -1);
      const double cu = chi[j][i] * M2, cd = chi[j][dn] * M2;
      trip.emplace_back(i, up, -cu);
      trip.emplace_back(i, dn, -cd);
      diag += cu + cd;
    }
    trip.emplace_back(i, i, diag);
  }
  Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) b[i] = -(rhs[i] - mean);

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(opts.tolerance);
  cg.setMaxIterations(opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(10 * n + 100));
  cg.compute(A);
  Eigen::VectorXd x = cg.solve(b);
  res.iterations = static_cast<int>(cg.iterations());
  const double xm = x.mean();
  for (std::size_t i = 0; i < n; ++i) res.H[i] = x[i] - xm;

  std::array<const double*, 3> cp{nullptr, nullptr, nullptr};
  for (int j = 0; j < g.dim(); ++j) cp[j] = chi[j].data();
  std::vector<double> lap(n);
  kernels::omp::weighted_laplacian(g, cp.data(), res.H.values.data(), lap.data());
  for (std::size_t i = 0; i < n; ++i) res.residual = std::max(res.residual, std::fabs(lap[i] - rhs[i]));
  if (!std::isfinite(res.residual)) throw NumericalError("solve_elliptic_chi: solver diverged");
  return res;
}

}  // namespace fluctlab
