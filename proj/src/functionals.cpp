#include "fluctlab/functionals.hpp"

#include <fmt/format.h>

#include <cmath>

#include "fluctlab/error.hpp"
#include "fluctlab/kernels.hpp"

namespace fluctlab {

VectorField hydrodynamic_current(const ScalarField& rho, const TransportCoefficients& coeffs, const Point& E) {
  const TorusGrid& g = rho.grid;
  VectorField w = gradient(rho);
  const bool field = E[0] != 0.0 || E[1] != 0.0 || E[2] != 0.0;
  for (int j = 0; j < g.dim(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double r = 0.5 * (rho[i] + rho[g.neighbor(i, j)]);
      w[j][i] = -0.5 * coeffs.D(r) * w[j][i];
      if (field) w[j][i] += coeffs.chi(r) * E[j];
    }
  return w;
}

namespace {

// (1/2) h^d sum chi |G|^2 for one slice; fills G.
double slice_cost(const ScalarField& pi, const VectorField& w, const TransportCoefficients& coeffs,
                  const Point& E, double floor, VectorField* G, std::size_t* clamps) {
  const VectorField hyd = hydrodynamic_current(pi, coeffs, E);
  const VectorField chi = face_mobility(pi, coeffs, floor, clamps);
  const TorusGrid& g = pi.grid;
  double s = 0.0;
  if (G) *G = VectorField(g);
  for (int j = 0; j < g.dim(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = (w[j][i] - hyd[j][i]) / chi[j][i];
      if (G) (*G)[j][i] = gi;
      s += chi[j][i] * gi * gi;
    }
  return 0.5 * s * g.cell_volume();
}

}  // namespace

RateEvalReport eval_I(const PathDiscretization& path, const TransportCoefficients& coeffs, const RateOptions& opts) {
  require(path.densities.size() == path.steps() + 1 && path.steps() == path.time.size(),
          "eval_I: malformed path");
  RateEvalReport rep;
  rep.continuity_residual = path.continuity_residual();
  rep.continuity_tolerance = opts.continuity_factor * path.grid().side();
  rep.mass_drift = path.mass_drift();
  if (!(rep.continuity_residual <= rep.continuity_tolerance))
    throw InfeasiblePath(fmt::format("path violates the continuity equation: residual {:.3e} > tolerance {:.3e}",
                                     rep.continuity_residual, rep.continuity_tolerance),
                         rep.continuity_residual);
  rep.G.resize(path.steps());
  for (std::size_t k = 0; k < path.steps(); ++k)
    rep.value += path.time.step(k) * slice_cost(path.densities[k], path.currents[k], coeffs, opts.E,
                                                opts.chi_floor, &rep.G[k], &rep.clamps);
  return rep;
}

double RateEvalReport::recompute(const PathDiscretization& path, const TransportCoefficients& coeffs,
                                 double chi_floor) const {
  double v = 0.0;
  for (std::size_t k = 0; k < G.size(); ++k) {
    const VectorField chi = face_mobility(path.densities[k], coeffs, chi_floor, nullptr);
    double s = 0.0;
    for (int j = 0; j < chi.dim(); ++j)
      for (std::size_t i = 0; i < chi.grid.size(); ++i) s += chi[j][i] * G[k][j][i] * G[k][j][i];
    v += path.time.step(k) * 0.5 * s * chi.grid.cell_volume();
  }
  return v;
}

std::string RateEvalReport::to_text() const {
  std::string s;
  s += fmt::format("value={:.17g}\n", value);
  s += fmt::format("clamps={}\n", clamps);
  s += fmt::format("validated={}\n", validated() ? "true" : "false");
  s += fmt::format("continuity_residual={:.17g}\n", continuity_residual);
  s += fmt::format("continuity_tolerance={:.17g}\n", continuity_tolerance);
  s += fmt::format("mass_drift={:.17g}\n", mass_drift);
  s += fmt::format("steps={}\n", G.size());
  return s;
}

double eval_JF(const PathDiscretization& path, const DriftField& F, const TransportCoefficients& coeffs) {
  if (F.is_zero()) return 0.0;
  const TorusGrid& g = path.grid();
  require(F.dim == g.dim(), "eval_JF: field dimension does not match the path");
  const auto times = path.time.times();
  const std::size_t K = path.steps();
  const double T = times.back();

  std::vector<double> dW(K + 1, 0.0), divterm(K + 1, 0.0), chiterm(K + 1, 0.0);
  VectorField W(g);
  VectorField FT;
  for (std::size_t k = 0; k <= K; ++k) {
    if (k > 0)
      for (int j = 0; j < g.dim(); ++j)
        for (std::size_t i = 0; i < g.size(); ++i) W[j][i] += path.time.step(k - 1) * path.currents[k - 1][j][i];
    const VectorField Fk = sample_field(F, g, times[k]);
    if (F.time_dependent) {
      const double h = 1e-6 * std::max(1.0, T);
      const VectorField dF = (0.5 / h) * (sample_field(F, g, times[k] + h) - sample_field(F, g, times[k] - h));
      dW[k] = inner(W, dF);
    }
    divterm[k] = inner(path.densities[k], divergence(Fk));
    const VectorField chi = face_mobility(path.densities[k], coeffs, 0.0, nullptr);
    double s = 0.0;
    for (int j = 0; j < g.dim(); ++j)
      for (std::size_t i = 0; i < g.size(); ++i) s += chi[j][i] * Fk[j][i] * Fk[j][i];
    chiterm[k] = s * g.cell_volume();
    if (k == K) FT = Fk;
  }
  auto trapz = [&](const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += 0.5 * path.time.step(k) * (f[k] + f[k + 1]);
    return s;
  };
  const double boundary = inner(W, FT);
  const double time_term = F.time_dependent ? trapz(dW) : 0.0;
  return boundary - time_term - 0.5 * trapz(divterm) - 0.5 * trapz(chiterm);
}

std::vector<VectorField> DensityRateResult::gradient_currents(const PathDiscretization& path,
                                                              const TransportCoefficients& coeffs) const {
  std::vector<VectorField> out;
  out.reserve(H.size());
  for (std::size_t k = 0; k < H.size(); ++k) {
    const VectorField chi = face_mobility(path.densities[k], coeffs, 1e-10, nullptr);
    VectorField w = hydrodynamic_current(path.densities[k], coeffs);
    const VectorField gH = gradient(H[k]);
    for (int j = 0; j < w.dim(); ++j)
      for (std::size_t i = 0; i < w.grid.size(); ++i) w[j][i] -= chi[j][i] * gH[j][i];
    out.push_back(std::move(w));
  }
  return out;
}

DensityRateResult eval_density_rate(const PathDiscretization& path, const TransportCoefficients& coeffs,
                                    const EllipticOptions& opts) {
  const std::size_t K = path.time.size();
  require(path.densities.size() == K + 1, "eval_density_rate: malformed path");
  struct Slice {
    ScalarField H;
    double cost = 0.0;
    double residual = 0.0;
    std::size_t clamps = 0;
  };
  auto solve = [&](std::size_t k) {
    const ScalarField& pi = path.densities[k];
    const double dt = path.time.step(k);
    // rhs = d_t pi - (1/2) div(D grad pi) = d_t pi + div(hydrodynamic current);
    // the matching current is hydrodynamic - chi grad H.
    const ScalarField dv = divergence(hydrodynamic_current(pi, coeffs));
    ScalarField rhs(pi.grid);
    for (std::size_t i = 0; i < pi.size(); ++i) rhs[i] = (path.densities[k + 1][i] - pi[i]) / dt + dv[i];
    const EllipticResult er = solve_elliptic_chi(pi, rhs, coeffs, opts);
    Slice s;
    s.H = er.H;
    s.residual = er.residual;
    std::size_t clamps = 0;
    const VectorField chi = face_mobility(pi, coeffs, opts.chi_floor, &clamps);
    s.clamps = clamps;
    const VectorField gH = gradient(er.H);
    double c = 0.0;
    for (int j = 0; j < chi.dim(); ++j)
      for (std::size_t i = 0; i < chi.grid.size(); ++i) c += chi[j][i] * gH[j][i] * gH[j][i];
    s.cost = 0.5 * dt * c * chi.grid.cell_volume();
    return s;
  };
  const auto slices = kernels::map_replicas_omp(K, solve);
  DensityRateResult out;
  out.H.reserve(K);
  for (const auto& s : slices) {
    out.value += s.cost;
    out.clamps += s.clamps;
    out.max_elliptic_residual = std::max(out.max_elliptic_residual, s.residual);
    out.H.push_back(s.H);
  }
  return out;
}

double static_integrand(const ScalarField& rho, const VectorField& j, const TransportCoefficients& coeffs,
                        double chi_floor, std::size_t* clamps) {
  require_same_grid(rho.grid, j.grid, "static_integrand");
  return slice_cost(rho, j, coeffs, Point{0.0, 0.0, 0.0}, chi_floor, nullptr, clamps);
}

double entropy_Sm(const ScalarField& rho, double m) {
  require(m > 0.0 && m < 1.0, "entropy_Sm: m must lie in (0,1)");
  auto xlogy = [](double x, double y) { return x == 0.0 ? 0.0 : x * std::log(x / y); };
  double s = 0.0;
  for (double r : rho.values) {
    require(r >= 0.0 && r <= 1.0, "entropy_Sm: profile values must lie in [0,1]");
    s += xlogy(r, m) + xlogy(1.0 - r, 1.0 - m);
  }
  return s * rho.grid.cell_volume();
}

}  // namespace fluctlab
