#include "fluctlab/variational.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <ceres/ceres.h>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "fluctlab/error.hpp"
#include "fluctlab/functionals.hpp"
#include "fluctlab/kernels.hpp"
#include "fluctlab/observables.hpp"

namespace fluctlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double diffusion_slope(const TransportCoefficients& c, double r) {
  if (c.model != Model::custom) return 0.0;
  const double h = 1e-6 * std::max(1.0, std::fabs(r));
  return (c.D(r + h) - c.D(r - h)) / (2 * h);
}

// (1/2) h^d sum_faces a^2 / chi(face), a = base + (1/2) D grad rho [+ v (rho_up - m) on axis 0].
// grad receives d/d rho, gbase receives d/d base (both Euclidean).
double face_objective(const ScalarField& rho, const VectorField& base, double v, double m,
                      const TransportCoefficients& c, double floor, std::vector<double>* grad, VectorField* gbase,
                      std::size_t* clamps) {
  const TorusGrid& g = rho.grid;
  const double M = g.side();
  const double scale = 0.5 * g.cell_volume();
  if (grad) grad->assign(g.size(), 0.0);
  if (gbase) *gbase = VectorField(g);
  double s = 0.0;
  std::size_t nclamp = 0;
  for (int j = 0; j < g.dim(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t u = g.neighbor(i, j);
      const double r = 0.5 * (rho[i] + rho[u]);
      const double Dv = c.D(r);
      const double gr = (rho[u] - rho[i]) * M;
      double a = base[j][i] + 0.5 * Dv * gr;
      std::size_t up = i;
      const bool upwind = v != 0.0 && j == 0;
      if (upwind) {
        up = v > 0 ? i : u;
        a += v * (rho[up] - m);
      }
      double chi = c.chi(r);
      double dchi = 0.0;
      if (!(chi >= floor)) {
        chi = floor;
        ++nclamp;
      } else if (grad) {
        dchi = c.dchi(r);
      }
      s += a * a / chi;
      if (grad) {
        const double dD = diffusion_slope(c, r);
        const double common = 2.0 * a / chi;
        const double chi_term = -0.5 * a * a * dchi / (chi * chi);
        (*grad)[i] += scale * (common * (-0.5 * Dv * M + 0.25 * dD * gr) + chi_term);
        (*grad)[u] += scale * (common * (0.5 * Dv * M + 0.25 * dD * gr) + chi_term);
        if (upwind) (*grad)[up] += scale * common * v;
      }
      if (gbase) (*gbase)[j][i] = scale * 2.0 * a / chi;
    }
  if (clamps) *clamps += nclamp;
  return scale * s;
}

// Hessian of face_objective in rho. D' terms are dropped, which is exact for ssep and kmp.
Eigen::SparseMatrix<double> face_hessian(const ScalarField& rho, const VectorField& base, double v, double m,
                                         const TransportCoefficients& c, double floor) {
  const TorusGrid& g = rho.grid;
  const double M = g.side();
  const double scale = 0.5 * g.cell_volume();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * g.size() * static_cast<std::size_t>(g.dim()));
  for (int j = 0; j < g.dim(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t u = g.neighbor(i, j);
      const double r = 0.5 * (rho[i] + rho[u]);
      const double Dv = c.D(r);
      double a = base[j][i] + 0.5 * Dv * (rho[u] - rho[i]) * M;
      double al[2] = {-0.5 * Dv * M, 0.5 * Dv * M};
      if (v != 0.0 && j == 0) {
        const int up = v > 0 ? 0 : 1;
        a += v * (rho[up == 0 ? i : u] - m);
        al[up] += v;
      }
      double chi = c.chi(r), c1 = 0.0, c2 = 0.0;
      if (!(chi >= floor)) {
        chi = floor;
      } else {
        c1 = c.dchi(r);
        c2 = c.d2chi(r);
      }
      const std::size_t idx[2] = {i, u};
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
          const double h = 2 * al[k] * al[l] / chi - a * c1 * (al[k] + al[l]) / (chi * chi) +
                           0.25 * a * a * (2 * c1 * c1 / (chi * chi * chi) - c2 / (chi * chi));
          trip.emplace_back(static_cast<int>(idx[k]), static_cast<int>(idx[l]), scale * h);
        }
    }
  Eigen::SparseMatrix<double> H(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

using Objective = std::function<double(const ScalarField&, std::vector<double>*, std::size_t*)>;
using Hessian = std::function<Eigen::SparseMatrix<double>(const ScalarField&)>;

struct Descent {
  ScalarField rho;
  double value = kInf;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = kInf;
  std::size_t clamps = 0;
};

double projected_step(const std::vector<double>& x, const std::vector<double>& gl, double m, double lo, double hi) {
  std::vector<double> trial(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] - gl[i];
  project_mass_box(trial, m, lo, hi);
  double pg = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) pg = std::max(pg, std::fabs(trial[i] - x[i]));
  return pg;
}

// Projected Newton on the cells off the bounds, with the mass constraint
// eliminated through two solves.
bool newton_phase(const Objective& F, const Hessian& H, ScalarField& x, double& f, std::vector<double>& g, double m,
                  double lo, double hi, const ProfileOptions& opts, Descent& out) {
  const double vol = x.grid.cell_volume();
  const std::size_t n = x.size();
  std::vector<double> gl(n), gn;
  for (int it = 0; it < 200; ++it) {
    for (std::size_t i = 0; i < n; ++i) gl[i] = g[i] / vol;
    out.gradient_norm = projected_step(x.values, gl, m, lo, hi);
    if (out.gradient_norm <= opts.tolerance) return true;
    const double bnd = 1e-12;
    double mu = 0.0;
    std::size_t inner = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (x[i] > lo + bnd && x[i] < hi - bnd) {
        mu += gl[i];
        ++inner;
      }
    mu = inner ? mu / static_cast<double>(inner) : 0.0;
    std::vector<int> map(n, -1);
    std::vector<std::size_t> freeidx;
    for (std::size_t i = 0; i < n; ++i) {
      const bool at_lo = x[i] <= lo + bnd && gl[i] - mu > 0;
      const bool at_hi = x[i] >= hi - bnd && gl[i] - mu < 0;
      if (!at_lo && !at_hi) {
        map[i] = static_cast<int>(freeidx.size());
        freeidx.push_back(i);
      }
    }
    const auto nf = static_cast<Eigen::Index>(freeidx.size());
    if (nf < 2) return false;
    const Eigen::SparseMatrix<double> Hfull = H(x);
    std::vector<Eigen::Triplet<double>> trip;
    double hmax = 0.0;
    for (int k = 0; k < Hfull.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator e(Hfull, k); e; ++e) {
        hmax = std::max(hmax, std::fabs(e.value()));
        if (map[e.row()] >= 0 && map[e.col()] >= 0) trip.emplace_back(map[e.row()], map[e.col()], e.value());
      }
    Eigen::SparseMatrix<double> Hf(nf, nf);
    Hf.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd rhs(nf);
    for (Eigen::Index k = 0; k < nf; ++k) rhs[k] = -g[freeidx[k]];
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(nf);
    Eigen::VectorXd y, z;
    // Adding c 1 1^T leaves the tangent block alone, so the factorization only
    // has to succeed where the mass constraint allows motion. Dense up to a size.
    auto shifted_solve = [&](auto&& factor, auto&& solve) {
      if (!factor(0.0)) {
        double shift = 1e-10 * std::max(hmax, 1e-300);
        int t = 0;
        while (t < 40 && !factor(shift)) {
          shift *= 10;
          ++t;
        }
        if (t == 40) return false;
        double bad = shift / 10;
        for (int b = 0; b < 6; ++b) {
          const double mid = std::sqrt(bad * shift);
          (factor(mid) ? shift : bad) = mid;
        }
        if (!factor(shift)) return false;
      }
      y = solve(rhs);
      z = solve(ones);
      return true;
    };
    bool ok;
    if (nf <= 1500) {
      Eigen::MatrixXd A = Eigen::MatrixXd(Hf);
      A.array() += std::max(hmax, 1e-300);
      Eigen::LLT<Eigen::MatrixXd> llt;
      ok = shifted_solve(
          [&](double sh) {
            llt.compute(A + sh * Eigen::MatrixXd::Identity(nf, nf));
            return llt.info() == Eigen::Success;
          },
          [&](const Eigen::VectorXd& r) -> Eigen::VectorXd { return llt.solve(r); });
    } else {
      Eigen::SparseMatrix<double> I(nf, nf);
      I.setIdentity();
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
      ok = shifted_solve(
          [&](double sh) {
            ldlt.compute(Hf + sh * I);
            return ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0;
          },
          [&](const Eigen::VectorXd& r) -> Eigen::VectorXd { return ldlt.solve(r); });
    }
    if (!ok) return false;
    const Eigen::VectorXd dx = y - z * (y.sum() / z.sum());
    std::vector<double> step(n, 0.0);
    double slope = 0.0;
    for (Eigen::Index k = 0; k < nf; ++k) {
      step[freeidx[k]] = dx[k];
      slope += g[freeidx[k]] * dx[k];
    }
    if (!(slope < 0)) return false;
    ScalarField xn(x.grid);
    double fn = kInf, alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 50; ++bt, alpha *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + alpha * step[i];
      project_mass_box(xn.values, m, lo, hi);
      double dec = 0.0;
      for (std::size_t i = 0; i < n; ++i) dec += g[i] * (xn[i] - x[i]);
      fn = F(xn, &gn, nullptr);
      if (std::isfinite(fn) && fn <= f + 1e-4 * std::min(dec, 0.0)) {
        accepted = true;
        break;
      }
      // Near the minimum the decrease drops below rounding; accept a full step
      // that stays level and shrinks the projected gradient.
      if (bt == 0 && std::isfinite(fn) && std::fabs(fn - f) <= 1e-14 * std::max(1.0, std::fabs(f))) {
        std::vector<double> gln(n);
        for (std::size_t i = 0; i < n; ++i) gln[i] = gn[i] / vol;
        if (projected_step(xn.values, gln, m, lo, hi) < out.gradient_norm) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) return false;
    ++out.iterations;
    x = std::move(xn);
    f = fn;
    g.swap(gn);
  }
  for (std::size_t i = 0; i < n; ++i) gl[i] = g[i] / vol;
  out.gradient_norm = projected_step(x.values, gl, m, lo, hi);
  return out.gradient_norm <= opts.tolerance;
}

// Projected gradient with Barzilai-Borwein steps and a non-monotone Armijo
// search, then projected Newton when a Hessian is available.
Descent descend(const Objective& F, const Hessian& H, ScalarField x, double m, double lo, double hi,
                const ProfileOptions& opts) {
  const double vol = x.grid.cell_volume();
  const std::size_t n = x.size();
  project_mass_box(x.values, m, lo, hi);
  std::vector<double> g, gn;
  double f = F(x, &g, nullptr);
  std::vector<double> gl(n), gln(n);
  for (std::size_t i = 0; i < n; ++i) gl[i] = g[i] / vol;
  double gmax = 0.0;
  for (double v : gl) gmax = std::max(gmax, std::fabs(v));
  double alpha = 1e-2 / std::max(1.0, gmax);

  Descent out;
  // best accepted iterate; the non-monotone search may end above it
  ScalarField xb = x;
  double fb = f;
  std::vector<double> gb = g;
  std::vector<double> recent(10, f);
  const int bb_limit = H ? std::min(opts.max_iterations, 500) : opts.max_iterations;
  int stall = 0;
  int it = 0;
  for (; it < bb_limit; ++it) {
    out.gradient_norm = projected_step(x.values, gl, m, lo, hi);
    if (out.gradient_norm <= opts.tolerance) {
      out.converged = true;
      break;
    }
    const double fref = *std::max_element(recent.begin(), recent.end());
    ScalarField xn(x.grid);
    double fn = kInf;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] - alpha * gl[i];
      project_mass_box(xn.values, m, lo, hi);
      double dec = 0.0;
      for (std::size_t i = 0; i < n; ++i) dec += g[i] * (xn[i] - x[i]);
      fn = F(xn, &gn, nullptr);
      if (std::isfinite(fn) && fn <= fref + 1e-4 * dec) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    for (std::size_t i = 0; i < n; ++i) gln[i] = gn[i] / vol;
    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = xn[i] - x[i];
      ss += s * s;
      sy += s * (gln[i] - gl[i]);
    }
    alpha = sy > 0 ? ss / sy : alpha * 4.0;
    alpha = std::clamp(alpha, 1e-14, 1e6);
    stall = (fb - fn <= 1e-15 * std::max(1.0, std::fabs(fb))) ? stall + 1 : 0;
    x = std::move(xn);
    f = fn;
    recent[static_cast<std::size_t>(it) % recent.size()] = f;
    g.swap(gn);
    gl.swap(gln);
    if (f < fb) {
      xb = x;
      fb = f;
      gb = g;
    }
    if (stall >= 200) break;
  }
  out.iterations = it;
  if (!out.converged && f > fb) {
    x = xb;
    f = fb;
    g = gb;
    for (std::size_t i = 0; i < n; ++i) gl[i] = g[i] / vol;
    out.gradient_norm = projected_step(x.values, gl, m, lo, hi);
  }
  if (!out.converged && H) out.converged = newton_phase(F, H, x, f, g, m, lo, hi, opts, out);
  out.value = F(x, nullptr, &out.clamps);
  out.rho = std::move(x);
  return out;
}

std::vector<ScalarField> start_profiles(const TorusGrid& grid, double m, double lo, double hi,
                                        const ProfileOptions& opts) {
  std::vector<ScalarField> starts;
  starts.push_back(ScalarField::constant(grid, m));
  for (const auto& w : opts.warm_starts)
    if (w.grid == grid) starts.push_back(w);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const double room = std::min(m - lo, std::isfinite(hi) ? hi - m : m - lo);
  const std::size_t na = std::max<std::size_t>(1, opts.amplitudes.size());
  const std::size_t nf = std::max<std::size_t>(1, opts.frequencies.size());
  for (int s = 0; s < opts.cosine_starts; ++s) {
    const double amp = (opts.amplitudes.empty() ? 0.1 : opts.amplitudes[s % na]) * room;
    const int freq = opts.frequencies.empty() ? 1 : opts.frequencies[(s / na) % nf];
    const double ph = phase(rng);
    starts.push_back(ScalarField::sample(grid, [&](const Point& u) {
      return m + amp * std::cos(2.0 * std::numbers::pi * freq * u[0] + ph);
    }));
  }
  return starts;
}

ProfileOptimizationResult optimize_profile(const Objective& F, const Hessian& H, const TorusGrid& grid, double m,
                                           const TransportCoefficients& coeffs, const ProfileOptions& opts) {
  require(coeffs.interior(m), "profile optimization: m must lie inside the admissible interval");
  const double lo = coeffs.lo + opts.margin;
  const double hi = std::isfinite(coeffs.hi) ? coeffs.hi - opts.margin : kInf;
  const auto starts = start_profiles(grid, m, lo, hi, opts);
  auto run = [&](std::size_t s) { return descend(F, H, starts[s], m, lo, hi, opts); };
  const auto runs = opts.parallel ? kernels::map_replicas_omp(starts.size(), run)
                                  : kernels::map_replicas_serial(starts.size(), run);
  std::size_t best = 0;
  for (std::size_t s = 1; s < runs.size(); ++s)
    if (runs[s].value < runs[best].value - 1e-12 * std::fabs(runs[best].value)) best = s;
  ProfileOptimizationResult r;
  r.rho = runs[best].rho;
  r.value = runs[best].value;
  r.iterations = runs[best].iterations;
  r.converged = runs[best].converged;
  r.gradient_norm = runs[best].gradient_norm;
  r.start_index = static_cast<int>(best);
  r.clamps = runs[best].clamps;
  return r;
}

}  // namespace

void project_mass_box(std::vector<double>& x, double m, double lo, double hi) {
  require(lo <= m && m <= hi, "project_mass_box: target mass outside the box");
  const std::size_t n = x.size();
  double mean = 0.0, mn = kInf, mx = -kInf;
  for (double v : x) {
    mean += v;
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  mean /= static_cast<double>(n);
  // Fast path: a plain shift stays inside the box.
  const double shift = mean - m;
  if (mn - shift >= lo && mx - shift <= hi) {
    for (double& v : x) v -= shift;
    return;
  }
  auto mean_at = [&](double tau) {
    double s = 0.0;
    for (double v : x) s += std::clamp(v - tau, lo, hi);
    return s / static_cast<double>(n);
  };
  double a = std::isfinite(hi) ? mn - hi : mn - m;  // mean_at(a) >= m
  double b = mx - lo;                                // mean_at(b) <= m
  for (int it = 0; it < 200 && b - a > 1e-16 * std::max(1.0, std::fabs(a) + std::fabs(b)); ++it) {
    const double c = 0.5 * (a + b);
    (mean_at(c) >= m ? a : b) = c;
  }
  const double tau = 0.5 * (a + b);
  for (double& v : x) v = std::clamp(v - tau, lo, hi);
  // Remove the last rounding-level mass error on the free coordinates.
  double err = 0.0;
  std::size_t free = 0;
  for (double v : x) {
    err += v;
    if (v > lo && v < hi) ++free;
  }
  err = err / static_cast<double>(n) - m;
  if (free > 0) {
    const double corr = err * static_cast<double>(n) / static_cast<double>(free);
    for (double& v : x)
      if (v > lo && v < hi) v = std::clamp(v - corr, lo, hi);
  }
}

ProfileOptimizationResult minimize_Um(const VectorField& j, double m, const TransportCoefficients& coeffs,
                                      const ProfileOptions& opts) {
  const VectorField proj = divergence_free_projection(j);
  const double dev = (proj - j).max_abs();
  if (dev > 1e-8 * (1.0 + j.max_abs())) {
    ProfileOptimizationResult r;
    r.rho = ScalarField::constant(j.grid, m);
    r.value = kInf;
    return r;
  }
  Objective F = [&](const ScalarField& rho, std::vector<double>* grad, std::size_t* clamps) {
    return face_objective(rho, j, 0.0, m, coeffs, opts.chi_floor, grad, nullptr, clamps);
  };
  Hessian H = [&](const ScalarField& rho) { return face_hessian(rho, j, 0.0, m, coeffs, opts.chi_floor); };
  return optimize_profile(F, H, j.grid, m, coeffs, opts);
}

double closed_form_Um_1d(double j, double m, const TransportCoefficients& coeffs) {
  require(coeffs.interior(m), "closed_form_Um_1d: m must lie inside the admissible interval");
  if (!coeffs.inverse_mobility_convex())
    throw InvalidArgument("closed_form_Um_1d: 1/chi is not convex, the closed form does not apply");
  return j * j / (2.0 * coeffs.chi(m));
}

double psi_objective(const ScalarField& rho, double J, double v, double m, const TransportCoefficients& coeffs,
                     double chi_floor, std::vector<double>* grad, std::size_t* clamps) {
  require(rho.grid.dim() == 1, "psi_objective is one-dimensional");
  const VectorField base = VectorField::constant(rho.grid, Point{J, 0.0, 0.0});
  return face_objective(rho, base, v, m, coeffs, chi_floor, grad, nullptr, clamps);
}

ProfileOptimizationResult eval_Psi_v(double J, double v, double m, const TransportCoefficients& coeffs,
                                     const ProfileOptions& opts) {
  const TorusGrid grid(1, opts.resolution);
  const VectorField base = VectorField::constant(grid, Point{J, 0.0, 0.0});
  Objective F = [&](const ScalarField& rho, std::vector<double>* grad, std::size_t* clamps) {
    return face_objective(rho, base, v, m, coeffs, opts.chi_floor, grad, nullptr, clamps);
  };
  Hessian H = [&](const ScalarField& rho) { return face_hessian(rho, base, v, m, coeffs, opts.chi_floor); };
  return optimize_profile(F, H, grid, m, coeffs, opts);
}

double criterion_F(double r, double lambda, double m, const TransportCoefficients& coeffs) {
  const double a = 1.0 + lambda * (r - m);
  return a * a / coeffs.chi(r);
}

double criterion_Fpp(double lambda, double m, const TransportCoefficients& coeffs) {
  const double c = coeffs.chi(m), c1 = coeffs.dchi(m), c2 = coeffs.d2chi(m);
  return (2 * c * c * lambda * lambda - 4 * c * c1 * lambda + 2 * c1 * c1 - c * c2) / (c * c * c);
}

CriterionResult second_derivative_criterion(double m, const TransportCoefficients& coeffs) {
  const double c = coeffs.chi(m);
  if (c == 0.0) throw InvalidArgument("second_derivative_criterion: chi(m) = 0");
  CriterionResult r;
  r.lambda = coeffs.dchi(m) / c;
  r.Fpp = criterion_Fpp(r.lambda, m, coeffs);
  r.transition_possible = r.Fpp < 0;
  return r;
}

double psi_cross_term(const ScalarField& rho, double J, double lambda, double m,
                      const TransportCoefficients& coeffs) {
  require(rho.grid.dim() == 1, "psi_cross_term is one-dimensional");
  ScalarField dr(rho.grid);
  for (std::size_t i = 0; i < rho.size(); ++i) dr[i] = coeffs.d_potential(rho[i]);
  const ScalarField ddr = spectral_derivative(dr, 0);
  double s = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i)
    s += (1.0 + lambda * (rho[i] - m)) * 0.5 * ddr[i] / coeffs.chi(rho[i]);
  return 2.0 * J * s * rho.grid.cell_volume();
}

ScanRow scan_point(double J, double m, const TransportCoefficients& coeffs, const ScanOptions& opts) {
  ScanRow row;
  row.J = J;
  const TorusGrid grid(1, opts.profile.resolution);
  if (coeffs.inverse_mobility_convex()) {
    row.U = closed_form_Um_1d(J, m, coeffs);
  } else {
    ProfileOptions po = opts.profile;
    po.parallel = false;
    row.U = minimize_Um(VectorField::constant(grid, Point{J, 0.0, 0.0}), m, coeffs, po).value;
  }
  const double lambda = coeffs.dchi(m) / coeffs.chi(m);
  double a, b;
  if (lambda != 0.0) {
    a = std::min(0.0, 4.0 * lambda * J);
    b = std::max(0.0, 4.0 * lambda * J);
  } else {
    a = -4.0 * std::fabs(J);
    b = 4.0 * std::fabs(J);
  }

  ProfileOptions po = opts.profile;
  po.parallel = false;
  ProfileOptimizationResult best;
  best.value = kInf;
  double best_v = 0.0;
  std::size_t clamps = 0;
  bool first = true;
  auto eval = [&](double v) {
    ProfileOptions o = po;
    if (!first) {
      o.cosine_starts = std::min(o.cosine_starts, 2);
      if (best.rho.size() > 0) o.warm_starts.push_back(best.rho);
    }
    first = false;
    auto r = eval_Psi_v(J, v, m, coeffs, o);
    clamps += r.clamps;
    if (r.value < best.value) {
      best = r;
      best_v = v;
    }
    return r.value;
  };

  eval(lambda * J);
  if (b > a) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    const double tol = opts.golden_tolerance * (b - a);
    while (b - a > tol) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - phi * (b - a);
        f1 = eval(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + phi * (b - a);
        f2 = eval(x2);
      }
    }
  }
  row.psi_min = best.value;
  row.v_star = best_v;
  row.gap = row.U - row.psi_min;
  row.clamps = clamps;
  row.witness = best.rho;
  return row;
}

ScanResult phase_transition_scan(double m, const std::vector<double>& J_grid, const TransportCoefficients& coeffs,
                                 const ScanOptions& opts) {
  ScanResult res;
  res.rows = kernels::map_replicas_omp(J_grid.size(),
                                       [&](std::size_t i) { return scan_point(J_grid[i], m, coeffs, opts); });
  auto relgap = [](const ScanRow& r) { return r.U > 0 ? r.gap / r.U : 0.0; };
  std::size_t first = res.rows.size();
  for (std::size_t i = 0; i < res.rows.size(); ++i)
    if (relgap(res.rows[i]) >= opts.gap_threshold) {
      first = i;
      break;
    }
  res.resolution = opts.bisection_resolution;
  if (first == res.rows.size()) return res;
  res.transition_found = true;
  double hi = res.rows[first].J;
  double lo = first > 0 ? res.rows[first - 1].J : 0.0;
  while (hi - lo > opts.bisection_resolution) {
    const double mid = 0.5 * (lo + hi);
    (relgap(scan_point(mid, m, coeffs, opts)) >= opts.gap_threshold ? hi : lo) = mid;
  }
  res.J_star = hi;
  return res;
}

double path_cost(const ScalarField& gamma, const TimeGrid& time, const std::vector<VectorField>& w,
                 const TransportCoefficients& coeffs, double chi_floor, std::vector<VectorField>* grad) {
  const std::size_t K = time.size();
  require(w.size() == K, "path_cost: one current per step required");
  std::vector<ScalarField> pi;
  pi.reserve(K + 1);
  pi.push_back(gamma);
  for (std::size_t k = 0; k < K; ++k) {
    const ScalarField dv = divergence(w[k]);
    ScalarField next(gamma.grid);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = pi[k][i] - time.step(k) * dv[i];
    pi.push_back(std::move(next));
  }
  double cost = 0.0;
  std::vector<double> gpi;
  VectorField gw;
  ScalarField lambda(gamma.grid);
  if (grad) grad->assign(K, VectorField(gamma.grid));
  for (std::size_t kk = K; kk-- > 0;) {
    const double dt = time.step(kk);
    cost += dt * face_objective(pi[kk], w[kk], 0.0, 0.0, coeffs, chi_floor, grad ? &gpi : nullptr,
                                grad ? &gw : nullptr, nullptr);
    if (grad) {
      const VectorField gl = gradient(lambda);
      auto& out = (*grad)[kk];
      for (int j = 0; j < out.dim(); ++j)
        for (std::size_t i = 0; i < out.grid.size(); ++i) out[j][i] = dt * gw[j][i] + dt * gl[j][i];
      for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] += dt * gpi[i];
    }
  }
  return cost;
}

namespace {

class PhiTFunction final : public ceres::FirstOrderFunction {
 public:
  PhiTFunction(const VectorField& J, const ScalarField& gamma, const TimeGrid& time,
               const TransportCoefficients& coeffs, double floor)
      : J_(J), gamma_(gamma), time_(time), coeffs_(coeffs), floor_(floor) {
    nf_ = static_cast<std::size_t>(gamma.grid.dim()) * gamma.grid.size();
  }

  int NumParameters() const override { return static_cast<int>((time_.size() - 1) * nf_); }

  std::vector<VectorField> unpack(const double* x) const {
    const std::size_t K = time_.size();
    const TorusGrid& g = gamma_.grid;
    std::vector<VectorField> w(K, VectorField(g));
    VectorField last = time_.horizon() * J_;
    for (std::size_t k = 0; k + 1 < K; ++k) {
      std::size_t p = k * nf_;
      for (int j = 0; j < g.dim(); ++j)
        for (std::size_t i = 0; i < g.size(); ++i, ++p) {
          w[k][j][i] = x[p];
          last[j][i] -= time_.step(k) * x[p];
        }
    }
    w[K - 1] = (1.0 / time_.step(K - 1)) * last;
    return w;
  }

  bool Evaluate(const double* x, double* cost, double* gradient) const override {
    const auto w = unpack(x);
    // Reject steps that leave the admissible interval; the line search backs off.
    ScalarField pi = gamma_;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const ScalarField dv = divergence(w[k]);
      for (std::size_t i = 0; i < pi.size(); ++i) {
        pi[i] -= time_.step(k) * dv[i];
        if (!coeffs_.interior(pi[i])) return false;
      }
    }
    std::vector<VectorField> g;
    *cost = path_cost(gamma_, time_, w, coeffs_, floor_, gradient ? &g : nullptr);
    if (!std::isfinite(*cost)) return false;
    if (gradient) {
      const std::size_t K = time_.size();
      const TorusGrid& gr = gamma_.grid;
      for (std::size_t k = 0; k + 1 < K; ++k) {
        const double ratio = time_.step(k) / time_.step(K - 1);
        std::size_t p = k * nf_;
        for (int j = 0; j < gr.dim(); ++j)
          for (std::size_t i = 0; i < gr.size(); ++i, ++p) gradient[p] = g[k][j][i] - ratio * g[K - 1][j][i];
      }
    }
    return true;
  }

 private:
  VectorField J_;
  ScalarField gamma_;
  TimeGrid time_;
  const TransportCoefficients& coeffs_;
  double floor_;
  std::size_t nf_;
};

}  // namespace

PathOptimizationResult optimize_PhiT(const VectorField& J, const ScalarField& gamma, double T, std::size_t K,
                                     const TransportCoefficients& coeffs, const PathOptions& opts) {
  require_same_grid(J.grid, gamma.grid, "optimize_PhiT");
  require(T > 0 && K >= 2, "optimize_PhiT: need T > 0 and K >= 2");
  const VectorField proj = divergence_free_projection(J);
  if ((proj - J).max_abs() > 1e-8 * (1.0 + J.max_abs()))
    throw InvalidArgument("optimize_PhiT: J is not divergence free; Phi_T is +infinity for large T");
  for (double v : gamma.values) require(coeffs.interior(v), "optimize_PhiT: gamma must be admissible");

  const TimeGrid time = TimeGrid::uniform(T, K);
  auto* fn = new PhiTFunction(J, gamma, time, coeffs, opts.chi_floor);
  const std::size_t nf = static_cast<std::size_t>(J.dim()) * J.grid.size();
  std::vector<double> x((K - 1) * nf);
  for (std::size_t k = 0; k + 1 < K; ++k) {
    std::size_t p = k * nf;
    for (int j = 0; j < J.dim(); ++j)
      for (std::size_t i = 0; i < J.grid.size(); ++i, ++p) x[p] = J[j][i];
  }
  ceres::GradientProblem problem(fn);
  ceres::GradientProblemSolver::Options o;
  o.line_search_direction_type = ceres::LBFGS;
  o.max_num_iterations = opts.max_iterations;
  o.gradient_tolerance = opts.gradient_tolerance;
  o.function_tolerance = opts.function_tolerance;
  o.parameter_tolerance = 1e-14;
  o.logging_type = ceres::SILENT;
  o.minimizer_progress_to_stdout = false;
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(o, problem, x.data(), &summary);

  PathOptimizationResult res;
  auto w = fn->unpack(x.data());
  res.path = solve_continuity(gamma, time, std::move(w), &coeffs);
  res.value = path_cost(gamma, time, res.path.currents, coeffs, opts.chi_floor, nullptr) / T;
  res.iterations = static_cast<int>(summary.iterations.size());
  res.converged = summary.termination_type == ceres::CONVERGENCE;
  res.message = summary.message;
  const VectorField WT = res.path.integrated_current();
  res.endpoint_error = (WT - T * J).max_abs();
  return res;
}

RelaxationResult build_relaxation_path(const ScalarField& gamma1, const ScalarField& gamma2, double m, double delta,
                                       const TransportCoefficients& coeffs) {
  require_same_grid(gamma1.grid, gamma2.grid, "build_relaxation_path");
  require(std::fabs(gamma1.mass() - m) < 1e-10 && std::fabs(gamma2.mass() - m) < 1e-10,
          "build_relaxation_path: profiles must have mass m");
  for (const auto* p : {&gamma1, &gamma2})
    for (double v : p->values) require(coeffs.interior(v), "build_relaxation_path: profiles must be admissible");
  const double bound = entropy_Sm(gamma2, m) + delta;
  const double dt = 0.5 * cfl_limit(gamma1.grid);
  constexpr int bridge_steps = 32;

  RelaxationResult res;
  res.bound = bound;
  double cost = kInf;
  for (double T1 = 0.05; T1 <= 12.8; T1 *= 2) {
    const PathDiscretization down = solve_heat(gamma1, T1, dt);
    const PathDiscretization up = solve_heat(gamma2, T1, dt);

    // Time reversal of the relaxation of gamma2: pi_k = rho_{K-k}, w_k = (1/2) grad pi_{k+1}.
    PathDiscretization rev;
    rev.time = up.time;
    std::reverse(rev.time.steps.begin(), rev.time.steps.end());
    rev.densities.assign(up.densities.rbegin(), up.densities.rend());
    for (std::size_t k = 0; k < rev.time.size(); ++k) rev.currents.push_back(0.5 * gradient(rev.densities[k + 1]));

    // Linear bridge between the two relaxed profiles with the cheapest compatible current.
    PathDiscretization bridge;
    bridge.time = TimeGrid::uniform(1.0, bridge_steps);
    const ScalarField& a = down.final();
    const ScalarField& b = rev.initial();
    for (int k = 0; k <= bridge_steps; ++k) {
      const double s = static_cast<double>(k) / bridge_steps;
      bridge.densities.push_back(k == bridge_steps ? b : (1.0 - s) * a + s * b);
    }
    const DensityRateResult dr = eval_density_rate(bridge, coeffs);
    bridge.currents = dr.gradient_currents(bridge, coeffs);

    res.path = glue_paths(glue_paths(down, bridge), rev);
    res.relaxation_time = T1;
    cost = eval_I(res.path, coeffs).value;
    res.cost = cost;
    if (cost <= bound) return res;
  }
  throw NumericalError(fmt::format("build_relaxation_path: achieved cost {:.6g} exceeds S_m + delta = {:.6g}", cost,
                                   bound));
}

PathDiscretization build_straight_path(const ScalarField& gamma, const ScalarField& rho, const VectorField& j,
                                       double T, int steps_per_unit) {
  require_same_grid(gamma.grid, rho.grid, "build_straight_path");
  require_same_grid(gamma.grid, j.grid, "build_straight_path");
  require(std::fabs(gamma.mass() - rho.mass()) <= 1e-10, "build_straight_path: gamma and rho need equal mass");
  require(T > 2.0, "build_straight_path: T must exceed 2");
  require(steps_per_unit >= 1, "build_straight_path: steps_per_unit must be positive");
  // w_hat = -grad phi with div grad phi = rho - gamma, so div w_hat = gamma - rho.
  const VectorField w_hat = -1.0 * gradient(solve_poisson(rho - gamma));
  const VectorField middle = (T / (T - 2.0)) * j;
  const int nm = std::max(1, static_cast<int>(std::lround((T - 2.0) * steps_per_unit)));
  TimeGrid time;
  std::vector<VectorField> w;
  for (int k = 0; k < steps_per_unit; ++k) {
    time.steps.push_back(1.0 / steps_per_unit);
    w.push_back(w_hat);
  }
  for (int k = 0; k < nm; ++k) {
    time.steps.push_back((T - 2.0) / nm);
    w.push_back(middle);
  }
  for (int k = 0; k < steps_per_unit; ++k) {
    time.steps.push_back(1.0 / steps_per_unit);
    w.push_back(-1.0 * w_hat);
  }
  return solve_continuity(gamma, time, std::move(w));
}

PathDiscretization traveling_wave_path(const ScalarField& rho0, double v, double J) {
  require(rho0.grid.dim() == 1, "traveling_wave_path is one-dimensional");
  require(v != 0.0, "traveling_wave_path: v must be nonzero");
  const TorusGrid& g = rho0.grid;
  const int M = g.side();
  const double m = rho0.mass();
  const int shift = v > 0 ? 1 : -1;
  PathDiscretization path;
  path.time = TimeGrid::uniform(1.0 / std::fabs(v), static_cast<std::size_t>(M));
  path.densities.push_back(rho0);
  for (int k = 0; k < M; ++k) {
    const ScalarField& pi = path.densities.back();
    VectorField w(g);
    ScalarField next(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t up = v > 0 ? i : g.neighbor(i, 0);
      w[0][i] = J + v * (pi[up] - m);
      next[i] = pi[g.neighbor(i, 0, -shift)];
    }
    path.currents.push_back(std::move(w));
    path.densities.push_back(std::move(next));
  }
  return path;
}

PathDiscretization glue_paths(const PathDiscretization& p1, const PathDiscretization& p2) {
  require_same_grid(p1.grid(), p2.grid(), "glue_paths");
  if ((p1.final() - p2.initial()).max_abs() > 1e-8)
    throw InvalidArgument("glue_paths: terminal density of the first path differs from the initial one of the second");
  PathDiscretization out = p1;
  out.time.steps.insert(out.time.steps.end(), p2.time.steps.begin(), p2.time.steps.end());
  out.densities.insert(out.densities.end(), p2.densities.begin() + 1, p2.densities.end());
  out.currents.insert(out.currents.end(), p2.currents.begin(), p2.currents.end());
  out.range_violations = p1.range_violations + p2.range_violations;
  return out;
}

}  // namespace fluctlab
