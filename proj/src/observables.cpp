#include "fluctlab/observables.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include "fluctlab/error.hpp"

namespace fluctlab {

ScalarField empirical_density(const LatticeState& state) {
  ScalarField f(state.grid);
  f.values = state.values;
  return f;
}

ScalarField coarse_density(const LatticeState& state, int M) {
  const TorusGrid& g = state.grid;
  require(M >= 2 && g.side() % M == 0, "coarse_density: N must be a multiple of M");
  const TorusGrid cg(g.dim(), M);
  const int r = g.side() / M;
  ScalarField out(cg);
  for (std::size_t x = 0; x < g.size(); ++x) {
    auto c = g.coords(x);
    for (int a = 0; a < g.dim(); ++a) c[a] /= r;
    out[cg.index(c)] += state.values[x];
  }
  const double w = 1.0 / std::pow(static_cast<double>(r), g.dim());
  for (double& v : out.values) v *= w;
  return out;
}

double EmpiricalCurrent::pair(const VectorFunction& F) const {
  const int d = lattice.dim();
  double s = 0.0;
  for (std::size_t x = 0; x < lattice.size(); ++x) {
    bool any = false;
    for (int j = 0; j < d; ++j) any = any || net[x * d + j] != 0.0;
    if (!any) continue;
    const Point v = F(lattice.corner(x));
    for (int j = 0; j < d; ++j) s += v[j] * net[x * d + j];
  }
  return s * lattice.cell_volume() / lattice.side();
}

VectorField EmpiricalCurrent::to_vector_field(int M) const {
  require(M >= 2 && lattice.side() % M == 0, "to_vector_field: N must be a multiple of M");
  const int d = lattice.dim();
  const int r = lattice.side() / M;
  const TorusGrid cg(d, M);
  VectorField out(cg);
  for (std::size_t x = 0; x < lattice.size(); ++x) {
    const auto c = lattice.coords(x);
    std::array<int, 3> cc{};
    for (int a = 0; a < d; ++a) cc[a] = c[a] / r;
    for (int j = 0; j < d; ++j)
      if ((c[j] + 1) % r == 0) out[j][cg.index(cc)] += net[x * d + j];
  }
  const double w = std::pow(static_cast<double>(M), d - 1) * lattice.cell_volume();
  for (int j = 0; j < d; ++j)
    for (double& v : out[j]) v *= w;
  return out;
}

EmpiricalCurrent empirical_current(const CurrentLedger& ledger, double t) {
  require(t >= 0.0, "empirical_current: negative time");
  require(t <= ledger.horizon, "empirical_current: time beyond the recorded horizon");
  EmpiricalCurrent W;
  W.lattice = ledger.grid;
  if (t == ledger.horizon) {
    W.net = ledger.net;
    return W;
  }
  W.net.assign(ledger.net.size(), 0.0);
  if (t == 0.0) return W;
  require(ledger.has_log, "empirical_current before the horizon needs the event log");
  const int d = ledger.grid.dim();
  for (const auto& ev : ledger.events) {
    if (ev.time > t) break;
    W.net[static_cast<std::size_t>(ev.site) * d + ev.direction] += ev.amount;
  }
  return W;
}

namespace {

// Periodic box sum of half-width ell along every axis (separable).
std::vector<double> box_sum(const TorusGrid& g, std::vector<double> v, int ell) {
  const int N = g.side();
  std::vector<double> pre(2 * N + 1);
  for (int a = 0; a < g.dim(); ++a) {
    std::vector<double> next(v.size());
    for (std::size_t s = 0; s < g.size(); ++s) {
      if (g.coords(s)[a] != 0) continue;
      // s is the start of a line along axis a.
      pre[0] = 0.0;
      for (int k = 0; k < 2 * N; ++k) pre[k + 1] = pre[k] + v[g.neighbor(s, a, k % N)];
      for (int k = 0; k < N; ++k) {
        // window k-ell .. k+ell on the doubled line; 2 ell + 1 <= N keeps it inside
        const int lo = k - ell >= 0 ? k - ell : k - ell + N;
        next[g.neighbor(s, a, k)] = pre[lo + 2 * ell + 1] - pre[lo];
      }
    }
    v.swap(next);
  }
  return v;
}

}  // namespace

double block_density(const LatticeState& state, std::size_t x, int ell) {
  const TorusGrid& g = state.grid;
  require(ell >= 0 && 2 * ell + 1 <= g.side(), "block_density: box larger than the torus");
  require(x < g.size(), "block_density: site out of range");
  const auto c = g.coords(x);
  double s = 0.0;
  std::size_t count = 0;
  std::array<int, 3> o{0, 0, 0};
  const int span = 2 * ell + 1;
  std::size_t total = 1;
  for (int a = 0; a < g.dim(); ++a) total *= span;
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t r = k;
    for (int a = 0; a < g.dim(); ++a) {
      o[a] = c[a] + static_cast<int>(r % span) - ell;
      r /= span;
    }
    s += state.values[g.index(o)];
    ++count;
  }
  return s / static_cast<double>(count);
}

double two_block_observable(const LatticeState& state, int j, double eps) {
  const TorusGrid& g = state.grid;
  require(j >= 0 && j < g.dim(), "two_block_observable: bad direction");
  require(eps * g.side() >= 1.0, "two_block_observable: eps N must be at least 1");
  const int ell = static_cast<int>(std::floor(eps * g.side()));
  require(2 * ell + 1 <= g.side(), "two_block_observable: box larger than the torus");
  std::vector<double> pairs(g.size());
  for (std::size_t y = 0; y < g.size(); ++y) pairs[y] = state.values[y] * state.values[g.neighbor(y, j)];
  const auto A = box_sum(g, pairs, ell);
  const auto B = box_sum(g, state.values, ell);
  const double vol = std::pow(2.0 * ell + 1.0, g.dim());
  double s = 0.0;
  for (std::size_t x = 0; x < g.size(); ++x) {
    const double b = B[x] / vol;
    s += std::fabs(A[x] / vol - b * b);
  }
  return s * g.cell_volume();
}

TestFieldFamily::TestFieldFamily(int dim, std::size_t count) : dim_(dim) {
  require(dim >= 1 && dim <= 3, "TestFieldFamily: dimension must be 1, 2 or 3");
  for (int n = 0; members_.size() < count; ++n) {
    // All k with |k|_1 = n, first nonzero entry positive, in lexicographic order.
    std::vector<std::array<int, 3>> ks;
    std::array<int, 3> k{0, 0, 0};
    auto rec = [&](auto&& self, int a, int left) -> void {
      if (a == dim) {
        if (left != 0) return;
        for (int b = 0; b < dim; ++b) {
          if (k[b] == 0) continue;
          if (k[b] > 0) ks.push_back(k);
          return;
        }
        ks.push_back(k);  // k = 0
        return;
      }
      for (int v = -left; v <= left; ++v) {
        k[a] = v;
        self(self, a + 1, left - std::abs(v));
      }
      k[a] = 0;
    };
    rec(rec, 0, n);
    for (const auto& kk : ks)
      for (int c = 0; c < dim; ++c)
        for (int s = 0; s < (n == 0 ? 1 : 2); ++s) {
          if (members_.size() >= count) return;
          members_.push_back(Member{kk, c, s == 1});
        }
  }
}

Point TestFieldFamily::operator()(std::size_t i, const Point& u) const {
  const Member& m = members_.at(i);
  double phase = 0.0;
  for (int a = 0; a < dim_; ++a) phase += m.k[a] * u[a];
  phase *= 2.0 * std::numbers::pi;
  Point p{0.0, 0.0, 0.0};
  p[m.component] = m.sine ? std::sin(phase) : std::cos(phase);
  return p;
}

VectorFunction TestFieldFamily::field(std::size_t i) const {
  return [this, i](const Point& u) { return (*this)(i, u); };
}

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

ScalarField solve_poisson(const ScalarField& f) {
  const TorusGrid& g = f.grid;
  const int d = g.dim();
  const int M = g.side();
  const std::size_t n = g.size();
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = f[i];
  int dims[3] = {M, M, M};
  auto* data = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd = fftw_plan_dft(d, dims, data, data, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft(d, dims, data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  const double M2 = static_cast<double>(M) * M;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = g.coords(i);
    double lam = 0.0;
    for (int a = 0; a < d; ++a) {
      const double s = std::sin(std::numbers::pi * c[a] / M);
      lam -= 4.0 * M2 * s * s;
    }
    buf[i] = lam == 0.0 ? std::complex<double>(0.0) : buf[i] / lam;
  }
  fftw_execute(bwd);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  ScalarField phi(g);
  for (std::size_t i = 0; i < n; ++i) phi[i] = buf[i].real() / static_cast<double>(n);
  return phi;
}

ScalarField spectral_derivative(const ScalarField& f, int axis) {
  const TorusGrid& g = f.grid;
  require(axis >= 0 && axis < g.dim(), "spectral_derivative: bad axis");
  const int d = g.dim();
  const int M = g.side();
  const std::size_t n = g.size();
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = f[i];
  int dims[3] = {M, M, M};
  auto* data = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd = fftw_plan_dft(d, dims, data, data, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft(d, dims, data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  for (std::size_t i = 0; i < n; ++i) {
    int k = g.coords(i)[axis];
    if (2 * k == M) {
      buf[i] = 0.0;  // Nyquist mode has no odd derivative
      continue;
    }
    if (2 * k > M) k -= M;
    buf[i] *= std::complex<double>(0.0, 2.0 * std::numbers::pi * k);
  }
  fftw_execute(bwd);
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  ScalarField out(g);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real() / static_cast<double>(n);
  return out;
}

VectorField divergence_free_projection(const VectorField& J) {
  const ScalarField phi = solve_poisson(divergence(J));
  return J - gradient(phi);
}

}  // namespace fluctlab
