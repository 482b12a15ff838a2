#include "fluctlab/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "fluctlab/error.hpp"

namespace fluctlab {

DriftField DriftField::zero(int dim) {
  DriftField F;
  F.dim = dim;
  return F;
}

DriftField DriftField::constant(int dim, const Point& E) {
  DriftField F;
  F.dim = dim;
  F.f = [E](double, const Point&) { return E; };
  for (int j = 0; j < dim; ++j) F.bound = std::max(F.bound, std::fabs(E[j]));
  return F;
}

DriftField DriftField::stationary(int dim, std::function<Point(const Point&)> g, double bound) {
  DriftField F;
  F.dim = dim;
  F.f = [g = std::move(g)](double, const Point& u) { return g(u); };
  F.bound = bound;
  return F;
}

DriftField DriftField::dynamic(int dim, std::function<Point(double, const Point&)> g, double bound) {
  DriftField F;
  F.dim = dim;
  F.f = std::move(g);
  F.bound = bound;
  F.time_dependent = true;
  return F;
}

DriftField DriftField::negated() const {
  DriftField F = *this;
  if (f) {
    auto g = f;
    F.f = [g](double t, const Point& u) {
      Point p = g(t, u);
      for (double& v : p) v = -v;
      return p;
    };
  }
  return F;
}

VectorField sample_field(const DriftField& F, const TorusGrid& g, double t) {
  VectorField out(g);
  if (F.is_zero()) return out;
  for (int j = 0; j < g.dim(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i) out[j][i] = F(t, g.face_center(i, j))[j];
  return out;
}

namespace {

std::mt19937_64 trajectory_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xd1ceu};
  return std::mt19937_64(seq);
}

// Uniform on [0,1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double exponential(std::mt19937_64& rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

// Binary indexed tree over non-negative weights with prefix-sum search.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : n_(n), tree_(n + 1, 0.0), w_(n, 0.0) {
    top_ = 1;
    while (top_ * 2 <= n_) top_ *= 2;
  }

  void set(std::size_t i, double w) {
    const double d = w - w_[i];
    if (d == 0.0) return;
    w_[i] = w;
    for (std::size_t k = i + 1; k <= n_; k += k & (~k + 1)) tree_[k] += d;
  }

  double weight(std::size_t i) const { return w_[i]; }

  void rebuild() {
    std::fill(tree_.begin(), tree_.end(), 0.0);
    for (std::size_t i = 0; i < n_; ++i) tree_[i + 1] = w_[i];
    for (std::size_t k = 1; k <= n_; ++k) {
      const std::size_t p = k + (k & (~k + 1));
      if (p <= n_) tree_[p] += tree_[k];
    }
  }

  double total() const {
    double s = 0.0;
    for (std::size_t k = n_; k > 0; k -= k & (~k + 1)) s += tree_[k];
    return s;
  }

  // Smallest i with prefix(i+1) > u.
  std::size_t find(double u) const {
    std::size_t pos = 0;
    for (std::size_t step = top_; step > 0; step >>= 1) {
      const std::size_t nxt = pos + step;
      if (nxt <= n_ && tree_[nxt] <= u) {
        pos = nxt;
        u -= tree_[nxt];
      }
    }
    return std::min(pos, n_ - 1);
  }

 private:
  std::size_t n_;
  std::size_t top_;
  std::vector<double> tree_;
  std::vector<double> w_;
};

void init_ledger(CurrentLedger& L, const LatticeState& initial, double T, bool log) {
  const std::size_t nb = initial.grid.size() * static_cast<std::size_t>(initial.grid.dim());
  L.grid = initial.grid;
  L.kind = initial.kind;
  L.horizon = T;
  L.net.assign(nb, 0.0);
  L.forward.assign(nb, 0.0);
  L.backward.assign(nb, 0.0);
  L.has_log = log;
  L.events.clear();
  L.initial = initial;
}

}  // namespace

Trajectory simulate_exclusion(const LatticeState& initial, double T, const DriftField& field, std::uint64_t seed,
                              const SimulationOptions& opts) {
  require(initial.kind == StateKind::exclusion, "simulate_exclusion needs an exclusion state");
  require(T > 0, "simulate_exclusion: T must be positive");
  const TorusGrid& g = initial.grid;
  const int d = g.dim();
  require(field.is_zero() || field.dim == d, "field dimension does not match the lattice");
  const double N = g.side();
  const double base = 0.5 * N * N;
  const std::size_t nb = g.size() * static_cast<std::size_t>(d);

  Trajectory out;
  init_ledger(out.ledger, initial, T, opts.record_events);
  std::vector<unsigned char> eta(g.size());
  for (std::size_t x = 0; x < g.size(); ++x) eta[x] = initial.values[x] != 0.0;

  // Entry 2b is the jump x -> x+e_j, entry 2b+1 the jump x+e_j -> x.
  const bool dynamic = field.time_dependent && !field.is_zero();
  std::vector<double> rate(2 * nb, base);
  const double envelope = base * std::exp(field.bound / N);
  if (dynamic) {
    std::fill(rate.begin(), rate.end(), envelope);
  } else if (!field.is_zero()) {
    for (std::size_t x = 0; x < g.size(); ++x) {
      const Point F = field(0.0, g.corner(x));
      for (int j = 0; j < d; ++j) {
        const std::size_t b = x * d + j;
        rate[2 * b] = base * std::exp(F[j] / N);
        rate[2 * b + 1] = base * std::exp(-F[j] / N);
      }
    }
  }

  Fenwick tree(2 * nb);
  auto refresh_bond = [&](std::size_t x, int j) {
    const std::size_t y = g.neighbor(x, j);
    const std::size_t b = x * d + j;
    tree.set(2 * b, (eta[x] && !eta[y]) ? rate[2 * b] : 0.0);
    tree.set(2 * b + 1, (eta[y] && !eta[x]) ? rate[2 * b + 1] : 0.0);
  };
  for (std::size_t x = 0; x < g.size(); ++x)
    for (int j = 0; j < d; ++j) refresh_bond(x, j);
  tree.rebuild();

  auto rng = trajectory_rng(seed);
  double t = 0.0;
  std::size_t since_rebuild = 0;
  while (true) {
    const double R = tree.total();
    if (!(R > 0.0)) break;
    t += exponential(rng, R);
    if (t > T) break;
    std::size_t e = tree.find(uniform01(rng) * R);
    if (tree.weight(e) == 0.0) {
      // Rounding drift in the partial sums; rebuild and redraw the target.
      tree.rebuild();
      e = tree.find(uniform01(rng) * tree.total());
      if (tree.weight(e) == 0.0) continue;
    }
    const std::size_t b = e / 2;
    const bool fwd = (e % 2) == 0;
    const std::size_t x = b / d;
    const int j = static_cast<int>(b % d);
    if (dynamic) {
      const double Fj = field(t, g.corner(x))[j];
      const double accept = std::exp(((fwd ? Fj : -Fj) - field.bound) / N);
      if (uniform01(rng) >= accept) continue;
    }
    const std::size_t y = g.neighbor(x, j);
    if (fwd) {
      eta[x] = 0;
      eta[y] = 1;
      out.ledger.net[b] += 1.0;
      out.ledger.forward[b] += 1.0;
    } else {
      eta[x] = 1;
      eta[y] = 0;
      out.ledger.net[b] -= 1.0;
      out.ledger.backward[b] += 1.0;
    }
    if (opts.record_events)
      out.ledger.events.push_back(
          JumpEvent{t, static_cast<std::uint32_t>(x), static_cast<std::uint8_t>(j), fwd ? 1.0 : -1.0});
    for (std::size_t s : {x, y})
      for (int a = 0; a < d; ++a) {
        refresh_bond(s, a);
        refresh_bond(g.neighbor(s, a, -1), a);
      }
    if (++since_rebuild >= opts.rebuild_interval) {
      tree.rebuild();
      since_rebuild = 0;
    }
  }

  out.final_state = LatticeState(g, StateKind::exclusion);
  for (std::size_t x = 0; x < g.size(); ++x) out.final_state.values[x] = eta[x];
  out.final_state.refresh_total();
  return out;
}

Trajectory simulate_kmp(const LatticeState& initial, double T, std::uint64_t seed, const SimulationOptions& opts) {
  require(initial.kind == StateKind::energy, "simulate_kmp needs an energy state");
  require(initial.grid.dim() == 1, "simulate_kmp is one-dimensional");
  require(T > 0, "simulate_kmp: T must be positive");
  const TorusGrid& g = initial.grid;
  const std::size_t n = g.size();
  const double N = g.side();
  const double R = N * N * static_cast<double>(n);

  Trajectory out;
  init_ledger(out.ledger, initial, T, opts.record_events);
  std::vector<double> eta = initial.values;
  auto rng = trajectory_rng(seed);
  double t = 0.0;
  while (true) {
    t += exponential(rng, R);
    if (t > T) break;
    const std::size_t x = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
    const std::size_t y = g.neighbor(x, 0);
    const double p = uniform01(rng);
    const double S = eta[x] + eta[y];
    const double nx = p * S;
    const double transfer = eta[x] - nx;
    eta[x] = nx;
    eta[y] = S - nx;
    out.ledger.net[x] += transfer;
    if (transfer > 0)
      out.ledger.forward[x] += transfer;
    else
      out.ledger.backward[x] -= transfer;
    if (opts.record_events) out.ledger.events.push_back(JumpEvent{t, static_cast<std::uint32_t>(x), 0, transfer});
  }
  out.final_state = LatticeState(g, StateKind::energy);
  out.final_state.values = eta;
  out.final_state.refresh_total();
  return out;
}

double CurrentLedger::gross_net_mismatch() const {
  double m = 0.0;
  for (std::size_t b = 0; b < net.size(); ++b) m = std::max(m, std::fabs(net[b] - (forward[b] - backward[b])));
  return m;
}

double CurrentLedger::conservation_defect(const LatticeState& final_state) const {
  require_same_grid(grid, final_state.grid, "conservation_defect");
  const int d = grid.dim();
  double m = 0.0;
  for (std::size_t x = 0; x < grid.size(); ++x) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += net[bond(grid.neighbor(x, j, -1), j)] - net[bond(x, j)];
    m = std::max(m, std::fabs(s - (final_state.values[x] - initial.values[x])));
  }
  return m;
}

LatticeState CurrentLedger::state_at(double t) const {
  require(has_log, "state_at needs the event log");
  require(t >= 0 && t <= horizon, "state_at: time outside the recorded horizon");
  LatticeState s = initial;
  for (const auto& ev : events) {
    if (ev.time > t) break;
    const std::size_t y = grid.neighbor(ev.site, ev.direction);
    s.values[ev.site] -= ev.amount;
    s.values[y] += ev.amount;
  }
  s.refresh_total();
  return s;
}

namespace {

// 5-point Gauss-Legendre on [0,1].
constexpr std::array<double, 5> kGLx{0.04691007703066800, 0.23076534494715845, 0.5, 0.76923465505284155,
                                     0.95308992296933200};
constexpr std::array<double, 5> kGLw{0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
                                     0.23931433524968324, 0.11846344252809454};

template <class F>
double integrate(F&& f, double a, double b) {
  if (b <= a) return 0.0;
  const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / 0.01)));
  const double h = (b - a) / pieces;
  double s = 0.0;
  for (int p = 0; p < pieces; ++p)
    for (int q = 0; q < 5; ++q) s += kGLw[q] * f(a + h * (p + kGLx[q]));
  return s * h;
}

}  // namespace

RnTerms log_rn_terms(const CurrentLedger& ledger, const DriftField& field, double T) {
  require(ledger.has_log, "log_rn_derivative needs the event log");
  require(ledger.kind == StateKind::exclusion, "log_rn_derivative is defined for exclusion dynamics");
  require(T > 0 && T <= ledger.horizon + 1e-12, "log_rn_derivative: T outside the recorded horizon");
  RnTerms r;
  if (field.is_zero()) return r;
  const TorusGrid& g = ledger.grid;
  const int d = g.dim();
  const double N = g.side();
  const double base = 0.5 * N * N;
  const double scale = g.cell_volume();
  const std::size_t nb = g.size() * static_cast<std::size_t>(d);

  std::vector<unsigned char> eta(g.size());
  for (std::size_t x = 0; x < g.size(); ++x) eta[x] = ledger.initial.values[x] != 0.0;
  auto fwd_open = [&](std::size_t b) {
    const std::size_t x = b / d;
    return eta[x] && !eta[g.neighbor(x, static_cast<int>(b % d))];
  };
  auto bwd_open = [&](std::size_t b) {
    const std::size_t x = b / d;
    return !eta[x] && eta[g.neighbor(x, static_cast<int>(b % d))];
  };

  double stochastic = 0.0, fwd_int = 0.0, bwd_int = 0.0;
  std::vector<std::size_t> touched;
  auto collect = [&](std::size_t x, std::size_t y) {
    touched.clear();
    for (std::size_t s : {x, y})
      for (int a = 0; a < d; ++a) {
        touched.push_back(s * d + a);
        touched.push_back(g.neighbor(s, a, -1) * d + a);
      }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  };
  auto apply = [&](const JumpEvent& ev) {
    const std::size_t y = g.neighbor(ev.site, ev.direction);
    if (ev.amount > 0) {
      eta[ev.site] = 0;
      eta[y] = 1;
    } else {
      eta[ev.site] = 1;
      eta[y] = 0;
    }
  };

  if (!field.time_dependent) {
    std::vector<double> a(nb), c(nb), Fb(nb);
    for (std::size_t x = 0; x < g.size(); ++x) {
      const Point F = field(0.0, g.corner(x));
      for (int j = 0; j < d; ++j) {
        const std::size_t b = x * d + j;
        Fb[b] = F[j];
        a[b] = base * std::expm1(F[j] / N);
        c[b] = base * std::expm1(-F[j] / N);
      }
    }
    double Sf = 0.0, Sb = 0.0;
    auto resum = [&] {
      Sf = Sb = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        if (fwd_open(b)) Sf += a[b];
        if (bwd_open(b)) Sb += c[b];
      }
    };
    resum();
    double t = 0.0;
    std::size_t count = 0;
    for (const auto& ev : ledger.events) {
      if (ev.time > T) break;
      fwd_int += Sf * (ev.time - t);
      bwd_int += Sb * (ev.time - t);
      t = ev.time;
      const std::size_t b = static_cast<std::size_t>(ev.site) * d + ev.direction;
      stochastic += ev.amount * Fb[b] / N;
      collect(ev.site, g.neighbor(ev.site, ev.direction));
      for (std::size_t k : touched) {
        if (fwd_open(k)) Sf -= a[k];
        if (bwd_open(k)) Sb -= c[k];
      }
      apply(ev);
      for (std::size_t k : touched) {
        if (fwd_open(k)) Sf += a[k];
        if (bwd_open(k)) Sb += c[k];
      }
      if (++count % 4096 == 0) resum();
    }
    fwd_int += Sf * (T - t);
    bwd_int += Sb * (T - t);
  } else {
    // Per-bond open intervals, integrated exactly in time by quadrature.
    std::vector<double> f_since(nb, -1.0), b_since(nb, -1.0);
    auto close_f = [&](std::size_t b, double t) {
      const Point u = g.corner(b / d);
      const int j = static_cast<int>(b % d);
      fwd_int += base * integrate([&](double s) { return std::expm1(field(s, u)[j] / N); }, f_since[b], t);
      f_since[b] = -1.0;
    };
    auto close_b = [&](std::size_t b, double t) {
      const Point u = g.corner(b / d);
      const int j = static_cast<int>(b % d);
      bwd_int += base * integrate([&](double s) { return std::expm1(-field(s, u)[j] / N); }, b_since[b], t);
      b_since[b] = -1.0;
    };
    for (std::size_t b = 0; b < nb; ++b) {
      if (fwd_open(b)) f_since[b] = 0.0;
      if (bwd_open(b)) b_since[b] = 0.0;
    }
    for (const auto& ev : ledger.events) {
      if (ev.time > T) break;
      stochastic += ev.amount * field(ev.time, g.corner(ev.site))[ev.direction] / N;
      collect(ev.site, g.neighbor(ev.site, ev.direction));
      apply(ev);
      for (std::size_t k : touched) {
        const bool fo = fwd_open(k), bo = bwd_open(k);
        if (f_since[k] >= 0 && !fo) close_f(k, ev.time);
        if (f_since[k] < 0 && fo) f_since[k] = ev.time;
        if (b_since[k] >= 0 && !bo) close_b(k, ev.time);
        if (b_since[k] < 0 && bo) b_since[k] = ev.time;
      }
    }
    for (std::size_t b = 0; b < nb; ++b) {
      if (f_since[b] >= 0) close_f(b, T);
      if (b_since[b] >= 0) close_b(b, T);
    }
  }
  r.stochastic = scale * stochastic;
  r.forward_rate = scale * fwd_int;
  r.backward_rate = scale * bwd_int;
  r.total = r.stochastic - r.forward_rate - r.backward_rate;
  return r;
}

double log_rn_derivative(const CurrentLedger& ledger, const DriftField& field, double T) {
  return log_rn_terms(ledger, field, T).total;
}

}  // namespace fluctlab
