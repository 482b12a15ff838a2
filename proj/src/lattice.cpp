#include "fluctlab/lattice.hpp"

#include <cmath>
#include <random>

#include "fluctlab/error.hpp"

namespace fluctlab {

Model parse_model(const std::string& name) {
  if (name == "ssep" || name == "wasep") return Model::ssep;
  if (name == "kmp") return Model::kmp;
  throw InvalidArgument("unknown model '" + name + "' (expected ssep, wasep or kmp)");
}

std::string model_name(Model m) {
  switch (m) {
    case Model::ssep: return "ssep";
    case Model::kmp: return "kmp";
    default: return "custom";
  }
}

namespace {
double fd_step(double r) { return 1e-4 * std::max(1.0, std::fabs(r)); }
}  // namespace

double TransportCoefficients::dchi(double r) const {
  if (chi_d1) return chi_d1(r);
  const double h = fd_step(r);
  return (chi(r + h) - chi(r - h)) / (2 * h);
}

double TransportCoefficients::d2chi(double r) const {
  if (chi_d2) return chi_d2(r);
  const double h = fd_step(r);
  return (chi(r + h) - 2 * chi(r) + chi(r - h)) / (h * h);
}

bool TransportCoefficients::inverse_mobility_convex() const {
  // Sample (1/chi)'' = (2 chi'^2 - chi chi'') / chi^3 on the open interval.
  const double a = lo;
  const double b = bounded_above() ? hi : lo + 10.0;
  constexpr int n = 200;
  for (int i = 1; i < n; ++i) {
    const double r = a + (b - a) * i / n;
    const double c = chi(r);
    if (c <= 0) return false;
    const double c1 = dchi(r);
    const double c2 = d2chi(r);
    if (2 * c1 * c1 - c * c2 < -1e-9 * c * c * c) return false;
  }
  return true;
}

double TransportCoefficients::d_potential(double r) const {
  if (model == Model::ssep || model == Model::kmp) return r;
  // Simpson on [0, r] for custom D.
  constexpr int n = 64;
  const double h = r / n;
  double s = D(0.0) + D(r);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * D(i * h);
  return s * h / 3.0;
}

TransportCoefficients coefficients_for(Model model) {
  TransportCoefficients c;
  c.model = model;
  c.D = [](double) { return 1.0; };
  switch (model) {
    case Model::ssep:
      c.chi = [](double r) { return r * (1.0 - r); };
      c.chi_d1 = [](double r) { return 1.0 - 2.0 * r; };
      c.chi_d2 = [](double) { return -2.0; };
      c.lo = 0.0;
      c.hi = 1.0;
      break;
    case Model::kmp:
      c.chi = [](double r) { return r * r; };
      c.chi_d1 = [](double r) { return 2.0 * r; };
      c.chi_d2 = [](double) { return 2.0; };
      c.lo = 0.0;
      c.hi = std::numeric_limits<double>::infinity();
      break;
    default:
      throw InvalidArgument("coefficients_for: use coefficients_custom for custom models");
  }
  return c;
}

TransportCoefficients coefficients_custom(std::function<double(double)> chi, std::function<double(double)> D,
                                          double lo, double hi) {
  require(static_cast<bool>(chi) && static_cast<bool>(D), "custom coefficients need chi and D");
  require(lo < hi, "admissible interval must be non-empty");
  const double b = std::isfinite(hi) ? hi : lo + 10.0;
  constexpr int n = 400;
  for (int i = 0; i <= n; ++i) {
    const double r = lo + (b - lo) * i / n;
    if (chi(r) < 0) throw InvalidArgument("custom mobility is negative at rho = " + std::to_string(r));
  }
  TransportCoefficients c;
  c.model = Model::custom;
  c.chi = std::move(chi);
  c.D = std::move(D);
  c.lo = lo;
  c.hi = hi;
  return c;
}

double LatticeState::total() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

void LatticeState::validate() const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (kind == StateKind::exclusion ? (v != 0.0 && v != 1.0) : !(v >= 0.0))
      throw InvalidArgument("invalid site value at " + std::to_string(i));
  }
}

LatticeState random_state(const TorusGrid& grid, StateKind kind, const ScalarFunction& profile,
                          std::uint64_t seed) {
  LatticeState s(grid, kind);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t x = 0; x < grid.size(); ++x) {
    const double p = profile(grid.corner(x));
    if (kind == StateKind::exclusion) {
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("exclusion profile must lie in [0,1]");
      const double u = unif(rng);
      s.values[x] = u < p ? 1.0 : 0.0;
    } else {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("energy profile must be >= 0");
      const double u = unif(rng);
      s.values[x] = p == 0.0 ? 0.0 : -p * std::log1p(-u);
    }
  }
  s.refresh_total();
  return s;
}

LatticeState random_state(const TorusGrid& grid, StateKind kind, double m, std::uint64_t seed) {
  return random_state(grid, kind, [m](const Point&) { return m; }, seed);
}

}  // namespace fluctlab
