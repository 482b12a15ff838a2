#include "fluctlab/kernels.hpp"

#include <cstddef>

namespace fluctlab::kernels {

namespace {

inline double grad_at(const TorusGrid& g, const double* f, std::size_t i, int j, double M) {
  return (f[g.neighbor(i, j)] - f[i]) * M;
}

inline double div_at(const TorusGrid& g, const double* const* w, std::size_t i, double M) {
  double s = 0.0;
  for (int j = 0; j < g.dim(); ++j) s += (w[j][i] - w[j][g.neighbor(i, j, -1)]) * M;
  return s;
}

inline double wlap_at(const TorusGrid& g, const double* const* chi, const double* f, std::size_t i, double M2) {
  double s = 0.0;
  for (int j = 0; j < g.dim(); ++j) {
    const std::size_t up = g.neighbor(i, j);
    const std::size_t dn = g.neighbor(i, j, -1);
    s += (chi[j][i] * (f[up] - f[i]) - chi[j][dn] * (f[i] - f[dn])) * M2;
  }
  return s;
}

}  // namespace

namespace serial {

void gradient(const TorusGrid& g, const double* f, double* const* out) {
  const double M = g.side();
  for (int j = 0; j < g.dim(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i) out[j][i] = grad_at(g, f, i, j, M);
}

void divergence(const TorusGrid& g, const double* const* w, double* out) {
  const double M = g.side();
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = div_at(g, w, i, M);
}

void weighted_laplacian(const TorusGrid& g, const double* const* chi, const double* f, double* out) {
  const double M2 = static_cast<double>(g.side()) * g.side();
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = wlap_at(g, chi, f, i, M2);
}

}  // namespace serial

namespace omp {

// Below this size thread start-up dominates.
constexpr long long kMinParallel = 1 << 14;

void gradient(const TorusGrid& g, const double* f, double* const* out) {
  const double M = g.side();
  const long long n = static_cast<long long>(g.size());
  for (int j = 0; j < g.dim(); ++j) {
    double* o = out[j];
#pragma omp parallel for schedule(static) if (n >= kMinParallel)
    for (long long i = 0; i < n; ++i) o[i] = grad_at(g, f, static_cast<std::size_t>(i), j, M);
  }
}

void divergence(const TorusGrid& g, const double* const* w, double* out) {
  const double M = g.side();
  const long long n = static_cast<long long>(g.size());
#pragma omp parallel for schedule(static) if (n >= kMinParallel)
  for (long long i = 0; i < n; ++i) out[i] = div_at(g, w, static_cast<std::size_t>(i), M);
}

void weighted_laplacian(const TorusGrid& g, const double* const* chi, const double* f, double* out) {
  const double M2 = static_cast<double>(g.side()) * g.side();
  const long long n = static_cast<long long>(g.size());
#pragma omp parallel for schedule(static) if (n >= kMinParallel)
  for (long long i = 0; i < n; ++i) out[i] = wlap_at(g, chi, f, static_cast<std::size_t>(i), M2);
}

}  // namespace omp

}  // namespace fluctlab::kernels
