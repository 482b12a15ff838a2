#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#include "fluctlab/grid.hpp"

// Stencil and replica kernels in two flavours: `serial` is the reference,
// `omp` is the OpenMP version used by default. Both compute every output
// entry with the same floating-point expression, so results agree bit for bit.

namespace fluctlab::kernels {

// out[j][i] = (f[i + e_j] - f[i]) * M
// out[i]    = sum_j (w[j][i] - w[j][i - e_j]) * M
// out[i]    = sum_j (chi[j][i] (f[i+e_j]-f[i]) - chi[j][i-e_j] (f[i]-f[i-e_j])) * M^2
namespace serial {
void gradient(const TorusGrid& g, const double* f, double* const* out);
void divergence(const TorusGrid& g, const double* const* w, double* out);
void weighted_laplacian(const TorusGrid& g, const double* const* chi, const double* f, double* out);
}  // namespace serial

namespace omp {
void gradient(const TorusGrid& g, const double* f, double* const* out);
void divergence(const TorusGrid& g, const double* const* w, double* out);
void weighted_laplacian(const TorusGrid& g, const double* const* chi, const double* f, double* out);
}  // namespace omp

/// Runs f(0..n-1) and returns the results in index order.
template <class F>
auto map_replicas_serial(std::size_t n, F&& f) -> std::vector<decltype(f(std::size_t{0}))> {
  std::vector<decltype(f(std::size_t{0}))> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
  return out;
}

/// Same as map_replicas_serial but spread over OpenMP threads. Each slot is
/// written by exactly one iteration, so the output does not depend on the
/// thread count.
template <class F>
auto map_replicas_omp(std::size_t n, F&& f) -> std::vector<decltype(f(std::size_t{0}))> {
  std::vector<decltype(f(std::size_t{0}))> out(n);
  std::vector<std::exception_ptr> errors(n);
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = f(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace fluctlab::kernels
