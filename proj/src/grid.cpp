#include "fluctlab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fluctlab/error.hpp"
#include "fluctlab/kernels.hpp"

namespace fluctlab {

TorusGrid::TorusGrid(int dim, int side) : dim_(dim), side_(side) {
  require(dim >= 1 && dim <= 3, "torus dimension must be 1, 2 or 3");
  require(side >= 2, "torus side must be at least 2");
  size_ = 1;
  for (int a = 0; a < dim; ++a) size_ *= static_cast<std::size_t>(side);
  std::size_t s = 1;
  for (int a = dim - 1; a >= 0; --a) {
    stride_[a] = s;
    s *= static_cast<std::size_t>(side);
  }
  cell_volume_ = 1.0 / static_cast<double>(size_);
}

TorusGrid make_torus(int dim, int side) { return TorusGrid(dim, side); }

std::array<int, 3> TorusGrid::coords(std::size_t site) const noexcept {
  std::array<int, 3> c{0, 0, 0};
  for (int a = 0; a < dim_; ++a) c[a] = static_cast<int>((site / stride_[a]) % side_);
  return c;
}

std::size_t TorusGrid::index(const std::array<int, 3>& c) const noexcept {
  std::size_t s = 0;
  for (int a = 0; a < dim_; ++a) {
    int v = c[a] % side_;
    if (v < 0) v += side_;
    s += static_cast<std::size_t>(v) * stride_[a];
  }
  return s;
}

Point TorusGrid::corner(std::size_t site) const noexcept {
  const auto c = coords(site);
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) p[a] = c[a] * spacing();
  return p;
}

Point TorusGrid::center(std::size_t site) const noexcept {
  const auto c = coords(site);
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) p[a] = (c[a] + 0.5) * spacing();
  return p;
}

Point TorusGrid::face_center(std::size_t site, int axis) const noexcept {
  Point p = center(site);
  p[axis] += 0.5 * spacing();
  return p;
}

void require_same_grid(const TorusGrid& a, const TorusGrid& b, const char* what) {
  if (!(a == b)) throw InvalidArgument(std::string("grid mismatch in ") + what);
}

ScalarField ScalarField::sample(const TorusGrid& g, const ScalarFunction& f) {
  ScalarField out(g);
  for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = f(g.center(i));
  return out;
}

double ScalarField::mass() const noexcept {
  double s = 0.0;
  for (double v : values) s += v;
  return s * grid.cell_volume();
}

double ScalarField::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::fabs(v));
  return m;
}

double ScalarField::min() const noexcept { return *std::min_element(values.begin(), values.end()); }
double ScalarField::max() const noexcept { return *std::max_element(values.begin(), values.end()); }

double ScalarField::pair(const ScalarFunction& f) const {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * f(grid.center(i));
  return s * grid.cell_volume();
}

VectorField VectorField::sample(const TorusGrid& g, const VectorFunction& f) {
  VectorField out(g);
  for (int j = 0; j < g.dim(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i) out[j][i] = f(g.face_center(i, j))[j];
  return out;
}

VectorField VectorField::constant(const TorusGrid& g, const Point& c) {
  VectorField out(g);
  for (int j = 0; j < g.dim(); ++j) std::fill(out[j].begin(), out[j].end(), c[j]);
  return out;
}

double VectorField::max_abs() const noexcept {
  double m = 0.0;
  for (const auto& c : components)
    for (double v : c) m = std::max(m, std::fabs(v));
  return m;
}

double VectorField::pair(const VectorFunction& f) const {
  double s = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (int j = 0; j < dim(); ++j) s += (*this)[j][i] * f(grid.face_center(i, j))[j];
  return s * grid.cell_volume();
}

ScalarField operator+(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid, b.grid, "ScalarField +");
  ScalarField out(a.grid);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

ScalarField operator-(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid, b.grid, "ScalarField -");
  ScalarField out(a.grid);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

ScalarField operator*(double s, const ScalarField& a) {
  ScalarField out(a.grid);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

VectorField operator+(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid, b.grid, "VectorField +");
  VectorField out(a.grid);
  for (int j = 0; j < a.dim(); ++j)
    for (std::size_t i = 0; i < a.grid.size(); ++i) out[j][i] = a[j][i] + b[j][i];
  return out;
}

VectorField operator-(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid, b.grid, "VectorField -");
  VectorField out(a.grid);
  for (int j = 0; j < a.dim(); ++j)
    for (std::size_t i = 0; i < a.grid.size(); ++i) out[j][i] = a[j][i] - b[j][i];
  return out;
}

VectorField operator*(double s, const VectorField& a) {
  VectorField out(a.grid);
  for (int j = 0; j < a.dim(); ++j)
    for (std::size_t i = 0; i < a.grid.size(); ++i) out[j][i] = s * a[j][i];
  return out;
}

namespace {
std::array<double*, 3> ptrs(VectorField& w) {
  std::array<double*, 3> p{nullptr, nullptr, nullptr};
  for (int j = 0; j < w.dim(); ++j) p[j] = w[j].data();
  return p;
}
std::array<const double*, 3> cptrs(const VectorField& w) {
  std::array<const double*, 3> p{nullptr, nullptr, nullptr};
  for (int j = 0; j < w.dim(); ++j) p[j] = w[j].data();
  return p;
}
}  // namespace

VectorField gradient(const ScalarField& f) {
  VectorField out(f.grid);
  auto p = ptrs(out);
  kernels::omp::gradient(f.grid, f.values.data(), p.data());
  return out;
}

ScalarField divergence(const VectorField& w) {
  ScalarField out(w.grid);
  auto p = cptrs(w);
  kernels::omp::divergence(w.grid, p.data(), out.values.data());
  return out;
}

ScalarField laplacian(const ScalarField& f) { return divergence(gradient(f)); }

VectorField face_average(const ScalarField& f) {
  VectorField out(f.grid);
  const auto& g = f.grid;
  for (int j = 0; j < g.dim(); ++j)
    for (std::size_t i = 0; i < g.size(); ++i) out[j][i] = 0.5 * (f[i] + f[g.neighbor(i, j)]);
  return out;
}

double inner(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid, b.grid, "inner");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s * a.grid.cell_volume();
}

double inner(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid, b.grid, "inner");
  double s = 0.0;
  for (int j = 0; j < a.dim(); ++j)
    for (std::size_t i = 0; i < a.grid.size(); ++i) s += a[j][i] * b[j][i];
  return s * a.grid.cell_volume();
}

}  // namespace fluctlab
