#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fluctlab {

using Point = std::array<double, 3>;

/// Discrete d-dimensional torus with `side` points per axis.
///
/// Sites are indexed row-major: axis 0 is the slowest-varying coordinate.
/// The same geometry serves the microscopic lattice (side N) and the
/// continuum discretization of the unit torus (side M).
class TorusGrid {
 public:
  TorusGrid() = default;
  TorusGrid(int dim, int side);

  int dim() const noexcept { return dim_; }
  int side() const noexcept { return side_; }
  std::size_t size() const noexcept { return size_; }
  double spacing() const noexcept { return 1.0 / side_; }
  /// Volume of one cell, side^{-d}.
  double cell_volume() const noexcept { return cell_volume_; }

  std::array<int, 3> coords(std::size_t site) const noexcept;
  std::size_t index(const std::array<int, 3>& c) const noexcept;

  /// Site reached from `site` by `steps` moves along `axis` (periodic).
  std::size_t neighbor(std::size_t site, int axis, int steps = 1) const noexcept {
    const std::size_t stride = stride_[axis];
    const int c = static_cast<int>((site / stride) % side_);
    int n = (c + steps) % side_;
    if (n < 0) n += side_;
    return site + (static_cast<std::ptrdiff_t>(n) - c) * static_cast<std::ptrdiff_t>(stride);
  }

  /// Lower-left corner x/side of the cell of `site`.
  Point corner(std::size_t site) const noexcept;
  /// Centre (x + 1/2)/side of the cell of `site`.
  Point center(std::size_t site) const noexcept;
  /// Centre of the face between `site` and `site + e_axis`.
  Point face_center(std::size_t site, int axis) const noexcept;

  bool operator==(const TorusGrid& o) const noexcept {
    return dim_ == o.dim_ && side_ == o.side_;
  }

 private:
  int dim_ = 0;
  int side_ = 0;
  std::size_t size_ = 0;
  double cell_volume_ = 0.0;
  std::array<std::size_t, 3> stride_{};
};

/// Rejects d outside {1,2,3} and N < 2.
TorusGrid make_torus(int dim, int side);

using ScalarFunction = std::function<double(const Point&)>;
using VectorFunction = std::function<Point(const Point&)>;

/// Grid function on the unit torus, one value per cell.
struct ScalarField {
  TorusGrid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const TorusGrid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}

  static ScalarField sample(const TorusGrid& g, const ScalarFunction& f);
  static ScalarField constant(const TorusGrid& g, double c) { return ScalarField(g, c); }

  std::size_t size() const noexcept { return values.size(); }
  double& operator[](std::size_t i) noexcept { return values[i]; }
  double operator[](std::size_t i) const noexcept { return values[i]; }

  /// Grid average, i.e. the integral over the unit torus.
  double mass() const noexcept;
  double max_abs() const noexcept;
  double min() const noexcept;
  double max() const noexcept;
  /// Midpoint quadrature of the field against f.
  double pair(const ScalarFunction& f) const;
};

/// Staggered vector field: component j at cell i lives on the face between
/// cells i and i + e_j and is the flux across that face.
struct VectorField {
  TorusGrid grid;
  std::vector<std::vector<double>> components;

  VectorField() = default;
  explicit VectorField(const TorusGrid& g, double fill = 0.0)
      : grid(g), components(static_cast<std::size_t>(g.dim()), std::vector<double>(g.size(), fill)) {}

  /// Samples F_j at the centre of face (i, j).
  static VectorField sample(const TorusGrid& g, const VectorFunction& f);
  static VectorField constant(const TorusGrid& g, const Point& c);

  int dim() const noexcept { return grid.dim(); }
  std::vector<double>& operator[](int j) noexcept { return components[static_cast<std::size_t>(j)]; }
  const std::vector<double>& operator[](int j) const noexcept {
    return components[static_cast<std::size_t>(j)];
  }

  double max_abs() const noexcept;
  /// Face-midpoint quadrature of <J, F>.
  double pair(const VectorFunction& f) const;
};

ScalarField operator+(const ScalarField& a, const ScalarField& b);
ScalarField operator-(const ScalarField& a, const ScalarField& b);
ScalarField operator*(double s, const ScalarField& a);
VectorField operator+(const VectorField& a, const VectorField& b);
VectorField operator-(const VectorField& a, const VectorField& b);
VectorField operator*(double s, const VectorField& a);

// Discrete calculus on the staggered periodic grid. div is the negative
// adjoint of grad under the grid inner products, exactly.
VectorField gradient(const ScalarField& f);
ScalarField divergence(const VectorField& w);
ScalarField laplacian(const ScalarField& f);
/// Arithmetic mean of the two cells adjacent to each face.
VectorField face_average(const ScalarField& f);

double inner(const ScalarField& a, const ScalarField& b);
double inner(const VectorField& a, const VectorField& b);

void require_same_grid(const TorusGrid& a, const TorusGrid& b, const char* what);

}  // namespace fluctlab
