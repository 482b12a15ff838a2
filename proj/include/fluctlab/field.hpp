#pragma once

#include <functional>

#include "fluctlab/grid.hpp"

namespace fluctlab {

/// External field F(t, u) on [0,T] x torus. `bound` must dominate |F_j|
/// everywhere; it drives the thinning envelope for time-dependent fields.
struct DriftField {
  int dim = 1;
  std::function<Point(double, const Point&)> f;
  double bound = 0.0;
  bool time_dependent = false;

  static DriftField zero(int dim);
  static DriftField constant(int dim, const Point& E);
  static DriftField stationary(int dim, std::function<Point(const Point&)> g, double bound);
  static DriftField dynamic(int dim, std::function<Point(double, const Point&)> g, double bound);

  bool is_zero() const { return !f; }
  Point operator()(double t, const Point& u) const {
    if (!f) return Point{0.0, 0.0, 0.0};
    return f(t, u);
  }
  DriftField negated() const;
};

/// F(t, .) sampled at the face centres of g.
VectorField sample_field(const DriftField& F, const TorusGrid& g, double t);

}  // namespace fluctlab
