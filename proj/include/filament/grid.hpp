#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace filament {

using cplx = std::complex<double>;

/// Uniform 1D grid in the arclength variable. Periodic grids exclude x_max,
/// line grids include both endpoints.
struct Grid1D {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t n = 8;
  bool periodic = false;

  static Grid1D line(double x_min, double x_max, std::size_t n);
  static Grid1D periodic_box(double x_min, double x_max, std::size_t n);
  /// Periodic box [-length/2, length/2) with n nodes.
  static Grid1D centered_box(double length, std::size_t n);

  double dx() const { return periodic ? (x_max - x_min) / double(n) : (x_max - x_min) / double(n - 1); }
  double x(std::size_t j) const { return x_min + double(j) * dx(); }
  double length() const { return x_max - x_min; }
  std::vector<double> nodes() const;

  /// Nearest node index to x; throws if x is not a node within tol*dx.
  std::size_t node_index(double x, double tol = 1e-9) const;

  void validate() const;
  bool same_as(const Grid1D& other) const;
};

/// Complex samples of one function of x at a single time.
struct ComplexField {
  Grid1D grid;
  std::vector<cplx> values;

  ComplexField() = default;
  explicit ComplexField(Grid1D g) : grid(g), values(g.n, cplx(0.0, 0.0)) {}
  ComplexField(Grid1D g, std::vector<cplx> v);

  std::size_t size() const { return values.size(); }
  cplx& operator[](std::size_t j) { return values[j]; }
  const cplx& operator[](std::size_t j) const { return values[j]; }

  double l2_norm() const;
  double max_abs() const;
};

/// Sup-norm distance between two fields on the same grid.
double sup_distance(const ComplexField& a, const ComplexField& b);
/// Discrete L2 distance between two fields on the same grid.
double l2_distance(const ComplexField& a, const ComplexField& b);

class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void require_same_grid(const Grid1D& a, const Grid1D& b, const std::string& what);

}  // namespace filament
