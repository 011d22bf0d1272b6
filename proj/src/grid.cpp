#include "filament/grid.hpp"

#include <cmath>
#include <sstream>

#include "filament/simd.hpp"

namespace filament {

Grid1D Grid1D::line(double x_min, double x_max, std::size_t n) {
  Grid1D g{x_min, x_max, n, false};
  g.validate();
  return g;
}

Grid1D Grid1D::periodic_box(double x_min, double x_max, std::size_t n) {
  Grid1D g{x_min, x_max, n, true};
  g.validate();
  return g;
}

Grid1D Grid1D::centered_box(double length, std::size_t n) {
  return periodic_box(-0.5 * length, 0.5 * length, n);
}

std::vector<double> Grid1D::nodes() const {
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = x(j);
  return out;
}

std::size_t Grid1D::node_index(double xq, double tol) const {
  const double r = (xq - x_min) / dx();
  const double k = std::round(r);
  if (std::abs(r - k) > tol || k < 0 || k >= double(n)) {
    std::ostringstream msg;
    msg << "x = " << xq << " is not a grid node";
    throw std::invalid_argument(msg.str());
  }
  return std::size_t(k);
}

void Grid1D::validate() const {
  if (n < 8) throw std::invalid_argument("grid needs at least 8 points");
  if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max))
    throw std::invalid_argument("grid needs finite x_min < x_max");
}

bool Grid1D::same_as(const Grid1D& o) const {
  const double tol = 1e-12 * std::max(1.0, std::abs(x_max - x_min));
  return n == o.n && periodic == o.periodic && std::abs(x_min - o.x_min) <= tol &&
         std::abs(x_max - o.x_max) <= tol;
}

void require_same_grid(const Grid1D& a, const Grid1D& b, const std::string& what) {
  if (!a.same_as(b)) throw GridMismatch(what + ": grid mismatch");
}

ComplexField::ComplexField(Grid1D g, std::vector<cplx> v) : grid(g), values(std::move(v)) {
  if (values.size() != grid.n) throw std::invalid_argument("field size does not match grid");
}

double ComplexField::l2_norm() const {
  return std::sqrt(simd::kernels().sum_abs2(values) * grid.dx());
}

double ComplexField::max_abs() const { return simd::kernels().max_abs(values); }

double sup_distance(const ComplexField& a, const ComplexField& b) {
  require_same_grid(a.grid, b.grid, "sup_distance");
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

double l2_distance(const ComplexField& a, const ComplexField& b) {
  require_same_grid(a.grid, b.grid, "l2_distance");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::norm(a[j] - b[j]);
  return std::sqrt(s * a.grid.dx());
}

}  // namespace filament
