#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "filament/grid.hpp"

namespace filament {

using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;

/// Orthonormal right-handed frame (T, e1, e2). N = e1 + i e2.
struct Frame {
  Vec3 T = Vec3::UnitX();
  Vec3 e1 = Vec3::UnitY();
  Vec3 e2 = Vec3::UnitZ();

  static Frame canonical() { return {}; }
  static Frame from_normal(const Vec3& T, const CVec3& N);
  CVec3 N() const { return e1.cast<cplx>() + cplx(0, 1) * e2.cast<cplx>(); }
  /// Columns T, e1, e2.
  Mat3 matrix() const;
  /// max |G - I| over the Gram matrix entries.
  double gram_residual() const;
  double det() const;
  /// Nearest orthonormal frame: T normalised, (e1, e2) projected off T and
  /// symmetrically orthonormalised.
  Frame orthonormalized() const;
  Frame rotated(const Mat3& R) const { return {R * T, R * e1, R * e2}; }
};

class FrameError : public std::runtime_error {
 public:
  FrameError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Throws FrameError if the frame is not orthonormal right-handed within tol.
void require_orthonormal(const Frame& f, double tol = 1e-12);

struct SampledCurve {
  Grid1D grid;
  std::vector<Vec3> points;
  std::optional<std::size_t> corner_index;

  std::size_t size() const { return points.size(); }
  /// max_j | |chi_{j+1} - chi_j| / dx - 1 |
  double arclength_defect() const;
  SampledCurve transformed(const Mat3& R, const Vec3& b) const;
};

struct FrameField {
  Grid1D grid;
  std::vector<Vec3> T, e1, e2;

  std::size_t size() const { return T.size(); }
  Frame at(std::size_t j) const { return {T[j], e1[j], e2[j]}; }
  CVec3 N(std::size_t j) const { return at(j).N(); }
  void set(std::size_t j, const Frame& f) {
    T[j] = f.T;
    e1[j] = f.e1;
    e2[j] = f.e2;
  }
  double max_gram_residual() const;
  double max_det_defect() const;
};

struct CurvatureTorsion {
  Grid1D grid;
  std::vector<double> c, tau;
  // per-node flags: invalid (corner/endpoint stencil), degenerate (c ~ 0, tau set to 0)
  std::vector<char> invalid, degenerate;

  static CurvatureTorsion uniform(const Grid1D& g, double c, double tau);
  static CurvatureTorsion from_functions(const Grid1D& g, const std::function<double(double)>& c,
                                         const std::function<double(double)>& tau);
};

struct CurveAndFrames {
  SampledCurve curve;
  FrameField frames;
};

/// Frame generator: the frame obeys
///   T' = k1 e1 + k2 e2,  e1' = -k1 T + k3 e2,  e2' = -k2 T - k3 e1,
/// with (k1, k2, k3) = gen(x).  Frenet: (c, 0, tau).  Koiso: (Re psi, Im psi, 0).
using FrameGenerator = std::function<Vec3(double)>;

/// RK4 on (chi, T, e1, e2) from node `base` in both directions with a
/// Gram-Schmidt projection after every step.
CurveAndFrames integrate_frame(const Grid1D& grid, const FrameGenerator& gen, const Frame& frame0,
                               const Vec3& point0, std::size_t base);

/// Frenet integration of sampled (c, tau); frame0 = (T, n, b) at x0.
CurveAndFrames integrate_frenet(const CurvatureTorsion& ct, const Frame& frame0, const Vec3& point0,
                                double x0);
/// Frenet integration with (c, tau) given as exact functions of x.
CurveAndFrames integrate_frenet(const Grid1D& grid, const std::function<double(double)>& c,
                                const std::function<double(double)>& tau, const Frame& frame0,
                                const Vec3& point0, double x0);

/// Koiso integration T' = Re(conj(psi) N), N' = -psi T of a sampled field.
CurveAndFrames integrate_koiso(const ComplexField& psi, const Frame& frame0, const Vec3& point0,
                               double x0);
/// Same with psi evaluated exactly at every RK stage.
CurveAndFrames integrate_koiso(const Grid1D& grid, const std::function<cplx(double)>& psi,
                               const Frame& frame0, const Vec3& point0, double x0);

/// c = |chi' x chi''| / |chi'|^3, tau = (chi' x chi'') . chi''' / |chi' x chi''|^2 from
/// fourth-order centred differences.
CurvatureTorsion extract_curvature_torsion(const SampledCurve& curve, double degenerate_below = 1e-12);

/// Fourth-order first derivative of a sampled curve (one-sided near line-grid ends).
std::vector<Vec3> curve_derivative(const SampledCurve& curve);

/// Sampled value at a node-aligned offset with 6-point Lagrange interpolation
/// (line grids) at x; x must lie within the grid.
double lagrange_eval(const Grid1D& grid, const std::vector<double>& f, double x, int points = 6);
cplx lagrange_eval(const Grid1D& grid, const std::vector<cplx>& f, double x, int points = 6);
Vec3 lagrange_eval(const Grid1D& grid, const std::vector<Vec3>& f, double x, int points = 6);

/// Rotation R with R*a1 ~ b1 and R*a2 ~ b2 (least squares, Kabsch).
Mat3 aligning_rotation(const std::vector<Vec3>& from, const std::vector<Vec3>& to);

/// CSV with header x,chi_x,chi_y,chi_z,T_x,T_y,T_z.
void write_curve_csv(std::ostream& os, const SampledCurve& curve, const std::vector<Vec3>& tangent);
void write_curve_csv(const std::string& path, const SampledCurve& curve,
                     const std::vector<Vec3>& tangent);
struct CurveCsv {
  SampledCurve curve;
  std::vector<Vec3> tangent;
};
CurveCsv read_curve_csv(std::istream& is, bool periodic = false);
CurveCsv read_curve_csv(const std::string& path, bool periodic = false);

}  // namespace filament
