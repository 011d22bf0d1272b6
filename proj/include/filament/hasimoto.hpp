#pragma once

#include <string>
#include <vector>

#include "filament/geometry.hpp"
#include "filament/spacetime.hpp"

// Dictionary between filament functions and curves.
//
//   psi = c exp(i int_0^x tau)
//   T_x = Re(conj(psi) N),      N_x = -psi T
//   T_t = Im(conj(psi_x) N),    N_t = -i psi_x T + i kappa (|psi|^2 - A) N
//   chi_t = Im(conj(psi) N) = T ^ T_x
//
// kappa = 1/2 is the value for which these laws are compatible with
// i psi_t + psi_xx + kappa (|psi|^2 - A) psi = 0.

namespace filament {

struct CurveEvolution {
  std::vector<double> times;
  std::vector<SampledCurve> curves;
  std::vector<FrameField> frames;
  // filament function at the nodes of each slice; empty when unknown
  std::vector<std::vector<cplx>> psi;
  // non-fatal diagnostics (gauge mismatch at the anchor)
  std::vector<std::string> warnings;

  std::size_t slices() const { return times.size(); }
};

/// psi = c exp(i int_0^x tau), cumulative Simpson for the phase.
ComplexField filament_from_ct(const CurvatureTorsion& ct);

struct ReconstructOptions {
  double kappa = 0.5;
  // per-step tolerance on the Gram residual before re-projection
  double frame_drift_tol = 1e-6;
  double gauge_tol = 1e-6;
};

/// Anchor frames in t at x0 by the (T_t, N_t) laws, then Koiso in x on each slice.
/// anchor_time must be one of field.times, anchor_x a grid node.
CurveEvolution reconstruct_evolution(const SpaceTimeField& field, const Frame& base_frame,
                                     const Vec3& base_point, double anchor_time, double anchor_x,
                                     const ReconstructOptions& opt = {});

/// Commuted order: Koiso in x at anchor_time, then every node in t.
CurveEvolution reconstruct_evolution_commuted(const SpaceTimeField& field, const Frame& base_frame,
                                              const Vec3& base_point, double anchor_time,
                                              double anchor_x, const ReconstructOptions& opt = {});

/// max over interior slices and nodes of |chi_t - chi_x ^ chi_xx| (centred differences).
double vfe_residual(const CurveEvolution& evo);

/// psi_x: spectral on periodic grids, sixth-order differences on line grids.
ComplexField space_derivative(const ComplexField& psi);

/// Time-derivative state of the anchor: frame and point, propagated by RK4
/// across the sampled times with cubic interpolation of psi(., x0), psi_x(., x0), A.
struct AnchorTrack {
  std::vector<Frame> frames;
  std::vector<Vec3> points;
};
AnchorTrack propagate_anchor(const std::vector<double>& times, const std::vector<cplx>& psi,
                             const std::vector<cplx>& psi_x, const std::vector<double>& A,
                             std::size_t k0, const Frame& frame0, const Vec3& point0,
                             const ReconstructOptions& opt = {});

/// CSV per slice (slice_00000.csv, ...) plus index.json in dir.
void write_curve_evolution(const std::string& dir, const CurveEvolution& evo);

}  // namespace filament
