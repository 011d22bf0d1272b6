#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "filament/hasimoto.hpp"
#include "filament/self_similar.hpp"

// Diagnostics of evolutions that develop a corner as t -> 0+: limits in x,
// traces at t = 0, and convergence of the rescaled frames to the self-similar
// profile. The frames of the input evolutions are Koiso frames (as produced by
// reconstruct_evolution); N = e1 + i e2.

namespace filament {

/// Phi(t, x) = -a^2 log sqrt(t) + a^2 log|x|; x != 0.
double modulation_phase(double a, double t, double x);

/// N~ = N e^{i Phi}; the node x = 0 is left invalid.
struct ModulatedNormal {
  Grid1D grid;
  double t = 0.0, a = 0.0;
  std::vector<CVec3> values;
  std::vector<char> valid;

  /// Largest defect of |Re N~| = |Im N~| = 1, Re N~ . Im N~ = 0, N~ . T = 0.
  double frame_defect(const FrameField& F) const;
};
ModulatedNormal modulated_normal(const FrameField& F, double t, double a);

struct SpatialLimits {
  Vec3 T_plus = Vec3::Zero(), T_minus = Vec3::Zero();
  CVec3 N_plus = CVec3::Zero(), N_minus = CVec3::Zero();
  std::vector<Vec3> T_plus_per_slice, T_minus_per_slice;
  double time_variation = 0.0;  // max over slices of the change of the fitted T limits
  double rms = 0.0;             // worst RMS residual of the tail fits
  bool converged = false;
  std::string reason;
};

/// Tail fits T = T_inf + c1 x^(-1/2) + c2 x^(-1) + c3 x^(-2) over [x_max/2, x_max] on each side,
/// and the same for the modulated normal. Needs x_max >= 50 sqrt(t) for every slice.
SpatialLimits spatial_limits(const CurveEvolution& evo, double a, double time_tol = 1e-4);

/// Known evolution subtracted before extrapolating (a control variate), with its
/// exact values at t = 0 on the same grid.
struct TraceReference {
  CurveEvolution evo;
  std::vector<Vec3> chi0, T0;
  std::vector<CVec3> N0;
};

/// R chi_a + b on grid at the given times, with chi0 = R x A+-, T0 = R A+-, N0 = R B+-.
TraceReference self_similar_reference(const SelfSimilarFamily& fam, const Mat3& R, const Vec3& b,
                                      const std::vector<double>& times, const Grid1D& grid);

struct TraceOptions {
  double x_cut = 0.1;
  double richardson_tol = 1e-3;
  // number of smallest-t slices used by the higher extrapolation order (>= 3)
  int levels = 3;
  const TraceReference* reference = nullptr;
};

struct TraceData {
  Grid1D grid;
  std::vector<char> valid;  // |x| >= x_cut
  std::vector<Vec3> chi0;   // every node
  std::vector<Vec3> T0;     // valid nodes
  std::vector<CVec3> N0_tilde;
  Vec3 A_plus_meas = Vec3::Zero(), A_minus_meas = Vec3::Zero();
  CVec3 B_plus_meas = CVec3::Zero(), B_minus_meas = CVec3::Zero();
  double angle_measured = 0.0;
  // sup |chi(t,x) - chi0(x)| / sqrt(t)
  double chi_sqrt_t = 0.0;
  // sup over t <= x^2 of |T(t,x) - T0(x)| |x| / sqrt(t)
  double T_sqrt_t_over_x = 0.0;
  // sup |T(t,x) - T0(x)| / t^(1/6)
  double T_t16 = 0.0;
  double richardson_disagreement = 0.0;
  bool flagged = false;
};

/// Richardson extrapolation in sqrt(t) from the smallest-t slices.
TraceData trace_at_zero(const CurveEvolution& evo, double a, const TraceOptions& opt = {});

struct RescaledReport {
  std::vector<double> times;     // decreasing
  std::vector<double> distance;  // sup_s |T_{n+1}(s) - T_n(s)|
  bool decreasing = true;
  Vec3 A_plus_meas = Vec3::Zero(), A_minus_meas = Vec3::Zero();
  CVec3 B_plus_meas = CVec3::Zero(), B_minus_meas = CVec3::Zero();
  double angle_measured = 0.0, angle_predicted = 0.0;
  double ode_residual = 0.0;  // frame and curvature defects of the limit system
  bool converged = false;
};

struct RescaledOptions {
  double s_window = 4.0;    // T_n compared on |s| <= s_window
  std::size_t s_nodes = 401;
  double s_ode = 200.0;     // limit system integrated on |s| <= s_ode
  double ds_ode = 1e-3;
  double distance_floor = 1e-6;  // distances below this count as converged
};

/// T_n(s) = T(t_n, sqrt(t_n) s); the limit system T' = Re(conj(psi) N), N' = -psi T
/// with psi = a e^{is^2/4} is integrated from the frame of the smallest-t slice at x = 0.
RescaledReport rescaled_frames(const CurveEvolution& evo, double a, const RescaledOptions& opt = {});

/// Angle between A+ and -A-.
double corner_angle(const Vec3& A_plus, const Vec3& A_minus);

nlohmann::json trace_report(const SpatialLimits& lim, const TraceData& tr, const RescaledReport& rs);

}  // namespace filament
