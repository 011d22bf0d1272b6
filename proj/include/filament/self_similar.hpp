#pragma once

#include <vector>

#include "filament/geometry.hpp"

namespace filament {

/// Least-squares tail fit value = L + c1/s + c2/s^2 over a window of |s|.
struct TailFit {
  CVec3 limit = CVec3::Zero();
  double rms_residual = 0.0;
  // change of the limit when the window is moved to [s_max/4, s_max/2]
  double stability = 0.0;
};

/// Tail fit over [s_max/2, s_max] on one side (sign = +1 or -1); stability is the
/// change of the limit against the window [s_max/4, s_max/2].
TailFit fit_tail(const Grid1D& g, const std::vector<CVec3>& value, int sign, double s_max);

/// Corner data of a frame solving T' = Re(conj(psi) N), N' = -psi T with
/// psi = a e^{is^2/4}: A = lim T, B = lim N e^{i a^2 log|s|}, the O(1/s)
/// oscillating corrections removed before fitting.
struct CornerLimits {
  Vec3 A_plus, A_minus;
  CVec3 B_plus, B_minus;
  TailFit fit_A_plus, fit_A_minus, fit_B_plus, fit_B_minus;
  double theta = 0.0;
  bool converged = true;
};
CornerLimits corner_limits(const CurveAndFrames& koiso, double a, double s_max);

/// The self-similar solution chi_a(t,x) = sqrt(t) G(x/sqrt(t)) with curvature
/// a/sqrt(t) and torsion x/(2t).  The profile G is stored on [-s_max, s_max]
/// with the Frenet frame at s = 0 equal to the canonical basis and G(0) = 2a e_z.
struct SelfSimilarFamily {
  double a = 0.0;
  double s_max = 0.0;
  CurveAndFrames profile;  // Frenet frames (T, n, b)
  CurveAndFrames koiso;    // same curve, Koiso frames with N(0) = e_y + i e_z
  Vec3 A_plus, A_minus;
  CVec3 B_plus, B_minus;
  double theta = 0.0;  // angle between A+ and -A-
  TailFit fit_A_plus, fit_A_minus, fit_B_plus, fit_B_minus;
  bool converged = true;
  // phase with  R B+ = exp(i reversal_phase) conj(B-),  R the pi-rotation about the bisector
  double reversal_phase = 0.0;

  double sin_half_theta() const { return std::sin(0.5 * theta); }
  /// pi-rotation about the bisector direction (A+ - A-)/|A+ - A-|.
  Mat3 bisector_rotation() const;
  /// Unit bisector (A+ - A-)/|A+ - A-|; e_x for a = 0.
  Vec3 bisector() const;
};

/// Closed-form corner law of the family: sin(theta/2) = exp(-pi a^2 / 2).
double corner_sin_half_theta(double a);
double corner_theta(double a);

SelfSimilarFamily build_profile(double a, double s_max = 200.0, double ds = 1e-3);

/// chi_a(t, x) on grid by cubic Hermite interpolation of the profile.
SampledCurve evaluate_chi_a(const SelfSimilarFamily& fam, double t, const Grid1D& grid);
/// Koiso frames of chi_a(t, .) on grid (N(t, 0) = e_y + i e_z).
FrameField evaluate_koiso_a(const SelfSimilarFamily& fam, double t, const Grid1D& grid);
/// Frenet frames of chi_a(t, .) on grid.
FrameField evaluate_frenet_a(const SelfSimilarFamily& fam, double t, const Grid1D& grid);
/// Profile point and Frenet frame at arbitrary s (|s| <= s_max).
Vec3 profile_point(const SelfSimilarFamily& fam, double s);
Frame profile_frame(const SelfSimilarFamily& fam, double s);

/// psi_a(t, x) = (a / sqrt(t)) exp(i x^2 / (4t)).
ComplexField filament_function_a(double a, double t, const Grid1D& grid);
cplx filament_function_a(double a, double t, double x);

}  // namespace filament
