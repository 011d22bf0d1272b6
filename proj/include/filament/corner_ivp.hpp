#pragma once

#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "filament/hasimoto.hpp"
#include "filament/nls.hpp"
#include "filament/self_similar.hpp"
#include "filament/singularity_trace.hpp"

// From a curve with one corner at x = 0 to an evolution on (0, 1] that takes
// it as its value at t = 0, and the continuation to [-1, 0).
//
// Trace system at t = 0 (N~ the modulated normal, x != 0):
//   T0' = Re(g N~0),  N~0' = -conj(g) T0,  (T0, N~0)(0+-) = (A+-, B+-)
// with g(x) = u+^(x/2) |x|^(-i a^2) / sqrt(4 pi i) under the Fourier convention
// of fourier.hpp, so that ||u+||_L2 = ||g||_L2.

namespace filament {

/// a with sin(theta/2) = exp(-pi a^2 / 2), theta the angle between A+ and -A-.
/// A+ = A- (no corner, theta = pi) gives a = 0; A+ = -A- (a cusp) throws.
double corner_parameter(const Vec3& A_plus, const Vec3& A_minus);

struct CornerCurve {
  SampledCurve curve;         // line grid, node at x = 0 where chi0 = 0
  std::vector<Vec3> tangent;  // unit tangent at the nodes, one-sided at the corner
  Vec3 A_plus = Vec3::UnitX(), A_minus = Vec3::UnitX();
  // checks of the smallness hypotheses on the sampled grid
  double weighted_curvature_l2 = 0.0;  // ||(1 + |x|^4) c||_L2
  double local_curvature_sup = 0.0;    // sup_{|x| <= 1} |x|^gamma c

  /// Validates the grid, finds the corner node and fits the one-sided tangents.
  /// When tangent is empty it is computed from the points.
  static CornerCurve from_samples(SampledCurve curve, std::vector<Vec3> tangent, double gamma = 0.3);
  std::size_t corner_node() const;
};

/// chi0 built from g by integrating the trace system from the corner.
CornerCurve corner_from_g(const std::function<cplx(double)>& g, const SelfSimilarFamily& fam,
                          const Grid1D& grid);

/// Reversed curve x -> chi0(-x).
CornerCurve reversed(const CornerCurve& c);
/// R chi0 + b with the tangents rotated.
CornerCurve moved(const CornerCurve& c, const Mat3& R, const Vec3& b);

/// g of the final state u+ = eps (1 + i) e^{-y^2 / (4 w)} (u+^ = eps (1 + i) sqrt(4 pi w) e^{-w xi^2}).
std::function<cplx(double)> gaussian_state_g(double eps, double w, double a);

struct TraceSystemResult {
  ComplexField g;          // on the corner grid; g(0) taken from the x > 0 side
  std::vector<Vec3> T0;    // rotated into the family position
  std::vector<CVec3> N0;   // modulated normal trace
  Mat3 rotation = Mat3::Identity();  // corner -> family position
  double alignment_residual = 0.0;   // |R A+- - A+-_a|
  double max_tangent_mismatch = 0.0; // |T0 - chi0'| after the round trip
};

/// Parallel transport of N~ along the measured tangent from (A+-, B+-), then
/// g = T0' . conj(N~0) (the Koiso law read backwards).
TraceSystemResult trace_system_g(const CornerCurve& corner, const SelfSimilarFamily& fam);

/// u+^(xi) = sqrt(4 pi i) g(2 xi) |2 xi|^(i a^2) on the periodic u grid.
ComplexField final_state_u_plus(const ComplexField& g, double a, const Grid1D& u_grid);
/// The inverse map, g on a line grid.
ComplexField g_from_u_plus(const ComplexField& u_plus, double a, const Grid1D& x_grid);

struct WaveOperatorOptions {
  double T_max = 1e3;
  double dt = 0.01;  // relative step bound dt * t
  int order = 2;
  int sign = +1;
  double kappa = 0.5;
  double cauchy_tol = 1e-4;
  double growth_limit = 10.0;
  double gamma = 0.3;
  double smallness = 0.1;  // ||u+||_X <= smallness * a
  bool check_cauchy = true;
};

struct WaveOperatorResult {
  ComplexField u1;
  double cauchy_gap = 0.0;  // ||u(1; T) - u(1; 2T)||_L2
  bool converged = true;
  double u_plus_xgamma = 0.0;
  bool small = true;
};

class BackwardInstability : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// u(T_max) = e^{i a^2 log sqrt(T_max)} e^{i T_max d_xx} u+, integrated back to t = 1.
WaveOperatorResult modified_wave_operator(const ComplexField& u_plus, double a,
                                          const WaveOperatorOptions& opt = {});

/// u+ ~ e^{-i t d_xx}[u(t) e^{-i kappa a^2 log t}] at t = T_max, from u(1) forward.
ComplexField scattering_state(const ComplexField& u1, double a, const WaveOperatorOptions& opt = {});

struct AssembleOptions {
  std::vector<double> times;  // output times in (0, 1]
  Grid1D x_grid;              // line grid with a node at x = 0
  double dt = 0.01;           // relative step of the u run
  int order = 2;
  int sign = +1;
  double kappa = 0.5;
  double anchor_ratio = 1.005;  // log spacing of the anchor samples in t
  double max_phase_step = 0.05; // Koiso step: ds * s_max / 2
  int interp_points = 8;        // Lagrange order for u(s, y)
};

/// chi(t) = R chi_std(t) + b, chi_std the solution with (T, N)(1, 0) canonical and
/// chi(1, 0) = 2a e_z (chi_a for u = 0).
CurveEvolution assemble_positive(const ComplexField& u1, double a, const Mat3& R, const Vec3& b,
                                 const AssembleOptions& opt);

struct IvpOptions {
  double gamma = 0.3;
  Grid1D u_grid = Grid1D::centered_box(2048.0, 8192);
  WaveOperatorOptions wave;
  AssembleOptions assemble;  // times and x_grid
  double profile_s_max = 200.0;  // raised to cover x_max / sqrt(t_min)
  double profile_ds = 1e-3;
  TraceOptions trace;        // reference is filled in by the solver
  double g_star_tol = 1e-8;  // continue_negative aborts beyond this
};

struct IvpSolution {
  double a = 0.0;
  SelfSimilarFamily fam;
  TraceSystemResult trace_system;
  ComplexField u_plus;
  double u_plus_xgamma = 0.0;
  WaveOperatorResult wave;
  Mat3 rotation = Mat3::Identity();  // family position -> corner position
  Vec3 translation = Vec3::Zero();
  CurveEvolution evolution;
  TraceData trace;
  std::vector<std::string> warnings;
};

/// corner_parameter, trace_system_g, final_state_u_plus, modified_wave_operator,
/// assemble_positive, then the translation chi0(0) - R chi(0, 0) with chi(0, 0)
/// extrapolated in sqrt(t).
IvpSolution solve_positive(const CornerCurve& corner, const IvpOptions& opt);

struct NegativeSolution {
  IvpSolution reversed;  // the positive pipeline on x -> chi0(-x)
  CurveEvolution evolution;  // chi(t, x) = chi*(-t, -x), t in [-1, 0)
  double g_star_mismatch = 0.0;  // |g*(x) - e^{-i theta_a} conj(g(-x))|
  double stitch_gap = 0.0;       // sup |chi(0-, x) - chi(0+, x)| of the two traces
};

NegativeSolution continue_negative(const CornerCurve& corner, const IvpSolution& positive,
                                   const IvpOptions& opt);

/// Filament function of a smooth curve at t = 1 turned into u(1, y) = conj(psi e^{-iy^2/4}) - a
/// on the u grid (zero outside the curve's parameter range). The constant phase of psi is
/// fixed by psi e^{-ix^2/4} -> a on the outer half of the curve.
ComplexField u_from_curve(const SampledCurve& curve, double a, const Grid1D& u_grid);

struct ReversibilityReport {
  double u_plus_gap = 0.0;  // ||u+ (round trip) - u+||_L2
  double chi_gap = 0.0;     // sup over the output grid of |chi(1) (round trip) - chi(1)|
};

/// chi(-1) on a wide grid -> psi*(1) from its curvature and torsion -> u*(1) -> u*+ (forward
/// scattering) -> g* -> g -> u+ -> wave operator -> chi(1), compared with the positive solution.
ReversibilityReport reversibility_round_trip(const IvpSolution& pos, const NegativeSolution& neg,
                                             const IvpOptions& opt, const Grid1D& wide);

nlohmann::json ivp_summary(const IvpSolution& pos, const NegativeSolution* neg);

}  // namespace filament
