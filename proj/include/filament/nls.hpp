#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "filament/spacetime.hpp"

// Split-step solvers for
//
//   psi:  i psi_t + psi_xx + kappa (|psi|^2 - A(t)) psi = 0
//   u:    i u_t + u_xx + sign (kappa / t) (|u + a|^2 - a^2)(u + a) = 0
//
// and the gauged variable w = u exp(-i sign kappa a^2 log t), which obeys
//   i w_t + w_xx + sign kappa a^2 t^(-1 - 2 i sign kappa a^2) conj(w) + ... = 0.
// The free part is exact in Fourier space, the potential part is an exact
// pointwise phase rotation (or shear, in the linearized model).

namespace filament {

enum class NonlinearMode { Full, Linearized, Free };
enum class GaugeKind { Constant, InverseTime };

struct NlsParams {
  double a = 0.0;
  int sign = +1;
  double kappa = 0.5;
  double t_start = 1.0;
  double t_end = 2.0;
  double dt = 1e-3;
  // step bound dt * t instead of dt (long runs of the u equation)
  bool dt_relative = false;
  bool dealias = true;
  int order = 2;  // 2: Strang, 4: triple-jump composition of Strang steps
  NonlinearMode mode = NonlinearMode::Full;
  // psi equation only: A(t) = A0 (Constant) or a^2 / t (InverseTime)
  GaugeKind gauge = GaugeKind::Constant;
  double A0 = 0.0;
  // extra output times inside [t_start, t_end] (both ends are always recorded)
  std::vector<double> record_times;

  void validate() const;
};

class NumericalBlowup : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Equation { Psi, U };

/// Stateful stepper; the public evolve_* functions are thin wrappers.
class SplitStepSolver {
 public:
  SplitStepSolver(Equation eq, const NlsParams& p, ComplexField initial);

  double time() const { return t_; }
  const ComplexField& state() const { return f_; }
  std::size_t steps_taken() const { return steps_; }
  /// Steps towards t_target (either direction) with |step| <= dt, landing exactly.
  void advance_to(double t_target);
  double gauge_A(double t) const;

 private:
  void step(double h);
  void strang(double h);
  void potential(double t0, double t1);
  void linear(double h);

  Equation eq_;
  NlsParams p_;
  ComplexField f_;
  double t_;
  std::size_t steps_ = 0;
  std::vector<double> xi2_;
  std::vector<cplx> work_;
};

/// Runs the psi equation over [t_start, t_end].
SpaceTimeField evolve_psi(const ComplexField& psi0, const NlsParams& p);
/// Runs the u equation over [t_start, t_end] (t_end < t_start integrates backward).
SpaceTimeField evolve_u(const ComplexField& u0, const NlsParams& p);
/// Same, with input and output in the gauged variable w.
SpaceTimeField evolve_u_gauged(const ComplexField& w0, const NlsParams& p);

enum class Direction { Forward, Backward };

/// Forward: u -> u exp(-i sign kappa a^2 log t).  Backward: the inverse.
ComplexField gauge_phase(const ComplexField& u, double t, double a, Direction dir, int sign = +1,
                         double kappa = 0.5);

/// Forward: psi(t, .) on its grid -> u(1/t, .) on target (u = v - a with
/// psi(t,x) = t^(-1/2) e^(i x^2/4t) conj(v)(1/t, x/t)).
/// Backward: u(s, .) -> psi(1/s, .) on target.
/// Resampling is band-limited; targets outside the source box are rejected.
ComplexField pseudo_conformal(const ComplexField& in, double t, double a, Direction dir,
                              const Grid1D& target);

/// Band-limited evaluation of a periodic field at arbitrary points.
std::vector<cplx> band_limited_resample(const ComplexField& f, const std::vector<double>& points);

/// Explicit solutions of the psi equation (kappa = 1/2 unless given).
namespace explicit_solution {
/// Gauge that keeps psi = 1 stationary (A = 1 for every kappa).
double circle_gauge();
/// e^{-i N^2 t} e^{i N x} with A = 1.
cplx plane_wave(double N, double t, double x);
/// eta sech(x - 2 N t) e^{i N x - i omega t}, eta = sqrt(2/kappa), omega = N^2 - 1 + kappa A.
cplx soliton(double N, double A, double t, double x, double kappa = 0.5);
}  // namespace explicit_solution

}  // namespace filament
