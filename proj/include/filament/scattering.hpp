#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

#include "filament/spacetime.hpp"

// Norms and large-time diagnostics for the u equation. All spectra use the
// convention of fourier.hpp. The linearized gauged equation is
//
//   i w_t + w_xx + mu(t) conj(w) = 0,   mu = sign kappa a^2 t^(-1 - 2 i sign kappa a^2),
//
// which closes on each pair p = w^(xi), q = conj(w^(-xi)):
//   p' = -i xi^2 p + i mu q,   q' = i xi^2 q - i conj(mu) p.

namespace filament {

struct XGammaNorm {
  double gamma = 0.0;
  double l2_part = 0.0;
  double lowfreq_part = 0.0;  // sup over 0 < |xi| <= 1 of |xi|^gamma |f^|
  double total = 0.0;
};

/// ||f||_L2 + || |xi|^gamma f^ ||_{L^inf(|xi| <= 1)}; 0 < gamma < 1/2.
XGammaNorm xgamma_norm(const ComplexField& f, double gamma);

struct YNormTerms {
  double gamma = 0.0, gamma_tilde = 0.0;
  double l2_sup = 0.0;       // sup_t ||g(t)||_L2
  double lowfreq_sup = 0.0;  // sup_t t^-gamma_tilde || |xi|^gamma g^(t) ||_{L^inf(|xi| <= 1)}
  double total = 0.0;        // sup_t of the sum
};
YNormTerms y_norm_terms(const SpaceTimeField& run, double gamma, double gamma_tilde);

/// Spectra of a run: values[k][m] = f^(times[k], xi[m]).
struct SpectralRun {
  std::vector<double> times;
  std::vector<double> xi;  // FFT order
  std::vector<std::vector<cplx>> values;
};
SpectralRun spectra(const SpaceTimeField& run);

struct ModeGrowthReport {
  double delta = 0.0;
  double C1_max = 0.0;
  double C2_max = 0.0;
  double xi_cutoff = 0.0;  // C2 is taken over |xi| >= xi_cutoff
  std::size_t skipped_modes = 0;
  std::vector<double> C1, C2;  // per mode (NaN when skipped)
};

/// Minimal constants in
///   |w^(t,xi)| <= C1 t^delta (|w^(1,xi)| + |w^(1,-xi)|)
///   |w^(t,xi)| <= (1 + C2 |xi|^-delta) (|w^(1,xi)| + |w^(1,-xi)|).
/// The first slice must be at t = 1. xi_cutoff <= 0 selects the smallest nonzero |xi|.
/// Modes with |w^(1,xi)| + |w^(1,-xi)| below max(1e-14, relative_floor * largest) are
/// skipped: their ratios measure rounding noise, not growth.
ModeGrowthReport mode_growth_check(const SpectralRun& run, double delta, double xi_cutoff = 0.0,
                                   double relative_floor = 1e-10);
ModeGrowthReport mode_growth_check(const SpaceTimeField& run, double delta, double xi_cutoff = 0.0,
                                   double relative_floor = 1e-10);

struct ModeTrajectory {
  std::vector<double> times;
  std::vector<cplx> p, q;  // w^(t, xi), conj(w^(t, -xi))
  std::size_t steps = 0;
};

struct OracleOptions {
  double kappa = 0.5;
  double tol = 1e-12;
};

/// Adaptive Runge-Kutta-Fehlberg 7(8) integration of one (xi, -xi) pair,
/// from times.front() with (p0, q0), recorded at every entry of times.
ModeTrajectory linear_mode_oracle(cplx p0, cplx q0, double xi, double a, int sign,
                                  const std::vector<double>& times, const OracleOptions& opt = {});

/// All modes of an initial field through the oracle, recorded at times.
SpectralRun linear_oracle_run(const ComplexField& w0, double a, int sign,
                              const std::vector<double>& times, const OracleOptions& opt = {});

/// Largest |difference| between two spectral runs over all slices and modes.
double max_spectral_difference(const SpectralRun& a, const SpectralRun& b);

/// w(t) = exp(-i t d_xx)[u(t) exp(-i sign kappa a^2 log t)] per slice; with
/// gauged_input the phase is assumed already removed.
std::vector<ComplexField> renormalized_state(const SpaceTimeField& run, double a, int sign = +1,
                                             double kappa = 0.5, bool gauged_input = false);

struct DecayFit {
  double exponent = 0.0;
  double constant = 0.0;
  double residual = 0.0;  // RMS of the log fit
  double t_lo = 0.0, t_hi = 0.0;
  bool reliable = true;
  std::vector<double> times, deficits;
};

/// Log-log fit of the Cauchy deficit ||w(t_{k+1}) - w(t_k)|| ~ |r^p - 1| C t_k^p over
/// log-spaced slices t_{k+1} = r t_k; C estimates ||w(t) - w_inf|| ~ C t^p.
/// Flagged unreliable when the RMS log residual exceeds 0.2.
DecayFit decay_fit(const std::vector<double>& times, const std::vector<ComplexField>& states);

/// h~(s) = i u+^(s/2) s^(-i a^2), by direct evaluation of the transform.
cplx h_tilde(const ComplexField& u_plus, double a, double s);

/// Log-spaced times in [t0, t1], inclusive, n >= 2.
std::vector<double> log_spaced(double t0, double t1, std::size_t n);

/// Least-squares line y = c0 + c1 x with correlation and RMS residual.
struct LineFit {
  double intercept = 0.0, slope = 0.0, correlation = 0.0, rms = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

nlohmann::json scattering_report(double gamma, const ModeGrowthReport& growth,
                                 const std::optional<DecayFit>& decay);

}  // namespace filament
