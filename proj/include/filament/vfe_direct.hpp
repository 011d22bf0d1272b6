#pragma once

#include <optional>
#include <vector>

#include "filament/hasimoto.hpp"

// Method-of-lines discretization of chi_t = chi_x ^ chi_xx for smooth curves
// on a periodic parameter box, chi(x + L) = chi(x) + shift (shift = 0 for
// closed curves, the pitch vector for helices).

namespace filament {

struct DirectRunConfig {
  double dt = 1e-4;
  double t_end = 0.1;
  bool renormalize = true;
  int renormalize_every = 10;
  // abort when max | |chi_x| - 1 | exceeds this
  double max_arclength_drift = 0.01;
  // chi(x + L) - chi(x); estimated from the samples when absent
  std::optional<Vec3> period_shift;
  // slices recorded in addition to t = 0 and t_end
  std::vector<double> record_times;

  /// Throws std::invalid_argument unless dt <= 0.25 dx^2 and the fields are sane.
  void validate(double dx) const;
};

class ArclengthDrift : public std::runtime_error {
 public:
  ArclengthDrift(const std::string& what, double drift) : std::runtime_error(what), drift_(drift) {}
  double drift() const { return drift_; }

 private:
  double drift_;
};

/// Fourth-order centred differences in x, RK4 in t, optional projection to unit
/// speed every renormalize_every steps. The curve grid must be periodic.
CurveEvolution evolve_direct(const SampledCurve& curve0, const DirectRunConfig& cfg);

/// chi(x + L) - chi(x) by fourth-order extrapolation across the wrap.
Vec3 estimate_period_shift(const SampledCurve& curve);

/// Total length over one period (spectral quadrature of |chi_x|).
double curve_length(const SampledCurve& curve, const Vec3& shift);

}  // namespace filament
