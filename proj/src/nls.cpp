#include "filament/nls.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "filament/fourier.hpp"
#include "filament/simd.hpp"

namespace filament {

void NlsParams::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
  if (order != 2 && order != 4) throw std::invalid_argument("order must be 2 or 4");
  if (!(a >= 0.0)) throw std::invalid_argument("a must be nonnegative");
  if (!std::isfinite(t_start) || !std::isfinite(t_end)) throw std::invalid_argument("times must be finite");
  if (dt_relative && !(t_start > 0.0 && t_end > 0.0))
    throw std::invalid_argument("relative time steps need t > 0");
}

SplitStepSolver::SplitStepSolver(Equation eq, const NlsParams& p, ComplexField initial)
    : eq_(eq), p_(p), f_(std::move(initial)), t_(p.t_start) {
  p_.validate();
  if (!f_.grid.periodic) throw std::invalid_argument("split-step solver needs a periodic grid");
  for (const auto& z : f_.values)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw std::invalid_argument("initial field has non-finite values");
  if (eq_ == Equation::U && !(t_ > 0.0))
    throw std::invalid_argument("u equation lives at t > 0");
  const auto xi = fourier::wavenumbers(f_.grid);
  xi2_.resize(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) xi2_[k] = xi[k] * xi[k];
  work_.resize(f_.size());
}

double SplitStepSolver::gauge_A(double t) const {
  if (eq_ != Equation::Psi) return 0.0;
  return p_.gauge == GaugeKind::Constant ? p_.A0 : p_.a * p_.a / t;
}

void SplitStepSolver::potential(double t0, double t1) {
  const auto& K = simd::kernels();
  auto z = std::span<cplx>(f_.values);
  if (eq_ == Equation::Psi) {
    double intA;
    if (p_.gauge == GaugeKind::Constant) {
      intA = p_.A0 * (t1 - t0);
    } else {
      if (!(t0 > 0.0 && t1 > 0.0)) throw std::invalid_argument("a^2/t gauge needs t > 0");
      intA = p_.a * p_.a * std::log(t1 / t0);
    }
    if (p_.mode != NonlinearMode::Free)
      K.phase_rotate(z, 0.0, p_.kappa * (t1 - t0), -p_.kappa * intA);
    else
      K.phase_rotate(z, 0.0, 0.0, -p_.kappa * intA);
    return;
  }
  if (!(t0 > 0.0 && t1 > 0.0)) throw std::invalid_argument("u equation needs t > 0");
  const double L = std::log(t1 / t0);
  const double s = double(p_.sign) * p_.kappa;
  switch (p_.mode) {
    case NonlinearMode::Full:
      K.phase_rotate(z, p_.a, s * L, -s * p_.a * p_.a * L);
      break;
    case NonlinearMode::Linearized:
      K.shear_imag(z, 2.0 * s * p_.a * p_.a * L);
      break;
    case NonlinearMode::Free:
      break;
  }
}

void SplitStepSolver::linear(double h) {
  auto& v = f_.values;
  fourier::fft_forward(v);
  simd::kernels().mul_expi(v, xi2_, -h);
  if (p_.dealias && p_.mode == NonlinearMode::Full) fourier::dealias(v);
  const double inv = 1.0 / double(v.size());
  for (auto& z : v) z *= inv;
  fourier::fft_backward(v);
}

void SplitStepSolver::strang(double h) {
  potential(t_, t_ + 0.5 * h);
  linear(h);
  potential(t_ + 0.5 * h, t_ + h);
  t_ += h;
}

void SplitStepSolver::step(double h) {
  const double before = f_.max_abs();
  if (p_.order == 2) {
    strang(h);
  } else {
    const double cbrt2 = std::cbrt(2.0);
    const double w1 = 1.0 / (2.0 - cbrt2), w0 = -cbrt2 * w1;
    strang(w1 * h);
    strang(w0 * h);
    strang(w1 * h);
  }
  ++steps_;
  const double after = f_.max_abs();
  if (!std::isfinite(after) || (before > 0.0 && after > 10.0 * before)) {
    std::ostringstream msg;
    msg << "split-step blow-up at t = " << t_ << " (step " << steps_ << ", h = " << h
        << "): max|f| " << before << " -> " << after;
    throw NumericalBlowup(msg.str());
  }
}

void SplitStepSolver::advance_to(double t_target) {
  const double span = t_target - t_;
  if (span == 0.0) return;
  if (p_.dt_relative) {
    // |h| <= dt |t|, suited to coefficients that vary on the scale of t
    const double dir = span > 0 ? 1.0 : -1.0;
    while ((t_target - t_) * dir > 0.0) {
      double h = p_.dt * std::abs(t_);
      if (h >= (t_target - t_) * dir * (1.0 - 1e-12)) h = (t_target - t_) * dir;
      const double next = h == (t_target - t_) * dir ? t_target : t_ + dir * h;
      step(next - t_);
      t_ = next;
    }
    return;
  }
  const auto n = std::size_t(std::ceil(std::abs(span) / p_.dt - 1e-9));
  const double t0 = t_;
  for (std::size_t k = 0; k < n; ++k) {
    const double next = k + 1 == n ? t_target : t0 + span * double(k + 1) / double(n);
    step(next - t_);
    t_ = next;
  }
}

namespace {

SpaceTimeField run(Equation eq, const ComplexField& f0, const NlsParams& p) {
  SplitStepSolver solver(eq, p, f0);
  const bool backward = p.t_end < p.t_start;
  std::vector<double> stops;
  for (double t : p.record_times) {
    const bool inside = backward ? (t < p.t_start && t > p.t_end) : (t > p.t_start && t < p.t_end);
    if (inside) stops.push_back(t);
  }
  stops.push_back(p.t_end);
  if (backward)
    std::sort(stops.begin(), stops.end(), std::greater<>());
  else
    std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  SpaceTimeField out;
  out.grid = f0.grid;
  out.push(p.t_start, f0, solver.gauge_A(p.t_start));
  for (double t : stops) {
    if (t == p.t_start) continue;
    solver.advance_to(t);
    out.push(t, solver.state(), solver.gauge_A(t));
  }
  if (backward) {
    std::reverse(out.times.begin(), out.times.end());
    std::reverse(out.values.begin(), out.values.end());
    std::reverse(out.gauge_A.begin(), out.gauge_A.end());
  }
  return out;
}

}  // namespace

SpaceTimeField evolve_psi(const ComplexField& psi0, const NlsParams& p) {
  return run(Equation::Psi, psi0, p);
}

SpaceTimeField evolve_u(const ComplexField& u0, const NlsParams& p) {
  if (!(p.t_start > 0.0 && p.t_end > 0.0)) throw std::invalid_argument("evolve_u needs t > 0");
  return run(Equation::U, u0, p);
}

SpaceTimeField evolve_u_gauged(const ComplexField& w0, const NlsParams& p) {
  const auto u0 = gauge_phase(w0, p.t_start, p.a, Direction::Backward, p.sign, p.kappa);
  SpaceTimeField out = evolve_u(u0, p);
  for (std::size_t k = 0; k < out.slices(); ++k)
    out.values[k] =
        gauge_phase(out.slice(k), out.times[k], p.a, Direction::Forward, p.sign, p.kappa).values;
  return out;
}

ComplexField gauge_phase(const ComplexField& u, double t, double a, Direction dir, int sign,
                         double kappa) {
  if (!(t > 0.0)) throw std::invalid_argument("gauge_phase needs t > 0");
  const double phase = -double(sign) * kappa * a * a * std::log(t);
  const cplx m = std::polar(1.0, dir == Direction::Forward ? phase : -phase);
  ComplexField out = u;
  if (phase == 0.0) return out;
  for (auto& z : out.values) z *= m;
  return out;
}

std::vector<cplx> band_limited_resample(const ComplexField& f, const std::vector<double>& points) {
  if (!f.grid.periodic) throw std::invalid_argument("band-limited resampling needs a periodic grid");
  std::vector<cplx> s = f.values;
  fourier::fft_forward(s);
  const std::size_t n = s.size();
  const double inv = 1.0 / double(n);
  const double dk = 2.0 * M_PI / f.grid.length();
  const bool even = n % 2 == 0;
  const std::size_t kpos = even ? n / 2 - 1 : (n - 1) / 2;  // positive modes 1..kpos
  std::vector<cplx> out(points.size());
  for (std::size_t q = 0; q < points.size(); ++q) {
    const double y = points[q] - f.grid.x_min;
    cplx acc = s[0];
    const cplx w = std::polar(1.0, dk * y);
    cplx e = 1.0;
    for (std::size_t k = 1; k <= kpos; ++k) {
      // refresh the recurrence periodically to keep rounding drift at the 1e-15 level
      e = (k % 64 == 0) ? std::polar(1.0, dk * double(k) * y) : e * w;
      acc += s[k] * e + s[n - k] * std::conj(e);
    }
    if (even) acc += s[n / 2] * std::cos(dk * double(n / 2) * y);
    out[q] = acc * inv;
  }
  return out;
}

namespace {

void require_inside(const Grid1D& g, double x, const char* what, double scale) {
  const double hi = g.periodic ? g.x_max : g.x_max;
  if (x < g.x_min - 1e-12 * std::abs(g.x_min) || x > hi + 1e-12 * std::abs(hi)) {
    std::ostringstream msg;
    msg << what << ": point " << x << " falls outside the source grid [" << g.x_min << ", " << g.x_max
        << "]; the source grid must cover the target extent scaled by " << scale;
    throw std::out_of_range(msg.str());
  }
}

}  // namespace

ComplexField pseudo_conformal(const ComplexField& in, double t, double a, Direction dir,
                              const Grid1D& target) {
  if (!(t > 0.0)) throw std::invalid_argument("pseudo_conformal needs t > 0");
  const Grid1D& src = in.grid;
  ComplexField out(target);
  std::vector<double> pts(target.n);
  if (dir == Direction::Forward) {
    // de-chirped psi is sqrt(t)^{-1} conj(v)(1/t, x/t), smooth and periodic-compatible
    ComplexField f = in;
    const double st = std::sqrt(t);
    for (std::size_t j = 0; j < src.n; ++j) {
      const double x = src.x(j);
      f[j] *= st * std::polar(1.0, -x * x / (4.0 * t));
    }
    for (std::size_t k = 0; k < target.n; ++k) {
      pts[k] = t * target.x(k);
      require_inside(src, pts[k], "pseudo_conformal", t);
    }
    const auto vals = band_limited_resample(f, pts);
    for (std::size_t k = 0; k < target.n; ++k) out[k] = std::conj(vals[k]) - a;
  } else {
    // in = u(s), s = t; psi at time 1/s
    const double s = t, tp = 1.0 / t;
    for (std::size_t k = 0; k < target.n; ++k) {
      pts[k] = s * target.x(k);
      require_inside(src, pts[k], "pseudo_conformal", s);
    }
    const auto vals = band_limited_resample(in, pts);
    const double amp = 1.0 / std::sqrt(tp);
    for (std::size_t k = 0; k < target.n; ++k) {
      const double x = target.x(k);
      out[k] = amp * std::polar(1.0, x * x / (4.0 * tp)) * std::conj(a + vals[k]);
    }
  }
  return out;
}

namespace explicit_solution {

double circle_gauge() { return 1.0; }

cplx plane_wave(double N, double t, double x) { return std::polar(1.0, N * x - N * N * t); }

cplx soliton(double N, double A, double t, double x, double kappa) {
  const double eta = std::sqrt(2.0 / kappa);
  const double omega = N * N - 1.0 + kappa * A;
  return eta / std::cosh(x - 2.0 * N * t) * std::polar(1.0, N * x - omega * t);
}

}  // namespace explicit_solution

}  // namespace filament
