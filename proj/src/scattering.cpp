#include "filament/scattering.hpp"

#include <algorithm>
#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "filament/fourier.hpp"

namespace filament {

namespace {

void require_gamma(double gamma) {
  if (!(gamma > 0.0) || !(gamma < 0.5)) {
    std::ostringstream msg;
    msg << "gamma = " << gamma << " outside (0, 1/2)";
    throw std::invalid_argument(msg.str());
  }
}

double lowfreq_sup(const std::vector<cplx>& spec, const std::vector<double>& xi, double gamma) {
  double m = 0.0;
  for (std::size_t k = 0; k < xi.size(); ++k) {
    const double ax = std::abs(xi[k]);
    if (ax > 0.0 && ax <= 1.0 + 1e-14) m = std::max(m, std::pow(ax, gamma) * std::abs(spec[k]));
  }
  return m;
}

}  // namespace

XGammaNorm xgamma_norm(const ComplexField& f, double gamma) {
  require_gamma(gamma);
  XGammaNorm n;
  n.gamma = gamma;
  n.l2_part = f.l2_norm();
  n.lowfreq_part = lowfreq_sup(fourier::transform(f), fourier::wavenumbers(f.grid), gamma);
  n.total = n.l2_part + n.lowfreq_part;
  return n;
}

YNormTerms y_norm_terms(const SpaceTimeField& run, double gamma, double gamma_tilde) {
  require_gamma(gamma);
  if (!(gamma_tilde < 0.5)) throw std::invalid_argument("gamma_tilde must be below 1/2");
  run.validate();
  YNormTerms y;
  y.gamma = gamma;
  y.gamma_tilde = gamma_tilde;
  const auto xi = fourier::wavenumbers(run.grid);
  for (std::size_t k = 0; k < run.slices(); ++k) {
    if (!(run.times[k] >= 1.0)) throw std::invalid_argument("Y norm is taken over t >= 1");
    const auto f = run.slice(k);
    const double l2 = f.l2_norm();
    const double low = std::pow(run.times[k], -gamma_tilde) * lowfreq_sup(fourier::transform(f), xi, gamma);
    y.l2_sup = std::max(y.l2_sup, l2);
    y.lowfreq_sup = std::max(y.lowfreq_sup, low);
    y.total = std::max(y.total, l2 + low);
  }
  return y;
}

SpectralRun spectra(const SpaceTimeField& run) {
  run.validate();
  SpectralRun s;
  s.times = run.times;
  s.xi = fourier::wavenumbers(run.grid);
  for (std::size_t k = 0; k < run.slices(); ++k) s.values.push_back(fourier::transform(run.slice(k)));
  return s;
}

ModeGrowthReport mode_growth_check(const SpectralRun& run, double delta, double xi_cutoff,
                                   double relative_floor) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (run.times.empty() || std::abs(run.times.front() - 1.0) > 1e-12)
    throw std::invalid_argument("mode growth constants are measured from t = 1");
  const std::size_t n = run.xi.size();
  if (xi_cutoff <= 0.0) {
    xi_cutoff = std::numeric_limits<double>::infinity();
    for (double x : run.xi)
      if (x != 0.0) xi_cutoff = std::min(xi_cutoff, std::abs(x));
  }
  ModeGrowthReport r;
  r.delta = delta;
  r.xi_cutoff = xi_cutoff;
  r.C1.assign(n, std::nan(""));
  r.C2.assign(n, std::nan(""));
  const auto& v0 = run.values.front();
  double top = 0.0;
  for (std::size_t m = 0; m < n; ++m)
    top = std::max(top, std::abs(v0[m]) + std::abs(v0[fourier::mirror_index(m, n)]));
  const double floor = std::max(1e-14, relative_floor * top);
  for (std::size_t m = 0; m < n; ++m) {
    const double den = std::abs(v0[m]) + std::abs(v0[fourier::mirror_index(m, n)]);
    if (den < floor) {
      ++r.skipped_modes;
      continue;
    }
    const double ax = std::abs(run.xi[m]);
    double c1 = 0.0, c2 = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < run.times.size(); ++k) {
      const double ratio = std::abs(run.values[k][m]) / den;
      c1 = std::max(c1, ratio / std::pow(run.times[k], delta));
      if (ax >= xi_cutoff) c2 = std::max(c2, (ratio - 1.0) * std::pow(ax, delta));
    }
    r.C1[m] = c1;
    r.C1_max = std::max(r.C1_max, c1);
    if (ax >= xi_cutoff) {
      r.C2[m] = c2;
      r.C2_max = std::max(r.C2_max, c2);
    }
  }
  return r;
}

ModeGrowthReport mode_growth_check(const SpaceTimeField& run, double delta, double xi_cutoff,
                                   double relative_floor) {
  return mode_growth_check(spectra(run), delta, xi_cutoff, relative_floor);
}

ModeTrajectory linear_mode_oracle(cplx p0, cplx q0, double xi, double a, int sign,
                                  const std::vector<double>& times, const OracleOptions& opt) {
  if (times.empty()) throw std::invalid_argument("oracle needs at least one output time");
  if (!(times.front() > 0.0)) throw std::invalid_argument("oracle lives at t > 0");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw std::invalid_argument("oracle times must increase");
  using State = std::array<double, 4>;
  namespace ode = boost::numeric::odeint;

  const double t0 = times.front(), x2 = xi * xi;
  const double c = double(sign) * opt.kappa * a * a;
  // interaction picture: p = e^{-i xi^2 (t - t0)} P, q = e^{i xi^2 (t - t0)} Q
  auto rhs = [&](const State& s, State& d, double t) {
    const cplx P(s[0], s[1]), Q(s[2], s[3]);
    const cplx mu = c / t * std::polar(1.0, -2.0 * c * std::log(t));
    const cplx E = std::polar(1.0, 2.0 * x2 * (t - t0));
    const cplx dP = cplx(0, 1) * mu * E * Q;
    const cplx dQ = cplx(0, -1) * std::conj(mu) * std::conj(E) * P;
    d = {dP.real(), dP.imag(), dQ.real(), dQ.imag()};
  };

  ModeTrajectory out;
  out.times = times;
  // the system is linear: integrate the unit-scaled pair so the tolerance is relative
  const double scale = std::max(std::abs(p0), std::abs(q0));
  if (scale == 0.0) {
    out.p.assign(times.size(), 0.0);
    out.q.assign(times.size(), 0.0);
    return out;
  }
  State x{p0.real() / scale, p0.imag() / scale, q0.real() / scale, q0.imag() / scale};
  if (times.size() == 1 || c == 0.0) {
    for (double t : times) {
      out.p.push_back(std::polar(1.0, -x2 * (t - t0)) * p0);
      out.q.push_back(std::polar(1.0, x2 * (t - t0)) * q0);
    }
    return out;
  }
  auto observe = [&](const State& s, double t) {
    out.p.push_back(scale * std::polar(1.0, -x2 * (t - t0)) * cplx(s[0], s[1]));
    out.q.push_back(scale * std::polar(1.0, x2 * (t - t0)) * cplx(s[2], s[3]));
  };
  // the error estimate cannot see oscillations it steps over: at least 8 steps per period of E
  const double max_dt = x2 > 0.0 ? std::numbers::pi / (8.0 * x2) : 1.0;
  auto stepper = ode::make_controlled(opt.tol, opt.tol, max_dt, ode::runge_kutta_fehlberg78<State>());
  const double dt0 = std::min(1e-3, max_dt);
  out.steps = ode::integrate_times(stepper, rhs, x, times.begin(), times.end(), dt0, observe);
  return out;
}

SpectralRun linear_oracle_run(const ComplexField& w0, double a, int sign,
                              const std::vector<double>& times, const OracleOptions& opt) {
  SpectralRun r;
  r.times = times;
  r.xi = fourier::wavenumbers(w0.grid);
  const std::size_t n = r.xi.size();
  const auto s0 = fourier::transform(w0);
  r.values.assign(times.size(), std::vector<cplx>(n));
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t mm = fourier::mirror_index(m, n);
    if (mm < m) continue;
    const auto tr = linear_mode_oracle(s0[m], std::conj(s0[mm]), r.xi[m], a, sign, times, opt);
    for (std::size_t k = 0; k < times.size(); ++k) {
      r.values[k][m] = tr.p[k];
      r.values[k][mm] = std::conj(tr.q[k]);
    }
  }
  return r;
}

double max_spectral_difference(const SpectralRun& a, const SpectralRun& b) {
  if (a.times.size() != b.times.size() || a.xi.size() != b.xi.size())
    throw std::invalid_argument("spectral runs differ in shape");
  double d = 0.0;
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    if (std::abs(a.times[k] - b.times[k]) > 1e-12 * std::max(1.0, std::abs(a.times[k])))
      throw std::invalid_argument("spectral runs are recorded at different times");
    for (std::size_t m = 0; m < a.xi.size(); ++m) d = std::max(d, std::abs(a.values[k][m] - b.values[k][m]));
  }
  return d;
}

std::vector<ComplexField> renormalized_state(const SpaceTimeField& run, double a, int sign,
                                             double kappa, bool gauged_input) {
  run.validate();
  std::vector<ComplexField> out;
  out.reserve(run.slices());
  for (std::size_t k = 0; k < run.slices(); ++k) {
    const double t = run.times[k];
    if (!(t > 0.0)) throw std::invalid_argument("renormalized state needs t > 0");
    ComplexField f = run.slice(k);
    if (!gauged_input) {
      const cplx ph = std::polar(1.0, -double(sign) * kappa * a * a * std::log(t));
      for (auto& z : f.values) z *= ph;
    }
    out.push_back(fourier::free_flight(f, -t));
  }
  return out;
}

DecayFit decay_fit(const std::vector<double>& times, const std::vector<ComplexField>& states) {
  const std::size_t n = times.size();
  if (states.size() != n) throw std::invalid_argument("decay_fit: times and states differ in length");
  if (n < 10) throw std::invalid_argument("decay_fit needs at least 10 slices");
  if (!(times.front() > 0.0) || times.back() / times.front() < 100.0 * (1 - 1e-12))
    throw std::invalid_argument("decay_fit needs at least two decades of positive times");
  const double r = times[1] / times[0];
  for (std::size_t k = 1; k < n; ++k)
    if (!(std::abs(times[k] / times[k - 1] / r - 1.0) < 1e-6))
      throw std::invalid_argument("decay_fit needs logarithmically spaced times");

  // Consecutive Cauchy deficits: if w(t) = w_inf + t^p f then
  // ||w(r t) - w(t)|| = |r^p - 1| ||f|| t^p exactly, with no reference-state bias.
  DecayFit fit;
  std::vector<double> lt, ld;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dk = l2_distance(states[k + 1], states[k]);
    fit.times.push_back(times[k]);
    fit.deficits.push_back(dk);
    if (dk > 0.0) {
      lt.push_back(std::log(times[k]));
      ld.push_back(std::log(dk));
    }
  }
  if (lt.size() < 3) throw std::invalid_argument("decay_fit: deficit vanishes identically");
  const LineFit line = fit_line(lt, ld);
  fit.t_lo = std::exp(lt.front());
  fit.t_hi = std::exp(lt.back());
  fit.exponent = line.slope;
  const double gain = std::abs(std::pow(r, fit.exponent) - 1.0);
  fit.constant = gain > 0.0 ? std::exp(line.intercept) / gain : std::exp(line.intercept);
  fit.residual = line.rms;
  fit.reliable = fit.residual <= 0.2;
  return fit;
}

cplx h_tilde(const ComplexField& u_plus, double a, double s) {
  if (s == 0.0) throw std::invalid_argument("h_tilde is singular at s = 0");
  const Grid1D& g = u_plus.grid;
  const double xi = 0.5 * s;
  cplx acc = 0.0;
  for (std::size_t j = 0; j < g.n; ++j) acc += u_plus[j] * std::polar(1.0, -xi * g.x(j));
  acc *= g.dx();
  return cplx(0, 1) * acc * std::polar(1.0, -a * a * std::log(std::abs(s)));
}

std::vector<double> log_spaced(double t0, double t1, std::size_t n) {
  if (n < 2 || !(t0 > 0.0) || !(t1 > t0)) throw std::invalid_argument("log_spaced needs 0 < t0 < t1, n >= 2");
  std::vector<double> t(n);
  const double l0 = std::log(t0), l1 = std::log(t1);
  for (std::size_t k = 0; k < n; ++k) t[k] = std::exp(l0 + (l1 - l0) * double(k) / double(n - 1));
  t.front() = t0;
  t.back() = t1;
  return t;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("fit_line needs matching samples");
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  LineFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.correlation = (sxx > 0 && syy > 0) ? sxy / std::sqrt(sxx * syy) : 0.0;
  double ss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = y[k] - f.intercept - f.slope * x[k];
    ss += r * r;
  }
  f.rms = std::sqrt(ss / double(n));
  return f;
}

nlohmann::json scattering_report(double gamma, const ModeGrowthReport& growth,
                                 const std::optional<DecayFit>& decay) {
  nlohmann::json j;
  j["gamma"] = gamma;
  j["delta"] = growth.delta;
  j["C1_max"] = growth.C1_max;
  j["C2_max"] = growth.C2_max;
  j["skipped_modes"] = growth.skipped_modes;
  if (decay) {
    j["decay_exponent"] = decay->exponent;
    j["residual"] = decay->residual;
    j["decay_reliable"] = decay->reliable;
  } else {
    j["decay_exponent"] = nullptr;
    j["residual"] = nullptr;
  }
  return j;
}

}  // namespace filament
