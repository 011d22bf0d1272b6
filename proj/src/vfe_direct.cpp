#include "filament/vfe_direct.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "filament/fourier.hpp"

namespace filament {

namespace {

using Points = std::vector<Vec3>;

struct Stencil {
  const Points& p;
  Vec3 shift;
  long n;

  Vec3 at(long j) const {
    long q = j % n;
    long wraps = j / n;
    if (q < 0) {
      q += n;
      --wraps;
    }
    return p[std::size_t(q)] + double(wraps) * shift;
  }
};

// chi_x ^ chi_xx with fourth-order centred differences
void rhs(const Points& p, const Vec3& shift, double h, Points& out) {
  const long n = long(p.size());
  const Stencil s{p, shift, n};
  const double i1 = 1.0 / (12.0 * h), i2 = 1.0 / (12.0 * h * h);
  for (long j = 0; j < n; ++j) {
    const Vec3 m2 = s.at(j - 2), m1 = s.at(j - 1), c = p[std::size_t(j)], p1 = s.at(j + 1),
               p2 = s.at(j + 2);
    const Vec3 d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) * i1;
    const Vec3 d2 = (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) * i2;
    out[std::size_t(j)] = d1.cross(d2);
  }
}

std::vector<Vec3> first_derivative(const Points& p, const Vec3& shift, double h) {
  const long n = long(p.size());
  const Stencil s{p, shift, n};
  std::vector<Vec3> d(p.size());
  for (long j = 0; j < n; ++j)
    d[std::size_t(j)] = (s.at(j - 2) - 8.0 * s.at(j - 1) + 8.0 * s.at(j + 1) - s.at(j + 2)) / (12.0 * h);
  return d;
}

double speed_defect(const Points& p, const Vec3& shift, double h) {
  double worst = 0.0;
  for (const auto& d : first_derivative(p, shift, h)) worst = std::max(worst, std::abs(d.norm() - 1.0));
  return worst;
}

// Band-limited interpolant with the spectrum computed once.
struct Interpolant {
  Grid1D g;
  std::vector<cplx> spec;

  explicit Interpolant(const ComplexField& f) : g(f.grid), spec(fourier::transform(f)) {}
  Interpolant(const Grid1D& grid, std::vector<cplx> s) : g(grid), spec(std::move(s)) {}

  double operator()(double x) const {
    const std::size_t n = spec.size();
    const double dxi = 2.0 * std::numbers::pi / g.length();
    const cplx z = std::polar(1.0, dxi * x);
    cplx up = 1.0, acc = spec[0];
    const std::size_t half = (n - 1) / 2;
    for (std::size_t k = 1; k <= half; ++k) {
      up *= z;
      acc += spec[k] * up + spec[n - k] * std::conj(up);
    }
    if (n % 2 == 0) {
      const double xi = -dxi * double(n / 2);
      acc += spec[n / 2] * std::cos(xi * (x - g.x_min)) * std::polar(1.0, xi * g.x_min);
    }
    return acc.real() / g.length();
  }
};

// periodic part of one coordinate: chi_i(x) - shift_i (x - x_min) / L
ComplexField periodic_component(const Grid1D& g, const Points& p, const Vec3& shift, int i) {
  ComplexField f(g);
  for (std::size_t j = 0; j < g.n; ++j)
    f[j] = p[j][i] - shift[i] * (g.x(j) - g.x_min) / g.length();
  return f;
}

// Redistribute nodes uniformly in arclength, keeping node 0 in place.
void reparametrize(const Grid1D& g, Points& p, const Vec3& shift) {
  std::vector<Interpolant> comp;
  std::array<ComplexField, 3> dcomp;
  for (int i = 0; i < 3; ++i) {
    const auto c = periodic_component(g, p, shift, i);
    comp.emplace_back(c);
    dcomp[std::size_t(i)] = fourier::derivative(c, 1);
  }
  ComplexField speed(g);
  const Vec3 slope = shift / g.length();
  for (std::size_t j = 0; j < g.n; ++j) {
    Vec3 d(dcomp[0][j].real(), dcomp[1][j].real(), dcomp[2][j].real());
    speed[j] = (d + slope).norm();
  }
  // S(x) = mean * (x - x_min) + P(x) - P(x_min), P the zero-mean antiderivative
  auto spec = fourier::transform(speed);
  const auto xi = fourier::wavenumbers(g);
  const double mean = spec[0].real() / g.length();
  spec[0] = 0.0;
  if (g.n % 2 == 0) spec[g.n / 2] = 0.0;
  for (std::size_t k = 1; k < g.n; ++k) spec[k] /= cplx(0.0, xi[k]);
  const Interpolant P(g, spec), sig(speed);
  const double P0 = P(g.x_min);
  auto S = [&](double x) { return mean * (x - g.x_min) + P(x) - P0; };

  const double step = mean * g.dx();
  Points out(g.n);
  out[0] = p[0];
  for (std::size_t j = 1; j < g.n; ++j) {
    const double target = double(j) * step;
    double x = g.x(j);
    for (int it = 0; it < 30; ++it) {
      const double dx = (S(x) - target) / sig(x);
      x -= dx;
      if (std::abs(dx) < 1e-15 * g.length()) break;
    }
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = comp[std::size_t(i)](x);
    out[j] = v + shift * (x - g.x_min) / g.length();
  }
  p.swap(out);
}

FrameField frenet_frames(const Grid1D& g, const Points& p, const Vec3& shift) {
  const double h = g.dx();
  const auto d1 = first_derivative(p, shift, h);
  // second derivative from the same stencil applied to d1 (periodic, no shift)
  const auto d2 = first_derivative(d1, Vec3::Zero(), h);
  FrameField F;
  F.grid = g;
  F.T.resize(g.n);
  F.e1.resize(g.n);
  F.e2.resize(g.n);
  for (std::size_t j = 0; j < g.n; ++j) {
    const Vec3 T = d1[j].normalized();
    Vec3 n = d2[j] - d2[j].dot(T) * T;
    if (n.norm() < 1e-12) {
      // straight piece: any unit normal
      n = std::abs(T.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
      n -= n.dot(T) * T;
    }
    n.normalize();
    F.set(j, {T, n, T.cross(n)});
  }
  return F;
}

}  // namespace

void DirectRunConfig::validate(double dx) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("t_end must be >= 0");
  if (dt > 0.25 * dx * dx)
    throw std::invalid_argument("dt exceeds 0.25 dx^2 (dx = " + std::to_string(dx) + ")");
  if (renormalize && renormalize_every < 1) throw std::invalid_argument("renormalize_every must be >= 1");
  if (!(max_arclength_drift > 0.0)) throw std::invalid_argument("max_arclength_drift must be positive");
  for (double t : record_times)
    if (t < 0.0 || t > t_end) throw std::invalid_argument("record time outside [0, t_end]");
}

Vec3 estimate_period_shift(const SampledCurve& curve) {
  const auto& p = curve.points;
  const std::size_t n = p.size();
  if (n < 8) throw std::invalid_argument("need at least 8 nodes");
  // cubic extrapolation one node past each end
  const Vec3 after = 4.0 * p[n - 1] - 6.0 * p[n - 2] + 4.0 * p[n - 3] - p[n - 4];
  const Vec3 before = 4.0 * p[0] - 6.0 * p[1] + 4.0 * p[2] - p[3];
  return 0.5 * ((after - p[0]) + (p[n - 1] - before));
}

double curve_length(const SampledCurve& curve, const Vec3& shift) {
  const Grid1D& g = curve.grid;
  Vec3 slope = shift / g.length();
  double total = 0.0;
  std::array<ComplexField, 3> d;
  for (int i = 0; i < 3; ++i)
    d[std::size_t(i)] = fourier::derivative(periodic_component(g, curve.points, shift, i), 1);
  for (std::size_t j = 0; j < g.n; ++j)
    total += (Vec3(d[0][j].real(), d[1][j].real(), d[2][j].real()) + slope).norm();
  return total * g.dx();
}

CurveEvolution evolve_direct(const SampledCurve& curve0, const DirectRunConfig& cfg) {
  const Grid1D& g = curve0.grid;
  if (!g.periodic) throw std::invalid_argument("direct evolution needs a periodic grid");
  if (curve0.corner_index) throw std::invalid_argument("direct evolution cannot handle corners");
  if (curve0.size() != g.n) throw std::invalid_argument("curve size does not match its grid");
  const double h = g.dx();
  cfg.validate(h);
  const Vec3 shift = cfg.period_shift ? *cfg.period_shift : estimate_period_shift(curve0);

  Points p = curve0.points;
  const double d0 = speed_defect(p, shift, h);
  if (d0 > 1e-3) throw std::invalid_argument("initial curve is not parametrized by arclength");

  std::vector<double> stops = cfg.record_times;
  stops.push_back(cfg.t_end);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

  CurveEvolution evo;
  auto record = [&](double t) {
    evo.times.push_back(t);
    evo.curves.push_back({g, p, std::nullopt});
    evo.frames.push_back(frenet_frames(g, p, shift));
  };
  record(0.0);

  const std::size_t n = g.n;
  Points k1(n), k2(n), k3(n), k4(n), tmp(n);
  double t = 0.0;
  long steps = 0;
  for (double stop : stops) {
    while (stop - t > 1e-12 * std::max(1.0, stop)) {
      const double dt = std::min(cfg.dt, stop - t);
      rhs(p, shift, h, k1);
      for (std::size_t j = 0; j < n; ++j) tmp[j] = p[j] + 0.5 * dt * k1[j];
      rhs(tmp, shift, h, k2);
      for (std::size_t j = 0; j < n; ++j) tmp[j] = p[j] + 0.5 * dt * k2[j];
      rhs(tmp, shift, h, k3);
      for (std::size_t j = 0; j < n; ++j) tmp[j] = p[j] + dt * k3[j];
      rhs(tmp, shift, h, k4);
      for (std::size_t j = 0; j < n; ++j) p[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
      t += dt;
      ++steps;
      const bool check = !cfg.renormalize || steps % cfg.renormalize_every == 0;
      if (check) {
        const double drift = speed_defect(p, shift, h);
        if (!std::isfinite(drift) || drift > cfg.max_arclength_drift)
          throw ArclengthDrift("arclength drift " + std::to_string(drift) + " at t = " + std::to_string(t),
                               drift);
        if (cfg.renormalize) reparametrize(g, p, shift);
      }
    }
    t = stop;
    if (stop > 0.0) record(stop);
  }
  return evo;
}

}  // namespace filament
