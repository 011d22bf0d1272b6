#include "filament/corner_ivp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "filament/fourier.hpp"
#include "filament/scattering.hpp"

namespace filament {

namespace {

constexpr double pi = std::numbers::pi;
const cplx I(0.0, 1.0);

// sqrt(4 pi i)
cplx sqrt_4pi_i() { return std::sqrt(4.0 * pi) * std::polar(1.0, 0.25 * pi); }

// Fourth-order derivative of samples spaced h, one-sided at both ends.
std::vector<Vec3> derivative4(const std::vector<Vec3>& f, double h) {
  const std::size_t n = f.size();
  if (n < 5) throw std::invalid_argument("need at least 5 nodes on each side of the corner");
  std::vector<Vec3> d(n);
  const double s = 1.0 / (12.0 * h);
  for (std::size_t i = 2; i + 2 < n; ++i) d[i] = s * (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]);
  d[0] = s * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
  d[1] = s * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
  const std::size_t m = n - 1;
  d[m] = -s * (-25.0 * f[m] + 48.0 * f[m - 1] - 36.0 * f[m - 2] + 16.0 * f[m - 3] - 3.0 * f[m - 4]);
  d[m - 1] = -s * (-3.0 * f[m] - 10.0 * f[m - 1] + 18.0 * f[m - 2] - 6.0 * f[m - 3] + f[m - 4]);
  return d;
}

// One side of a corner curve in r = |x|, index 0 at the corner.
struct Side {
  int sign = +1;
  Grid1D grid;  // [0, r_max]
  std::vector<std::size_t> node;  // corner-grid index of each r node
};

Side make_side(const Grid1D& g, std::size_t j0, int sign) {
  Side s;
  s.sign = sign;
  const std::size_t n = sign > 0 ? g.n - j0 : j0 + 1;
  for (std::size_t i = 0; i < n; ++i) s.node.push_back(sign > 0 ? j0 + i : j0 - i);
  s.grid = Grid1D::line(0.0, g.dx() * double(n - 1), n);
  return s;
}

template <class V>
std::vector<V> gather(const Side& s, const std::vector<V>& f) {
  std::vector<V> out;
  out.reserve(s.node.size());
  for (std::size_t j : s.node) out.push_back(f[j]);
  return out;
}

// Cubic extrapolation to r = 0 from nodes 1..4.
Vec3 extrapolate_to_corner(const std::vector<Vec3>& f) {
  return 4.0 * f[1] - 6.0 * f[2] + 4.0 * f[3] - f[4];
}

Frame frame_from(const Vec3& T, const CVec3& N) { return Frame::from_normal(T, N).orthonormalized(); }

std::size_t symmetric_mirror(const Grid1D& g, std::size_t j) { return g.n - 1 - j; }

void require_symmetric(const Grid1D& g) {
  if (g.periodic || std::abs(g.x_min + g.x_max) > 1e-12 * std::max(1.0, g.x_max) || g.n % 2 == 0)
    throw std::invalid_argument("corner grid must be a symmetric line grid with a node at 0");
}

}  // namespace

double corner_parameter(const Vec3& A_plus, const Vec3& A_minus) {
  const double np = A_plus.norm(), nm = A_minus.norm();
  if (!(np > 0.0 && nm > 0.0) || !A_plus.allFinite() || !A_minus.allFinite())
    throw std::invalid_argument("corner directions must be non-zero");
  const Vec3 p = A_plus / np, m = A_minus / nm;
  const double theta = corner_angle(p, m);
  if (theta < 1e-12) throw std::invalid_argument("opposite corner directions (a cusp) have no self-similar match");
  const double s = std::min(1.0, std::sin(0.5 * theta));
  return std::sqrt(std::max(0.0, -2.0 / pi * std::log(s)));
}

std::size_t CornerCurve::corner_node() const {
  if (!curve.corner_index) throw std::logic_error("corner curve without corner node");
  return *curve.corner_index;
}

CornerCurve CornerCurve::from_samples(SampledCurve curve, std::vector<Vec3> tangent, double gamma) {
  const Grid1D& g = curve.grid;
  g.validate();
  if (g.periodic) throw std::invalid_argument("corner curve needs a line grid");
  if (curve.points.size() != g.n) throw std::invalid_argument("corner curve size differs from its grid");
  const std::size_t j0 = g.node_index(0.0);
  const double h = g.dx();
  const Side sp = make_side(g, j0, +1), sm = make_side(g, j0, -1);
  if (sp.node.size() < 6 || sm.node.size() < 6) throw std::invalid_argument("corner too close to the grid end");

  CornerCurve c;
  if (tangent.empty()) {
    tangent.assign(g.n, Vec3::Zero());
    for (const Side* s : {&sm, &sp}) {
      const auto d = derivative4(gather(*s, curve.points), h);
      for (std::size_t i = 0; i < d.size(); ++i) tangent[s->node[i]] = double(s->sign) * d[i];
    }
  }
  if (tangent.size() != g.n) throw std::invalid_argument("tangent size differs from the grid");
  for (std::size_t j = 0; j < g.n; ++j) {
    const double len = tangent[j].norm();
    if (!std::isfinite(len) || std::abs(len - 1.0) > 1e-3) {
      std::ostringstream msg;
      msg << "corner curve is not parametrized by arclength at x = " << g.x(j) << " (|T| = " << len << ")";
      throw std::invalid_argument(msg.str());
    }
    tangent[j] /= len;
  }
  c.A_plus = extrapolate_to_corner(gather(sp, tangent)).normalized();
  c.A_minus = extrapolate_to_corner(gather(sm, tangent)).normalized();

  double l2 = 0.0, local = 0.0;
  for (const Side* s : {&sm, &sp}) {
    // the corner node carries one side's tangent; each side uses its own limit
    auto Ts = gather(*s, tangent);
    Ts[0] = s->sign > 0 ? c.A_plus : c.A_minus;
    const auto d = derivative4(Ts, h);
    for (std::size_t i = 1; i < d.size(); ++i) {
      const double x = s->grid.x(i), k = d[i].norm();
      const double w = (1.0 + std::pow(x, 4)) * k;
      l2 += w * w * h;
      if (x <= 1.0) local = std::max(local, std::pow(x, gamma) * k);
    }
  }
  c.weighted_curvature_l2 = std::sqrt(l2);
  c.local_curvature_sup = local;
  curve.corner_index = j0;
  c.curve = std::move(curve);
  c.tangent = std::move(tangent);
  return c;
}

CornerCurve corner_from_g(const std::function<cplx(double)>& g, const SelfSimilarFamily& fam,
                          const Grid1D& grid) {
  grid.validate();
  const std::size_t j0 = grid.node_index(0.0);
  CornerCurve c;
  c.curve = SampledCurve{grid, std::vector<Vec3>(grid.n), j0};
  c.tangent.assign(grid.n, Vec3::Zero());
  for (int sign : {-1, +1}) {
    const Side s = make_side(grid, j0, sign);
    const Vec3& A = sign > 0 ? fam.A_plus : fam.A_minus;
    const CVec3& B = sign > 0 ? fam.B_plus : fam.B_minus;
    // in r the system keeps its form with g replaced by sign * g
    const auto P = integrate_koiso(
        s.grid, [&](double r) { return std::conj(double(sign) * g(double(sign) * r)); }, frame_from(A, B),
        Vec3::Zero(), 0.0);
    for (std::size_t i = 0; i < s.node.size(); ++i) {
      c.curve.points[s.node[i]] = double(sign) * P.curve.points[i];
      c.tangent[s.node[i]] = P.frames.T[i];
    }
  }
  c.A_plus = fam.A_plus;
  c.A_minus = fam.A_minus;
  c.tangent[j0] = fam.A_plus;
  return CornerCurve::from_samples(c.curve, c.tangent);
}

CornerCurve reversed(const CornerCurve& c) {
  const Grid1D& g = c.curve.grid;
  require_symmetric(g);
  CornerCurve r = c;
  for (std::size_t j = 0; j < g.n; ++j) {
    const std::size_t m = symmetric_mirror(g, j);
    r.curve.points[j] = c.curve.points[m];
    r.tangent[j] = -c.tangent[m];
  }
  r.A_plus = -c.A_minus;
  r.A_minus = -c.A_plus;
  return r;
}

TraceSystemResult trace_system_g(const CornerCurve& corner, const SelfSimilarFamily& fam) {
  const Grid1D& grid = corner.curve.grid;
  const std::size_t j0 = corner.corner_node();
  TraceSystemResult out;
  out.rotation = aligning_rotation({corner.A_plus, corner.A_minus}, {fam.A_plus, fam.A_minus});
  out.alignment_residual = std::max((out.rotation * corner.A_plus - fam.A_plus).norm(),
                                    (out.rotation * corner.A_minus - fam.A_minus).norm());
  out.g = ComplexField(grid);
  out.T0.assign(grid.n, Vec3::Zero());
  out.N0.assign(grid.n, CVec3::Zero());

  for (int sign : {-1, +1}) {
    const Side s = make_side(grid, j0, sign);
    const double h = s.grid.dx();
    std::vector<Vec3> T = gather(s, corner.tangent);
    for (auto& v : T) v = out.rotation * v;
    T[0] = out.rotation * (sign > 0 ? corner.A_plus : corner.A_minus);
    const std::vector<Vec3> dT = derivative4(T, h);  // d/dr
    std::vector<CVec3> N(T.size());
    N[0] = frame_from(T[0], sign > 0 ? fam.B_plus : fam.B_minus).N();
    // parallel transport N' = -(N . T') T
    auto rhs = [&](double r, const CVec3& n) -> CVec3 {
      const Vec3 t = lagrange_eval(s.grid, T, r), dt = lagrange_eval(s.grid, dT, r);
      return -n.cwiseProduct(dt.cast<cplx>()).sum() * t.cast<cplx>();
    };
    for (std::size_t i = 0; i + 1 < T.size(); ++i) {
      const double r = s.grid.x(i);
      const CVec3 k1 = rhs(r, N[i]);
      const CVec3 k2 = rhs(r + 0.5 * h, N[i] + 0.5 * h * k1);
      const CVec3 k3 = rhs(r + 0.5 * h, N[i] + 0.5 * h * k2);
      const CVec3 k4 = rhs(r + h, N[i] + h * k3);
      N[i + 1] = frame_from(T[i + 1], N[i] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).N();
    }
    // g_r = T_r . conj(N), and g = sign * g_r
    std::vector<cplx> psi_r(T.size());
    for (std::size_t i = 0; i < T.size(); ++i) {
      psi_r[i] = N[i].cwiseProduct(dT[i].cast<cplx>()).sum();  // conj(g_r) = T_r . N
      const std::size_t j = s.node[i];
      if (sign < 0 && i == 0) continue;  // the corner node keeps the x > 0 values
      out.g[j] = double(sign) * std::conj(psi_r[i]);
      out.T0[j] = T[i];
      out.N0[j] = N[i];
    }
    // round trip: the trace system driven by the recovered g
    const auto back = integrate_koiso(ComplexField(s.grid, psi_r), frame_from(T[0], N[0]), Vec3::Zero(), 0.0);
    for (std::size_t i = 0; i < T.size(); ++i)
      out.max_tangent_mismatch = std::max(out.max_tangent_mismatch, (back.frames.T[i] - T[i]).norm());
  }
  return out;
}

CornerCurve moved(const CornerCurve& c, const Mat3& R, const Vec3& b) {
  std::vector<Vec3> T = c.tangent;
  for (auto& v : T) v = R * v;
  return CornerCurve::from_samples(c.curve.transformed(R, b), std::move(T));
}

std::function<cplx(double)> gaussian_state_g(double eps, double w, double a) {
  if (!(w > 0.0)) throw std::invalid_argument("Gaussian width must be positive");
  return [=](double x) {
    const cplx amp = eps * cplx(1, 1) * std::sqrt(4.0 * pi * w) * std::exp(-0.25 * w * x * x) / sqrt_4pi_i();
    return x == 0.0 ? amp : amp * std::polar(1.0, -a * a * std::log(std::abs(x)));
  };
}

ComplexField final_state_u_plus(const ComplexField& g, double a, const Grid1D& u_grid) {
  if (!u_grid.periodic) throw std::invalid_argument("u grid must be periodic");
  const Grid1D& xg = g.grid;
  if (xg.periodic) throw std::invalid_argument("g must live on a line grid");
  const std::size_t j0 = xg.node_index(0.0);
  const double a2 = a * a;
  // G(x) = g(x) |x|^{i a^2} is smooth through 0
  std::vector<cplx> G(xg.n);
  for (std::size_t j = 0; j < xg.n; ++j)
    if (j != j0) G[j] = g[j] * std::polar(1.0, a2 * std::log(std::abs(xg.x(j))));
  if (j0 >= 3 && j0 + 3 < xg.n) {
    // symmetric 6-point interpolation at the middle node
    G[j0] = (15.0 * (G[j0 - 1] + G[j0 + 1]) - 6.0 * (G[j0 - 2] + G[j0 + 2]) + (G[j0 - 3] + G[j0 + 3])) / 20.0;
  } else {
    G[j0] = g[j0];
  }
  const auto xi = fourier::wavenumbers(u_grid);
  std::vector<cplx> spec(u_grid.n);
  const cplx c = sqrt_4pi_i();
  for (std::size_t k = 0; k < u_grid.n; ++k) {
    const double x = 2.0 * xi[k];
    if (x < xg.x_min || x > xg.x_max) continue;
    spec[k] = c * lagrange_eval(xg, G, x);
  }
  return fourier::inverse_transform(u_grid, std::move(spec));
}

ComplexField g_from_u_plus(const ComplexField& u_plus, double a, const Grid1D& x_grid) {
  const Grid1D& ug = u_plus.grid;
  if (!ug.periodic) throw std::invalid_argument("u+ must live on a periodic grid");
  const auto spec = fourier::transform(u_plus);
  const std::size_t M = ug.n;
  const double dxi = 2.0 * pi / ug.length();
  // spectrum in increasing xi
  const std::size_t half = M / 2;
  std::vector<cplx> sorted(M);
  for (std::size_t k = 0; k < M; ++k) sorted[(k + half) % M] = spec[k];
  const Grid1D xi_grid = Grid1D::line(-double(half) * dxi, double(M - 1 - half) * dxi, M);
  const double a2 = a * a;
  const cplx c = 1.0 / sqrt_4pi_i();
  ComplexField g(x_grid);
  for (std::size_t j = 0; j < x_grid.n; ++j) {
    const double x = x_grid.x(j), xi = 0.5 * x;
    if (xi < xi_grid.x_min || xi > xi_grid.x_max) continue;
    const cplx v = lagrange_eval(xi_grid, sorted, xi, 8);
    g[j] = x == 0.0 ? c * v : c * v * std::polar(1.0, -a2 * std::log(std::abs(x)));
  }
  return g;
}

namespace {

NlsParams u_params(double a, const WaveOperatorOptions& opt, double t0, double t1) {
  NlsParams p;
  p.a = a;
  p.sign = opt.sign;
  p.kappa = opt.kappa;
  p.t_start = t0;
  p.t_end = t1;
  p.dt = opt.dt;
  p.dt_relative = true;
  p.order = opt.order;
  return p;
}

ComplexField backward_from(const ComplexField& u_plus, double a, const WaveOperatorOptions& opt, double T) {
  // w(T) = e^{iT d_xx} u+
  const auto run = evolve_u_gauged(fourier::free_flight(u_plus, T), u_params(a, opt, T, 1.0));
  const ComplexField w1 = run.slice(0);
  return gauge_phase(w1, 1.0, a, Direction::Backward, opt.sign, opt.kappa);
}

}  // namespace

WaveOperatorResult modified_wave_operator(const ComplexField& u_plus, double a, const WaveOperatorOptions& opt) {
  if (!(opt.T_max > 1.0)) throw std::invalid_argument("T_max must exceed 1");
  WaveOperatorResult out;
  out.u_plus_xgamma = xgamma_norm(u_plus, opt.gamma).total;
  out.small = out.u_plus_xgamma <= opt.smallness * a;
  out.u1 = backward_from(u_plus, a, opt, opt.T_max);
  const double n0 = u_plus.l2_norm(), n1 = out.u1.l2_norm();
  if (!std::isfinite(n1) || (n0 > 0.0 && n1 > opt.growth_limit * n0)) {
    std::ostringstream msg;
    msg << "backward integration grew the L2 norm from " << n0 << " to " << n1;
    throw BackwardInstability(msg.str());
  }
  if (opt.check_cauchy) {
    out.cauchy_gap = l2_distance(out.u1, backward_from(u_plus, a, opt, 2.0 * opt.T_max));
    out.converged = out.cauchy_gap <= opt.cauchy_tol;
  }
  return out;
}

ComplexField scattering_state(const ComplexField& u1, double a, const WaveOperatorOptions& opt) {
  const auto run = evolve_u_gauged(u1, u_params(a, opt, 1.0, opt.T_max));
  return fourier::free_flight(run.slice(run.slices() - 1), -opt.T_max);
}

CurveEvolution assemble_positive(const ComplexField& u1, double a, const Mat3& R, const Vec3& b,
                                 const AssembleOptions& opt) {
  if (opt.times.empty()) throw std::invalid_argument("no output times");
  std::vector<double> out_times = opt.times;
  std::sort(out_times.begin(), out_times.end());
  out_times.erase(std::unique(out_times.begin(), out_times.end()), out_times.end());
  if (!(out_times.front() > 0.0 && out_times.back() <= 1.0)) throw std::invalid_argument("output times must lie in (0, 1]");
  const Grid1D& xg = opt.x_grid;
  xg.validate();
  if (xg.periodic) throw std::invalid_argument("output grid must be a line grid");
  const std::size_t x0 = xg.node_index(0.0);
  const Grid1D& ug = u1.grid;
  if (!ug.periodic) throw std::invalid_argument("u(1) must live on a periodic grid");
  const std::size_t y0 = ug.node_index(0.0);
  const double t_min = out_times.front();
  const double x_abs = std::max(std::abs(xg.x_min), std::abs(xg.x_max));
  if (x_abs / t_min > 0.5 * ug.length())
    throw std::invalid_argument("u box too small: x_max / t_min exceeds the half box");
  if (!(opt.anchor_ratio > 1.0)) throw std::invalid_argument("anchor_ratio must exceed 1");

  // anchor samples in t, ascending, containing every output time and t = 1
  std::vector<double> ts = out_times;
  const auto n_log = std::size_t(std::ceil(std::log(1.0 / t_min) / std::log(opt.anchor_ratio))) + 1;
  if (t_min < 1.0)
    for (double t : log_spaced(t_min, 1.0, std::max<std::size_t>(n_log, 2))) ts.push_back(t);
  ts.push_back(1.0);
  std::sort(ts.begin(), ts.end());
  std::vector<double> uniq;
  for (double t : ts)
    if (uniq.empty() || t - uniq.back() > 1e-12 * t) uniq.push_back(t);
  ts = uniq;
  for (double& t : out_times)  // snap onto the sample list
    t = *std::min_element(ts.begin(), ts.end(), [&](double p, double q) { return std::abs(p - t) < std::abs(q - t); });

  const std::size_t K = ts.size();
  std::vector<cplx> psi0(K), psix0(K);
  std::vector<double> A(K);
  std::vector<ComplexField> states(out_times.size());

  NlsParams p;
  p.a = a;
  p.sign = opt.sign;
  p.kappa = opt.kappa;
  p.t_start = 1.0;
  p.t_end = 1.0 / t_min;
  p.dt = opt.dt;
  p.dt_relative = true;
  p.order = opt.order;
  if (p.t_end <= p.t_start) p.t_end = p.t_start * (1.0 + 1e-9);
  SplitStepSolver solver(Equation::U, p, u1);
  const auto xi = fourier::wavenumbers(ug);
  if (ug.n % 2 != 0 || std::abs(ug.x_min + 0.5 * ug.length()) > 1e-12 * ug.length())
    throw std::invalid_argument("u grid must be a centred box with an even node count");
  std::vector<cplx> spec;
  for (std::size_t q = K; q-- > 0;) {
    const double t = ts[q], s = 1.0 / t;
    if (s > solver.time()) solver.advance_to(s);
    const ComplexField& u = solver.state();
    // u_y at the middle node y = 0 = x_min + L/2: (1/M) sum i xi_k S_k (-1)^k, Nyquist dropped
    spec = u.values;
    fourier::fft_forward(spec);
    cplx uy = 0.0;
    for (std::size_t k = 0; k < spec.size(); ++k)
      if (2 * k != spec.size()) uy += (k % 2 ? -xi[k] : xi[k]) * spec[k];
    uy *= I / double(spec.size());
    psi0[q] = std::conj(a + u[y0]) / std::sqrt(t);
    psix0[q] = std::conj(uy) / (t * std::sqrt(t));
    A[q] = a * a / t;
    for (std::size_t k = 0; k < out_times.size(); ++k)
      if (out_times[k] == t) states[k] = u;
  }
  const AnchorTrack anchor =
      propagate_anchor(ts, psi0, psix0, A, K - 1, Frame::canonical(), Vec3(0, 0, 2.0 * a));

  CurveEvolution evo;
  for (std::size_t k = 0; k < out_times.size(); ++k) {
    const double t = out_times[k], rt = std::sqrt(t);
    const std::size_t q = std::size_t(std::find(ts.begin(), ts.end(), t) - ts.begin());
    const ComplexField& u = states[k];
    auto U = [&](double y) { return lagrange_eval(ug, u.values, y, opt.interp_points); };
    const double s_max = x_abs / rt;
    const double ds_target = std::min(0.01, 2.0 * opt.max_phase_step / std::max(s_max, 1e-300));
    const double ds_out = xg.dx() / rt;
    const auto m = std::size_t(std::max(1.0, std::ceil(ds_out / ds_target)));
    const Grid1D sg = Grid1D::line(xg.x_min / rt, xg.x_max / rt, (xg.n - 1) * m + 1);
    const auto P = integrate_koiso(
        sg, [&](double s) { return std::polar(1.0, 0.25 * s * s) * std::conj(a + U(s / rt)); },
        anchor.frames[q], Vec3::Zero(), sg.x(x0 * m));

    SampledCurve c{xg, std::vector<Vec3>(xg.n), std::nullopt};
    FrameField F{xg, std::vector<Vec3>(xg.n), std::vector<Vec3>(xg.n), std::vector<Vec3>(xg.n)};
    std::vector<cplx> psi(xg.n);
    for (std::size_t j = 0; j < xg.n; ++j) {
      const std::size_t i = j * m;
      c.points[j] = R * (anchor.points[q] + rt * P.curve.points[i]) + b;
      F.set(j, P.frames.at(i).rotated(R));
      const double x = xg.x(j);
      psi[j] = std::polar(1.0 / rt, x * x / (4.0 * t)) * std::conj(a + U(x / t));
    }
    evo.times.push_back(t);
    evo.curves.push_back(std::move(c));
    evo.frames.push_back(std::move(F));
    evo.psi.push_back(std::move(psi));
  }
  return evo;
}

IvpSolution solve_positive(const CornerCurve& corner, const IvpOptions& opt) {
  IvpSolution sol;
  sol.a = corner_parameter(corner.A_plus, corner.A_minus);
  const auto& times = opt.assemble.times;
  if (times.empty()) throw std::invalid_argument("no output times");
  const Grid1D& xg = opt.assemble.x_grid;
  const double t_min = *std::min_element(times.begin(), times.end());
  if (!(t_min > 0.0) || *std::max_element(times.begin(), times.end()) > 1.0)
    throw std::invalid_argument("output times must lie in (0, 1]");
  const double x_abs = std::max(std::abs(xg.x_min), std::abs(xg.x_max));
  const double s_need = 1.02 * x_abs / std::sqrt(t_min);
  sol.fam = build_profile(sol.a, std::max(opt.profile_s_max, s_need), opt.profile_ds);

  sol.trace_system = trace_system_g(corner, sol.fam);
  const ComplexField& g = sol.trace_system.g;
  if (std::max(std::abs(g[0]), std::abs(g[g.size() - 1])) > 1e-8)
    sol.warnings.push_back("g does not decay at the edge of the corner grid; u+ may alias");
  if (sol.trace_system.max_tangent_mismatch > 1e-6)
    sol.warnings.push_back("trace system round trip misses the tangent by more than 1e-6");
  sol.u_plus = final_state_u_plus(g, sol.a, opt.u_grid);
  sol.u_plus_xgamma = xgamma_norm(sol.u_plus, opt.gamma).total;

  WaveOperatorOptions wopt = opt.wave;
  wopt.gamma = opt.gamma;
  sol.wave = modified_wave_operator(sol.u_plus, sol.a, wopt);
  if (!sol.wave.small) sol.warnings.push_back("u+ is not small with respect to a");
  if (!sol.wave.converged) sol.warnings.push_back("wave operator not Cauchy in T_max");

  const CurveEvolution std_evo = assemble_positive(sol.wave.u1, sol.a, Mat3::Identity(), Vec3::Zero(), opt.assemble);
  const auto ref_std = self_similar_reference(sol.fam, Mat3::Identity(), Vec3::Zero(), std_evo.times, xg);
  TraceOptions topt = opt.trace;
  topt.reference = &ref_std;
  const TraceData tr_std = trace_at_zero(std_evo, sol.a, topt);

  // rotation taking the measured trace of the standard solution onto the corner
  std::vector<Vec3> from, to;
  for (std::size_t j = 0; j < xg.n; ++j) {
    if (!tr_std.valid[j]) continue;
    const double x = xg.x(j);
    if (x < corner.curve.grid.x_min || x > corner.curve.grid.x_max) continue;
    from.push_back(tr_std.T0[j]);
    to.push_back(lagrange_eval(corner.curve.grid, corner.tangent, x));
  }
  if (from.size() < 2) throw std::invalid_argument("output grid does not overlap the corner away from 0");
  sol.rotation = aligning_rotation(from, to);
  const std::size_t j0 = xg.node_index(0.0);
  const Vec3 chi0_0 = corner.curve.points[corner.corner_node()];
  sol.translation = chi0_0 - sol.rotation * tr_std.chi0[j0];

  sol.evolution = std_evo;
  for (std::size_t k = 0; k < sol.evolution.slices(); ++k) {
    sol.evolution.curves[k] = std_evo.curves[k].transformed(sol.rotation, sol.translation);
    auto& F = sol.evolution.frames[k];
    for (std::size_t j = 0; j < F.size(); ++j) F.set(j, F.at(j).rotated(sol.rotation));
  }
  const auto ref = self_similar_reference(sol.fam, sol.rotation, sol.translation, sol.evolution.times, xg);
  topt.reference = &ref;
  sol.trace = trace_at_zero(sol.evolution, sol.a, topt);
  sol.evolution.warnings = sol.warnings;
  return sol;
}

NegativeSolution continue_negative(const CornerCurve& corner, const IvpSolution& positive, const IvpOptions& opt) {
  const Grid1D& cg = corner.curve.grid;
  require_symmetric(cg);
  require_symmetric(opt.assemble.x_grid);
  NegativeSolution out;
  out.reversed = solve_positive(reversed(corner), opt);

  const cplx phase = std::polar(1.0, -positive.fam.reversal_phase);
  const ComplexField& g = positive.trace_system.g;
  const ComplexField& gs = out.reversed.trace_system.g;
  const std::size_t j0 = corner.corner_node();
  for (std::size_t j = 0; j < cg.n; ++j) {
    if (j == j0) continue;
    out.g_star_mismatch = std::max(out.g_star_mismatch, std::abs(gs[j] - phase * std::conj(g[symmetric_mirror(cg, j)])));
  }
  if (out.g_star_mismatch > opt.g_star_tol) {
    std::ostringstream msg;
    msg << "g* of the reversed corner differs from the reversal formula by " << out.g_star_mismatch;
    throw std::runtime_error(msg.str());
  }

  // chi(-t, x) = chi*(t, -x); the tangent flips and the frame stays right-handed
  const CurveEvolution& rev = out.reversed.evolution;
  const Grid1D& xg = opt.assemble.x_grid;
  for (std::size_t k = rev.slices(); k-- > 0;) {
    SampledCurve c{xg, std::vector<Vec3>(xg.n), std::nullopt};
    FrameField F{xg, std::vector<Vec3>(xg.n), std::vector<Vec3>(xg.n), std::vector<Vec3>(xg.n)};
    for (std::size_t j = 0; j < xg.n; ++j) {
      const std::size_t m = symmetric_mirror(xg, j);
      c.points[j] = rev.curves[k].points[m];
      F.set(j, Frame{-rev.frames[k].T[m], rev.frames[k].e1[m], -rev.frames[k].e2[m]});
    }
    out.evolution.times.push_back(-rev.times[k]);
    out.evolution.curves.push_back(std::move(c));
    out.evolution.frames.push_back(std::move(F));
  }
  out.evolution.warnings = out.reversed.warnings;

  const auto& c_pos = positive.trace.chi0;
  const auto& c_rev = out.reversed.trace.chi0;
  for (std::size_t j = 0; j < xg.n; ++j)
    out.stitch_gap = std::max(out.stitch_gap, (c_pos[j] - c_rev[symmetric_mirror(xg, j)]).norm());
  return out;
}

ComplexField u_from_curve(const SampledCurve& curve, double a, const Grid1D& u_grid) {
  const Grid1D& g = curve.grid;
  if (g.periodic) throw std::invalid_argument("u_from_curve needs a line grid");
  const auto ct = extract_curvature_torsion(curve);
  const ComplexField psi = filament_from_ct(ct);
  // v = psi e^{-ix^2/4}; its constant phase is fixed on the outer half
  std::vector<cplx> v(g.n);
  cplx mean = 0.0;
  std::size_t lo = g.n, hi = 0;
  for (std::size_t j = 0; j < g.n; ++j) {
    const double x = g.x(j);
    v[j] = psi[j] * std::polar(1.0, -0.25 * x * x);
    if (ct.invalid[j]) continue;
    lo = std::min(lo, j);
    hi = std::max(hi, j);
    if (std::abs(x) >= 0.5 * std::max(std::abs(g.x_min), std::abs(g.x_max))) mean += v[j];
  }
  if (lo >= hi) throw std::invalid_argument("curve too short for curvature extraction");
  const cplx rot = std::abs(mean) > 0.0 ? std::conj(mean) / std::abs(mean) : cplx(1.0);
  for (auto& z : v) z *= rot;
  ComplexField u(u_grid);
  const double y_lo = g.x(lo + 3), y_hi = g.x(hi - 3);
  for (std::size_t j = 0; j < u_grid.n; ++j) {
    const double y = u_grid.x(j);
    if (y < y_lo || y > y_hi) continue;
    u[j] = std::conj(lagrange_eval(g, v, y)) - a;
  }
  return u;
}

namespace {

// Slice t = 1 of R chi_std + b on grid.
SampledCurve slice_at_one(const ComplexField& u1, double a, const Mat3& R, const Vec3& b, const IvpOptions& opt,
                          const Grid1D& grid) {
  AssembleOptions ao = opt.assemble;
  ao.times = {1.0};
  ao.x_grid = grid;
  return assemble_positive(u1, a, R, b, ao).curves.front();
}

}  // namespace

ReversibilityReport reversibility_round_trip(const IvpSolution& pos, const NegativeSolution& neg,
                                             const IvpOptions& opt, const Grid1D& wide) {
  require_symmetric(wide);
  const double a = pos.a;
  const IvpSolution& rev = neg.reversed;
  // chi(-1, -x) = chi*(1, x)
  const SampledCurve star = slice_at_one(rev.wave.u1, a, rev.rotation, rev.translation, opt, wide);
  const ComplexField u_star = u_from_curve(star, a, opt.u_grid);
  WaveOperatorOptions wopt = opt.wave;
  wopt.gamma = opt.gamma;
  const ComplexField u_star_plus = scattering_state(u_star, a, wopt);

  const Grid1D& cg = pos.trace_system.g.grid;
  const ComplexField g_star = g_from_u_plus(u_star_plus, a, cg);
  const cplx phase = std::polar(1.0, -pos.fam.reversal_phase);
  ComplexField g(cg);
  for (std::size_t j = 0; j < cg.n; ++j) g[j] = phase * std::conj(g_star[symmetric_mirror(cg, j)]);
  const ComplexField u_plus = final_state_u_plus(g, a, opt.u_grid);

  ReversibilityReport out;
  out.u_plus_gap = l2_distance(u_plus, pos.u_plus);
  wopt.check_cauchy = false;
  const ComplexField u1 = modified_wave_operator(u_plus, a, wopt).u1;
  const SampledCurve again = slice_at_one(u1, a, pos.rotation, pos.translation, opt, wide);
  const SampledCurve orig = slice_at_one(pos.wave.u1, a, pos.rotation, pos.translation, opt, wide);
  const Grid1D& xg = opt.assemble.x_grid;
  for (std::size_t j = 0; j < wide.n; ++j) {
    const double x = wide.x(j);
    if (x < xg.x_min || x > xg.x_max) continue;
    out.chi_gap = std::max(out.chi_gap, (again.points[j] - orig.points[j]).norm());
  }
  return out;
}

nlohmann::json ivp_summary(const IvpSolution& pos, const NegativeSolution* neg) {
  nlohmann::json j;
  j["a"] = pos.a;
  j["theta"] = pos.fam.theta;
  j["alignment_residual"] = pos.trace_system.alignment_residual;
  j["tangent_mismatch"] = pos.trace_system.max_tangent_mismatch;
  j["g_l2"] = pos.trace_system.g.l2_norm();
  j["u_plus_l2"] = pos.u_plus.l2_norm();
  j["u_plus_xgamma"] = pos.u_plus_xgamma;
  j["u_plus_small"] = pos.wave.small;
  j["cauchy_gap"] = pos.wave.cauchy_gap;
  j["wave_converged"] = pos.wave.converged;
  j["angle_measured"] = pos.trace.angle_measured;
  j["chi_sqrt_t"] = pos.trace.chi_sqrt_t;
  j["T_sqrt_t_over_x"] = pos.trace.T_sqrt_t_over_x;
  j["richardson_disagreement"] = pos.trace.richardson_disagreement;
  j["trace_flagged"] = pos.trace.flagged;
  j["warnings"] = pos.warnings;
  if (neg) {
    j["g_star_mismatch"] = neg->g_star_mismatch;
    j["stitch_gap"] = neg->stitch_gap;
    j["negative_angle_measured"] = neg->reversed.trace.angle_measured;
  }
  return j;
}

}  // namespace filament
