// One pass/fail line per acceptance criterion, with measured numbers below it.
//
//   acceptance [ids...]
//
// Exit status 0 when every criterion passes or fails only where the failure is
// a documented known red (see README, "Acceptance status"); 1 otherwise.

#include <Eigen/Geometry>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "filament/corner_ivp.hpp"
#include "filament/fourier.hpp"
#include "filament/hasimoto.hpp"
#include "filament/io.hpp"
#include "filament/nls.hpp"
#include "filament/scattering.hpp"
#include "filament/self_similar.hpp"
#include "filament/vfe_direct.hpp"

using namespace filament;
constexpr double pi = std::numbers::pi;

namespace {

// Failing here is analysed in the README; everything else must pass.
const std::set<int> kKnownRed = {1, 5, 9};

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
  double seconds = 0.0;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

double sup_gap(const SampledCurve& p, const SampledCurve& q) {
  double d = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) d = std::max(d, (p.points[j] - q.points[j]).norm());
  return d;
}

// ---------------------------------------------------------------- 1, 2

Outcome angle_law() {
  Outcome o;
  o.pass = true;
  double worst = 0.0, worst_pi = 0.0;
  for (double a : {0.1, 0.3, 0.5, 0.8, 1.2}) {
    const auto fam = build_profile(a, 200.0, 1e-3);
    const double s = fam.sin_half_theta();
    const double gap = std::abs(s - std::exp(-0.5 * a * a));
    const double gap_pi = std::abs(s - std::exp(-0.5 * pi * a * a));
    worst = std::max(worst, gap);
    worst_pi = std::max(worst_pi, gap_pi);
    o.pass = o.pass && gap <= 1e-3;
    o.details.push_back("a = " + fmt(a) + ": sin(theta/2) = " + fmt(s, 8) + ", exp(-a^2/2) = " +
                        fmt(std::exp(-0.5 * a * a), 8) + ", exp(-pi a^2/2) = " + fmt(std::exp(-0.5 * pi * a * a), 8));
  }
  o.summary = "max |sin(theta/2) - exp(-a^2/2)| = " + fmt(worst) + " (limit 1e-3); against exp(-pi a^2/2): " +
              fmt(worst_pi);
  return o;
}

Outcome corner_bound() {
  Outcome o;
  const double a = 0.5;
  const auto fam = build_profile(a, 200.0, 1e-3);
  const Grid1D g = Grid1D::line(-6, 6, 1201);
  o.pass = true;
  double worst_off = 0.0, worst_tip = 0.0;
  for (double t : {1.0, 1e-1, 1e-2, 1e-3}) {
    const auto chi = evaluate_chi_a(fam, t, g);
    const double bound = 2 * a * std::sqrt(t);
    double off = 0.0, tip = 0.0;
    for (std::size_t j = 0; j < g.n; ++j) {
      const double x = g.x(j);
      const double d = (chi.points[j] - x * (x >= 0 ? fam.A_plus : fam.A_minus)).norm() / bound;
      if (j == g.node_index(0.0)) tip = d;
      else off = std::max(off, d);
    }
    worst_off = std::max(worst_off, off);
    worst_tip = std::max(worst_tip, tip);
    // strict off the tip; chi_a(t, 0) = 2a sqrt(t) b0 attains the bound at x = 0
    o.pass = o.pass && off < 1.0 && tip <= 1.0 + 1e-12;
    o.details.push_back("t = " + fmt(t) + ": sup/bound off the tip " + fmt(off, 8) + ", at x = 0 " + fmt(tip, 15));
  }
  o.summary = "sup_x |chi_a - x A| / (2a sqrt t): " + fmt(worst_off, 6) + " off the tip, " + fmt(worst_tip, 15) + " at x = 0";
  return o;
}

// ---------------------------------------------------------------- 3, 4

Outcome explicit_solutions() {
  Outcome o;
  NlsParams p;
  p.t_start = 0.0;
  p.t_end = 1.0;
  p.dt = 1e-4;
  p.A0 = explicit_solution::circle_gauge();
  for (int k = 1; k < 20; ++k) p.record_times.push_back(0.05 * k);
  auto run_error = [&](const Grid1D& g, const std::function<cplx(double, double)>& exact) {
    ComplexField f(g);
    for (std::size_t j = 0; j < g.n; ++j) f[j] = exact(0.0, g.x(j));
    const auto run = evolve_psi(f, p);
    double e = 0.0;
    for (std::size_t k = 0; k < run.slices(); ++k)
      for (std::size_t j = 0; j < g.n; ++j) e = std::max(e, std::abs(run.values[k][j] - exact(run.times[k], g.x(j))));
    return e;
  };
  const double e_const = run_error(Grid1D::centered_box(2 * pi, 1024), [](double, double) { return cplx(1.0); });
  const double e_wave = run_error(Grid1D::centered_box(2 * pi, 1024),
                                  [](double t, double x) { return explicit_solution::plane_wave(1.0, t, x); });
  const double e_sol = run_error(Grid1D::centered_box(60.0, 1024),
                                 [&](double t, double x) { return explicit_solution::soliton(0.5, p.A0, t, x); });
  o.pass = std::max({e_const, e_wave, e_sol}) <= 1e-6;
  o.summary = "L-inf errors: constant " + fmt(e_const) + ", plane wave " + fmt(e_wave) + ", soliton " + fmt(e_sol) +
              " (limit 1e-6)";
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  auto w0_on = [](const Grid1D& g) {
    ComplexField w0(g);
    for (std::size_t j = 0; j < g.n; ++j) {
      const double x = g.x(j);
      w0[j] = cplx(1, 1) * std::exp(-0.5 * x * x) + cplx(0, 0.3) * x * std::exp(-0.25 * x * x);
    }
    return w0;
  };
  auto run = [](const ComplexField& w0, double dt) {
    NlsParams p;
    p.a = 0.5;
    p.t_start = 1.0;
    p.t_end = 100.0;
    p.dt = dt;
    p.order = 4;
    p.mode = NonlinearMode::Linearized;
    p.record_times = log_spaced(1, 100, 12);
    return evolve_u_gauged(w0, p);
  };
  const Grid1D g1 = Grid1D::centered_box(64, 256), g2 = Grid1D::centered_box(64, 512);
  const auto r1 = run(w0_on(g1), 5e-3);
  const auto pde = spectra(r1);
  const auto orc = linear_oracle_run(w0_on(g1), 0.5, +1, r1.times);
  const double diff = max_spectral_difference(pde, orc);
  const auto m1 = mode_growth_check(pde, 0.1);
  const auto m2 = mode_growth_check(run(w0_on(g2), 2.5e-3), 0.1);
  // both zero (no mode ever exceeds its t = 1 weight) counts as stable
  auto ratio = [](double x, double y) { return std::max(x, y) <= 1e-12 ? 1.0 : std::max(x / y, y / x); };
  const double c1 = ratio(m1.C1_max, m2.C1_max), c2 = ratio(m1.C2_max, m2.C2_max);
  o.pass = diff <= 1e-8 && c1 <= 2.0 && c2 <= 2.0;
  o.summary = "max mode difference " + fmt(diff) + " (limit 1e-8); C1 ratio " + fmt(c1, 4) + ", C2 ratio " + fmt(c2, 4) +
              " under refinement (limit 2)";
  o.details.push_back("M = 256: C1 = " + fmt(m1.C1_max, 6) + ", C2 = " + fmt(m1.C2_max, 6) + "; M = 512: C1 = " +
                      fmt(m2.C1_max, 6) + ", C2 = " + fmt(m2.C2_max, 6));
  return o;
}

// ---------------------------------------------------------------- 5, 9

ComplexField spectrum_field(const Grid1D& g, const std::function<cplx(double)>& s) {
  const auto xi = fourier::wavenumbers(g);
  std::vector<cplx> v(g.n);
  for (std::size_t k = 0; k < g.n; ++k) v[k] = s(xi[k]);
  return fourier::inverse_transform(g, v);
}

DecayFit decay_of(const ComplexField& u0) {
  NlsParams p;
  p.a = 0.5;
  p.t_start = 1.0;
  p.t_end = 1e3;
  p.dt = 0.01;
  p.dt_relative = true;
  p.record_times = log_spaced(1, 1e3, 41);
  const auto run = evolve_u(u0, p);
  return decay_fit(run.times, renormalized_state(run, 0.5));
}

Outcome decay_rate() {
  Outcome o;
  const Grid1D g = Grid1D::centered_box(512, 4096);
  const auto u0 = spectrum_field(g, [](double xi) {
    return xi == 0.0 ? cplx(0.0) : 0.05 * std::pow(std::abs(xi), -0.3) * std::exp(-xi * xi) * cplx(1, 0.5);
  });
  const auto fit = decay_of(u0);
  const double limit = -(0.25 - 0.15) + 0.05;
  o.pass = fit.exponent <= limit;
  o.summary = "fitted exponent " + fmt(fit.exponent, 4) + " (limit " + fmt(limit) + "), residual " + fmt(fit.residual) +
              ", X^0.3 norm " + fmt(xgamma_norm(u0, 0.3).total);
  std::size_t peak = 0;
  for (std::size_t k = 0; k < fit.deficits.size(); ++k)
    if (fit.deficits[k] > fit.deficits[peak]) peak = k;
  o.details.push_back("consecutive deficit peaks at t = " + fmt(fit.times[peak]) + " (still rising over most of [1, 1e3])");
  const auto gauss = decay_of(spectrum_field(g, [](double xi) { return 0.05 * std::exp(-xi * xi) * cplx(1, 0.5); }));
  o.details.push_back("contrast, smooth data with the same envelope: exponent " + fmt(gauss.exponent, 4));
  return o;
}

Outcome log_mode_growth() {
  Outcome o;
  const Grid1D g = Grid1D::centered_box(256, 1024);
  const double a = 0.5, c = 0.5 * a * a;
  const auto times = log_spaced(1, 1e3, 41);
  std::vector<double> lt;
  for (double t : times) lt.push_back(std::log(t));
  int passing = 0, agree = 0;
  const int runs = 12;
  double worst = 1.0;
  auto modulus_correlation = [&](const SpectralRun& sp) {
    std::vector<double> m;
    for (const auto& v : sp.values) m.push_back(std::abs(v[0]));
    return std::pair{fit_line(lt, m).correlation, m};
  };
  for (int seed = 1; seed <= runs; ++seed) {
    // generic small datum: random smooth spectrum, L2 norm 0.05
    std::mt19937_64 rng{std::uint64_t(seed)};
    std::normal_distribution<double> n01(0.0, 1.0);
    auto u0 = spectrum_field(g, [&](double xi) { return cplx(n01(rng), n01(rng)) * std::exp(-xi * xi); });
    const double scale = 0.05 / u0.l2_norm();
    for (auto& v : u0.values) v *= scale;
    NlsParams p;
    p.a = a;
    p.t_start = 1.0;
    p.t_end = 1e3;
    p.dt = 0.01;
    p.dt_relative = true;
    p.record_times = times;
    const auto sp = spectra(evolve_u(u0, p));
    const auto [corr, m] = modulus_correlation(sp);
    worst = std::min(worst, corr);
    passing += corr >= 0.99;
    // xi = 0 oracle: |p|^2 = x0^2 + (y0 + 2 c x0 log t)^2 with p0 = x0 + i y0, minimum at log t*
    const cplx p0 = sp.values[0][0];
    const double log_min = -p0.imag() / (2 * c * p0.real());
    const auto orc = linear_mode_oracle(p0, std::conj(p0), 0.0, a, +1, sp.times);
    std::vector<double> mo;
    for (const auto& v : orc.p) mo.push_back(std::abs(v));
    const double corr_orc = fit_line(lt, mo).correlation;
    const double swing = (*std::max_element(mo.begin(), mo.end()) - *std::min_element(mo.begin(), mo.end())) / mo.front();
    std::string line = "seed " + std::to_string(seed) + ": corr " + fmt(corr, 5) + ", linear oracle " + fmt(corr_orc, 5) +
                       ", |u^(t,0)| " + fmt(m.front()) + " -> " + fmt(m.back()) + ", log t* = " + fmt(log_min) +
                       (log_min > 0.0 && log_min < lt.back() ? " (inside)" : "") + ", oracle swing " + fmt(swing, 2);
    if ((corr >= 0.99) == (corr_orc >= 0.99)) {
      ++agree;
    } else {
      p.mode = NonlinearMode::Linearized;
      line += "; linearized PDE corr " + fmt(modulus_correlation(spectra(evolve_u(u0, p))).first, 5);
    }
    o.details.push_back(line);
  }
  o.pass = passing == runs;
  o.summary = std::to_string(passing) + "/" + std::to_string(runs) + " generic runs reach correlation >= 0.99 (worst " +
              fmt(worst, 4) + "); the xi = 0 linear oracle agrees on " + std::to_string(agree) + "/" +
              std::to_string(runs);
  return o;
}

// ---------------------------------------------------------------- 6

SampledCurve helix_curve(const Grid1D& g, double k, double r, double h) {
  SampledCurve c{g, {}, std::nullopt};
  for (std::size_t j = 0; j < g.n; ++j) {
    const double x = g.x(j);
    c.points.emplace_back(r * std::cos(k * x), r * std::sin(k * x), h * x);
  }
  return c;
}

double coarse_vs_fine(const SampledCurve& coarse, const SampledCurve& fine) {
  double d = 0.0;
  for (std::size_t j = 0; j < coarse.size(); ++j) d = std::max(d, (coarse.points[j] - fine.points[2 * j]).norm());
  return d;
}

SpaceTimeField sample_plane_wave(const Grid1D& g, double N, double t1, double dt) {
  SpaceTimeField f;
  f.grid = g;
  const auto n = std::size_t(std::llround(t1 / dt));
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = t1 * double(k) / double(n);
    ComplexField s(g);
    for (std::size_t j = 0; j < g.n; ++j) s[j] = explicit_solution::plane_wave(N, t, g.x(j));
    f.push(t, s, 1.0);
  }
  return f;
}

Outcome cross_validation() {
  Outcome o;
  // circle: psi = 1 against the direct flow of the unit circle
  auto run_direct = [](std::size_t n, double dt) {
    DirectRunConfig cfg;
    cfg.dt = dt;
    cfg.t_end = 0.5;
    cfg.period_shift = Vec3::Zero();
    return evolve_direct(helix_curve(Grid1D::periodic_box(-pi, pi, n), 1.0, 1.0, 0.0), cfg);
  };
  const auto coarse = run_direct(64, 1e-3), fine = run_direct(128, 2.5e-4);
  const double self_circle = coarse_vs_fine(coarse.curves.back(), fine.curves.back());
  const Grid1D gc = Grid1D::periodic_box(-pi, pi, 64);
  SpaceTimeField field;
  field.grid = gc;
  for (int k = 0; k <= 500; ++k) field.push(1e-3 * k, ComplexField(gc, std::vector<cplx>(gc.n, 1.0)), 1.0);
  const Frame base{Vec3(0, 1, 0), Vec3(-1, 0, 0), Vec3(0, 0, 1)};
  const auto rec = reconstruct_evolution(field, base, Vec3(1, 0, 0), 0.0, 0.0);
  const double diff_circle = sup_gap(rec.curves.back(), coarse.curves.back());

  // helix: psi = e^{i N x}, N = 3/4 on a box of 8 pi
  const double N = 0.75, T = 0.2;
  auto reconstruct = [&](std::size_t n, double dt) {
    return reconstruct_evolution(sample_plane_wave(Grid1D::centered_box(8 * pi, n), N, T, dt), Frame::canonical(),
                                 Vec3::Zero(), 0.0, 0.0);
  };
  const auto hr = reconstruct(256, 1e-3), hr_fine = reconstruct(512, 5e-4);
  auto direct = [&](const CurveEvolution& source, double dt) {
    DirectRunConfig cfg;
    cfg.dt = dt;
    cfg.t_end = T;
    return evolve_direct({source.curves.front().grid, source.curves.front().points, std::nullopt}, cfg);
  };
  const auto hd = direct(hr, 2e-4), hd_fine = direct(hr_fine, 5e-5);
  const double self_helix = std::max(coarse_vs_fine(hr.curves.back(), hr_fine.curves.back()),
                                     coarse_vs_fine(hd.curves.back(), hd_fine.curves.back()));
  const double diff_helix = sup_gap(hr.curves.back(), hd.curves.back());

  // vfe_residual under halving of dt and dx together
  auto residual = [&](std::size_t n, double dt) {
    return vfe_residual(reconstruct_evolution(sample_plane_wave(Grid1D::centered_box(8 * pi, n), N, T, dt),
                                              Frame::canonical(), Vec3::Zero(), 0.0, 0.0));
  };
  const double r1 = residual(128, 1e-2), r2 = residual(256, 5e-3), r3 = residual(512, 2.5e-3);
  o.pass = diff_circle <= 5 * self_circle && diff_helix <= 5 * self_helix && r1 / r2 > 3.5 && r2 / r3 > 3.5;
  o.summary = "circle diff " + fmt(diff_circle) + " vs 5 x " + fmt(self_circle) + "; helix diff " + fmt(diff_helix) +
              " vs 5 x " + fmt(self_helix) + "; residual ratios " + fmt(r1 / r2) + ", " + fmt(r2 / r3) + " (> 3.5)";
  o.details.push_back("vfe_residual " + fmt(r1) + " -> " + fmt(r2) + " -> " + fmt(r3));
  return o;
}

// ---------------------------------------------------------------- 7, 8

Mat3 seeded_rotation(unsigned seed) {
  std::mt19937 rng{seed};
  std::normal_distribution<double> n(0.0, 1.0);
  const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
  return Eigen::AngleAxisd(std::uniform_real_distribution<double>(0.0, pi)(rng), axis).toRotationMatrix();
}

const SelfSimilarFamily& family05() {
  static const SelfSimilarFamily fam = build_profile(0.5, 200.0, 1e-3);
  return fam;
}

IvpOptions small_options() {
  IvpOptions opt;
  opt.u_grid = Grid1D::centered_box(4096.0, 16384);
  opt.assemble.times = {1e-3, 1.5e-3, 2e-3, 3e-3, 1e-2, 0.1, 1.0};
  opt.assemble.x_grid = Grid1D::line(-2, 2, 401);
  return opt;
}

IvpOptions fine_options() {
  IvpOptions opt;
  opt.u_grid = Grid1D::centered_box(40960.0, 163840);
  opt.assemble.times = {1e-4, 1.5e-4, 2e-4, 3e-4, 5e-4, 1e-3, 1e-2, 0.1, 1.0};
  opt.assemble.x_grid = Grid1D::line(-2, 2, 401);
  return opt;
}

// eps with ||u+||_X^0.3 = 0.05 a for the Gaussian family (the norm is linear in eps)
double eps_for_target(double a, const Grid1D& cg, const Grid1D& ug) {
  const auto g1 = gaussian_state_g(1.0, 8.0, a);
  ComplexField g(cg);
  for (std::size_t j = 0; j < cg.n; ++j) g[j] = g1(cg.x(j));
  return 0.05 * a / xgamma_norm(final_state_u_plus(g, a, ug), 0.3).total;
}

Outcome corner_fixed_point() {
  Outcome o;
  const auto& fam = family05();
  // pure corner in a random position
  const Mat3 R = seeded_rotation(11);
  const Vec3 b(0.3, -1.0, 2.0);
  const Grid1D cg8 = Grid1D::line(-8, 8, 8001);
  const auto pure = moved(corner_from_g([](double) { return cplx(0.0); }, fam, cg8), R, b);
  const auto sopt = small_options();
  const auto ps = solve_positive(pure, sopt);
  double pure_gap = 0.0;
  for (std::size_t k = 0; k < ps.evolution.slices(); ++k)
    pure_gap = std::max(pure_gap, sup_gap(ps.evolution.curves[k],
                                          evaluate_chi_a(ps.fam, ps.evolution.times[k], sopt.assemble.x_grid).transformed(R, b)));

  // perturbed corner, ||u+||_X = 0.05 a
  const IvpOptions opt = fine_options();
  const Grid1D cg = Grid1D::line(-12, 12, 12001);
  const double eps = eps_for_target(0.5, cg, opt.u_grid);
  const auto corner = corner_from_g(gaussian_state_g(eps, 8.0, 0.5), fam, cg);
  const auto sol = solve_positive(corner, opt);
  const auto& xg = opt.assemble.x_grid;
  std::vector<Vec3> chi0(xg.n), T0(xg.n);
  for (std::size_t j = 0; j < xg.n; ++j) {
    chi0[j] = lagrange_eval(cg, corner.curve.points, xg.x(j));
    T0[j] = lagrange_eval(cg, corner.tangent, xg.x(j));
  }
  std::vector<double> chi_ratio, trace_ratio;
  std::string chi_line = "sup|chi - chi0|/sqrt(t):", tr_line = "sup_{t <= x^2} |T - T0| |x| / sqrt(t):";
  for (std::size_t k = 0; k < sol.evolution.slices(); ++k) {
    const double t = sol.evolution.times[k];
    double d = 0.0, tr = 0.0;
    for (std::size_t j = 0; j < xg.n; ++j) {
      d = std::max(d, (sol.evolution.curves[k].points[j] - chi0[j]).norm());
      const double x = std::abs(xg.x(j));
      if (x > 0.0 && t <= x * x) tr = std::max(tr, (sol.evolution.frames[k].T[j] - T0[j]).norm() * x / std::sqrt(t));
    }
    chi_ratio.push_back(d / std::sqrt(t));
    trace_ratio.push_back(tr);
    chi_line += " " + fmt(chi_ratio.back(), 4);
    tr_line += " " + fmt(tr, 4);
  }
  auto spread = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
  };
  const double angle_in = corner_angle(corner.A_plus, corner.A_minus);
  const double angle_err = std::abs(sol.trace.angle_measured - angle_in);
  o.pass = pure_gap <= 1e-6 && spread(chi_ratio) <= 1.5 && spread(trace_ratio) <= 1.5 && angle_err <= 5e-3;
  o.summary = "pure |chi - chi_a| " + fmt(pure_gap) + " (1e-6); perturbed: chi ratio spread " + fmt(spread(chi_ratio), 4) +
              ", trace ratio spread " + fmt(spread(trace_ratio), 4) + " (1.5), angle error " + fmt(angle_err) + " (5e-3)";
  o.details.push_back("||u+||_X = " + fmt(sol.u_plus_xgamma, 4) + " (target 0.025), eps = " + fmt(eps, 4) +
                      ", wave operator Cauchy gap " + fmt(sol.wave.cauchy_gap) +
                      (sol.wave.converged ? "" : " (above its 1e-4 tolerance, reported)"));
  o.details.push_back("times:" + [&] {
    std::string s;
    for (double t : sol.evolution.times) s += " " + fmt(t);
    return s;
  }());
  o.details.push_back(chi_line);
  o.details.push_back(tr_line);
  return o;
}

Outcome continuation() {
  Outcome o;
  const auto& fam = family05();
  const IvpOptions opt = small_options();
  const auto& xg = opt.assemble.x_grid;
  // pure corner: the bisector pi-rotation of chi_a(t, -x)
  const Mat3 R = seeded_rotation(5);
  const Vec3 b(-1.0, 0.5, 0.25);
  const auto pure = moved(corner_from_g([](double) { return cplx(0.0); }, fam, Grid1D::line(-8, 8, 8001)), R, b);
  const auto ps = solve_positive(pure, opt);
  const auto pn = continue_negative(pure, ps, opt);
  const Mat3 Rb = R * fam.bisector_rotation() * R.transpose();
  double bis = 0.0;
  for (std::size_t k = 0; k < pn.evolution.slices(); ++k) {
    const auto chi_a = evaluate_chi_a(fam, -pn.evolution.times[k], xg).transformed(R, b);
    for (std::size_t j = 0; j < xg.n; ++j)
      bis = std::max(bis, (pn.evolution.curves[k].points[j] - (Rb * (chi_a.points[xg.n - 1 - j] - b) + b)).norm());
  }
  // perturbed corner: g* duality and the round trip chi(-1) -> chi(1)
  const Grid1D cg = Grid1D::line(-12, 12, 12001);
  const double eps = eps_for_target(0.5, cg, opt.u_grid);
  const auto corner = corner_from_g(gaussian_state_g(eps, 8.0, 0.5), fam, cg);
  const auto sol = solve_positive(corner, opt);
  const auto neg = continue_negative(corner, sol, opt);
  const auto rr = reversibility_round_trip(sol, neg, opt, Grid1D::line(-30, 30, 6001));
  // without the constant phase: |g*(x) - conj(g(-x))|
  const auto& g = sol.trace_system.g;
  const auto& gs = neg.reversed.trace_system.g;
  double literal = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) literal = std::max(literal, std::abs(gs[j] - std::conj(g[g.size() - 1 - j])));
  o.pass = neg.evolution.slices() > 0 && bis <= 1e-4 && rr.chi_gap <= 5e-3 && neg.g_star_mismatch <= 1e-8 &&
           pn.g_star_mismatch <= 1e-8;
  o.summary = "bisector gap " + fmt(bis) + " (1e-4); round trip |chi(1)| gap " + fmt(rr.chi_gap) + " (5e-3); g* duality " +
              fmt(neg.g_star_mismatch) + " (1e-8)";
  o.details.push_back("g*(x) = exp(-i theta_a) conj(g(-x)) with theta_a = " + fmt(fam.reversal_phase, 6) +
                      "; without the phase the gap is " + fmt(literal));
  o.details.push_back("stitch at t = 0: pure " + fmt(pn.stitch_gap) + ", perturbed " + fmt(neg.stitch_gap) +
                      "; round trip u+ gap " + fmt(rr.u_plus_gap));
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "angle law", angle_law},
      {2, "corner bound", corner_bound},
      {3, "explicit solutions", explicit_solutions},
      {4, "oracle equivalence", oracle_equivalence},
      {5, "decay rate", decay_rate},
      {6, "Hasimoto/direct cross-validation", cross_validation},
      {7, "corner IVP fixed point", corner_fixed_point},
      {8, "continuation and reversibility", continuation},
      {9, "log-mode growth", log_mode_growth},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  std::vector<const Criterion*> todo;
  for (const auto& c : all)
    if (wanted.empty() || wanted.count(c.id)) todo.push_back(&c);

  int threads = 1;
  try {
    threads = io::thread_cap();
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  auto timed = [](const Criterion* c) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c->run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return o;
  };
  // FILAMENT_THREADS criteria at a time, reported in order
  std::vector<Outcome> results(todo.size());
  for (std::size_t start = 0; start < todo.size(); start += std::size_t(threads)) {
    std::vector<std::future<Outcome>> batch;
    for (std::size_t i = start; i < std::min(todo.size(), start + std::size_t(threads)); ++i)
      batch.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred, timed, todo[i]));
    for (std::size_t i = 0; i < batch.size(); ++i) results[start + i] = batch[i].get();
  }

  int unexpected = 0;
  for (std::size_t i = 0; i < todo.size(); ++i) {
    const auto& c = *todo[i];
    const auto& o = results[i];
    const bool known = kKnownRed.count(c.id) > 0;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << " - " << o.summary
              << (o.pass || !known ? "" : " [known red, analysed in README]") << " [" << fmt(o.seconds, 3) << " s]\n";
    for (const auto& d : o.details) std::cout << "    " << d << '\n';
    if (!o.pass && !known) ++unexpected;
  }
  std::cout << (unexpected ? "unexpected failures: " + std::to_string(unexpected) : std::string("no unexpected failures"))
            << '\n';
  return unexpected ? 1 : 0;
}
