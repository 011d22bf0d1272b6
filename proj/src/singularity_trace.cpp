#include "filament/singularity_trace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace filament {

namespace {

// Least squares of complex 3-vector samples on real basis columns; returns the
// coefficient of column 0 and the RMS residual.
template <class V>
std::pair<V, double> fit_columns(const Eigen::MatrixXd& B, const std::vector<V>& y) {
  const auto qr = B.colPivHouseholderQr();
  V out = y.front() * 0.0;
  double ss = 0.0;
  constexpr bool is_complex = std::is_same_v<typename V::Scalar, cplx>;
  for (int comp = 0; comp < 3; ++comp) {
    for (int part = 0; part < (is_complex ? 2 : 1); ++part) {
      Eigen::VectorXd rhs(Eigen::Index(y.size()));
      for (std::size_t r = 0; r < y.size(); ++r) {
        if constexpr (is_complex)
          rhs(Eigen::Index(r)) = part == 0 ? y[r][comp].real() : y[r][comp].imag();
        else
          rhs(Eigen::Index(r)) = y[r][comp];
      }
      const Eigen::VectorXd c = qr.solve(rhs);
      ss += (B * c - rhs).squaredNorm();
      if constexpr (is_complex) {
        if (part == 0)
          out[comp].real(c(0));
        else
          out[comp].imag(c(0));
      } else {
        out[comp] = c(0);
      }
    }
  }
  return {out, std::sqrt(ss / double(y.size()))};
}

// Leading oscillatory terms of the tail removed (integration by parts of
// T_x = Re(conj(psi) N), N_x = -psi T against psi ~ e^{ix^2/4t}):
//   T + (2t/x) Im(conj(psi) N),   N - (2it/x) psi T.
struct Corrected {
  std::vector<Vec3> T;
  std::vector<CVec3> N;  // modulated
};

std::vector<cplx> slice_psi(const CurveEvolution& evo, std::size_t k) {
  if (!evo.psi.empty()) return evo.psi.at(k);
  // psi = T_x . N from the sampled frames
  const FrameField& F = evo.frames[k];
  const auto Tx = curve_derivative(SampledCurve{F.grid, F.T, std::nullopt});
  std::vector<cplx> psi(F.size());
  for (std::size_t j = 0; j < F.size(); ++j) psi[j] = Tx[j].cast<cplx>().cwiseProduct(F.N(j)).sum();
  return psi;
}

Corrected corrected(const CurveEvolution& evo, std::size_t k, double a) {
  const FrameField& F = evo.frames[k];
  const double t = evo.times[k];
  const auto psi = slice_psi(evo, k);
  Corrected c{F.T, std::vector<CVec3>(F.size(), CVec3::Zero())};
  for (std::size_t j = 0; j < F.size(); ++j) {
    const double x = F.grid.x(j);
    if (std::abs(x) < 1e-14) continue;
    const CVec3 N = F.N(j);
    const CVec3 T = F.T[j].cast<cplx>();
    c.T[j] += (2 * t / x) * (std::conj(psi[j]) * N).imag();
    c.N[j] = (N - cplx(0, 2 * t / x) * psi[j] * T) * std::polar(1.0, modulation_phase(a, t, x));
  }
  return c;
}

struct SideFit {
  Vec3 T;
  CVec3 N;
  double rms;
};

SideFit tail_side(const Grid1D& g, const Corrected& C, int sign) {
  const double xe = sign > 0 ? g.x(g.n - 1) : -g.x(0);
  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < g.n; ++j) {
    const double x = sign * g.x(j);
    if (x >= 0.5 * xe && x <= xe && x > 0) rows.push_back(j);
  }
  if (rows.size() < 8) throw std::invalid_argument("tail window holds too few nodes");
  Eigen::MatrixXd B(Eigen::Index(rows.size()), 4);
  std::vector<Vec3> ty;
  std::vector<CVec3> ny;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double u = xe / std::abs(g.x(rows[r]));
    B(Eigen::Index(r), 0) = 1.0;
    B(Eigen::Index(r), 1) = std::sqrt(u);
    B(Eigen::Index(r), 2) = u;
    B(Eigen::Index(r), 3) = u * u;
    ty.push_back(C.T[rows[r]]);
    ny.push_back(C.N[rows[r]]);
  }
  auto [T, r1] = fit_columns(B, ty);
  auto [N, r2] = fit_columns(B, ny);
  return {T, N, std::max(r1, r2)};
}

// value at r = 0 of the polynomial through (r_k, f_k)
template <class V>
V extrapolate_zero(const std::vector<double>& r, const std::vector<V>& f) {
  V acc = f[0] * 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    double w = 1.0;
    for (std::size_t j = 0; j < r.size(); ++j)
      if (j != k) w *= -r[j] / (r[k] - r[j]);
    acc += f[k] * w;
  }
  return acc;
}

// one-sided limit at x = 0 by a quadratic fit over x_cut <= |x| <= 4 x_cut
template <class V>
V one_sided_limit(const Grid1D& g, const std::vector<V>& f, const std::vector<char>& valid,
                  double x_cut, int sign) {
  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < g.n; ++j) {
    const double x = sign * g.x(j);
    if (valid[j] && x >= x_cut && x <= 4 * x_cut) rows.push_back(j);
  }
  if (rows.size() < 4) throw std::invalid_argument("too few nodes near the corner for a one-sided limit");
  Eigen::MatrixXd B(Eigen::Index(rows.size()), 3);
  std::vector<V> y;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double u = g.x(rows[r]) / x_cut;
    B(Eigen::Index(r), 0) = 1.0;
    B(Eigen::Index(r), 1) = u;
    B(Eigen::Index(r), 2) = u * u;
    y.push_back(f[rows[r]]);
  }
  return fit_columns(B, y).first;
}

std::vector<std::size_t> order_by_time(const CurveEvolution& evo) {
  std::vector<std::size_t> idx(evo.slices());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return evo.times[i] < evo.times[j]; });
  return idx;
}

void require_same_grid(const CurveEvolution& evo) {
  if (evo.slices() == 0) throw std::invalid_argument("empty evolution");
  for (std::size_t k = 0; k < evo.slices(); ++k) {
    if (!(evo.times[k] > 0.0)) throw std::invalid_argument("trace diagnostics need t > 0");
    if (!evo.curves[k].grid.same_as(evo.curves[0].grid) || !evo.frames[k].grid.same_as(evo.curves[0].grid))
      throw std::invalid_argument("slices must share one grid");
  }
}

}  // namespace

double modulation_phase(double a, double t, double x) {
  return -a * a * std::log(std::sqrt(t)) + a * a * std::log(std::abs(x));
}

ModulatedNormal modulated_normal(const FrameField& F, double t, double a) {
  if (!(t > 0.0)) throw std::invalid_argument("modulated normal needs t > 0");
  ModulatedNormal m;
  m.grid = F.grid;
  m.t = t;
  m.a = a;
  m.values.assign(F.size(), CVec3::Zero());
  m.valid.assign(F.size(), 0);
  for (std::size_t j = 0; j < F.size(); ++j) {
    const double x = F.grid.x(j);
    if (std::abs(x) < 1e-14) continue;
    m.values[j] = F.N(j) * std::polar(1.0, modulation_phase(a, t, x));
    m.valid[j] = 1;
  }
  return m;
}

double ModulatedNormal::frame_defect(const FrameField& F) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (!valid[j]) continue;
    const Vec3 re = values[j].real(), im = values[j].imag();
    worst = std::max({worst, std::abs(re.norm() - 1.0), std::abs(im.norm() - 1.0), std::abs(re.dot(im)),
                      std::abs(re.dot(F.T[j])), std::abs(im.dot(F.T[j]))});
  }
  return worst;
}

double corner_angle(const Vec3& A_plus, const Vec3& A_minus) {
  const Vec3 m = -A_minus;
  return std::atan2(A_plus.cross(m).norm(), A_plus.dot(m));
}

SpatialLimits spatial_limits(const CurveEvolution& evo, double a, double time_tol) {
  require_same_grid(evo);
  SpatialLimits out;
  const Grid1D& g = evo.curves[0].grid;
  for (std::size_t k = 0; k < evo.slices(); ++k) {
    const double need = 50.0 * std::sqrt(evo.times[k]);
    if (g.x(g.n - 1) < need || -g.x(0) < need) {
      out.reason = "grid tail shorter than 50 sqrt(t) at t = " + std::to_string(evo.times[k]);
      return out;
    }
  }
  Vec3 tp = Vec3::Zero(), tm = Vec3::Zero();
  CVec3 np = CVec3::Zero(), nm = CVec3::Zero();
  for (std::size_t k = 0; k < evo.slices(); ++k) {
    const auto C = corrected(evo, k, a);
    const SideFit p = tail_side(g, C, +1);
    const SideFit m = tail_side(g, C, -1);
    out.T_plus_per_slice.push_back(p.T);
    out.T_minus_per_slice.push_back(m.T);
    out.rms = std::max({out.rms, p.rms, m.rms});
    tp += p.T;
    tm += m.T;
    np += p.N;
    nm += m.N;
  }
  const double n = double(evo.slices());
  out.T_plus = (tp / n).normalized();
  out.T_minus = (tm / n).normalized();
  out.N_plus = np / n;
  out.N_minus = nm / n;
  for (std::size_t k = 0; k < evo.slices(); ++k)
    out.time_variation = std::max({out.time_variation, (out.T_plus_per_slice[k] - out.T_plus_per_slice[0]).norm(),
                                   (out.T_minus_per_slice[k] - out.T_minus_per_slice[0]).norm()});
  out.converged = out.time_variation <= time_tol;
  if (!out.converged) out.reason = "fitted limits vary in time";
  return out;
}

TraceReference self_similar_reference(const SelfSimilarFamily& fam, const Mat3& R, const Vec3& b,
                                      const std::vector<double>& times, const Grid1D& grid) {
  TraceReference ref;
  for (double t : times) {
    SampledCurve c = evaluate_chi_a(fam, t, grid).transformed(R, b);
    FrameField F = evaluate_koiso_a(fam, t, grid);
    for (std::size_t j = 0; j < grid.n; ++j) F.set(j, F.at(j).rotated(R));
    ref.evo.times.push_back(t);
    ref.evo.curves.push_back(std::move(c));
    ref.evo.frames.push_back(std::move(F));
    std::vector<cplx> psi(grid.n);
    for (std::size_t j = 0; j < grid.n; ++j) psi[j] = filament_function_a(fam.a, t, grid.x(j));
    ref.evo.psi.push_back(std::move(psi));
  }
  const CVec3 Bp = R.cast<cplx>() * fam.B_plus, Bm = R.cast<cplx>() * fam.B_minus;
  for (std::size_t j = 0; j < grid.n; ++j) {
    const double x = grid.x(j);
    const Vec3 A = x >= 0 ? R * fam.A_plus : R * fam.A_minus;
    ref.chi0.push_back(x * A + b);
    ref.T0.push_back(A);
    ref.N0.push_back(x >= 0 ? Bp : Bm);
  }
  return ref;
}

TraceData trace_at_zero(const CurveEvolution& evo, double a, const TraceOptions& opt) {
  require_same_grid(evo);
  if (opt.levels < 3) throw std::invalid_argument("need at least 3 extrapolation levels");
  if (evo.slices() < std::size_t(opt.levels)) throw std::invalid_argument("too few slices for the extrapolation");
  const Grid1D& g = evo.curves[0].grid;
  const TraceReference* ref = opt.reference;
  if (ref) {
    if (ref->evo.slices() != evo.slices() || ref->chi0.size() != g.n)
      throw std::invalid_argument("reference does not match the evolution");
    for (std::size_t k = 0; k < evo.slices(); ++k)
      if (std::abs(ref->evo.times[k] - evo.times[k]) > 1e-12 * evo.times[k])
        throw std::invalid_argument("reference times differ");
  }

  const auto order = order_by_time(evo);
  std::vector<Corrected> C, Cref;
  for (std::size_t k = 0; k < evo.slices(); ++k) {
    C.push_back(corrected(evo, k, a));
    if (ref) Cref.push_back(corrected(ref->evo, k, a));
  }

  TraceData tr;
  tr.grid = g;
  tr.valid.assign(g.n, 0);
  tr.chi0.assign(g.n, Vec3::Zero());
  tr.T0.assign(g.n, Vec3::Zero());
  tr.N0_tilde.assign(g.n, CVec3::Zero());

  const auto lv = std::size_t(opt.levels);
  std::vector<double> r_hi, r_lo;
  for (std::size_t i = 0; i < lv; ++i) r_hi.push_back(std::sqrt(evo.times[order[i]]));
  r_lo.assign(r_hi.begin(), r_hi.begin() + long(lv - 1));

  for (std::size_t j = 0; j < g.n; ++j) {
    const double x = g.x(j);
    tr.valid[j] = std::abs(x) >= opt.x_cut ? 1 : 0;
    std::vector<Vec3> chi, T;
    std::vector<CVec3> N;
    for (std::size_t i = 0; i < lv; ++i) {
      const std::size_t k = order[i];
      Vec3 c = evo.curves[k].points[j], tt = C[k].T[j];
      CVec3 nn = C[k].N[j];
      if (ref) {
        c -= ref->evo.curves[k].points[j];
        tt -= Cref[k].T[j];
        nn -= Cref[k].N[j];
      }
      chi.push_back(c);
      T.push_back(tt);
      N.push_back(nn);
    }
    Vec3 c_hi = extrapolate_zero(r_hi, chi);
    const Vec3 c_lo = extrapolate_zero(r_lo, std::vector<Vec3>(chi.begin(), chi.end() - 1));
    if (ref) c_hi += ref->chi0[j];
    tr.chi0[j] = c_hi;
    if (!tr.valid[j]) continue;
    Vec3 t_hi = extrapolate_zero(r_hi, T);
    const Vec3 t_lo = extrapolate_zero(r_lo, std::vector<Vec3>(T.begin(), T.end() - 1));
    CVec3 n_hi = extrapolate_zero(r_hi, N);
    if (ref) {
      t_hi += ref->T0[j];
      n_hi += ref->N0[j];
    }
    tr.T0[j] = t_hi;
    tr.N0_tilde[j] = n_hi;
    tr.richardson_disagreement =
        std::max({tr.richardson_disagreement, (t_hi - (ref ? Vec3(t_lo + ref->T0[j]) : t_lo)).norm(),
                  (c_hi - (ref ? Vec3(c_lo + ref->chi0[j]) : c_lo)).norm()});
  }
  tr.flagged = tr.richardson_disagreement > opt.richardson_tol;

  for (std::size_t k = 0; k < evo.slices(); ++k) {
    const double t = evo.times[k], st = std::sqrt(t);
    for (std::size_t j = 0; j < g.n; ++j) {
      tr.chi_sqrt_t = std::max(tr.chi_sqrt_t, (evo.curves[k].points[j] - tr.chi0[j]).norm() / st);
      if (!tr.valid[j]) continue;
      const double x = std::abs(g.x(j));
      const double dT = (evo.frames[k].T[j] - tr.T0[j]).norm();
      tr.T_t16 = std::max(tr.T_t16, dT / std::cbrt(st));
      if (t <= x * x) tr.T_sqrt_t_over_x = std::max(tr.T_sqrt_t_over_x, dT * x / st);
    }
  }

  tr.A_plus_meas = one_sided_limit(g, tr.T0, tr.valid, opt.x_cut, +1).normalized();
  tr.A_minus_meas = one_sided_limit(g, tr.T0, tr.valid, opt.x_cut, -1).normalized();
  tr.B_plus_meas = one_sided_limit(g, tr.N0_tilde, tr.valid, opt.x_cut, +1);
  tr.B_minus_meas = one_sided_limit(g, tr.N0_tilde, tr.valid, opt.x_cut, -1);
  tr.angle_measured = corner_angle(tr.A_plus_meas, tr.A_minus_meas);
  return tr;
}

RescaledReport rescaled_frames(const CurveEvolution& evo, double a, const RescaledOptions& opt) {
  require_same_grid(evo);
  const Grid1D& g = evo.curves[0].grid;
  auto order = order_by_time(evo);
  std::reverse(order.begin(), order.end());

  RescaledReport rep;
  const Grid1D sg = Grid1D::line(-opt.s_window, opt.s_window, opt.s_nodes);
  std::vector<Vec3> prev;
  for (std::size_t k : order) {
    const double t = evo.times[k], st = std::sqrt(t);
    if (st * opt.s_window > std::min(g.x(g.n - 1), -g.x(0)))
      throw std::invalid_argument("rescaled window leaves the grid at t = " + std::to_string(t));
    std::vector<Vec3> Tn(sg.n);
    for (std::size_t i = 0; i < sg.n; ++i) Tn[i] = lagrange_eval(g, evo.frames[k].T, st * sg.x(i));
    if (!prev.empty()) {
      double d = 0.0;
      for (std::size_t i = 0; i < sg.n; ++i) d = std::max(d, (Tn[i] - prev[i]).norm());
      rep.distance.push_back(d);
    }
    rep.times.push_back(t);
    prev = std::move(Tn);
  }
  for (std::size_t i = 1; i < rep.distance.size(); ++i)
    if (rep.distance[i] > opt.distance_floor && rep.distance[i] > rep.distance[i - 1]) rep.decreasing = false;

  // frame at x = 0 of the smallest-t slice
  const std::size_t last = order.back();
  const Frame f0 = Frame{lagrange_eval(g, evo.frames[last].T, 0.0), lagrange_eval(g, evo.frames[last].e1, 0.0),
                         lagrange_eval(g, evo.frames[last].e2, 0.0)}
                       .orthonormalized();
  const auto half = std::size_t(std::ceil(opt.s_ode / opt.ds_ode - 1e-9));
  const Grid1D og = Grid1D::line(-opt.s_ode, opt.s_ode, 2 * half + 1);
  const auto lim_sys =
      integrate_koiso(og, [a](double s) { return std::polar(a, 0.25 * s * s); }, f0, Vec3::Zero(), 0.0);
  const auto lim = corner_limits(lim_sys, a, opt.s_ode);
  rep.A_plus_meas = lim.A_plus;
  rep.A_minus_meas = lim.A_minus;
  rep.B_plus_meas = lim.B_plus;
  rep.B_minus_meas = lim.B_minus;
  rep.angle_measured = corner_angle(lim.A_plus, lim.A_minus);
  rep.angle_predicted = corner_theta(a);

  // |T'| = a and the frame stays orthonormal
  rep.ode_residual = std::max(lim_sys.frames.max_gram_residual(), lim_sys.frames.max_det_defect());
  const double h = og.dx();
  const auto& T = lim_sys.frames.T;
  for (std::size_t j = 2; j + 2 < og.n; ++j) {
    if (std::abs(og.x(j)) > 10.0) continue;
    const Vec3 d = (T[j - 2] - 8.0 * T[j - 1] + 8.0 * T[j + 1] - T[j + 2]) / (12 * h);
    rep.ode_residual = std::max(rep.ode_residual, std::abs(d.norm() - a));
  }
  rep.converged = rep.decreasing && lim.converged;
  return rep;
}

nlohmann::json trace_report(const SpatialLimits& lim, const TraceData& tr, const RescaledReport& rs) {
  auto v3 = [](const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); };
  auto c3 = [](const CVec3& v) {
    nlohmann::json out = nlohmann::json::array();
    for (int i = 0; i < 3; ++i) out.push_back({v[i].real(), v[i].imag()});
    return out;
  };
  nlohmann::json j;
  j["T_inf"] = {{"plus", v3(lim.T_plus)}, {"minus", v3(lim.T_minus)}};
  j["N_inf"] = {{"plus", c3(lim.N_plus)}, {"minus", c3(lim.N_minus)}};
  j["angle_measured"] = tr.angle_measured;
  j["angle_rescaled"] = rs.angle_measured;
  j["angle_predicted"] = rs.angle_predicted;
  j["bound_ratios"] = {{"chi_sqrt_t", tr.chi_sqrt_t}, {"T_sqrt_t_over_x", tr.T_sqrt_t_over_x}, {"T_t16", tr.T_t16}};
  j["richardson_disagreement"] = tr.richardson_disagreement;
  j["converged"] = lim.converged && !tr.flagged && rs.converged;
  return j;
}

}  // namespace filament
