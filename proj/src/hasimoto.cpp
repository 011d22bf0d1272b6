#include "filament/hasimoto.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "filament/fourier.hpp"

namespace filament {

namespace {

// d/dz of the Lagrange basis at z = 0 for integer offsets
std::vector<double> derivative_weights(const std::vector<int>& z) {
  const std::size_t m = z.size();
  std::vector<double> w(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      if (k == i) continue;
      double term = 1.0 / double(z[i] - z[k]);
      for (std::size_t l = 0; l < m; ++l) {
        if (l == i || l == k) continue;
        term *= double(-z[l]) / double(z[i] - z[l]);
      }
      w[i] += term;
    }
  }
  return w;
}

cplx line_derivative_at(const ComplexField& f, std::size_t j) {
  const long n = long(f.size());
  const long lo = std::clamp(long(j) - 3, 0L, n - 7);
  std::vector<int> off(7);
  for (int i = 0; i < 7; ++i) off[i] = int(lo + i - long(j));
  const auto w = derivative_weights(off);
  cplx acc = 0.0;
  for (int i = 0; i < 7; ++i) acc += w[i] * f[std::size_t(lo + i)];
  return acc / f.grid.dx();
}

template <class V>
V interp_time(const std::vector<double>& t, const std::vector<V>& f, double x) {
  const std::size_t n = t.size();
  if (n == 1) return f[0];
  const std::size_t m = std::min<std::size_t>(4, n);
  auto it = std::upper_bound(t.begin(), t.end(), x);
  long hi = long(it - t.begin());
  long lo = std::clamp(hi - long(m / 2), 0L, long(n - m));
  V acc = f[std::size_t(lo)] * 0.0;
  for (long i = lo; i < lo + long(m); ++i) {
    double w = 1.0;
    for (long k = lo; k < lo + long(m); ++k)
      if (k != i) w *= (x - t[std::size_t(k)]) / (t[std::size_t(i)] - t[std::size_t(k)]);
    acc += f[std::size_t(i)] * w;
  }
  return acc;
}

struct State {
  Vec3 chi, T, e1, e2;
};

State axpy(const State& s, double h, const State& d) {
  return {s.chi + h * d.chi, s.T + h * d.T, s.e1 + h * d.e1, s.e2 + h * d.e2};
}

State time_rhs(const State& s, cplx psi, cplx psix, double A, double kappa) {
  const double k1 = -psix.imag(), k2 = psix.real();
  const double k3 = -kappa * (std::norm(psi) - A);
  return {-psi.imag() * s.e1 + psi.real() * s.e2, k1 * s.e1 + k2 * s.e2, -k1 * s.T + k3 * s.e2,
          -k2 * s.T - k3 * s.e1};
}

void require_field(const SpaceTimeField& field) {
  field.validate();
  if (field.slices() == 0) throw std::invalid_argument("reconstruction needs at least one slice");
}

std::size_t time_index(const SpaceTimeField& field, double t0) {
  for (std::size_t k = 0; k < field.slices(); ++k)
    if (std::abs(field.times[k] - t0) <= 1e-12 * std::max(1.0, std::abs(t0))) return k;
  std::ostringstream msg;
  msg << "anchor time " << t0 << " is not one of the field times";
  throw std::invalid_argument(msg.str());
}

void check_gauge(const SpaceTimeField& field, const ReconstructOptions& opt,
                 std::vector<std::string>& warnings) {
  const Grid1D& g = field.grid;
  if (0.0 < g.x_min || 0.0 > g.x_max) return;
  const auto j = std::size_t(std::llround((0.0 - g.x_min) / g.dx()));
  if (j >= g.n || std::abs(g.x(j)) > 1e-9 * g.dx()) return;
  double worst = 0.0, at = 0.0;
  for (std::size_t k = 0; k < field.slices(); ++k) {
    const double d = std::abs(field.gauge_A[k] - std::norm(field.values[k][j]));
    if (d > worst) {
      worst = d;
      at = field.times[k];
    }
  }
  if (worst > opt.gauge_tol) {
    std::ostringstream msg;
    msg << "gauge A(t) differs from |psi(t,0)|^2 by up to " << worst << " (t = " << at
        << "); the curve uses the supplied A(t)";
    warnings.push_back(msg.str());
  }
}

}  // namespace

ComplexField space_derivative(const ComplexField& psi) {
  if (psi.grid.periodic) return fourier::derivative(psi, 1);
  if (psi.size() < 7) throw std::invalid_argument("line-grid derivative needs at least 7 nodes");
  ComplexField out(psi.grid);
  for (std::size_t j = 0; j < psi.size(); ++j) out[j] = line_derivative_at(psi, j);
  return out;
}

ComplexField filament_from_ct(const CurvatureTorsion& ct) {
  const Grid1D& g = ct.grid;
  const std::size_t n = g.n;
  for (double c : ct.c)
    if (!(c >= 0.0)) throw std::invalid_argument("curvature must be nonnegative");
  const double h = g.dx();
  std::vector<double> cum(n, 0.0);
  if (n >= 3) {
    for (std::size_t j = 0; j + 1 < n; ++j) {
      // quadratic through three neighbouring nodes over [x_j, x_{j+1}]
      const auto& f = ct.tau;
      double seg;
      if (j == 0)
        seg = h / 12.0 * (5.0 * f[0] + 8.0 * f[1] - f[2]);
      else
        seg = h / 12.0 * (-f[j - 1] + 8.0 * f[j] + 5.0 * f[j + 1]);
      cum[j + 1] = cum[j] + seg;
    }
  } else if (n == 2) {
    cum[1] = 0.5 * h * (ct.tau[0] + ct.tau[1]);
  }
  double offset = 0.0;
  if (n >= 2 && g.x_min <= 0.0 && 0.0 <= g.x_min + h * double(n - 1))
    offset = lagrange_eval(Grid1D::line(g.x_min, g.x_min + h * double(n - 1), n), cum, 0.0);
  ComplexField out(g);
  for (std::size_t j = 0; j < n; ++j) out[j] = std::polar(ct.c[j], cum[j] - offset);
  return out;
}

AnchorTrack propagate_anchor(const std::vector<double>& times, const std::vector<cplx>& psi,
                             const std::vector<cplx>& psi_x, const std::vector<double>& A,
                             std::size_t k0, const Frame& frame0, const Vec3& point0,
                             const ReconstructOptions& opt) {
  const std::size_t K = times.size();
  AnchorTrack out{std::vector<Frame>(K), std::vector<Vec3>(K)};
  out.frames[k0] = frame0;
  out.points[k0] = point0;
  auto f = [&](double t, const State& s) {
    return time_rhs(s, interp_time(times, psi, t), interp_time(times, psi_x, t),
                    interp_time(times, A, t), opt.kappa);
  };
  auto step = [&](std::size_t from, std::size_t to) {
    const double t = times[from], h = times[to] - t;
    const Frame& F = out.frames[from];
    const State s{out.points[from], F.T, F.e1, F.e2};
    const State d1 = f(t, s);
    const State d2 = f(t + 0.5 * h, axpy(s, 0.5 * h, d1));
    const State d3 = f(t + 0.5 * h, axpy(s, 0.5 * h, d2));
    const State d4 = f(t + h, axpy(s, h, d3));
    State r = s;
    r.chi += h / 6.0 * (d1.chi + 2.0 * d2.chi + 2.0 * d3.chi + d4.chi);
    r.T += h / 6.0 * (d1.T + 2.0 * d2.T + 2.0 * d3.T + d4.T);
    r.e1 += h / 6.0 * (d1.e1 + 2.0 * d2.e1 + 2.0 * d3.e1 + d4.e1);
    r.e2 += h / 6.0 * (d1.e2 + 2.0 * d2.e2 + 2.0 * d3.e2 + d4.e2);
    const Frame raw{r.T, r.e1, r.e2};
    const double drift = raw.gram_residual();
    if (!std::isfinite(drift) || drift > opt.frame_drift_tol) {
      std::ostringstream msg;
      msg << "frame drift " << drift << " in time step " << from << " -> " << to << " (t = " << t
          << ", dt = " << h << "); refine the time sampling";
      throw FrameError(msg.str(), drift);
    }
    out.frames[to] = raw.orthonormalized();
    out.points[to] = r.chi;
  };
  for (std::size_t k = k0; k + 1 < K; ++k) step(k, k + 1);
  for (std::size_t k = k0; k > 0; --k) step(k, k - 1);
  return out;
}

CurveEvolution reconstruct_evolution(const SpaceTimeField& field, const Frame& base_frame,
                                     const Vec3& base_point, double anchor_time, double anchor_x,
                                     const ReconstructOptions& opt) {
  require_field(field);
  require_orthonormal(base_frame, 1e-10);
  const std::size_t k0 = time_index(field, anchor_time);
  const std::size_t j0 = field.grid.node_index(anchor_x);
  const std::size_t K = field.slices();

  std::vector<cplx> psi0(K), psix0(K);
  for (std::size_t k = 0; k < K; ++k) {
    const ComplexField s = field.slice(k);
    psi0[k] = s[j0];
    psix0[k] = field.grid.periodic ? space_derivative(s)[j0] : line_derivative_at(s, j0);
  }
  const AnchorTrack track =
      propagate_anchor(field.times, psi0, psix0, field.gauge_A, k0, base_frame, base_point, opt);

  CurveEvolution evo;
  evo.times = field.times;
  evo.psi = field.values;
  check_gauge(field, opt, evo.warnings);
  for (std::size_t k = 0; k < K; ++k) {
    auto cf = integrate_koiso(field.slice(k), track.frames[k], track.points[k], field.grid.x(j0));
    evo.curves.push_back(std::move(cf.curve));
    evo.frames.push_back(std::move(cf.frames));
  }
  return evo;
}

CurveEvolution reconstruct_evolution_commuted(const SpaceTimeField& field, const Frame& base_frame,
                                              const Vec3& base_point, double anchor_time,
                                              double anchor_x, const ReconstructOptions& opt) {
  require_field(field);
  require_orthonormal(base_frame, 1e-10);
  const std::size_t k0 = time_index(field, anchor_time);
  const std::size_t j0 = field.grid.node_index(anchor_x);
  const std::size_t K = field.slices(), n = field.grid.n;

  const auto first = integrate_koiso(field.slice(k0), base_frame, base_point, field.grid.x(j0));
  std::vector<ComplexField> dpsi;
  for (std::size_t k = 0; k < K; ++k) dpsi.push_back(space_derivative(field.slice(k)));

  CurveEvolution evo;
  evo.times = field.times;
  evo.psi = field.values;
  check_gauge(field, opt, evo.warnings);
  for (std::size_t k = 0; k < K; ++k) {
    evo.curves.push_back({field.grid, std::vector<Vec3>(n), std::nullopt});
    evo.frames.push_back({field.grid, std::vector<Vec3>(n), std::vector<Vec3>(n), std::vector<Vec3>(n)});
  }
  std::vector<cplx> p(K), px(K);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      p[k] = field.values[k][j];
      px[k] = dpsi[k][j];
    }
    const auto track = propagate_anchor(field.times, p, px, field.gauge_A, k0,
                                        first.frames.at(j), first.curve.points[j], opt);
    for (std::size_t k = 0; k < K; ++k) {
      evo.curves[k].points[j] = track.points[k];
      evo.frames[k].set(j, track.frames[k]);
    }
  }
  return evo;
}

double vfe_residual(const CurveEvolution& evo) {
  if (evo.slices() < 3) throw std::invalid_argument("vfe_residual needs at least three slices");
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < evo.slices(); ++k) {
    const double tm = evo.times[k - 1], t0 = evo.times[k], tp = evo.times[k + 1];
    const double hm = t0 - tm, hp = tp - t0;
    // three-point derivative on a possibly nonuniform time grid
    const double wm = -hp / (hm * (hm + hp)), w0 = (hp - hm) / (hm * hp), wp = hm / (hp * (hm + hp));
    const auto& Pm = evo.curves[k - 1].points;
    const auto& P0 = evo.curves[k].points;
    const auto& Pp = evo.curves[k + 1].points;
    const double h = evo.curves[k].grid.dx();
    const std::size_t n = P0.size();
    for (std::size_t j = 2; j + 2 < n; ++j) {
      const Vec3 xt = wm * Pm[j] + w0 * P0[j] + wp * Pp[j];
      const Vec3 x1 = (-P0[j + 2] + 8.0 * P0[j + 1] - 8.0 * P0[j - 1] + P0[j - 2]) / (12.0 * h);
      const Vec3 x2 =
          (-P0[j + 2] + 16.0 * P0[j + 1] - 30.0 * P0[j] + 16.0 * P0[j - 1] - P0[j - 2]) / (12.0 * h * h);
      worst = std::max(worst, (xt - x1.cross(x2)).norm());
    }
  }
  return worst;
}

void write_curve_evolution(const std::string& dir, const CurveEvolution& evo) {
  std::filesystem::create_directories(dir);
  nlohmann::json index;
  index["slices"] = nlohmann::json::array();
  for (std::size_t k = 0; k < evo.slices(); ++k) {
    std::ostringstream name;
    name << "slice_" << std::setw(5) << std::setfill('0') << k << ".csv";
    write_curve_csv((std::filesystem::path(dir) / name.str()).string(), evo.curves[k],
                    evo.frames[k].T);
    index["slices"].push_back({{"t", evo.times[k]}, {"file", name.str()}});
  }
  index["warnings"] = evo.warnings;
  std::ofstream os(std::filesystem::path(dir) / "index.json");
  if (!os) throw std::runtime_error("cannot write " + dir + "/index.json");
  os << index.dump(2) << '\n';
}

}  // namespace filament
