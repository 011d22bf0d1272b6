#include "filament/self_similar.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace filament {

namespace {

constexpr double kFitTolerance = 1e-4;

// value(s) = L + c1/s + c2/s^2, complex 3-vector valued, over the nodes with lo <= |s| <= hi
// on the side given by sign.
TailFit fit_window(const Grid1D& g, const std::vector<CVec3>& value, int sign, double lo,
                   double hi) {
  std::vector<std::size_t> rows;
  const std::size_t stride = std::max<std::size_t>(1, g.n / 40000);
  for (std::size_t j = 0; j < g.n; j += stride) {
    const double s = g.x(j);
    if (s * sign >= lo && s * sign <= hi) rows.push_back(j);
  }
  if (rows.size() < 8) throw std::invalid_argument("tail window holds too few nodes");
  Eigen::MatrixXd B(rows.size(), 3);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double u = hi / g.x(rows[r]);  // scaled basis keeps the system well conditioned
    B(r, 0) = 1.0;
    B(r, 1) = u;
    B(r, 2) = u * u;
  }
  const auto qr = B.colPivHouseholderQr();
  TailFit fit;
  double ss = 0.0;
  for (int comp = 0; comp < 3; ++comp) {
    for (int part = 0; part < 2; ++part) {
      Eigen::VectorXd y(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const cplx v = value[rows[r]][comp];
        y(r) = part == 0 ? v.real() : v.imag();
      }
      const Eigen::VectorXd coef = qr.solve(y);
      ss += (B * coef - y).squaredNorm();
      if (part == 0)
        fit.limit[comp].real(coef(0));
      else
        fit.limit[comp].imag(coef(0));
    }
  }
  fit.rms_residual = std::sqrt(ss / double(rows.size()));
  return fit;
}

}  // namespace

TailFit fit_tail(const Grid1D& g, const std::vector<CVec3>& value, int sign, double s_max) {
  TailFit main = fit_window(g, value, sign, 0.5 * s_max, s_max);
  const TailFit inner = fit_window(g, value, sign, 0.25 * s_max, 0.5 * s_max);
  main.stability = (main.limit - inner.limit).norm();
  return main;
}

namespace {

Vec3 hermite(const Vec3& p0, const Vec3& m0, const Vec3& p1, const Vec3& m1, double h, double u) {
  const double u2 = u * u, u3 = u2 * u;
  return (2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * h * m0 + (-2 * u3 + 3 * u2) * p1 +
         (u3 - u2) * h * m1;
}

void require_in_profile(const SelfSimilarFamily& fam, double s) {
  if (std::abs(s) > fam.s_max * (1 + 1e-12)) {
    std::ostringstream msg;
    msg << "self-similar variable " << s << " outside the profile; need s_max >= " << std::abs(s);
    throw std::out_of_range(msg.str());
  }
}

}  // namespace

double corner_sin_half_theta(double a) { return std::exp(-0.5 * std::numbers::pi * a * a); }

double corner_theta(double a) { return 2.0 * std::asin(corner_sin_half_theta(a)); }

Vec3 SelfSimilarFamily::bisector() const {
  const Vec3 d = A_plus - A_minus;
  return d.norm() < 1e-14 ? Vec3(A_plus) : Vec3(d.normalized());
}

Mat3 SelfSimilarFamily::bisector_rotation() const {
  const Vec3 d = bisector();
  return 2.0 * d * d.transpose() - Mat3::Identity();
}

CornerLimits corner_limits(const CurveAndFrames& koiso, double a, double s_max) {
  const Grid1D& g = koiso.curve.grid;
  const auto& K = koiso.frames;
  std::vector<CVec3> tq(g.n), nq(g.n);
  for (std::size_t j = 0; j < g.n; ++j) {
    const double s = g.x(j);
    if (s == 0.0) {
      tq[j] = nq[j] = CVec3::Zero();
      continue;
    }
    const cplx rot = std::polar(1.0, 0.25 * s * s);
    const Vec3 b = (K.N(j) * std::conj(rot)).imag();  // Frenet binormal
    tq[j] = (K.T[j] + 2.0 * a * b / s).cast<cplx>();
    const CVec3 corr = cplx(0, 2 * a) * rot * K.T[j].cast<cplx>() / s;
    nq[j] = (K.N(j) - corr) * std::polar(1.0, a * a * std::log(std::abs(s)));
  }
  CornerLimits lim;
  lim.fit_A_plus = fit_tail(g, tq, +1, s_max);
  lim.fit_A_minus = fit_tail(g, tq, -1, s_max);
  lim.fit_B_plus = fit_tail(g, nq, +1, s_max);
  lim.fit_B_minus = fit_tail(g, nq, -1, s_max);
  lim.A_plus = lim.fit_A_plus.limit.real();
  lim.A_minus = lim.fit_A_minus.limit.real();
  lim.B_plus = lim.fit_B_plus.limit;
  lim.B_minus = lim.fit_B_minus.limit;
  for (const TailFit* f : {&lim.fit_A_plus, &lim.fit_A_minus, &lim.fit_B_plus, &lim.fit_B_minus})
    if (!(f->stability <= kFitTolerance)) lim.converged = false;
  const Vec3 mA = -lim.A_minus;
  lim.theta = std::atan2(lim.A_plus.cross(mA).norm(), lim.A_plus.dot(mA));
  return lim;
}

SelfSimilarFamily build_profile(double a, double s_max, double ds) {
  if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("a must be a finite nonnegative number");
  if (!(s_max >= 50.0)) throw std::invalid_argument("s_max must be at least 50");
  if (!(ds > 0.0) || ds > 1e-3) throw std::invalid_argument("ds must lie in (0, 1e-3]");
  const std::size_t half = std::size_t(std::ceil(s_max / ds - 1e-9));
  const Grid1D g = Grid1D::line(-s_max, s_max, 2 * half + 1);

  SelfSimilarFamily fam;
  fam.a = a;
  fam.s_max = s_max;
  // The Koiso frame varies slowly (generator a e^{is^2/4}); the Frenet normal rotates at
  // rate s/2 and is recovered afterwards as n + ib = N e^{-is^2/4}.
  fam.koiso = integrate_koiso(
      g, [a](double s) { return std::polar(a, 0.25 * s * s); }, Frame::canonical(),
      Vec3(0.0, 0.0, 2.0 * a), 0.0);
  fam.profile = fam.koiso;
  auto& F = fam.profile.frames;
  for (std::size_t j = 0; j < g.n; ++j) {
    const double s = g.x(j);
    const CVec3 nb = fam.koiso.frames.N(j) * std::polar(1.0, -0.25 * s * s);
    F.e1[j] = nb.real();
    F.e2[j] = nb.imag();
  }

  const auto lim = corner_limits(fam.koiso, a, s_max);
  fam.fit_A_plus = lim.fit_A_plus;
  fam.fit_A_minus = lim.fit_A_minus;
  fam.fit_B_plus = lim.fit_B_plus;
  fam.fit_B_minus = lim.fit_B_minus;
  fam.A_plus = lim.A_plus;
  fam.A_minus = lim.A_minus;
  fam.B_plus = lim.B_plus;
  fam.B_minus = lim.B_minus;
  fam.converged = lim.converged;

  const Vec3 mA = -fam.A_minus;
  fam.theta = std::atan2(fam.A_plus.cross(mA).norm(), fam.A_plus.dot(mA));

  const CVec3 RB = fam.bisector_rotation().cast<cplx>() * fam.B_plus;
  fam.reversal_phase = fam.a > 0.0 ? std::arg(RB.cwiseProduct(fam.B_minus).sum()) : 0.0;
  return fam;
}

Vec3 profile_point(const SelfSimilarFamily& fam, double s) {
  require_in_profile(fam, s);
  const Grid1D& g = fam.profile.curve.grid;
  const double r = (s - g.x_min) / g.dx();
  const std::size_t j = std::min<std::size_t>(std::size_t(std::max(0.0, std::floor(r))), g.n - 2);
  const double u = r - double(j);
  const auto& P = fam.profile.curve.points;
  const auto& T = fam.profile.frames.T;
  return hermite(P[j], T[j], P[j + 1], T[j + 1], g.dx(), u);
}

Frame profile_frame(const SelfSimilarFamily& fam, double s) {
  require_in_profile(fam, s);
  const Grid1D& g = fam.profile.curve.grid;
  const auto& F = fam.profile.frames;
  Frame f{lagrange_eval(g, F.T, s), lagrange_eval(g, F.e1, s), lagrange_eval(g, F.e2, s)};
  return f.orthonormalized();
}

SampledCurve evaluate_chi_a(const SelfSimilarFamily& fam, double t, const Grid1D& grid) {
  if (!(t > 0.0)) throw std::invalid_argument("evaluate_chi_a needs t > 0");
  const double st = std::sqrt(t);
  SampledCurve out{grid, std::vector<Vec3>(grid.n), std::nullopt};
  for (std::size_t j = 0; j < grid.n; ++j) out.points[j] = st * profile_point(fam, grid.x(j) / st);
  return out;
}

FrameField evaluate_koiso_a(const SelfSimilarFamily& fam, double t, const Grid1D& grid) {
  if (!(t > 0.0)) throw std::invalid_argument("evaluate_koiso_a needs t > 0");
  const double st = std::sqrt(t);
  const Grid1D& g = fam.koiso.curve.grid;
  const auto& K = fam.koiso.frames;
  FrameField out{grid, std::vector<Vec3>(grid.n), std::vector<Vec3>(grid.n),
                 std::vector<Vec3>(grid.n)};
  for (std::size_t j = 0; j < grid.n; ++j) {
    const double s = grid.x(j) / st;
    require_in_profile(fam, s);
    Frame f{lagrange_eval(g, K.T, s), lagrange_eval(g, K.e1, s), lagrange_eval(g, K.e2, s)};
    out.set(j, f.orthonormalized());
  }
  return out;
}

FrameField evaluate_frenet_a(const SelfSimilarFamily& fam, double t, const Grid1D& grid) {
  if (!(t > 0.0)) throw std::invalid_argument("evaluate_frenet_a needs t > 0");
  const double st = std::sqrt(t);
  FrameField out{grid, std::vector<Vec3>(grid.n), std::vector<Vec3>(grid.n),
                 std::vector<Vec3>(grid.n)};
  for (std::size_t j = 0; j < grid.n; ++j) out.set(j, profile_frame(fam, grid.x(j) / st));
  return out;
}

cplx filament_function_a(double a, double t, double x) {
  if (!(t > 0.0)) throw std::invalid_argument("filament_function_a needs t > 0");
  return std::polar(a / std::sqrt(t), x * x / (4.0 * t));
}

ComplexField filament_function_a(double a, double t, const Grid1D& grid) {
  ComplexField f(grid);
  for (std::size_t j = 0; j < grid.n; ++j) f[j] = filament_function_a(a, t, grid.x(j));
  return f;
}

}  // namespace filament
