#include "filament/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "filament/fourier.hpp"
#include "filament/numfmt.hpp"

namespace filament {

Frame Frame::from_normal(const Vec3& T, const CVec3& N) { return {T, N.real(), N.imag()}; }

Mat3 Frame::matrix() const {
  Mat3 m;
  m.col(0) = T;
  m.col(1) = e1;
  m.col(2) = e2;
  return m;
}

double Frame::gram_residual() const {
  const Mat3 m = matrix();
  return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
}

double Frame::det() const { return matrix().determinant(); }

Frame Frame::orthonormalized() const {
  Frame f;
  f.T = T.normalized();
  const Vec3 p1 = e1 - e1.dot(f.T) * f.T;
  const Vec3 p2 = e2 - e2.dot(f.T) * f.T;
  // symmetric orthonormalisation of (p1, p2): commutes with rotations of the normal plane
  Eigen::Matrix2d G;
  G << p1.dot(p1), p1.dot(p2), p1.dot(p2), p2.dot(p2);
  const double sd = std::sqrt(G.determinant());
  const Eigen::Matrix2d root = (G + sd * Eigen::Matrix2d::Identity()) / std::sqrt(G.trace() + 2.0 * sd);
  const Eigen::Matrix2d W = root.inverse();
  f.e1 = W(0, 0) * p1 + W(1, 0) * p2;
  f.e2 = W(0, 1) * p1 + W(1, 1) * p2;
  return f;
}

void require_orthonormal(const Frame& f, double tol) {
  const double r = f.gram_residual();
  if (!std::isfinite(r) || r > tol) {
    std::ostringstream msg;
    msg << "frame is not orthonormal: Gram residual " << r;
    throw FrameError(msg.str(), r);
  }
  if (std::abs(f.det() - 1.0) > tol) {
    std::ostringstream msg;
    msg << "frame is not right-handed: det " << f.det();
    throw FrameError(msg.str(), std::abs(f.det() - 1.0));
  }
}

double SampledCurve::arclength_defect() const {
  double m = 0.0;
  const double dx = grid.dx();
  for (std::size_t j = 0; j + 1 < points.size(); ++j) {
    if (corner_index && (j == *corner_index || j + 1 == *corner_index)) continue;
    m = std::max(m, std::abs((points[j + 1] - points[j]).norm() / dx - 1.0));
  }
  return m;
}

SampledCurve SampledCurve::transformed(const Mat3& R, const Vec3& b) const {
  SampledCurve out = *this;
  for (auto& p : out.points) p = R * p + b;
  return out;
}

double FrameField::max_gram_residual() const {
  double m = 0.0;
  for (std::size_t j = 0; j < size(); ++j) m = std::max(m, at(j).gram_residual());
  return m;
}

double FrameField::max_det_defect() const {
  double m = 0.0;
  for (std::size_t j = 0; j < size(); ++j) m = std::max(m, std::abs(at(j).det() - 1.0));
  return m;
}

CurvatureTorsion CurvatureTorsion::uniform(const Grid1D& g, double c, double tau) {
  return {g, std::vector<double>(g.n, c), std::vector<double>(g.n, tau), std::vector<char>(g.n, 0),
          std::vector<char>(g.n, 0)};
}

CurvatureTorsion CurvatureTorsion::from_functions(const Grid1D& g,
                                                  const std::function<double(double)>& c,
                                                  const std::function<double(double)>& tau) {
  CurvatureTorsion ct = uniform(g, 0.0, 0.0);
  for (std::size_t j = 0; j < g.n; ++j) {
    ct.c[j] = c(g.x(j));
    ct.tau[j] = tau(g.x(j));
  }
  return ct;
}

namespace {

struct State {
  Vec3 chi, T, e1, e2;
};

State rhs(const State& s, const Vec3& k) {
  return {s.T, k[0] * s.e1 + k[1] * s.e2, -k[0] * s.T + k[2] * s.e2, -k[1] * s.T - k[2] * s.e1};
}

State axpy(const State& s, double h, const State& d) {
  return {s.chi + h * d.chi, s.T + h * d.T, s.e1 + h * d.e1, s.e2 + h * d.e2};
}

State rk4_step(const State& s, double x, double h, const FrameGenerator& gen) {
  const Vec3 k0 = gen(x), km = gen(x + 0.5 * h), k1 = gen(x + h);
  const State d1 = rhs(s, k0);
  const State d2 = rhs(axpy(s, 0.5 * h, d1), km);
  const State d3 = rhs(axpy(s, 0.5 * h, d2), km);
  const State d4 = rhs(axpy(s, h, d3), k1);
  State out;
  out.chi = s.chi + h / 6.0 * (d1.chi + 2.0 * d2.chi + 2.0 * d3.chi + d4.chi);
  out.T = s.T + h / 6.0 * (d1.T + 2.0 * d2.T + 2.0 * d3.T + d4.T);
  out.e1 = s.e1 + h / 6.0 * (d1.e1 + 2.0 * d2.e1 + 2.0 * d3.e1 + d4.e1);
  out.e2 = s.e2 + h / 6.0 * (d1.e2 + 2.0 * d2.e2 + 2.0 * d3.e2 + d4.e2);
  const Frame f = Frame{out.T, out.e1, out.e2}.orthonormalized();
  out.T = f.T;
  out.e1 = f.e1;
  out.e2 = f.e2;
  return out;
}

void check_finite(const Vec3& v, double x) {
  if (!v.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite frame generator at x = " << x;
    throw std::invalid_argument(msg.str());
  }
}

// Lookup of generator values sampled at nodes and half-nodes.
struct HalfGridTable {
  Grid1D grid;
  std::vector<Vec3> values;  // index 2j: node j, 2j+1: midpoint (j, j+1)

  Vec3 operator()(double x) const {
    const double r = 2.0 * (x - grid.x_min) / grid.dx();
    const long k = std::lround(r);
    if (std::abs(r - double(k)) > 1e-6 || k < 0 || std::size_t(k) >= values.size())
      throw std::logic_error("half-grid lookup off the table");
    return values[std::size_t(k)];
  }
};

template <class V>
V lagrange_generic(const Grid1D& grid, const std::vector<V>& f, double x, int points, V zero) {
  const double r = (x - grid.x_min) / grid.dx();
  const long n = long(f.size());
  long start = long(std::floor(r)) - (points / 2 - 1);
  if (!grid.periodic) start = std::clamp(start, 0L, n - points);
  V acc = zero;
  for (int i = 0; i < points; ++i) {
    const long ji = start + i;
    double w = 1.0;
    for (int m = 0; m < points; ++m) {
      if (m == i) continue;
      w *= (r - double(start + m)) / double(i - m);
    }
    const long jw = grid.periodic ? ((ji % n) + n) % n : ji;
    acc = acc + w * f[std::size_t(jw)];
  }
  return acc;
}

}  // namespace

double lagrange_eval(const Grid1D& grid, const std::vector<double>& f, double x, int points) {
  return lagrange_generic<double>(grid, f, x, points, 0.0);
}
cplx lagrange_eval(const Grid1D& grid, const std::vector<cplx>& f, double x, int points) {
  return lagrange_generic<cplx>(grid, f, x, points, cplx(0.0));
}
Vec3 lagrange_eval(const Grid1D& grid, const std::vector<Vec3>& f, double x, int points) {
  return lagrange_generic<Vec3>(grid, f, x, points, Vec3::Zero());
}

CurveAndFrames integrate_frame(const Grid1D& grid, const FrameGenerator& gen, const Frame& frame0,
                               const Vec3& point0, std::size_t base) {
  grid.validate();
  require_orthonormal(frame0);
  if (base >= grid.n) throw std::invalid_argument("base node outside grid");
  if (!point0.allFinite()) throw std::invalid_argument("non-finite base point");
  const std::size_t n = grid.n;
  const double h = grid.dx();
  CurveAndFrames out;
  out.curve.grid = grid;
  out.curve.points.resize(n);
  out.frames.grid = grid;
  out.frames.T.resize(n);
  out.frames.e1.resize(n);
  out.frames.e2.resize(n);

  auto store = [&](std::size_t j, const State& s) {
    out.curve.points[j] = s.chi;
    out.frames.T[j] = s.T;
    out.frames.e1[j] = s.e1;
    out.frames.e2[j] = s.e2;
  };
  auto checked = [&](double x) {
    Vec3 k = gen(x);
    check_finite(k, x);
    return k;
  };
  const State s0{point0, frame0.T, frame0.e1, frame0.e2};
  store(base, s0);
  State s = s0;
  for (std::size_t j = base; j + 1 < n; ++j) {
    s = rk4_step(s, grid.x(j), h, checked);
    store(j + 1, s);
  }
  s = s0;
  for (std::size_t j = base; j > 0; --j) {
    s = rk4_step(s, grid.x(j), -h, checked);
    store(j - 1, s);
  }
  return out;
}

CurveAndFrames integrate_frenet(const CurvatureTorsion& ct, const Frame& frame0, const Vec3& point0,
                                double x0) {
  const Grid1D& g = ct.grid;
  if (ct.c.size() != g.n || ct.tau.size() != g.n)
    throw std::invalid_argument("curvature/torsion size does not match grid");
  for (std::size_t j = 0; j < g.n; ++j)
    if (!std::isfinite(ct.c[j]) || !std::isfinite(ct.tau[j]))
      throw std::invalid_argument("non-finite curvature or torsion at node " + std::to_string(j));
  const std::size_t base = g.node_index(x0);
  HalfGridTable table{g, std::vector<Vec3>(2 * g.n - 1)};
  for (std::size_t j = 0; j < g.n; ++j) table.values[2 * j] = Vec3(ct.c[j], 0.0, ct.tau[j]);
  for (std::size_t j = 0; j + 1 < g.n; ++j) {
    const double xm = g.x(j) + 0.5 * g.dx();
    table.values[2 * j + 1] =
        Vec3(lagrange_eval(g, ct.c, xm), 0.0, lagrange_eval(g, ct.tau, xm));
  }
  return integrate_frame(g, table, frame0, point0, base);
}

CurveAndFrames integrate_frenet(const Grid1D& grid, const std::function<double(double)>& c,
                                const std::function<double(double)>& tau, const Frame& frame0,
                                const Vec3& point0, double x0) {
  return integrate_frame(
      grid, [&](double x) { return Vec3(c(x), 0.0, tau(x)); }, frame0, point0,
      grid.node_index(x0));
}

CurveAndFrames integrate_koiso(const ComplexField& psi, const Frame& frame0, const Vec3& point0,
                               double x0) {
  const Grid1D& g = psi.grid;
  const std::size_t base = g.node_index(x0);
  for (const auto& v : psi.values)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw std::invalid_argument("non-finite filament function");
  HalfGridTable table{g, std::vector<Vec3>(2 * g.n - 1)};
  for (std::size_t j = 0; j < g.n; ++j)
    table.values[2 * j] = Vec3(psi[j].real(), psi[j].imag(), 0.0);
  if (g.periodic) {
    const ComplexField mid = fourier::translate(psi, 0.5 * g.dx());
    for (std::size_t j = 0; j + 1 < g.n; ++j)
      table.values[2 * j + 1] = Vec3(mid[j].real(), mid[j].imag(), 0.0);
  } else {
    for (std::size_t j = 0; j + 1 < g.n; ++j) {
      const cplx m = lagrange_eval(g, psi.values, g.x(j) + 0.5 * g.dx());
      table.values[2 * j + 1] = Vec3(m.real(), m.imag(), 0.0);
    }
  }
  return integrate_frame(g, table, frame0, point0, base);
}

CurveAndFrames integrate_koiso(const Grid1D& grid, const std::function<cplx(double)>& psi,
                               const Frame& frame0, const Vec3& point0, double x0) {
  return integrate_frame(
      grid,
      [&](double x) {
        const cplx p = psi(x);
        return Vec3(p.real(), p.imag(), 0.0);
      },
      frame0, point0, grid.node_index(x0));
}

namespace {

// Node index with wrap (periodic) or -1 if outside a line grid.
long neighbour(const Grid1D& g, long j, long off) {
  const long n = long(g.n);
  long k = j + off;
  if (g.periodic) return ((k % n) + n) % n;
  return (k < 0 || k >= n) ? -1 : k;
}

}  // namespace

std::vector<Vec3> curve_derivative(const SampledCurve& curve) {
  const Grid1D& g = curve.grid;
  const auto& p = curve.points;
  const long n = long(p.size());
  const double h = g.dx();
  std::vector<Vec3> d(p.size());
  for (long j = 0; j < n; ++j) {
    const long m2 = neighbour(g, j, -2), m1 = neighbour(g, j, -1), p1 = neighbour(g, j, 1),
               p2 = neighbour(g, j, 2);
    if (m2 >= 0 && p2 >= 0) {
      d[j] = (p[m2] - 8.0 * p[m1] + 8.0 * p[p1] - p[p2]) / (12.0 * h);
    } else if (j < 2) {
      const long s = 0;
      if (j == 0)
        d[j] = (-25.0 * p[s] + 48.0 * p[s + 1] - 36.0 * p[s + 2] + 16.0 * p[s + 3] - 3.0 * p[s + 4]) /
               (12.0 * h);
      else
        d[j] = (-3.0 * p[s] - 10.0 * p[s + 1] + 18.0 * p[s + 2] - 6.0 * p[s + 3] + p[s + 4]) /
               (12.0 * h);
    } else {
      const long s = n - 1;
      if (j == n - 1)
        d[j] = -(-25.0 * p[s] + 48.0 * p[s - 1] - 36.0 * p[s - 2] + 16.0 * p[s - 3] - 3.0 * p[s - 4]) /
               (12.0 * h);
      else
        d[j] = -(-3.0 * p[s] - 10.0 * p[s - 1] + 18.0 * p[s - 2] - 6.0 * p[s - 3] + p[s - 4]) /
               (12.0 * h);
    }
  }
  return d;
}

CurvatureTorsion extract_curvature_torsion(const SampledCurve& curve, double degenerate_below) {
  const Grid1D& g = curve.grid;
  const auto& p = curve.points;
  const long n = long(p.size());
  if (std::size_t(n) != g.n) throw std::invalid_argument("curve size does not match grid");
  const double h = g.dx();
  CurvatureTorsion ct = CurvatureTorsion::uniform(g, 0.0, 0.0);
  for (long j = 0; j < n; ++j) {
    long idx[7];
    bool ok = true;
    for (int o = -3; o <= 3; ++o) {
      idx[o + 3] = neighbour(g, j, o);
      if (idx[o + 3] < 0) ok = false;
    }
    if (ok && curve.corner_index) {
      const long ci = long(*curve.corner_index);
      for (long k : idx)
        if (k == ci) ok = false;
      // the corner node itself is excluded, together with the three nodes on each side
      if (std::abs(j - ci) <= 3) ok = false;
    }
    if (!ok) {
      ct.invalid[j] = 1;
      continue;
    }
    const Vec3 &f3m = p[idx[0]], &f2m = p[idx[1]], &f1m = p[idx[2]], &f0 = p[idx[3]], &f1 = p[idx[4]],
               &f2 = p[idx[5]], &f3 = p[idx[6]];
    const Vec3 d1 = (f2m - 8.0 * f1m + 8.0 * f1 - f2) / (12.0 * h);
    const Vec3 d2 = (-f2m + 16.0 * f1m - 30.0 * f0 + 16.0 * f1 - f2) / (12.0 * h * h);
    const Vec3 d3 = (f3m - 8.0 * f2m + 13.0 * f1m - 13.0 * f1 + 8.0 * f2 - f3) / (8.0 * h * h * h);
    const Vec3 cr = d1.cross(d2);
    const double speed = d1.norm();
    ct.c[j] = cr.norm() / (speed * speed * speed);
    if (ct.c[j] < degenerate_below || cr.squaredNorm() == 0.0) {
      ct.degenerate[j] = 1;
      ct.tau[j] = 0.0;
    } else {
      ct.tau[j] = cr.dot(d3) / cr.squaredNorm();
    }
  }
  return ct;
}

Mat3 aligning_rotation(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  if (from.size() != to.size() || from.empty())
    throw std::invalid_argument("aligning_rotation needs matched non-empty vector sets");
  Mat3 H = Mat3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) H += from[i] * to[i].transpose();
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 U = svd.matrixU(), V = svd.matrixV();
  Mat3 D = Mat3::Identity();
  D(2, 2) = (V * U.transpose()).determinant() < 0 ? -1.0 : 1.0;
  return V * D * U.transpose();
}

void write_curve_csv(std::ostream& os, const SampledCurve& curve, const std::vector<Vec3>& tangent) {
  if (tangent.size() != curve.size()) throw std::invalid_argument("tangent size mismatch");
  os << "x,chi_x,chi_y,chi_z,T_x,T_y,T_z\n";
  for (std::size_t j = 0; j < curve.size(); ++j) {
    os << shortest(curve.grid.x(j));
    for (int k = 0; k < 3; ++k) os << ',' << shortest(curve.points[j][k]);
    for (int k = 0; k < 3; ++k) os << ',' << shortest(tangent[j][k]);
    os << '\n';
  }
}

void write_curve_csv(const std::string& path, const SampledCurve& curve,
                     const std::vector<Vec3>& tangent) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_curve_csv(os, curve, tangent);
}

CurveCsv read_curve_csv(std::istream& is, bool periodic) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty curve CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,chi_x,chi_y,chi_z,T_x,T_y,T_z")
    throw std::invalid_argument("unexpected curve CSV header: " + line);
  std::vector<double> xs;
  CurveCsv out;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    double v[7];
    std::size_t pos = 0;
    for (int k = 0; k < 7; ++k) {
      const std::size_t next = line.find(',', pos);
      if ((k < 6) == (next == std::string::npos))
        throw std::invalid_argument("curve CSV row needs 7 columns: " + line);
      v[k] = parse_double(std::string_view(line).substr(pos, next - pos));
      pos = next + 1;
    }
    xs.push_back(v[0]);
    out.curve.points.emplace_back(v[1], v[2], v[3]);
    out.tangent.emplace_back(v[4], v[5], v[6]);
  }
  if (xs.size() < 8) throw std::invalid_argument("curve CSV needs at least 8 rows");
  const std::size_t n = xs.size();
  const double dx = (xs.back() - xs.front()) / double(n - 1);
  for (std::size_t j = 0; j < n; ++j)
    if (std::abs(xs[j] - (xs.front() + double(j) * dx)) > 1e-9 * std::max(1.0, std::abs(xs[j])))
      throw std::invalid_argument("curve CSV is not on a uniform grid");
  out.curve.grid = periodic ? Grid1D::periodic_box(xs.front(), xs.back() + dx, n)
                            : Grid1D::line(xs.front(), xs.back(), n);
  return out;
}

CurveCsv read_curve_csv(const std::string& path, bool periodic) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_curve_csv(is, periodic);
}

}  // namespace filament
