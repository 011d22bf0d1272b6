#include "filament/io.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "filament/fourier.hpp"
#include "filament/nls.hpp"
#include "filament/numfmt.hpp"
#include "filament/scattering.hpp"
#include "filament/self_similar.hpp"
#include "filament/singularity_trace.hpp"
#include "filament/vfe_direct.hpp"

namespace filament::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double pi = std::numbers::pi;

// ---------------------------------------------------------------- schema

Field num(std::string name, double v, std::string help, std::optional<double> lo = {},
          std::optional<double> hi = {}) {
  return {std::move(name), Kind::Number, v, std::move(help), {}, lo, hi, false};
}
Field required_num(std::string name, std::string help, std::optional<double> lo = {}) {
  return {std::move(name), Kind::Number, nullptr, std::move(help), {}, lo, {}, false};
}
Field nullable_num(std::string name, std::string help) {
  return {std::move(name), Kind::Number, nullptr, std::move(help), {}, {}, {}, true};
}
Field integer(std::string name, long v, std::string help, std::optional<double> lo = {},
              std::optional<double> hi = {}) {
  return {std::move(name), Kind::Integer, v, std::move(help), {}, lo, hi, false};
}
Field boolean(std::string name, bool v, std::string help) {
  return {std::move(name), Kind::Boolean, v, std::move(help), {}, {}, {}, false};
}
Field choice(std::string name, std::string v, std::vector<std::string> choices, std::string help) {
  return {std::move(name), Kind::String, v, std::move(help), std::move(choices), {}, {}, false};
}
Field text(std::string name, std::string v, std::string help) {
  return {std::move(name), Kind::String, v, std::move(help), {}, {}, {}, false};
}
Field list(std::string name, std::vector<double> v, std::string help, std::optional<double> lo = {}) {
  return {std::move(name), Kind::NumberList, v, std::move(help), {}, lo, {}, false};
}

// initial data of the psi and u equations
std::vector<Field> source_fields(const std::string& initial, double L, long M) {
  return {
      choice("initial", initial, {"constant", "plane_wave", "soliton", "gaussian", "power_law", "self_similar"},
             "initial datum"),
      num("amplitude", 1.0, "amplitude of constant, plane_wave, gaussian and power_law data"),
      num("phase", 0.0, "constant phase of the amplitude"),
      num("N", 0.0, "carrier wavenumber (plane_wave, soliton, gaussian)"),
      num("width", 1.0, "gaussian width", 1e-12),
      num("profile_gamma", 0.3, "power_law: |u^(xi)| ~ |xi|^-profile_gamma e^{-xi^2}", 0.0, 1.0),
      num("noise", 0.0, "L2 size of a smooth random perturbation", 0.0),
      integer("seed", 1, "perturbation seed", 0),
      num("L", L, "periodic box length", 1e-12),
      integer("M", M, "grid nodes", 8),
  };
}

std::vector<Field> solver_fields(double t0, double t1, double dt, bool relative, const std::string& mode) {
  return {
      num("t_start", t0, "initial time", 0.0),
      num("t_end", t1, "final time", 0.0),
      num("dt", dt, "step (relative to t when dt_relative)", 1e-15),
      boolean("dt_relative", relative, "step bound dt * t"),
      integer("order", 2, "2: Strang, 4: composition", 2, 4),
      num("a", 0.0, "self-similar parameter", 0.0),
      integer("sign", 1, "sign of the nonlinearity", -1, 1),
      num("kappa", 0.5, "nonlinearity constant", 1e-12),
      choice("mode", mode, {"full", "linearized", "free"}, "nonlinear part"),
      choice("gauge", "constant", {"constant", "inverse_time"}, "psi equation: A = A0 or a^2 / t"),
      num("A0", 1.0, "constant gauge"),
  };
}

template <class... V>
std::vector<Field> join(std::vector<Field> a, const V&... rest) {
  (a.insert(a.end(), rest.begin(), rest.end()), ...);
  return a;
}

const std::map<std::string, std::vector<Field>>& schemas() {
  static const std::map<std::string, std::vector<Field>> s = [] {
    std::map<std::string, std::vector<Field>> m;
    m["selfsimilar"] = {
        required_num("a", "self-similar parameter", 0.0),
        num("s_max", 200.0, "profile half length", 1.0),
        num("ds", 1e-3, "profile step", 1e-6, 1.0),
        list("times", {1.0, 0.1, 0.01, 0.001}, "output times", 1e-300),
        num("x_max", 4.0, "output grid half width", 1e-12),
        integer("nx", 801, "output grid nodes (odd keeps x = 0)", 3),
        integer("profile_stride", 100, "profile.csv keeps every n-th node", 1),
        num("angle_tol", 1e-3, "bound on |sin(theta/2) - exp(-pi a^2 / 2)|", 0.0),
    };
    m["evolve"] = join(
        {choice("equation", "psi", {"psi", "u", "u_gauged"}, "equation to integrate")},
        source_fields("gaussian", 2 * pi, 1024), solver_fields(0.0, 1.0, 1e-4, false, "full"),
        std::vector<Field>{
            integer("record", 10, "extra recorded slices", 0),
            choice("record_spacing", "linear", {"linear", "log"}, "spacing of the recorded slices"),
            num("explicit_tol", 1e-6, "bound on the error against an explicit solution", 0.0),
        });
    m["scatter-diagnose"] = join(
        source_fields("power_law", 512.0, 4096),
        std::vector<Field>{
            num("a", 0.5, "self-similar parameter", 0.0),
            integer("sign", 1, "sign of the nonlinearity", -1, 1),
            num("kappa", 0.5, "nonlinearity constant", 1e-12),
            num("t_end", 1e3, "final time", 1.0),
            num("dt", 0.01, "step (relative to t when dt_relative)", 1e-15),
            boolean("dt_relative", true, "step bound dt * t"),
            integer("order", 2, "2: Strang, 4: composition", 2, 4),
            choice("mode", "full", {"full", "linearized"}, "linearized runs the gauged variable"),
            integer("slices", 41, "log-spaced slices on [1, t_end]", 3),
            num("gamma", 0.3, "X^gamma weight", 1e-6, 0.5),
            num("gamma_tilde", 0.1, "Y norm time weight", 0.0),
            num("delta", 0.1, "mode growth exponent", 0.0),
            num("xi_cutoff", 0.0, "C2 taken over |xi| >= xi_cutoff (0: smallest mode)", 0.0),
            boolean("oracle", false, "compare with the per-mode oracle (linearized only)"),
            num("oracle_tol", 1e-8, "bound on the oracle difference", 0.0),
            nullable_num("decay_exponent_max", "assert the fitted decay exponent is at most this"),
            nullable_num("zero_mode_min_correlation", "assert |u^(t, 0)| is linear in log t at least this well"),
        });
    m["reconstruct"] = join(
        {text("input", "", "field.jsonl of a psi run; empty: integrate the source below")},
        source_fields("plane_wave", 8 * pi, 256), solver_fields(0.0, 0.2, 1e-3, false, "full"),
        std::vector<Field>{
            integer("record", 100, "extra recorded slices", 2),
            nullable_num("anchor_time", "anchor slice time (default t_start)"),
            num("anchor_x", 0.0, "anchor node"),
            boolean("commuted", false, "Koiso in x first, then every node in t"),
            boolean("halving", false, "rerun with dt and dx halved and report the residual ratio"),
            nullable_num("residual_ratio_min", "assert residual(h) / residual(h/2) is at least this"),
        });
    m["vfe-direct"] = {
        choice("curve", "circle", {"circle", "helix", "file"}, "initial curve"),
        text("input", "", "curve CSV for curve = file (periodic parameter box)"),
        num("radius", 1.0, "circle or helix radius", 1e-12),
        num("k", 0.5, "helix angular rate in arclength (radius * k < 1)", 1e-12),
        integer("turns", 1, "periods in the box", 1),
        integer("n", 64, "nodes", 8),
        num("dt", 1e-3, "step", 1e-15),
        num("t_end", 0.5, "final time", 0.0),
        boolean("renormalize", true, "project to unit speed"),
        integer("renormalize_every", 10, "projection cadence", 1),
        num("max_drift", 0.01, "abort when | |chi_x| - 1 | exceeds this", 0.0),
        integer("slices", 5, "recorded slices", 0),
        nullable_num("exact_tol", "assert the circle stays within this of its exact translate"),
    };
    m["corner-ivp"] = {
        choice("input", "pure", {"pure", "gaussian", "file"}, "corner curve"),
        text("file", "", "corner curve CSV for input = file"),
        num("a", 0.5, "self-similar parameter of the generated corners", 0.0),
        num("eps", 0.003, "gaussian: u+ = eps (1 + i) exp(-y^2 / (4 width))", 0.0),
        num("width", 8.0, "gaussian width", 1e-12),
        choice("placement", "identity", {"identity", "random"}, "rigid motion of generated corners"),
        integer("seed", 1, "placement seed", 0),
        num("corner_x_max", 12.0, "corner grid half width", 1e-12),
        integer("corner_n", 12001, "corner grid nodes (odd)", 13),
        num("u_L", 4096.0, "u box length", 1e-12),
        integer("u_M", 16384, "u box nodes", 64),
        list("times", {1e-3, 1.5e-3, 2e-3, 3e-3, 1e-2, 0.1, 1.0}, "output times in (0, 1]", 1e-300),
        num("x_max", 2.0, "output grid half width", 1e-12),
        integer("nx", 401, "output grid nodes (odd)", 3),
        num("T_max", 1e3, "wave operator horizon", 1.0),
        num("dt", 0.01, "relative step", 1e-15),
        integer("order", 2, "2: Strang, 4: composition", 2, 4),
        num("gamma", 0.3, "X^gamma weight", 1e-6, 0.5),
        num("profile_ds", 1e-3, "self-similar profile step", 1e-6, 1.0),
        boolean("negative", true, "continue to t in [-1, 0)"),
        boolean("round_trip", false, "re-evolve from chi(-1) and compare at t = 1"),
        num("wide_x_max", 30.0, "round-trip grid half width", 1e-12),
        integer("wide_n", 6001, "round-trip grid nodes", 13),
        num("chi_a_tol", 1e-6, "pure input: bound on |chi - chi_a|", 0.0),
        num("g_zero_tol", 1e-12, "pure input: bound on |g|", 0.0),
        nullable_num("angle_tol", "assert the measured angle is this close to the input angle"),
    };
    m["trace"] = {
        text("input", "", "evolution directory; empty: chi_a sampled at times"),
        required_num("a", "self-similar parameter", 0.0),
        list("times", {1e-2, 3e-3, 1e-3, 3e-4, 1e-4}, "chi_a times", 1e-300),
        num("x_max", 2.0, "chi_a grid half width", 1e-12),
        integer("nx", 4001, "chi_a grid nodes", 3),
        num("x_cut", 0.1, "trace kept on |x| >= x_cut", 0.0),
        integer("levels", 3, "extrapolation levels", 3),
        boolean("use_reference", true, "subtract chi_a in the family position (identity placement)"),
        boolean("limits", false, "fit the limits as |x| -> infinity"),
        boolean("rescaled", true, "rescaled frames at the tip"),
    };
    m["emit-plotdata"] = {
        text("input", "", "artifact directory"),
    };
    return m;
  }();
  return s;
}

double parse_number_text(const std::string& path, const std::string& s) {
  try {
    return parse_double(s);
  } catch (const std::invalid_argument&) {
    throw SchemaError(path, "expected a number, got '" + s + "'");
  }
}

void check_bounds(const Field& f, const std::string& path, double v) {
  if (!std::isfinite(v)) throw SchemaError(path, "must be finite");
  if (f.lo && v < *f.lo) throw SchemaError(path, "must be >= " + shortest(*f.lo));
  if (f.hi && v > *f.hi) throw SchemaError(path, "must be <= " + shortest(*f.hi));
}

json coerce(const Field& f, const json& v) {
  const std::string& path = f.name;
  if (v.is_null()) {
    if (f.nullable) return nullptr;
    throw SchemaError(path, "must not be null");
  }
  switch (f.kind) {
    case Kind::Number: {
      double x;
      if (v.is_string()) x = parse_number_text(path, v.get<std::string>());
      else if (v.is_number()) x = v.get<double>();
      else throw SchemaError(path, "expected a number");
      check_bounds(f, path, x);
      return x;
    }
    case Kind::Integer: {
      long x;
      if (v.is_string()) {
        const double d = parse_number_text(path, v.get<std::string>());
        if (d != std::floor(d)) throw SchemaError(path, "expected an integer");
        x = long(d);
      } else if (v.is_number_integer()) {
        x = v.get<long>();
      } else if (v.is_number_float() && v.get<double>() == std::floor(v.get<double>())) {
        x = long(v.get<double>());
      } else {
        throw SchemaError(path, "expected an integer");
      }
      check_bounds(f, path, double(x));
      if (f.name == "sign" && x == 0) throw SchemaError(path, "must be +1 or -1");
      if (f.name == "order" && x == 3) throw SchemaError(path, "must be 2 or 4");
      return x;
    }
    case Kind::Boolean: {
      if (v.is_boolean()) return v;
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
      }
      throw SchemaError(path, "expected true or false");
    }
    case Kind::String: {
      if (!v.is_string()) throw SchemaError(path, "expected a string");
      const auto s = v.get<std::string>();
      if (!f.choices.empty() && std::find(f.choices.begin(), f.choices.end(), s) == f.choices.end()) {
        std::string all;
        for (const auto& c : f.choices) all += (all.empty() ? "" : ", ") + c;
        throw SchemaError(path, "must be one of " + all);
      }
      return s;
    }
    case Kind::NumberList: {
      std::vector<double> out;
      if (v.is_string()) {
        std::stringstream ss(v.get<std::string>());
        std::string item;
        while (std::getline(ss, item, ','))
          out.push_back(parse_number_text(path + "[" + std::to_string(out.size()) + "]", item));
      } else if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (!v[i].is_number()) throw SchemaError(path + "[" + std::to_string(i) + "]", "expected a number");
          out.push_back(v[i].get<double>());
        }
      } else {
        throw SchemaError(path, "expected a list of numbers");
      }
      if (out.empty()) throw SchemaError(path, "must not be empty");
      for (std::size_t i = 0; i < out.size(); ++i) check_bounds(f, path + "[" + std::to_string(i) + "]", out[i]);
      return out;
    }
  }
  throw SchemaError(path, "unsupported field kind");
}

// ---------------------------------------------------------------- output helpers

void dump(std::ostream& os, const json& j, int indent, int depth) {
  const std::string pad(std::size_t(indent * (depth + 1)), ' '), end_pad(std::size_t(indent * depth), ' ');
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{' << nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',' << nl;
        first = false;
        os << pad << json(it.key()).dump() << (indent > 0 ? ": " : ":");
        dump(os, it.value(), indent, depth + 1);
      }
      os << nl << end_pad << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // numeric arrays stay on one line
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      os << '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << (flat ? ", " : ",");
        if (!flat) os << nl << pad;
        dump(os, j[i], indent, depth + 1);
      }
      if (!flat) os << nl << end_pad;
      os << ']';
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) os << "null";
      else os << shortest(v);
      return;
    }
    default:
      os << j.dump();
  }
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json cvec_json(const CVec3& v) {
  json a = json::array();
  for (int k = 0; k < 3; ++k) a.push_back(json::array({v[k].real(), v[k].imag()}));
  return a;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

void write_complex_csv(const fs::path& p, const char* xname, const ComplexField& f) {
  auto os = open_out(p);
  os << xname << ",re,im\n";
  for (std::size_t j = 0; j < f.size(); ++j)
    os << shortest(f.grid.x(j)) << ',' << shortest(f[j].real()) << ',' << shortest(f[j].imag()) << '\n';
}

struct Assertions {
  std::vector<Assertion> list;
  void at_most(const std::string& id, double value, double limit) { add(id, value, limit, true); }
  void at_least(const std::string& id, double value, double limit) { add(id, value, limit, false); }
  void add(const std::string& id, double value, double limit, bool upper) {
    const bool pass = std::isfinite(value) && (upper ? value <= limit : value >= limit);
    list.push_back({id, value, limit, upper, pass});
  }
  json to_json() const {
    json j = json::object();
    for (const auto& a : list)
      j[a.id] = {{"value", a.value}, {"limit", a.limit}, {"relation", a.upper ? "<=" : ">="}, {"pass", a.pass}};
    return j;
  }
};

double num_of(const json& p, const char* k) { return p.at(k).get<double>(); }
long int_of(const json& p, const char* k) { return p.at(k).get<long>(); }
std::string str_of(const json& p, const char* k) { return p.at(k).get<std::string>(); }
std::vector<double> list_of(const json& p, const char* k) { return p.at(k).get<std::vector<double>>(); }

Grid1D symmetric_line(double half, long n, const char* field) {
  if (n % 2 == 0) throw SchemaError(field, "must be odd so that x = 0 is a node");
  return Grid1D::line(-half, half, std::size_t(n));
}

double sup_gap(const SampledCurve& p, const SampledCurve& q) {
  double d = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) d = std::max(d, (p.points[j] - q.points[j]).norm());
  return d;
}

// ---------------------------------------------------------------- data sources

// exact solution of the psi equation for the explicit data, if any; t0 is the start time
std::optional<std::function<cplx(double, double)>> explicit_psi(const json& p, double t0) {
  if (num_of(p, "noise") != 0.0) return std::nullopt;
  if (str_of(p, "gauge") != "constant" || str_of(p, "mode") != "full") return std::nullopt;
  const std::string kind = str_of(p, "initial");
  const double kappa = num_of(p, "kappa"), A0 = num_of(p, "A0"), N = num_of(p, "N");
  const cplx c = std::polar(num_of(p, "amplitude"), num_of(p, "phase"));
  const double w = kappa * (std::norm(c) - A0);
  if (kind == "constant") return [=](double t, double) { return c * std::polar(1.0, w * (t - t0)); };
  if (kind == "plane_wave")
    return [=](double t, double x) { return c * std::polar(1.0, N * x + (w - N * N) * (t - t0)); };
  if (kind == "soliton")
    return [=](double t, double x) { return explicit_solution::soliton(N, A0, t, x, kappa); };
  return std::nullopt;
}

ComplexField initial_field(const json& p, double t0) {
  const Grid1D g = Grid1D::centered_box(num_of(p, "L"), std::size_t(int_of(p, "M")));
  const std::string kind = str_of(p, "initial");
  const cplx amp = std::polar(num_of(p, "amplitude"), num_of(p, "phase"));
  const double N = num_of(p, "N");
  ComplexField f(g);
  if (kind == "plane_wave") {
    const double period = 2 * pi / g.length();
    if (std::abs(N / period - std::round(N / period)) > 1e-9)
      throw SchemaError("N", "must be a multiple of 2 pi / L for periodic data");
  }
  if (kind == "constant") {
    for (std::size_t j = 0; j < g.n; ++j) f[j] = amp;
  } else if (kind == "plane_wave") {
    for (std::size_t j = 0; j < g.n; ++j) f[j] = amp * std::polar(1.0, N * g.x(j));
  } else if (kind == "soliton") {
    for (std::size_t j = 0; j < g.n; ++j)
      f[j] = explicit_solution::soliton(N, p.value("A0", 1.0), t0, g.x(j), p.value("kappa", 0.5));
  } else if (kind == "gaussian") {
    const double w = num_of(p, "width");
    for (std::size_t j = 0; j < g.n; ++j) {
      const double x = g.x(j);
      f[j] = amp * std::exp(-0.5 * x * x / (w * w)) * std::polar(1.0, N * x);
    }
  } else if (kind == "power_law") {
    const auto xi = fourier::wavenumbers(g);
    const double gam = num_of(p, "profile_gamma");
    std::vector<cplx> s(g.n);
    for (std::size_t k = 0; k < g.n; ++k)
      s[k] = xi[k] == 0.0 ? cplx(0.0) : amp * std::pow(std::abs(xi[k]), -gam) * std::exp(-xi[k] * xi[k]) * cplx(1, 0.5);
    f = fourier::inverse_transform(g, s);
  } else if (kind == "self_similar") {
    if (!(t0 > 0.0)) throw SchemaError("t_start", "self_similar data needs t_start > 0");
    f = filament_function_a(num_of(p, "a"), t0, g);
  }
  const double noise = num_of(p, "noise");
  if (noise > 0.0) {
    std::mt19937_64 rng(std::uint64_t(int_of(p, "seed")));
    std::normal_distribution<double> n01(0.0, 1.0);
    const auto xi = fourier::wavenumbers(g);
    std::vector<cplx> s(g.n);
    for (std::size_t k = 0; k < g.n; ++k) {
      const double re = n01(rng), im = n01(rng);
      s[k] = cplx(re, im) * std::exp(-xi[k] * xi[k]);
    }
    const ComplexField r = fourier::inverse_transform(g, s);
    const double scale = noise / std::max(r.l2_norm(), 1e-300);
    for (std::size_t j = 0; j < g.n; ++j) f[j] += scale * r[j];
  }
  return f;
}

NlsParams solver_params(const json& p) {
  NlsParams q;
  q.a = num_of(p, "a");
  q.sign = int(int_of(p, "sign"));
  q.kappa = num_of(p, "kappa");
  q.t_start = num_of(p, "t_start");
  q.t_end = num_of(p, "t_end");
  q.dt = num_of(p, "dt");
  q.dt_relative = p.at("dt_relative").get<bool>();
  q.order = int(int_of(p, "order"));
  const std::string mode = str_of(p, "mode");
  q.mode = mode == "full" ? NonlinearMode::Full : mode == "linearized" ? NonlinearMode::Linearized : NonlinearMode::Free;
  q.gauge = str_of(p, "gauge") == "constant" ? GaugeKind::Constant : GaugeKind::InverseTime;
  q.A0 = num_of(p, "A0");
  return q;
}

std::vector<double> record_times(double t0, double t1, long n, bool log) {
  std::vector<double> r;
  if (n <= 0) return r;
  if (log) {
    if (!(t0 > 0.0)) throw SchemaError("record_spacing", "log spacing needs t_start > 0");
    const auto all = log_spaced(t0, t1, std::size_t(n) + 2);
    r.assign(all.begin() + 1, all.end() - 1);
  } else {
    for (long k = 1; k <= n; ++k) r.push_back(t0 + (t1 - t0) * double(k) / double(n + 1));
  }
  return r;
}

SpaceTimeField run_psi(const json& p, long record) {
  NlsParams q = solver_params(p);
  q.record_times = record_times(q.t_start, q.t_end, record, false);
  return evolve_psi(initial_field(p, q.t_start), q);
}

// ---------------------------------------------------------------- commands

json cmd_selfsimilar(const json& p, const fs::path& out, Assertions& as) {
  const double a = num_of(p, "a");
  auto times = list_of(p, "times");
  std::sort(times.begin(), times.end(), std::greater<>());
  const double s_max = num_of(p, "s_max"), x_max = num_of(p, "x_max");
  if (x_max / std::sqrt(times.back()) > s_max)
    throw SchemaError("x_max", "x_max / sqrt(min t) = " + shortest(x_max / std::sqrt(times.back())) + " exceeds s_max");
  const auto fam = build_profile(a, s_max, num_of(p, "ds"));
  const Grid1D g = Grid1D::line(-x_max, x_max, std::size_t(int_of(p, "nx")));

  {
    auto os = open_out(out / "profile.csv");
    os << "s,chi_x,chi_y,chi_z,T_x,T_y,T_z\n";
    const auto& pr = fam.profile;
    const auto stride = std::size_t(int_of(p, "profile_stride"));
    for (std::size_t j = 0; j < pr.curve.size(); j += stride) {
      os << shortest(pr.curve.grid.x(j));
      for (int k = 0; k < 3; ++k) os << ',' << shortest(pr.curve.points[j][k]);
      for (int k = 0; k < 3; ++k) os << ',' << shortest(pr.frames.T[j][k]);
      os << '\n';
    }
  }

  CurveEvolution evo;
  double ratio = 0.0, ratio_off_tip = 0.0;
  for (double t : times) {
    evo.times.push_back(t);
    evo.curves.push_back(evaluate_chi_a(fam, t, g));
    evo.frames.push_back(evaluate_koiso_a(fam, t, g));
    evo.psi.push_back(filament_function_a(a, t, g).values);
    if (a > 0.0) {
      for (std::size_t j = 0; j < g.n; ++j) {
        const double x = g.x(j);
        const double d = (evo.curves.back().points[j] - x * (x >= 0 ? fam.A_plus : fam.A_minus)).norm();
        const double r = d / (2 * a * std::sqrt(t));
        ratio = std::max(ratio, r);
        if (std::abs(x) > 0.5 * g.dx()) ratio_off_tip = std::max(ratio_off_tip, r);
      }
    }
  }
  write_evolution(out / "evolution", evo);

  const double sin_half = fam.sin_half_theta();
  json s;
  s["a"] = a;
  s["theta"] = fam.theta;
  s["sin_half_theta"] = sin_half;
  s["e_minus_a2_over_2"] = std::exp(-0.5 * a * a);
  s["e_minus_pi_a2_over_2"] = corner_sin_half_theta(a);
  s["angle_law_gap"] = std::abs(sin_half - corner_sin_half_theta(a));
  s["angle_law_literal_gap"] = std::abs(sin_half - std::exp(-0.5 * a * a));
  s["tails_converged"] = fam.converged;
  s["A_plus"] = vec_json(fam.A_plus);
  s["A_minus"] = vec_json(fam.A_minus);
  s["B_plus"] = cvec_json(fam.B_plus);
  s["B_minus"] = cvec_json(fam.B_minus);
  s["reversal_phase"] = fam.reversal_phase;
  s["tail_rms"] = std::max({fam.fit_A_plus.rms_residual, fam.fit_A_minus.rms_residual});
  if (a > 0.0) {
    s["corner_bound_ratio"] = ratio;
    s["corner_bound_ratio_off_tip"] = ratio_off_tip;
  }
  as.at_most("angle_law", s["angle_law_gap"].get<double>(), num_of(p, "angle_tol"));
  if (a > 0.0) as.at_most("corner_bound", ratio, 1.0 + 1e-12);
  return s;
}

json cmd_evolve(const json& p, const fs::path& out, Assertions& as) {
  NlsParams q = solver_params(p);
  q.record_times = record_times(q.t_start, q.t_end, int_of(p, "record"), str_of(p, "record_spacing") == "log");
  const std::string eq = str_of(p, "equation");
  const ComplexField f0 = initial_field(p, q.t_start);
  const SpaceTimeField run = eq == "psi" ? evolve_psi(f0, q) : eq == "u" ? evolve_u(f0, q) : evolve_u_gauged(f0, q);
  write_jsonl((out / "field.jsonl").string(), run);

  json s;
  s["slices"] = run.slices();
  const double l2_0 = run.slice(0).l2_norm();
  double drift = 0.0;
  for (std::size_t k = 0; k < run.slices(); ++k)
    drift = std::max(drift, std::abs(run.slice(k).l2_norm() - l2_0) / std::max(l2_0, 1e-300));
  s["l2_initial"] = l2_0;
  s["l2_final"] = run.slice(run.slices() - 1).l2_norm();
  s["l2_relative_drift"] = drift;
  s["max_abs_final"] = run.slice(run.slices() - 1).max_abs();
  s["zero_mode_initial"] = std::abs(fourier::transform(run.slice(0))[0]);
  s["zero_mode_final"] = std::abs(fourier::transform(run.slice(run.slices() - 1))[0]);
  if (eq == "psi") {
    if (const auto ex = explicit_psi(p, q.t_start)) {
      double err = 0.0;
      for (std::size_t k = 0; k < run.slices(); ++k)
        for (std::size_t j = 0; j < run.grid.n; ++j)
          err = std::max(err, std::abs(run.values[k][j] - (*ex)(run.times[k], run.grid.x(j))));
      s["explicit_error"] = err;
      as.at_most("explicit_solution", err, num_of(p, "explicit_tol"));
    }
  }
  return s;
}

json cmd_scatter(const json& p, const fs::path& out, Assertions& as) {
  NlsParams q;
  q.a = num_of(p, "a");
  q.sign = int(int_of(p, "sign"));
  q.kappa = num_of(p, "kappa");
  q.t_start = 1.0;
  q.t_end = num_of(p, "t_end");
  q.dt = num_of(p, "dt");
  q.dt_relative = p.at("dt_relative").get<bool>();
  q.order = int(int_of(p, "order"));
  const bool linear = str_of(p, "mode") == "linearized";
  q.mode = linear ? NonlinearMode::Linearized : NonlinearMode::Full;
  q.record_times = log_spaced(1.0, q.t_end, std::size_t(int_of(p, "slices")));
  const ComplexField u0 = initial_field(p, 1.0);
  const SpaceTimeField run = linear ? evolve_u_gauged(u0, q) : evolve_u(u0, q);

  const auto sr = spectra(run);
  const auto growth = mode_growth_check(sr, num_of(p, "delta"), num_of(p, "xi_cutoff"));
  const auto states = renormalized_state(run, q.a, q.sign, q.kappa, linear);
  const auto decay = decay_fit(run.times, states);
  const auto xg = xgamma_norm(u0, num_of(p, "gamma"));
  const auto yn = y_norm_terms(run, num_of(p, "gamma"), num_of(p, "gamma_tilde"));

  std::vector<double> lt, z;
  for (std::size_t k = 0; k < run.slices(); ++k) {
    lt.push_back(std::log(run.times[k]));
    z.push_back(std::abs(sr.values[k][0]));
  }
  const auto zf = fit_line(lt, z);

  {
    auto os = open_out(out / "decay.csv");
    os << "t,deficit\n";
    for (std::size_t k = 0; k < decay.times.size(); ++k) os << shortest(decay.times[k]) << ',' << shortest(decay.deficits[k]) << '\n';
  }
  {
    auto os = open_out(out / "zero_mode.csv");
    os << "t,abs\n";
    for (std::size_t k = 0; k < run.slices(); ++k) os << shortest(run.times[k]) << ',' << shortest(z[k]) << '\n';
  }
  {
    std::vector<std::size_t> order(sr.xi.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return sr.xi[i] < sr.xi[j]; });
    auto os = open_out(out / "growth.csv");
    os << "xi,C1,C2\n";
    for (std::size_t k : order) {
      if (std::isnan(growth.C1[k])) continue;
      os << shortest(sr.xi[k]) << ',' << shortest(growth.C1[k]) << ',' << shortest(growth.C2[k]) << '\n';
    }
  }
  write_json(out / "diagnostics.json", scattering_report(num_of(p, "gamma"), growth, decay));

  json s;
  s["xgamma_l2"] = xg.l2_part;
  s["xgamma_lowfreq"] = xg.lowfreq_part;
  s["xgamma"] = xg.total;
  s["y_l2_sup"] = yn.l2_sup;
  s["y_lowfreq_sup"] = yn.lowfreq_sup;
  s["y_total"] = yn.total;
  s["C1_max"] = growth.C1_max;
  s["C2_max"] = growth.C2_max;
  s["skipped_modes"] = growth.skipped_modes;
  s["decay_exponent"] = decay.exponent;
  s["decay_constant"] = decay.constant;
  s["decay_residual"] = decay.residual;
  s["decay_reliable"] = decay.reliable;
  s["zero_mode_slope"] = zf.slope;
  s["zero_mode_correlation"] = zf.correlation;
  s["zero_mode_rms"] = zf.rms;
  if (p.at("oracle").get<bool>()) {
    if (!linear) throw SchemaError("oracle", "the per-mode oracle needs mode = linearized");
    OracleOptions oo;
    oo.kappa = q.kappa;
    const double d = max_spectral_difference(sr, linear_oracle_run(u0, q.a, q.sign, run.times, oo));
    s["oracle_difference"] = d;
    as.at_most("oracle", d, num_of(p, "oracle_tol"));
  }
  if (!p.at("decay_exponent_max").is_null())
    as.at_most("decay_exponent", decay.exponent, num_of(p, "decay_exponent_max"));
  if (!p.at("zero_mode_min_correlation").is_null())
    as.at_least("zero_mode_log_linear", zf.correlation, num_of(p, "zero_mode_min_correlation"));
  return s;
}

json cmd_reconstruct(const json& p, const fs::path& out, Assertions& as) {
  const std::string input = str_of(p, "input");
  const bool halving = p.at("halving").get<bool>();
  if (!input.empty() && halving) throw SchemaError("halving", "needs a generated source (input must be empty)");
  const long record = int_of(p, "record");
  const SpaceTimeField field = input.empty() ? run_psi(p, record) : read_jsonl(input);
  const double t_anchor = p.at("anchor_time").is_null() ? field.times.front() : num_of(p, "anchor_time");
  ReconstructOptions ro;
  ro.kappa = num_of(p, "kappa");
  auto rec = [&](const SpaceTimeField& f) {
    return p.at("commuted").get<bool>()
               ? reconstruct_evolution_commuted(f, Frame::canonical(), Vec3::Zero(), t_anchor, num_of(p, "anchor_x"), ro)
               : reconstruct_evolution(f, Frame::canonical(), Vec3::Zero(), t_anchor, num_of(p, "anchor_x"), ro);
  };
  const CurveEvolution evo = rec(field);
  write_evolution(out / "evolution", evo);

  json s;
  s["slices"] = evo.slices();
  s["vfe_residual"] = vfe_residual(evo);
  double gram = 0.0, arc = 0.0;
  for (std::size_t k = 0; k < evo.slices(); ++k) {
    gram = std::max(gram, evo.frames[k].max_gram_residual());
    arc = std::max(arc, evo.curves[k].arclength_defect());
  }
  s["max_gram_residual"] = gram;
  s["max_arclength_defect"] = arc;
  s["warnings"] = evo.warnings;
  if (halving) {
    json fine = p;
    fine["M"] = 2 * int_of(p, "M");
    fine["dt"] = 0.5 * num_of(p, "dt");
    const double r_fine = vfe_residual(rec(run_psi(fine, record)));
    s["vfe_residual_halved"] = r_fine;
    s["residual_ratio"] = s["vfe_residual"].get<double>() / r_fine;
    if (!p.at("residual_ratio_min").is_null())
      as.at_least("residual_halving", s["residual_ratio"].get<double>(), num_of(p, "residual_ratio_min"));
  }
  return s;
}

json cmd_vfe_direct(const json& p, const fs::path& out, Assertions& as) {
  const std::string kind = str_of(p, "curve");
  const auto n = std::size_t(int_of(p, "n"));
  DirectRunConfig cfg;
  cfg.dt = num_of(p, "dt");
  cfg.t_end = num_of(p, "t_end");
  cfg.renormalize = p.at("renormalize").get<bool>();
  cfg.renormalize_every = int(int_of(p, "renormalize_every"));
  cfg.max_arclength_drift = num_of(p, "max_drift");
  const long slices = int_of(p, "slices");
  for (long k = 1; k <= slices; ++k) cfg.record_times.push_back(cfg.t_end * double(k) / double(slices + 1));

  SampledCurve c0;
  const double r = num_of(p, "radius");
  double k_rate = 1.0 / r;
  if (kind == "file") {
    const std::string input = str_of(p, "input");
    if (input.empty()) throw SchemaError("input", "required for curve = file");
    c0 = read_curve_csv(input, true).curve;
    c0.corner_index.reset();
  } else {
    double h = 0.0;
    if (kind == "helix") {
      k_rate = num_of(p, "k");
      if (r * k_rate >= 1.0) throw SchemaError("k", "radius * k must be below 1");
      h = std::sqrt(1.0 - r * r * k_rate * k_rate);
    }
    const double L = double(int_of(p, "turns")) * 2 * pi / k_rate;
    const Grid1D g = Grid1D::periodic_box(-0.5 * L, 0.5 * L, n);
    c0 = {g, {}, std::nullopt};
    for (std::size_t j = 0; j < g.n; ++j) {
      const double x = g.x(j);
      c0.points.emplace_back(r * std::cos(k_rate * x), r * std::sin(k_rate * x), h * x);
    }
    cfg.period_shift = Vec3(0, 0, h * L);
  }
  cfg.validate(c0.grid.dx());
  const CurveEvolution evo = evolve_direct(c0, cfg);
  write_evolution(out / "evolution", evo);

  const Vec3 shift = cfg.period_shift ? *cfg.period_shift : estimate_period_shift(c0);
  json s;
  s["slices"] = evo.slices();
  s["length_initial"] = curve_length(evo.curves.front(), shift);
  s["length_final"] = curve_length(evo.curves.back(), shift);
  s["arclength_defect_final"] = evo.curves.back().arclength_defect();
  s["warnings"] = evo.warnings;
  if (kind == "circle") {
    // chi(t) = chi(0) + (t / r) e_z
    double err = 0.0;
    for (std::size_t k = 0; k < evo.slices(); ++k)
      for (std::size_t j = 0; j < c0.size(); ++j)
        err = std::max(err, (evo.curves[k].points[j] - c0.points[j] - Vec3(0, 0, evo.times[k] / r)).norm());
    s["exact_error"] = err;
    if (!p.at("exact_tol").is_null()) as.at_most("circle_translation", err, num_of(p, "exact_tol"));
  }
  return s;
}

Mat3 seeded_rotation(std::uint64_t seed) {
  std::mt19937 rng{std::uint32_t(seed)};
  std::normal_distribution<double> n(0.0, 1.0);
  const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
  return Eigen::AngleAxisd(std::uniform_real_distribution<double>(0.0, pi)(rng), axis).toRotationMatrix();
}

json cmd_corner_ivp(const json& p, const fs::path& out, Assertions& as) {
  const std::string kind = str_of(p, "input");
  IvpOptions opt;
  opt.gamma = num_of(p, "gamma");
  opt.u_grid = Grid1D::centered_box(num_of(p, "u_L"), std::size_t(int_of(p, "u_M")));
  opt.wave.T_max = num_of(p, "T_max");
  opt.wave.dt = num_of(p, "dt");
  opt.wave.order = int(int_of(p, "order"));
  opt.wave.gamma = opt.gamma;
  opt.assemble.times = list_of(p, "times");
  for (std::size_t i = 0; i < opt.assemble.times.size(); ++i)
    if (opt.assemble.times[i] > 1.0) throw SchemaError("times[" + std::to_string(i) + "]", "must be <= 1");
  opt.assemble.x_grid = symmetric_line(num_of(p, "x_max"), int_of(p, "nx"), "nx");
  opt.assemble.dt = opt.wave.dt;
  opt.assemble.order = opt.wave.order;
  opt.profile_ds = num_of(p, "profile_ds");

  Mat3 R = Mat3::Identity();
  Vec3 b = Vec3::Zero();
  CornerCurve corner;
  std::optional<SelfSimilarFamily> fam;
  if (kind == "file") {
    const std::string file = str_of(p, "file");
    if (file.empty()) throw SchemaError("file", "required for input = file");
    auto csv = read_curve_csv(file, false);
    corner = CornerCurve::from_samples(std::move(csv.curve), std::move(csv.tangent), opt.gamma);
  } else {
    const double a = num_of(p, "a");
    fam = build_profile(a, 200.0, opt.profile_ds);
    const Grid1D cg = symmetric_line(num_of(p, "corner_x_max"), int_of(p, "corner_n"), "corner_n");
    const auto g = kind == "pure" ? std::function<cplx(double)>([](double) { return cplx(0.0); })
                                  : gaussian_state_g(num_of(p, "eps"), num_of(p, "width"), a);
    corner = corner_from_g(g, *fam, cg);
    if (str_of(p, "placement") == "random") {
      const auto seed = std::uint64_t(int_of(p, "seed"));
      R = seeded_rotation(seed);
      std::mt19937 rng{std::uint32_t(seed + 1)};
      std::uniform_real_distribution<double> u(-2.0, 2.0);
      b = Vec3(u(rng), u(rng), u(rng));
      corner = moved(corner, R, b);
    }
  }

  const auto sol = solve_positive(corner, opt);
  write_curve_csv((out / "chi0.csv").string(), corner.curve, corner.tangent);
  write_complex_csv(out / "g.csv", "x", sol.trace_system.g);
  write_complex_csv(out / "u_plus.csv", "y", sol.u_plus);
  write_evolution(out / "evolution", sol.evolution);
  {
    auto os = open_out(out / "trace.csv");
    os << "x,chi0_x,chi0_y,chi0_z,T0_x,T0_y,T0_z\n";
    const auto& tr = sol.trace;
    for (std::size_t j = 0; j < tr.grid.n; ++j) {
      if (!tr.valid[j]) continue;
      os << shortest(tr.grid.x(j));
      for (int k = 0; k < 3; ++k) os << ',' << shortest(tr.chi0[j][k]);
      for (int k = 0; k < 3; ++k) os << ',' << shortest(tr.T0[j][k]);
      os << '\n';
    }
  }

  const auto& xg = opt.assemble.x_grid;
  json s;
  std::vector<Vec3> chi0_out(xg.n), T0_in(xg.n);
  for (std::size_t j = 0; j < xg.n; ++j) {
    chi0_out[j] = lagrange_eval(corner.curve.grid, corner.curve.points, xg.x(j));
    T0_in[j] = lagrange_eval(corner.curve.grid, corner.tangent, xg.x(j));
  }
  double r_lo = INFINITY, r_hi = 0.0, tr_hi = 0.0, trace_err = 0.0;
  for (std::size_t k = 0; k < sol.evolution.slices(); ++k) {
    const double t = sol.evolution.times[k];
    double d = 0.0;
    for (std::size_t j = 0; j < xg.n; ++j) {
      d = std::max(d, (sol.evolution.curves[k].points[j] - chi0_out[j]).norm());
      const double x = std::abs(xg.x(j));
      if (x > 0.0 && t <= x * x)
        tr_hi = std::max(tr_hi, (sol.evolution.frames[k].T[j] - T0_in[j]).norm() * x / std::sqrt(t));
    }
    r_lo = std::min(r_lo, d / std::sqrt(t));
    r_hi = std::max(r_hi, d / std::sqrt(t));
  }
  for (std::size_t j = 0; j < xg.n; ++j)
    if (sol.trace.valid[j]) trace_err = std::max(trace_err, (sol.trace.T0[j] - T0_in[j]).norm());
  const double angle_in = corner_angle(corner.A_plus, corner.A_minus);

  s["ivp"] = ivp_summary(sol, nullptr);
  s["a"] = sol.a;
  s["input_angle"] = angle_in;
  s["angle_measured"] = sol.trace.angle_measured;
  s["angle_error"] = std::abs(sol.trace.angle_measured - angle_in);
  s["g_max_abs"] = sol.trace_system.g.max_abs();
  s["u_plus_l2"] = sol.u_plus.l2_norm();
  s["u_plus_xgamma"] = sol.u_plus_xgamma;
  s["chi_ratio_min"] = r_lo;
  s["chi_ratio_max"] = r_hi;
  s["trace_ratio_max"] = tr_hi;
  s["trace_tangent_error"] = trace_err;
  s["cauchy_gap"] = sol.wave.cauchy_gap;
  s["wave_converged"] = sol.wave.converged;
  s["weighted_curvature_l2"] = corner.weighted_curvature_l2;
  s["local_curvature_sup"] = corner.local_curvature_sup;
  s["warnings"] = sol.warnings;

  if (kind == "pure") {
    double gap = 0.0;
    for (std::size_t k = 0; k < sol.evolution.slices(); ++k)
      gap = std::max(gap, sup_gap(sol.evolution.curves[k], evaluate_chi_a(*fam, sol.evolution.times[k], xg).transformed(R, b)));
    s["chi_a_gap"] = gap;
    as.at_most("g_zero", s["g_max_abs"].get<double>(), num_of(p, "g_zero_tol"));
    as.at_most("chi_a", gap, num_of(p, "chi_a_tol"));
  }
  if (!p.at("angle_tol").is_null()) as.at_most("angle", s["angle_error"].get<double>(), num_of(p, "angle_tol"));

  if (p.at("negative").get<bool>()) {
    const auto neg = continue_negative(corner, sol, opt);
    write_evolution(out / "evolution_negative", neg.evolution);
    s["ivp"] = ivp_summary(sol, &neg);
    s["g_star_mismatch"] = neg.g_star_mismatch;
    s["stitch_gap"] = neg.stitch_gap;
    if (kind == "pure") {
      const Mat3 Rb = R * fam->bisector_rotation() * R.transpose();
      double d = 0.0;
      for (std::size_t k = 0; k < neg.evolution.slices(); ++k) {
        const auto chi_a = evaluate_chi_a(*fam, -neg.evolution.times[k], xg).transformed(R, b);
        for (std::size_t j = 0; j < xg.n; ++j)
          d = std::max(d, (neg.evolution.curves[k].points[j] - (Rb * (chi_a.points[xg.n - 1 - j] - b) + b)).norm());
      }
      s["bisector_gap"] = d;
    }
    if (p.at("round_trip").get<bool>()) {
      const auto rr = reversibility_round_trip(sol, neg, opt,
                                               symmetric_line(num_of(p, "wide_x_max"), int_of(p, "wide_n"), "wide_n"));
      s["round_trip_u_plus_gap"] = rr.u_plus_gap;
      s["round_trip_chi_gap"] = rr.chi_gap;
    }
  } else if (p.at("round_trip").get<bool>()) {
    throw SchemaError("round_trip", "needs negative = true");
  }
  write_json(out / "diagnostics.json", s["ivp"]);
  return s;
}

json cmd_trace(const json& p, const fs::path& out, Assertions&) {
  const double a = num_of(p, "a");
  const std::string input = str_of(p, "input");
  CurveEvolution evo;
  std::optional<SelfSimilarFamily> fam;
  std::optional<TraceReference> ref;
  auto family = [&]() -> const SelfSimilarFamily& {
    if (!fam) fam = build_profile(a);
    return *fam;
  };
  if (input.empty()) {
    auto times = list_of(p, "times");
    std::sort(times.begin(), times.end(), std::greater<>());
    const Grid1D g = Grid1D::line(-num_of(p, "x_max"), num_of(p, "x_max"), std::size_t(int_of(p, "nx")));
    ref = self_similar_reference(family(), Mat3::Identity(), Vec3::Zero(), times, g);
    evo = ref->evo;
  } else {
    evo = read_evolution(input);
    for (const auto& F : evo.frames)
      if (F.e1.size() != F.T.size()) throw SchemaError("input", "evolution has no e1, e2 frames");
    if (p.at("use_reference").get<bool>())
      ref = self_similar_reference(family(), Mat3::Identity(), Vec3::Zero(), evo.times, evo.curves.front().grid);
  }
  TraceOptions to;
  to.x_cut = num_of(p, "x_cut");
  to.levels = int(int_of(p, "levels"));
  if (p.at("use_reference").get<bool>()) to.reference = &*ref;
  const auto tr = trace_at_zero(evo, a, to);
  SpatialLimits lim;
  lim.reason = "not requested";
  if (p.at("limits").get<bool>()) lim = spatial_limits(evo, a);
  RescaledReport rs;
  if (p.at("rescaled").get<bool>()) rs = rescaled_frames(evo, a);
  write_json(out / "diagnostics.json", trace_report(lim, tr, rs));
  {
    auto os = open_out(out / "trace.csv");
    os << "x,chi0_x,chi0_y,chi0_z,T0_x,T0_y,T0_z\n";
    for (std::size_t j = 0; j < tr.grid.n; ++j) {
      if (!tr.valid[j]) continue;
      os << shortest(tr.grid.x(j));
      for (int k = 0; k < 3; ++k) os << ',' << shortest(tr.chi0[j][k]);
      for (int k = 0; k < 3; ++k) os << ',' << shortest(tr.T0[j][k]);
      os << '\n';
    }
  }
  json s;
  s["angle_measured"] = tr.angle_measured;
  s["angle_predicted"] = corner_theta(a);
  s["A_plus"] = vec_json(tr.A_plus_meas);
  s["A_minus"] = vec_json(tr.A_minus_meas);
  s["chi_sqrt_t"] = tr.chi_sqrt_t;
  s["T_sqrt_t_over_x"] = tr.T_sqrt_t_over_x;
  s["T_t16"] = tr.T_t16;
  s["richardson_disagreement"] = tr.richardson_disagreement;
  s["flagged"] = tr.flagged;
  if (p.at("rescaled").get<bool>()) {
    s["rescaled_converged"] = rs.converged;
    s["rescaled_angle"] = rs.angle_measured;
    s["rescaled_ode_residual"] = rs.ode_residual;
  }
  if (p.at("limits").get<bool>()) {
    s["limits_converged"] = lim.converged;
    s["limits_time_variation"] = lim.time_variation;
  }
  return s;
}

// ---------------------------------------------------------------- evolution files

std::string slice_name(std::size_t k) {
  std::ostringstream name;
  name << "slice_" << std::setw(5) << std::setfill('0') << k << ".csv";
  return name.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

MissingOutputs::MissingOutputs(std::vector<std::string> names)
    : std::runtime_error([&] {
        std::string s = "missing outputs:";
        for (const auto& n : names) s += " " + n;
        return s;
      }()),
      names_(std::move(names)) {}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"selfsimilar", "evolve",     "scatter-diagnose", "reconstruct",
                                             "vfe-direct",  "corner-ivp", "trace",            "emit-plotdata"};
  return c;
}

const std::vector<Field>& schema(const std::string& command) {
  const auto& s = schemas();
  const auto it = s.find(command);
  if (it == s.end()) throw SchemaError("command", "unknown command '" + command + "'");
  return it->second;
}

json RunConfig::to_json() const {
  return {{"command", command}, {"format_version", format_version}, {"output_dir", output_dir}, {"params", params}};
}

json parse_key_value(std::istream& is) {
  json out = json::object();
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError("line " + std::to_string(lineno), "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw SchemaError("line " + std::to_string(lineno), "empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out[key] = value;
  }
  return out;
}

json load_config_file(const fs::path& path, const std::string& command) {
  std::ifstream is(path);
  if (!is) throw SchemaError("config", "cannot read " + path.string());
  if (path.extension() != ".json") return parse_key_value(is);
  std::stringstream buf;
  buf << is.rdbuf();
  if (buf.str().find_first_not_of(" \t\r\n") == std::string::npos) throw SchemaError("config", "empty file");
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw SchemaError("config", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("config", "must be a JSON object");
  if (j.contains("params")) {
    // an echoed config.json
    if (j.contains("command") && j["command"] != command)
      throw SchemaError("command", "config is for '" + j["command"].get<std::string>() + "'");
    if (j.contains("format_version") && j["format_version"] != kFormatVersion)
      throw SchemaError("format_version", "unsupported " + j["format_version"].dump());
    j = j["params"];
    if (!j.is_object()) throw SchemaError("params", "must be an object");
  }
  return j;
}

RunConfig make_config(const std::string& command, const std::vector<json>& layers, const std::string& output_dir) {
  const auto& fields = schema(command);
  json merged = json::object();
  for (const auto& layer : layers) {
    if (!layer.is_object()) throw SchemaError("config", "must be an object");
    for (auto it = layer.begin(); it != layer.end(); ++it) merged[it.key()] = it.value();
  }
  std::set<std::string> known;
  for (const auto& f : fields) known.insert(f.name);
  for (auto it = merged.begin(); it != merged.end(); ++it)
    if (!known.count(it.key())) throw SchemaError(it.key(), "unknown field for " + command);
  RunConfig cfg;
  cfg.command = command;
  cfg.output_dir = output_dir;
  cfg.params = json::object();
  for (const auto& f : fields) {
    if (merged.contains(f.name)) {
      cfg.params[f.name] = coerce(f, merged[f.name]);
    } else if (f.fallback.is_null() && !f.nullable) {
      throw SchemaError(f.name, "required");
    } else {
      cfg.params[f.name] = f.fallback;
    }
  }
  if (command == "emit-plotdata" && cfg.params["input"].get<std::string>().empty())
    throw SchemaError("input", "required");
  if (command == "evolve" || command == "reconstruct") {
    if (!(num_of(cfg.params, "t_end") > num_of(cfg.params, "t_start")))
      throw SchemaError("t_end", "must exceed t_start");
  }
  return cfg;
}

std::vector<std::string> RunResult::failed() const {
  std::vector<std::string> f;
  for (const auto& a : assertions)
    if (!a.pass) f.push_back(a.id);
  return f;
}

RunResult run(const RunConfig& config) {
  if (config.command == "emit-plotdata") {
    const auto files = emit_plotdata(config.params.at("input").get<std::string>());
    RunResult r;
    r.summary = {{"command", config.command}, {"files", files}};
    return r;
  }
  const fs::path out = config.output_dir;
  fs::create_directories(out);
  write_json(out / "config.json", config.to_json());
  Assertions as;
  json s;
  const json& p = config.params;
  const std::string& c = config.command;
  if (c == "selfsimilar") s = cmd_selfsimilar(p, out, as);
  else if (c == "evolve") s = cmd_evolve(p, out, as);
  else if (c == "scatter-diagnose") s = cmd_scatter(p, out, as);
  else if (c == "reconstruct") s = cmd_reconstruct(p, out, as);
  else if (c == "vfe-direct") s = cmd_vfe_direct(p, out, as);
  else if (c == "corner-ivp") s = cmd_corner_ivp(p, out, as);
  else if (c == "trace") s = cmd_trace(p, out, as);
  else throw SchemaError("command", "unknown command '" + c + "'");
  s["command"] = c;
  s["format_version"] = config.format_version;
  s["assertions"] = as.to_json();
  write_json(out / "summary.json", s);
  return {s, as.list};
}

// ---------------------------------------------------------------- plot data

void write_polylines(std::ostream& os, const std::vector<SampledCurve>& curves) {
  os << "x,y,z\n";
  for (std::size_t k = 0; k < curves.size(); ++k) {
    if (k) os << '\n';
    for (const auto& q : curves[k].points) os << shortest(q.x()) << ',' << shortest(q.y()) << ',' << shortest(q.z()) << '\n';
  }
}

std::vector<std::string> emit_plotdata(const fs::path& artifact) {
  std::vector<std::string> missing;
  auto need = [&](const std::string& name) {
    if (!fs::exists(artifact / name)) missing.push_back(name);
  };
  need("config.json");
  need("summary.json");
  if (!missing.empty()) throw MissingOutputs(missing);
  std::ifstream cs(artifact / "config.json");
  const json cfg = json::parse(cs);
  std::ifstream ss(artifact / "summary.json");
  const json summary = json::parse(ss);
  const std::string cmd = cfg.at("command").get<std::string>();
  if (cmd == "selfsimilar" || cmd == "reconstruct" || cmd == "vfe-direct") need("evolution/index.json");
  if (cmd == "selfsimilar") need("profile.csv");
  if (cmd == "scatter-diagnose") {
    need("decay.csv");
    need("zero_mode.csv");
  }
  if (cmd == "evolve") need("field.jsonl");
  if (cmd == "corner-ivp") {
    need("chi0.csv");
    need("evolution/index.json");
    if (cfg.at("params").value("negative", false)) need("evolution_negative/index.json");
  }
  if (cmd == "trace") need("trace.csv");
  if (!missing.empty()) throw MissingOutputs(missing);

  const fs::path plot = artifact / "plot";
  fs::create_directories(plot);
  std::vector<std::string> files;
  auto polylines = [&](const std::string& name, const std::vector<SampledCurve>& curves, const std::vector<double>& times) {
    auto os = open_out(plot / name);
    write_polylines(os, curves);
    auto idx = open_out(plot / (name.substr(0, name.size() - 4) + "_index.csv"));
    idx << "block,t\n";
    for (std::size_t k = 0; k < times.size(); ++k) idx << k << ',' << shortest(times[k]) << '\n';
    files.push_back(name);
    files.push_back(name.substr(0, name.size() - 4) + "_index.csv");
  };
  auto table = [&](const std::string& name, const std::string& header, const std::vector<std::vector<double>>& rows) {
    auto os = open_out(plot / name);
    os << header << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << shortest(r[i]);
      os << '\n';
    }
    files.push_back(name);
  };
  auto read_table = [&](const std::string& name) {
    std::ifstream is(artifact / name);
    std::string line;
    std::getline(is, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::vector<double> r;
      for (const auto& c : split_csv(line)) r.push_back(parse_double(c));
      rows.push_back(r);
    }
    return rows;
  };

  if (cmd == "selfsimilar" || cmd == "reconstruct" || cmd == "vfe-direct") {
    const auto evo = read_evolution(artifact / "evolution");
    polylines("polylines.csv", evo.curves, evo.times);
  }
  if (cmd == "selfsimilar") {
    const double a = summary.at("a").get<double>();
    table("angle_vs_a.csv", "a,theta_measured,theta_exp_pi_a2,theta_exp_a2",
          {{a, summary.at("theta").get<double>(), corner_theta(a), 2 * std::asin(std::exp(-0.5 * a * a))}});
  }
  if (cmd == "scatter-diagnose") {
    std::vector<std::vector<double>> rows;
    for (const auto& r : read_table("decay.csv"))
      if (r[1] > 0.0) rows.push_back({std::log(r[0]), std::log(r[1])});
    table("decay_loglog.csv", "log_t,log_deficit", rows);
    rows.clear();
    for (const auto& r : read_table("zero_mode.csv")) rows.push_back({std::log(r[0]), r[1]});
    table("zero_mode_logt.csv", "log_t,abs_zero_mode", rows);
  }
  if (cmd == "evolve") {
    const auto run = read_jsonl((artifact / "field.jsonl").string());
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < run.slices(); ++k)
      for (std::size_t j = 0; j < run.grid.n; ++j) rows.push_back({run.times[k], run.grid.x(j), std::abs(run.values[k][j])});
    table("modulus.csv", "t,x,abs", rows);
  }
  if (cmd == "corner-ivp") {
    // both files start with the t = 0 block
    const auto chi0 = read_curve_csv((artifact / "chi0.csv").string()).curve;
    const auto pos = read_evolution(artifact / "evolution");
    const auto& xg = pos.curves.front().grid;
    SampledCurve block0{xg, {}, std::nullopt};
    for (std::size_t j = 0; j < xg.n; ++j) block0.points.push_back(lagrange_eval(chi0.grid, chi0.points, xg.x(j)));
    auto series = [&](const CurveEvolution& evo, const std::string& name) {
      std::vector<std::size_t> order(evo.slices());
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return std::abs(evo.times[i]) < std::abs(evo.times[j]);
      });
      std::vector<SampledCurve> curves{block0};
      std::vector<double> times{0.0};
      for (std::size_t k : order) {
        curves.push_back(evo.curves[k]);
        times.push_back(evo.times[k]);
      }
      polylines(name, curves, times);
    };
    series(pos, "polylines_positive.csv");
    if (fs::exists(artifact / "evolution_negative/index.json"))
      series(read_evolution(artifact / "evolution_negative"), "polylines_negative.csv");
  }
  if (cmd == "trace") {
    std::vector<std::vector<double>> rows = read_table("trace.csv");
    table("trace_T0.csv", "x,chi0_x,chi0_y,chi0_z,T0_x,T0_y,T0_z", rows);
  }
  write_json(plot / "index.json", {{"command", cmd}, {"files", files}});
  return files;
}

// ---------------------------------------------------------------- misc

std::string dump_json(const json& j, int indent) {
  std::ostringstream os;
  dump(os, j, indent, 0);
  return os.str();
}

void write_json(const fs::path& path, const json& j) {
  auto os = open_out(path);
  os << dump_json(j) << '\n';
}

int thread_cap() {
  const char* v = std::getenv("FILAMENT_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw SchemaError("FILAMENT_THREADS", std::string("expected a positive integer, got '") + v + "'");
  return int(n);
}

void write_evolution(const fs::path& dir, const CurveEvolution& evo) {
  fs::create_directories(dir);
  json index;
  index["slices"] = json::array();
  for (std::size_t k = 0; k < evo.slices(); ++k) {
    const auto& c = evo.curves[k];
    const auto& F = evo.frames[k];
    const bool frames = F.e1.size() == c.size() && F.e2.size() == c.size();
    const bool psi = k < evo.psi.size() && evo.psi[k].size() == c.size();
    const std::string name = slice_name(k);
    auto os = open_out(dir / name);
    os << "x,chi_x,chi_y,chi_z,T_x,T_y,T_z";
    if (frames) os << ",e1_x,e1_y,e1_z,e2_x,e2_y,e2_z";
    if (psi) os << ",psi_re,psi_im";
    os << '\n';
    for (std::size_t j = 0; j < c.size(); ++j) {
      os << shortest(c.grid.x(j));
      for (int i = 0; i < 3; ++i) os << ',' << shortest(c.points[j][i]);
      for (int i = 0; i < 3; ++i) os << ',' << shortest(F.T[j][i]);
      if (frames) {
        for (int i = 0; i < 3; ++i) os << ',' << shortest(F.e1[j][i]);
        for (int i = 0; i < 3; ++i) os << ',' << shortest(F.e2[j][i]);
      }
      if (psi) os << ',' << shortest(evo.psi[k][j].real()) << ',' << shortest(evo.psi[k][j].imag());
      os << '\n';
    }
    json entry = {{"t", evo.times[k]}, {"file", name}};
    json grid = {{"x_min", c.grid.x_min}, {"x_max", c.grid.x_max}, {"n", c.grid.n}, {"periodic", c.grid.periodic}};
    entry["grid"] = grid;
    if (c.corner_index) entry["corner_index"] = *c.corner_index;
    index["slices"].push_back(entry);
  }
  index["warnings"] = evo.warnings;
  write_json(dir / "index.json", index);
}

CurveEvolution read_evolution(const fs::path& dir) {
  std::ifstream is(dir / "index.json");
  if (!is) throw std::runtime_error("cannot read " + (dir / "index.json").string());
  const json index = json::parse(is);
  CurveEvolution evo;
  for (const auto& e : index.at("slices")) {
    const auto& gj = e.at("grid");
    Grid1D g{gj.at("x_min").get<double>(), gj.at("x_max").get<double>(), gj.at("n").get<std::size_t>(),
             gj.at("periodic").get<bool>()};
    std::ifstream cs(dir / e.at("file").get<std::string>());
    if (!cs) throw std::runtime_error("cannot read slice " + e.at("file").get<std::string>());
    std::string line;
    std::getline(cs, line);
    const auto header = split_csv(line);
    const bool frames = std::find(header.begin(), header.end(), "e1_x") != header.end();
    const bool psi = std::find(header.begin(), header.end(), "psi_re") != header.end();
    const std::size_t cols = 7 + (frames ? 6 : 0) + (psi ? 2 : 0);
    if (header.size() != cols) throw std::runtime_error("unexpected slice header: " + line);
    SampledCurve c{g, {}, std::nullopt};
    if (e.contains("corner_index")) c.corner_index = e["corner_index"].get<std::size_t>();
    FrameField F{g, {}, {}, {}};
    std::vector<cplx> ps;
    while (std::getline(cs, line)) {
      if (line.empty()) continue;
      const auto f = split_csv(line);
      if (f.size() != cols) throw std::runtime_error("slice row has " + std::to_string(f.size()) + " columns");
      std::vector<double> v;
      for (const auto& s : f) v.push_back(parse_double(s));
      c.points.emplace_back(v[1], v[2], v[3]);
      F.T.emplace_back(v[4], v[5], v[6]);
      if (frames) {
        F.e1.emplace_back(v[7], v[8], v[9]);
        F.e2.emplace_back(v[10], v[11], v[12]);
      }
      if (psi) ps.emplace_back(v[cols - 2], v[cols - 1]);
    }
    if (c.points.size() != g.n) throw std::runtime_error("slice size differs from its grid");
    evo.times.push_back(e.at("t").get<double>());
    evo.curves.push_back(std::move(c));
    evo.frames.push_back(std::move(F));
    if (psi) evo.psi.push_back(std::move(ps));
  }
  if (!evo.psi.empty() && evo.psi.size() != evo.slices()) evo.psi.clear();
  if (index.contains("warnings")) evo.warnings = index["warnings"].get<std::vector<std::string>>();
  return evo;
}

}  // namespace filament::io
