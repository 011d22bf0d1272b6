#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "filament/io.hpp"
#include "filament/self_similar.hpp"

using namespace filament;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("filament_test_io_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

io::RunConfig config(const std::string& cmd, json params, const fs::path& out) {
  return io::make_config(cmd, {std::move(params)}, out.string());
}

}  // namespace

TEST_CASE("schema validation") {
  SUBCASE("empty config names the missing field") {
    try {
      io::make_config("selfsimilar", {json::object()}, "x");
      FAIL("expected a schema error");
    } catch (const io::SchemaError& e) {
      CHECK(e.path() == "a");
    }
  }
  SUBCASE("types, bounds, choices and unknown keys") {
    CHECK_THROWS_AS(io::make_config("selfsimilar", {{{"a", "half"}}}, "x"), io::SchemaError);
    CHECK_THROWS_AS(io::make_config("selfsimilar", {{{"a", -1.0}}}, "x"), io::SchemaError);
    CHECK_THROWS_AS(io::make_config("selfsimilar", {{{"a", 0.5}, {"colour", 1}}}, "x"), io::SchemaError);
    CHECK_THROWS_AS(io::make_config("evolve", {{{"equation", "kdv"}}}, "x"), io::SchemaError);
    CHECK_THROWS_AS(io::make_config("evolve", {{{"order", 3}}}, "x"), io::SchemaError);
    CHECK_THROWS_AS(io::make_config("evolve", {{{"sign", 0}}}, "x"), io::SchemaError);
    CHECK_THROWS_AS(io::make_config("nope", {json::object()}, "x"), io::SchemaError);
    try {
      io::make_config("selfsimilar", {{{"a", 0.5}, {"times", json::array({1.0, "x"})}}}, "x");
      FAIL("expected a schema error");
    } catch (const io::SchemaError& e) {
      CHECK(e.path() == "times[1]");
    }
  }
  SUBCASE("strings are coerced and later layers win") {
    std::istringstream kv("# comment\na = 0.25\ntimes = 1, 0.5\n\nnx=11\n");
    const auto flat = io::parse_key_value(kv);
    const auto cfg = io::make_config("selfsimilar", {flat, {{"a", 0.5}}}, "x");
    CHECK(cfg.params["a"].get<double>() == 0.5);
    CHECK(cfg.params["times"] == json::array({1.0, 0.5}));
    CHECK(cfg.params["nx"].get<long>() == 11);
    CHECK(cfg.params["s_max"].get<double>() == 200.0);
  }
  SUBCASE("every command has a schema") {
    for (const auto& c : io::commands()) CHECK_FALSE(io::schema(c).empty());
  }
}

TEST_CASE("shortest JSON numbers") {
  const json j = {{"x", 0.1}, {"y", 1.0 / 3.0}, {"n", 3}, {"bad", NAN}, {"v", json::array({1e-300, 2.5})}};
  const std::string s = io::dump_json(j, 0);
  CHECK(s == R"({"bad":null,"n":3,"v":[1e-300, 2.5],"x":0.1,"y":0.3333333333333333})");
  CHECK(json::parse(s)["y"].get<double>() == 1.0 / 3.0);
}

TEST_CASE("selfsimilar run") {
  const auto out = scratch("ss");
  const auto cfg = config("selfsimilar", {{"a", 0.5}, {"times", {1.0, 0.01}}, {"x_max", 2.0}, {"nx", 41}}, out);
  const auto res = io::run(cfg);
  CHECK(res.failed().empty());
  const auto s = read_json(out / "summary.json");
  CHECK(s["sin_half_theta"].get<double>() == doctest::Approx(std::exp(-std::acos(-1.0) / 8)).epsilon(1e-6));
  CHECK(s.contains("e_minus_a2_over_2"));
  CHECK(s["assertions"]["angle_law"]["pass"].get<bool>());

  SUBCASE("reruns are byte-identical") {
    const auto out2 = scratch("ss2");
    const auto echoed = io::load_config_file(out / "config.json", "selfsimilar");
    io::run(io::make_config("selfsimilar", {echoed}, out2.string()));
    CHECK(slurp(out / "summary.json") == slurp(out2 / "summary.json"));
    CHECK(slurp(out / "evolution" / "slice_00001.csv") == slurp(out2 / "evolution" / "slice_00001.csv"));
  }
  SUBCASE("evolution files round trip exactly") {
    const auto evo = io::read_evolution(out / "evolution");
    REQUIRE(evo.slices() == 2);
    CHECK(evo.times[0] == 1.0);
    CHECK(evo.psi.size() == 2);
    const auto fam = build_profile(0.5);
    const auto ref = evaluate_chi_a(fam, 0.01, evo.curves[1].grid);
    for (std::size_t j = 0; j < ref.size(); ++j) CHECK(evo.curves[1].points[j] == ref.points[j]);
  }
  SUBCASE("plot data") {
    const auto files = io::emit_plotdata(out);
    CHECK(std::find(files.begin(), files.end(), "polylines.csv") != files.end());
    // one block per slice
    const std::string poly = slurp(out / "plot" / "polylines.csv");
    std::size_t blanks = 0;
    for (std::size_t i = 1; i < poly.size(); ++i) blanks += poly[i] == '\n' && poly[i - 1] == '\n';
    CHECK(blanks == 1);
  }
}

TEST_CASE("plot data reports missing outputs") {
  const auto out = scratch("missing");
  fs::create_directories(out);
  CHECK_THROWS_AS(io::emit_plotdata(out), io::MissingOutputs);
  io::write_json(out / "config.json", {{"command", "scatter-diagnose"}, {"params", json::object()}});
  io::write_json(out / "summary.json", json::object());
  try {
    io::emit_plotdata(out);
    FAIL("expected missing outputs");
  } catch (const io::MissingOutputs& e) {
    CHECK(e.names() == std::vector<std::string>{"decay.csv", "zero_mode.csv"});
  }
}

TEST_CASE("evolve reproduces explicit solutions") {
  const auto out = scratch("evolve");
  const auto res = io::run(config("evolve", {{"initial", "plane_wave"}, {"N", 2.0}, {"dt", 1e-3}, {"record", 3}}, out));
  CHECK(res.failed().empty());
  CHECK(read_json(out / "summary.json")["explicit_error"].get<double>() < 1e-10);
  CHECK_THROWS_AS(io::run(config("evolve", {{"initial", "plane_wave"}, {"N", 0.3}}, scratch("evolve2"))), io::SchemaError);
}

TEST_CASE("scatter-diagnose assertions") {
  const auto out = scratch("scatter");
  const json p = {{"initial", "gaussian"}, {"amplitude", 0.05}, {"phase", 0.785398}, {"L", 128.0}, {"M", 512},
                  {"t_end", 100.0}, {"slices", 21}, {"zero_mode_min_correlation", 0.99}, {"decay_exponent_max", -10.0}};
  const auto res = io::run(config("scatter-diagnose", p, out));
  // an impossible decay bound fails, the zero-mode check passes
  CHECK(res.failed() == std::vector<std::string>{"decay_exponent"});
  CHECK(fs::exists(out / "decay.csv"));
  CHECK(fs::exists(out / "diagnostics.json"));
  io::emit_plotdata(out);
  CHECK(fs::exists(out / "plot" / "decay_loglog.csv"));
}

TEST_CASE("corner-ivp on the pure corner matches the chi_a fixture") {
  const auto out = scratch("corner");
  const json p = {{"input", "pure"},  {"a", 0.5},    {"corner_x_max", 8.0}, {"corner_n", 8001},
                  {"times", {0.01, 0.1, 1.0}}, {"nx", 401}, {"x_max", 2.0}};
  const auto res = io::run(config("corner-ivp", p, out));
  CHECK(res.failed().empty());
  // g.csv is all zeros
  std::istringstream g(slurp(out / "g.csv"));
  std::string line;
  std::getline(g, line);
  double g_max = 0.0;
  while (std::getline(g, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    g_max = std::max({g_max, std::abs(std::stod(line.substr(c1 + 1, c2 - c1 - 1))), std::abs(std::stod(line.substr(c2 + 1)))});
  }
  CHECK(g_max < 1e-12);
  // t = 1 slice against the bundled chi_a (independent Frenet integration)
  const auto fixture = read_curve_csv(std::string(FILAMENT_FIXTURES) + "/chi_a_05_t1.csv");
  const auto evo = io::read_evolution(out / "evolution");
  const auto k = std::size_t(std::find(evo.times.begin(), evo.times.end(), 1.0) - evo.times.begin());
  REQUIRE(k < evo.slices());
  REQUIRE(evo.curves[k].size() == fixture.curve.size());
  double d = 0.0;
  for (std::size_t j = 0; j < fixture.curve.size(); ++j)
    d = std::max(d, (evo.curves[k].points[j] - fixture.curve.points[j]).norm());
  CAPTURE(d);
  CHECK(d < 1e-6);

  SUBCASE("paired polylines share the t = 0 block") {
    io::emit_plotdata(out);
    auto first_block = [](const std::string& s) { return s.substr(0, s.find("\n\n")); };
    const auto pos = slurp(out / "plot" / "polylines_positive.csv");
    const auto neg = slurp(out / "plot" / "polylines_negative.csv");
    CHECK(first_block(pos) == first_block(neg));
    CHECK(first_block(pos).size() > 100);
  }
}

TEST_CASE("thread cap") {
  ::unsetenv("FILAMENT_THREADS");
  CHECK(io::thread_cap() == 1);
  ::setenv("FILAMENT_THREADS", "4", 1);
  CHECK(io::thread_cap() == 4);
  ::setenv("FILAMENT_THREADS", "zero", 1);
  CHECK_THROWS_AS(io::thread_cap(), io::SchemaError);
  ::unsetenv("FILAMENT_THREADS");
}
