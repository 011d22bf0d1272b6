// filament <command> [--config FILE]... [--out DIR] [--set key=value]... [--<field> VALUE]...
//
// Exit status: 0 when every enabled assertion passes, 1 on a failed assertion
// or a runtime failure, 2 on a configuration error.

#include <CLI11.hpp>
#include <iostream>
#include <map>

#include "filament/io.hpp"
#include "filament/numfmt.hpp"

namespace io = filament::io;
using nlohmann::json;

namespace {

struct CommandArgs {
  std::vector<std::string> configs;
  std::vector<std::string> sets;
  std::string out;
  std::map<std::string, std::string> flags;
};

std::string kind_name(io::Kind k) {
  switch (k) {
    case io::Kind::Number: return "NUMBER";
    case io::Kind::Integer: return "INT";
    case io::Kind::Boolean: return "BOOL";
    case io::Kind::String: return "TEXT";
    case io::Kind::NumberList: return "LIST";
  }
  return "VALUE";
}

int execute(const std::string& command, const CommandArgs& args) {
  io::thread_cap();
  std::vector<json> layers;
  // key = value files first, then JSON files, then flags
  for (bool want_json : {false, true})
    for (const auto& path : args.configs)
      if ((std::filesystem::path(path).extension() == ".json") == want_json)
        layers.push_back(io::load_config_file(path, command));
  json flags = json::object();
  for (const auto& s : args.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw io::SchemaError("--set", "expected key=value, got '" + s + "'");
    flags[s.substr(0, eq)] = s.substr(eq + 1);
  }
  for (const auto& [k, v] : args.flags) flags[k] = v;
  layers.push_back(flags);
  const std::string out = args.out.empty() ? "artifacts/" + command : args.out;
  const auto cfg = io::make_config(command, layers, out);
  const auto result = io::run(cfg);
  if (command == "emit-plotdata") {
    for (const auto& f : result.summary["files"]) std::cout << f.get<std::string>() << '\n';
    return 0;
  }
  std::cout << out << "/summary.json\n";
  int status = 0;
  for (const auto& a : result.assertions) {
    std::cout << (a.pass ? "pass " : "FAIL ") << a.id << ": " << filament::shortest(a.value) << (a.upper ? " <= " : " >= ")
              << filament::shortest(a.limit) << '\n';
    if (!a.pass) {
      std::cerr << "assertion failed: " << a.id << '\n';
      status = 1;
    }
  }
  return status;
}

}  // namespace

static std::string about(const std::string& cmd) {
  static const std::map<std::string, std::string> text = {
      {"selfsimilar", "chi_a(t, x) for one a: profile, angle, corner bound, slices."},
      {"evolve", "Split-step run of the psi, u or gauged u equation."},
      {"scatter-diagnose", "Mode growth constants, decay fit and the zero mode over [1, t_end]."},
      {"reconstruct", "Curves and frames from psi samples (JSON lines or a generated source)."},
      {"vfe-direct", "Finite-difference binormal flow of a circle, helix or CSV curve."},
      {"corner-ivp", "Corner to u+, wave operator, curves for t > 0 and t < 0."},
      {"trace", "Tangent limit at t = 0 and the corner angle from an evolution."},
      {"emit-plotdata", "Plot-ready CSV under <artifact>/plot."},
  };
  const auto it = text.find(cmd);
  return it == text.end() ? std::string() : it->second;
}

int main(int argc, char** argv) {
  CLI::App app{"Binormal flow experiments: self-similar corners, NLS runs, scattering diagnostics, corner IVP."};
  app.require_subcommand(1);
  std::map<std::string, CommandArgs> args;
  std::map<std::string, std::map<std::string, std::string>> raw;
  for (const auto& name : io::commands()) {
    auto* sub = app.add_subcommand(name, about(name));
    auto& a = args[name];
    if (name == "emit-plotdata") {
      sub->add_option("input", raw[name]["input"], "artifact directory")->required();
      continue;
    }
    sub->add_option("--config", a.configs, "JSON or key = value file (repeatable)");
    sub->add_option("--out", a.out, "artifact directory (default artifacts/<command>)");
    sub->add_option("--set", a.sets, "key=value override (repeatable)");
    for (const auto& f : io::schema(name)) {
      std::string help = f.help;
      if (!f.fallback.is_null()) help += " [" + io::dump_json(f.fallback, 0) + "]";
      else if (!f.nullable) help += " (required)";
      sub->add_option("--" + f.name, raw[name][f.name], help)->type_name(kind_name(f.kind));
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  auto& a = args[command];
  auto* sub = app.get_subcommand(command);
  for (const auto& [k, v] : raw[command])
    if (sub->get_option(k == "input" && command == "emit-plotdata" ? "input" : "--" + k)->count() > 0) a.flags[k] = v;
  try {
    return execute(command, a);
  } catch (const io::SchemaError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const io::MissingOutputs& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
