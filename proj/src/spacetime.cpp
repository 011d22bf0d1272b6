#include "filament/spacetime.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace filament {

void SpaceTimeField::push(double t, const ComplexField& f, double A) {
  if (values.empty() && times.empty()) grid = f.grid;
  require_same_grid(grid, f.grid, "SpaceTimeField::push");
  times.push_back(t);
  values.push_back(f.values);
  gauge_A.push_back(A);
}

void SpaceTimeField::validate() const {
  if (values.size() != times.size() || gauge_A.size() != times.size())
    throw std::invalid_argument("space-time field: slice counts disagree");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (values[k].size() != grid.n) throw std::invalid_argument("space-time field: slice size");
    if (!std::isfinite(gauge_A[k])) throw std::invalid_argument("space-time field: gauge not finite");
    if (k > 0 && !(times[k] > times[k - 1]))
      throw std::invalid_argument("space-time field: times not strictly increasing");
  }
}

void write_jsonl(std::ostream& os, const SpaceTimeField& f) {
  nlohmann::json head = {{"grid",
                          {{"x_min", f.grid.x_min},
                           {"x_max", f.grid.x_max},
                           {"n", f.grid.n},
                           {"periodic", f.grid.periodic}}}};
  os << head.dump() << '\n';
  for (std::size_t k = 0; k < f.slices(); ++k) {
    std::vector<double> re(f.grid.n), im(f.grid.n);
    for (std::size_t j = 0; j < f.grid.n; ++j) {
      re[j] = f.values[k][j].real();
      im[j] = f.values[k][j].imag();
    }
    nlohmann::json rec = {{"t", f.times[k]}, {"re", re}, {"im", im}, {"A", f.gauge_A[k]}};
    os << rec.dump() << '\n';
  }
}

void write_jsonl(const std::string& path, const SpaceTimeField& f) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_jsonl(os, f);
}

SpaceTimeField read_jsonl(std::istream& is) {
  SpaceTimeField f;
  std::string line;
  bool have_grid = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      f.grid = g.at("periodic").get<bool>()
                   ? Grid1D::periodic_box(g.at("x_min"), g.at("x_max"), g.at("n"))
                   : Grid1D::line(g.at("x_min"), g.at("x_max"), g.at("n"));
      have_grid = true;
      continue;
    }
    if (!have_grid) throw std::invalid_argument("field file: grid record must come first");
    const auto re = j.at("re").get<std::vector<double>>();
    const auto im = j.at("im").get<std::vector<double>>();
    if (re.size() != f.grid.n || im.size() != f.grid.n)
      throw std::invalid_argument("field file: slice size does not match grid");
    std::vector<cplx> v(f.grid.n);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = {re[i], im[i]};
    f.times.push_back(j.at("t").get<double>());
    f.values.push_back(std::move(v));
    f.gauge_A.push_back(j.value("A", 0.0));
  }
  if (!have_grid) throw std::invalid_argument("field file has no grid record");
  f.validate();
  return f;
}

SpaceTimeField read_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_jsonl(is);
}

}  // namespace filament
