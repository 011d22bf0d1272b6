#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "filament/grid.hpp"

namespace filament {

/// Time slices of a complex field on one grid, plus the Hasimoto gauge A(t)
/// of each slice (zero when not meaningful).
struct SpaceTimeField {
  Grid1D grid;
  std::vector<double> times;
  std::vector<std::vector<cplx>> values;
  std::vector<double> gauge_A;

  std::size_t slices() const { return times.size(); }
  ComplexField slice(std::size_t k) const { return ComplexField(grid, values.at(k)); }
  void push(double t, const ComplexField& f, double A = 0.0);
  /// Throws std::invalid_argument if times are not strictly increasing or sizes disagree.
  void validate() const;
};

/// JSON-lines: one record {"t", "re", "im", "A"} per slice; a first line
/// {"grid": {...}} carries the grid descriptor.
void write_jsonl(std::ostream& os, const SpaceTimeField& f);
void write_jsonl(const std::string& path, const SpaceTimeField& f);
SpaceTimeField read_jsonl(std::istream& is);
SpaceTimeField read_jsonl(const std::string& path);

}  // namespace filament
