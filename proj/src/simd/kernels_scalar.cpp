#include "filament/simd.hpp"

#include <algorithm>
#include <cmath>

namespace filament::simd {
namespace {

void phase_rotate(std::span<cplx> z, double shift, double coef, double phase) {
  for (auto& zi : z) {
    const double re = zi.real() + shift;
    const double im = zi.imag();
    const double arg = coef * (re * re + im * im) + phase;
    const double c = std::cos(arg);
    const double s = std::sin(arg);
    zi = cplx(re * c - im * s - shift, re * s + im * c);
  }
}

void shear_imag(std::span<cplx> z, double coef) {
  for (auto& zi : z) zi = cplx(zi.real(), zi.imag() + coef * zi.real());
}

void mul(std::span<cplx> z, std::span<const cplx> m) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double a = z[i].real(), b = z[i].imag();
    const double c = m[i].real(), d = m[i].imag();
    z[i] = cplx(a * c - b * d, a * d + b * c);
  }
}

void mul_expi(std::span<cplx> z, std::span<const double> w, double coef) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double arg = coef * w[i];
    const double c = std::cos(arg), s = std::sin(arg);
    const double a = z[i].real(), b = z[i].imag();
    z[i] = cplx(a * c - b * s, a * s + b * c);
  }
}

double sum_abs2(std::span<const cplx> z) {
  double acc = 0.0;
  for (const auto& zi : z) acc += zi.real() * zi.real() + zi.imag() * zi.imag();
  return acc;
}

double max_abs(std::span<const cplx> z) {
  double m = 0.0;
  for (const auto& zi : z) m = std::max(m, zi.real() * zi.real() + zi.imag() * zi.imag());
  return std::sqrt(m);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{phase_rotate, shear_imag, mul, mul_expi, sum_abs2, max_abs};
  return table;
}

}  // namespace filament::simd
