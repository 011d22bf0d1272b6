#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

// Pointwise kernels used by the split-step solvers and the diagnostics.
// Every kernel has a scalar reference and an AVX2/FMA variant; the variant is
// picked once at startup from CPUID and can be forced with FILAMENT_SIMD=scalar.

namespace filament::simd {

using cplx = std::complex<double>;

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  // z <- (z + shift) * exp(i (coef |z + shift|^2 + phase)) - shift
  void (*phase_rotate)(std::span<cplx> z, double shift, double coef, double phase);
  // z <- z + i * coef * Re(z)
  void (*shear_imag)(std::span<cplx> z, double coef);
  // z <- z * m
  void (*mul)(std::span<cplx> z, std::span<const cplx> m);
  // z <- z * exp(i * coef * w), w real
  void (*mul_expi)(std::span<cplx> z, std::span<const double> w, double coef);
  double (*sum_abs2)(std::span<const cplx> z);
  double (*max_abs)(std::span<const cplx> z);
};

const KernelTable& scalar_kernels();
const KernelTable& avx2_kernels();

bool cpu_has_avx2();
Isa active_isa();
std::string_view isa_name(Isa isa);

// Table selected at first use.
const KernelTable& kernels();

// Forces a particular table (tests); returns the previously active ISA.
Isa force_isa(Isa isa);

}  // namespace filament::simd
