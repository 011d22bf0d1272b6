#include "filament/simd.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

// Compiled with -mavx2 -mfma. Nothing here may run before dispatch confirms
// the CPU supports both extensions.

namespace filament::simd {
namespace {

// sin/cos of four doubles. Cody-Waite reduction by pi/2 (two-term with FMA),
// then the fdlibm minimax kernels on [-pi/4, pi/4]. About 1 ulp for |x| < 1e8.
inline void sincos4(__m256d x, __m256d& s_out, __m256d& c_out) {
  const __m256d two_over_pi = _mm256_set1_pd(0.63661977236758134308);
  const __m256d pio2_hi = _mm256_set1_pd(1.5707963267948966);
  const __m256d pio2_lo = _mm256_set1_pd(6.123233995736766e-17);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, two_over_pi),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, pio2_hi, x);
  r = _mm256_fnmadd_pd(n, pio2_lo, r);
  const __m256d r2 = _mm256_mul_pd(r, r);

  __m256d ps = _mm256_set1_pd(1.58969099521155010221e-10);
  ps = _mm256_fmadd_pd(ps, r2, _mm256_set1_pd(-2.50507602534068634195e-08));
  ps = _mm256_fmadd_pd(ps, r2, _mm256_set1_pd(2.75573137070700676789e-06));
  ps = _mm256_fmadd_pd(ps, r2, _mm256_set1_pd(-1.98412698298579493134e-04));
  ps = _mm256_fmadd_pd(ps, r2, _mm256_set1_pd(8.33333333332248946124e-03));
  ps = _mm256_fmadd_pd(ps, r2, _mm256_set1_pd(-1.66666666666666324348e-01));
  const __m256d sin_r = _mm256_fmadd_pd(_mm256_mul_pd(ps, r2), r, r);

  __m256d pc = _mm256_set1_pd(-1.13596475577881948265e-11);
  pc = _mm256_fmadd_pd(pc, r2, _mm256_set1_pd(2.08757232129817482790e-09));
  pc = _mm256_fmadd_pd(pc, r2, _mm256_set1_pd(-2.75573143513906633035e-07));
  pc = _mm256_fmadd_pd(pc, r2, _mm256_set1_pd(2.48015872894767294178e-05));
  pc = _mm256_fmadd_pd(pc, r2, _mm256_set1_pd(-1.38888888888741095749e-03));
  pc = _mm256_fmadd_pd(pc, r2, _mm256_set1_pd(4.16666666666666019037e-02));
  const __m256d half_r2 = _mm256_mul_pd(_mm256_set1_pd(0.5), r2);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d w = _mm256_sub_pd(one, half_r2);
  // fdlibm: cos(r) = w + (((1 - w) - r^2/2) + r^4 * pc)
  const __m256d corr = _mm256_sub_pd(_mm256_sub_pd(one, w), half_r2);
  const __m256d cos_r = _mm256_add_pd(w, _mm256_fmadd_pd(_mm256_mul_pd(r2, r2), pc, corr));

  // Quadrant bookkeeping in 64-bit integer lanes.
  const __m256i q = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n));
  const __m256i one_i = _mm256_set1_epi64x(1);
  const __m256i two_i = _mm256_set1_epi64x(2);
  const __m256d swap = _mm256_castsi256_pd(
      _mm256_cmpeq_epi64(_mm256_and_si256(q, one_i), one_i));
  const __m256d sin_neg = _mm256_castsi256_pd(
      _mm256_slli_epi64(_mm256_and_si256(q, two_i), 62));
  const __m256d cos_neg = _mm256_castsi256_pd(
      _mm256_slli_epi64(_mm256_and_si256(_mm256_add_epi64(q, one_i), two_i), 62));

  const __m256d s = _mm256_blendv_pd(sin_r, cos_r, swap);
  const __m256d c = _mm256_blendv_pd(cos_r, sin_r, swap);
  s_out = _mm256_xor_pd(s, sin_neg);
  c_out = _mm256_xor_pd(c, cos_neg);
}

inline __m256d load2(const cplx* p) { return _mm256_loadu_pd(reinterpret_cast<const double*>(p)); }
inline void store2(cplx* p, __m256d v) { _mm256_storeu_pd(reinterpret_cast<double*>(p), v); }

// [re, im] * (c + i s) with c, s broadcast per complex slot.
inline __m256d rotate(__m256d v, __m256d c, __m256d s) {
  const __m256d vswap = _mm256_permute_pd(v, 0b0101);
  return _mm256_fmaddsub_pd(v, c, _mm256_mul_pd(vswap, s));
}

void phase_rotate(std::span<cplx> z, double shift, double coef, double phase) {
  const __m256d vshift = _mm256_setr_pd(shift, 0.0, shift, 0.0);
  const __m256d vcoef = _mm256_set1_pd(coef);
  const __m256d vphase = _mm256_set1_pd(phase);
  const std::size_t n = z.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v0 = _mm256_add_pd(load2(&z[i]), vshift);
    const __m256d v1 = _mm256_add_pd(load2(&z[i + 2]), vshift);
    // lanes: |v_i|^2, |v_{i+2}|^2, |v_{i+1}|^2, |v_{i+3}|^2
    const __m256d abs2 = _mm256_hadd_pd(_mm256_mul_pd(v0, v0), _mm256_mul_pd(v1, v1));
    __m256d s, c;
    sincos4(_mm256_fmadd_pd(vcoef, abs2, vphase), s, c);
    const __m256d c0 = _mm256_permute4x64_pd(c, 0b10100000);
    const __m256d s0 = _mm256_permute4x64_pd(s, 0b10100000);
    const __m256d c1 = _mm256_permute4x64_pd(c, 0b11110101);
    const __m256d s1 = _mm256_permute4x64_pd(s, 0b11110101);
    store2(&z[i], _mm256_sub_pd(rotate(v0, c0, s0), vshift));
    store2(&z[i + 2], _mm256_sub_pd(rotate(v1, c1, s1), vshift));
  }
  scalar_kernels().phase_rotate(z.subspan(i), shift, coef, phase);
}

void shear_imag(std::span<cplx> z, double coef) {
  const __m256d vcoef = _mm256_setr_pd(0.0, coef, 0.0, coef);
  const std::size_t n = z.size();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d v = load2(&z[i]);
    store2(&z[i], _mm256_fmadd_pd(_mm256_movedup_pd(v), vcoef, v));
  }
  scalar_kernels().shear_imag(z.subspan(i), coef);
}

void mul(std::span<cplx> z, std::span<const cplx> m) {
  const std::size_t n = z.size();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d v = load2(&z[i]);
    const __m256d w = load2(&m[i]);
    const __m256d wre = _mm256_movedup_pd(w);
    const __m256d wim = _mm256_permute_pd(w, 0b1111);
    store2(&z[i], rotate(v, wre, wim));
  }
  scalar_kernels().mul(z.subspan(i), m.subspan(i));
}

void mul_expi(std::span<cplx> z, std::span<const double> w, double coef) {
  const __m256d vcoef = _mm256_set1_pd(coef);
  const std::size_t n = z.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d s, c;
    sincos4(_mm256_mul_pd(vcoef, _mm256_loadu_pd(&w[i])), s, c);
    const __m256d c0 = _mm256_permute4x64_pd(c, 0b01010000);
    const __m256d s0 = _mm256_permute4x64_pd(s, 0b01010000);
    const __m256d c1 = _mm256_permute4x64_pd(c, 0b11111010);
    const __m256d s1 = _mm256_permute4x64_pd(s, 0b11111010);
    store2(&z[i], rotate(load2(&z[i]), c0, s0));
    store2(&z[i + 2], rotate(load2(&z[i + 2]), c1, s1));
  }
  scalar_kernels().mul_expi(z.subspan(i), w.subspan(i), coef);
}

double sum_abs2(std::span<const cplx> z) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n = z.size();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d v = load2(&z[i]);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + scalar_kernels().sum_abs2(z.subspan(i));
}

double max_abs(std::span<const cplx> z) {
  __m256d m = _mm256_setzero_pd();
  const std::size_t n = z.size();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d v = load2(&z[i]);
    const __m256d sq = _mm256_mul_pd(v, v);
    m = _mm256_max_pd(m, _mm256_add_pd(sq, _mm256_permute_pd(sq, 0b0101)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, m);
  const double vec_max = std::sqrt(std::max({lanes[0], lanes[1], lanes[2], lanes[3]}));
  return std::max(vec_max, scalar_kernels().max_abs(z.subspan(i)));
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{phase_rotate, shear_imag, mul, mul_expi, sum_abs2, max_abs};
  return table;
}

}  // namespace filament::simd
