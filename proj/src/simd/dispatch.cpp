#include "filament/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace filament::simd {
namespace {

Isa detect() {
  if (const char* env = std::getenv("FILAMENT_SIMD")) {
    if (std::string(env) == "scalar") return Isa::Scalar;
  }
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return current().load(); }

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

const KernelTable& kernels() {
  return active_isa() == Isa::Avx2 ? avx2_kernels() : scalar_kernels();
}

Isa force_isa(Isa isa) {
  if (isa == Isa::Avx2 && !cpu_has_avx2()) isa = Isa::Scalar;
  return current().exchange(isa);
}

}  // namespace filament::simd
