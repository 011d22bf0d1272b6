#include "filament/fourier.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "filament/simd.hpp"

namespace filament::fourier {
namespace {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.backward);
    }
  }

  const PlanPair& get(std::size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    std::vector<cplx> scratch(n);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    // FFTW_ESTIMATE keeps plans (and therefore results) deterministic.
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    PlanPair pair{fftw_plan_dft_1d(int(n), p, p, FFTW_FORWARD, flags),
                  fftw_plan_dft_1d(int(n), p, p, FFTW_BACKWARD, flags)};
    return plans_.emplace(n, pair).first->second;
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, PlanPair> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void require_periodic(const Grid1D& g, const char* what) {
  if (!g.periodic) throw std::invalid_argument(std::string(what) + " needs a periodic grid");
}

}  // namespace

std::vector<double> wavenumbers(const Grid1D& grid) {
  const std::size_t n = grid.n;
  std::vector<double> xi(n);
  const double base = 2.0 * std::numbers::pi / grid.length();
  for (std::size_t k = 0; k < n; ++k) {
    const long kk = k < (n + 1) / 2 ? long(k) : long(k) - long(n);
    xi[k] = base * double(kk);
  }
  return xi;
}

std::size_t mirror_index(std::size_t k, std::size_t n) { return k == 0 ? 0 : n - k; }

void fft_forward(std::vector<cplx>& data) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(cache().get(data.size()).forward, p, p);
}

void fft_backward(std::vector<cplx>& data) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(cache().get(data.size()).backward, p, p);
}

std::vector<cplx> transform(const ComplexField& f) {
  require_periodic(f.grid, "transform");
  std::vector<cplx> s = f.values;
  fft_forward(s);
  const auto xi = wavenumbers(f.grid);
  const double dx = f.grid.dx();
  for (std::size_t k = 0; k < s.size(); ++k) s[k] *= dx * std::polar(1.0, -xi[k] * f.grid.x_min);
  return s;
}

ComplexField inverse_transform(const Grid1D& grid, std::vector<cplx> s) {
  require_periodic(grid, "inverse_transform");
  if (s.size() != grid.n) throw std::invalid_argument("spectrum size does not match grid");
  const auto xi = wavenumbers(grid);
  const double scale = 1.0 / (grid.dx() * double(grid.n));
  for (std::size_t k = 0; k < s.size(); ++k) s[k] *= scale * std::polar(1.0, xi[k] * grid.x_min);
  fft_backward(s);
  return ComplexField(grid, std::move(s));
}

ComplexField derivative(const ComplexField& f, int order) {
  require_periodic(f.grid, "derivative");
  std::vector<cplx> s = f.values;
  fft_forward(s);
  const auto xi = wavenumbers(f.grid);
  const std::size_t n = s.size();
  for (std::size_t k = 0; k < n; ++k) {
    // The Nyquist mode has no well-defined odd derivative.
    if (n % 2 == 0 && k == n / 2 && order % 2 == 1) {
      s[k] = 0.0;
      continue;
    }
    s[k] *= std::pow(cplx(0.0, xi[k]), order) / double(n);
  }
  fft_backward(s);
  return ComplexField(f.grid, std::move(s));
}

ComplexField free_flight(const ComplexField& f, double t) {
  require_periodic(f.grid, "free_flight");
  std::vector<cplx> s = f.values;
  fft_forward(s);
  const auto xi = wavenumbers(f.grid);
  std::vector<double> xi2(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) xi2[k] = xi[k] * xi[k];
  simd::kernels().mul_expi(s, xi2, -t);
  const double inv = 1.0 / double(s.size());
  for (auto& v : s) v *= inv;
  fft_backward(s);
  return ComplexField(f.grid, std::move(s));
}

ComplexField translate(const ComplexField& f, double shift) {
  require_periodic(f.grid, "translate");
  std::vector<cplx> s = f.values;
  fft_forward(s);
  const auto xi = wavenumbers(f.grid);
  const std::size_t n = s.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (n % 2 == 0 && k == n / 2) {
      s[k] *= std::cos(xi[k] * shift) / double(n);
    } else {
      s[k] *= std::polar(1.0 / double(n), xi[k] * shift);
    }
  }
  fft_backward(s);
  return ComplexField(f.grid, std::move(s));
}

cplx evaluate(const ComplexField& f, double x) {
  const auto s = transform(f);
  const auto xi = wavenumbers(f.grid);
  const std::size_t n = s.size();
  cplx acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (n % 2 == 0 && k == n / 2) {
      acc += s[k] * std::cos(xi[k] * (x - f.grid.x_min)) * std::polar(1.0, xi[k] * f.grid.x_min);
    } else {
      acc += s[k] * std::polar(1.0, xi[k] * x);
    }
  }
  return acc / f.grid.length();
}

void dealias(std::vector<cplx>& spectrum) {
  const std::size_t n = spectrum.size();
  const std::size_t cut = n / 3;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t absk = k < (n + 1) / 2 ? k : n - k;
    if (absk > cut) spectrum[k] = 0.0;
  }
}

}  // namespace filament::fourier
