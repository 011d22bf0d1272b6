#pragma once

#include <vector>

#include "filament/grid.hpp"

// Fourier convention used everywhere in the library:
//
//   f^(xi) = int f(x) exp(-i x xi) dx,
//
// discretized on a periodic grid as dx * sum_j f(x_j) exp(-i xi_k x_j) with
// xi_k = 2 pi k / L, k in FFT order (0, 1, ..., n/2 - 1, -n/2, ..., -1).
// The free Schrodinger group exp(i t d_xx) is the multiplier exp(-i t xi^2).

namespace filament::fourier {

/// Angular wavenumbers xi_k in FFT order.
std::vector<double> wavenumbers(const Grid1D& grid);

/// Index of the mode with wavenumber -xi_k (the Nyquist mode maps to itself).
std::size_t mirror_index(std::size_t k, std::size_t n);

/// Unscaled in-place FFTs (FFTW, plans cached per size).
void fft_forward(std::vector<cplx>& data);
void fft_backward(std::vector<cplx>& data);

/// f^(xi_k) under the declared convention.
std::vector<cplx> transform(const ComplexField& f);
/// Inverse of transform.
ComplexField inverse_transform(const Grid1D& grid, std::vector<cplx> spectrum);

/// d^order f / dx^order by spectral differentiation (periodic grids only).
ComplexField derivative(const ComplexField& f, int order = 1);

/// exp(i t d_xx) f, exact on the periodic grid.
ComplexField free_flight(const ComplexField& f, double t);

/// Band-limited translate: values of f at x_j + shift.
ComplexField translate(const ComplexField& f, double shift);

/// Band-limited evaluation of f at an arbitrary point.
cplx evaluate(const ComplexField& f, double x);

/// Zero modes with |k| > n/3 (2/3 rule).
void dealias(std::vector<cplx>& spectrum);

}  // namespace filament::fourier
