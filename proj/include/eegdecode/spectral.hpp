#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

namespace eegdecode::spectral {

/// Full linear convolution of `signal` with `kernel` (length n + m - 1).
/// Short kernels are convolved directly, long ones through FFTW.
std::vector<double> convolve(std::span<const double> signal, std::span<const double> kernel);

/// One-sided DFT X_k for k = 0..n/2 of a real sequence.
std::vector<std::complex<double>> rfft(std::span<const double> x);

/// Inverse of rfft for a length-n real sequence (normalized).
std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n);

/// |H(f)| of an FIR filter evaluated directly from its taps.
double fir_magnitude(std::span<const double> taps, double freq_hz, double rate_hz);

/// Phase of H(f) relative to a zero-phase (centered) kernel, in radians.
double fir_centered_phase(std::span<const double> taps, double freq_hz, double rate_hz);

inline double to_db(double magnitude) {
  return 20.0 * std::log10(std::max(magnitude, 1e-300));
}

}  // namespace eegdecode::spectral
