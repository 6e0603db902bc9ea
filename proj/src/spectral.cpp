#include "eegdecode/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <numbers>

namespace eegdecode::spectral {

namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1))));
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

std::size_t next_fast_size(std::size_t n) {
  std::size_t best = 1;
  while (best < n) best <<= 1;
  // Products of 2, 3 and 5 are all fast for FFTW; pick the smallest >= n.
  for (std::size_t p5 = 1; p5 <= best; p5 *= 5) {
    for (std::size_t p35 = p5; p35 <= best; p35 *= 3) {
      std::size_t v = p35;
      while (v < n) v <<= 1;
      best = std::min(best, v);
    }
  }
  return best;
}

}  // namespace

std::vector<double> convolve(std::span<const double> signal, std::span<const double> kernel) {
  if (signal.empty() || kernel.empty()) return {};
  const std::size_t n_out = signal.size() + kernel.size() - 1;
  if (kernel.size() <= 64 || signal.size() <= 64) {
    std::vector<double> out(n_out, 0.0);
    for (std::size_t i = 0; i < signal.size(); ++i) {
      const double s = signal[i];
      double* dst = out.data() + i;
      for (std::size_t k = 0; k < kernel.size(); ++k) dst[k] += s * kernel[k];
    }
    return out;
  }

  const std::size_t nfft = next_fast_size(n_out);
  const std::size_t nbins = nfft / 2 + 1;
  auto a = fftw_buffer<double>(nfft);
  auto b = fftw_buffer<double>(nfft);
  auto fa = fftw_buffer<fftw_complex>(nbins);
  auto fb = fftw_buffer<fftw_complex>(nbins);
  Plan pa(fftw_plan_dft_r2c_1d(static_cast<int>(nfft), a.get(), fa.get(), FFTW_ESTIMATE));
  Plan pb(fftw_plan_dft_r2c_1d(static_cast<int>(nfft), b.get(), fb.get(), FFTW_ESTIMATE));
  Plan inv(fftw_plan_dft_c2r_1d(static_cast<int>(nfft), fa.get(), a.get(), FFTW_ESTIMATE));

  std::fill(a.get(), a.get() + nfft, 0.0);
  std::fill(b.get(), b.get() + nfft, 0.0);
  std::copy(signal.begin(), signal.end(), a.get());
  std::copy(kernel.begin(), kernel.end(), b.get());
  fftw_execute(pa.get());
  fftw_execute(pb.get());
  for (std::size_t k = 0; k < nbins; ++k) {
    const double re = fa[k][0] * fb[k][0] - fa[k][1] * fb[k][1];
    const double im = fa[k][0] * fb[k][1] + fa[k][1] * fb[k][0];
    fa[k][0] = re;
    fa[k][1] = im;
  }
  fftw_execute(inv.get());
  std::vector<double> out(n_out);
  const double scale = 1.0 / static_cast<double>(nfft);
  for (std::size_t i = 0; i < n_out; ++i) out[i] = a[i] * scale;
  return out;
}

std::vector<std::complex<double>> rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t nbins = n / 2 + 1;
  auto in = fftw_buffer<double>(n);
  auto out = fftw_buffer<fftw_complex>(nbins);
  Plan p(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  std::copy(x.begin(), x.end(), in.get());
  fftw_execute(p.get());
  std::vector<std::complex<double>> result(nbins);
  for (std::size_t k = 0; k < nbins; ++k) result[k] = {out[k][0], out[k][1]};
  return result;
}

std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n) {
  if (n == 0) return {};
  const std::size_t nbins = n / 2 + 1;
  auto in = fftw_buffer<fftw_complex>(nbins);
  auto out = fftw_buffer<double>(n);
  Plan p(fftw_plan_dft_c2r_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  for (std::size_t k = 0; k < nbins; ++k) {
    const auto v = k < spectrum.size() ? spectrum[k] : std::complex<double>{};
    in[k][0] = v.real();
    in[k][1] = v.imag();
  }
  fftw_execute(p.get());
  std::vector<double> result(n);
  for (std::size_t i = 0; i < n; ++i) result[i] = out[i] / static_cast<double>(n);
  return result;
}

namespace {

std::complex<double> centered_response(std::span<const double> taps, double freq_hz,
                                       double rate_hz) {
  const double w = 2.0 * std::numbers::pi * freq_hz / rate_hz;
  const double center = 0.5 * static_cast<double>(taps.size() - 1);
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t k = 0; k < taps.size(); ++k) {
    const double m = static_cast<double>(k) - center;
    acc += taps[k] * std::complex<double>(std::cos(w * m), -std::sin(w * m));
  }
  return acc;
}

}  // namespace

double fir_magnitude(std::span<const double> taps, double freq_hz, double rate_hz) {
  return std::abs(centered_response(taps, freq_hz, rate_hz));
}

double fir_centered_phase(std::span<const double> taps, double freq_hz, double rate_hz) {
  return std::arg(centered_response(taps, freq_hz, rate_hz));
}

}  // namespace eegdecode::spectral
