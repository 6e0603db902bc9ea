#include "eegdecode/fir.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "eegdecode/spectral.hpp"

namespace eegdecode {

namespace {

// Hamming main-lobe width: transition ~ 3.3 / N in normalized frequency.
constexpr double kHammingTransitionFactor = 3.3;

double sinc_lowpass_tap(double cutoff_norm, double m) {
  if (m == 0.0) return 2.0 * cutoff_norm;
  const double x = 2.0 * std::numbers::pi * cutoff_norm * m;
  return std::sin(x) / (std::numbers::pi * m);
}

std::vector<double> lowpass_taps(double cutoff_hz, std::size_t n, double rate_hz) {
  const double fc = cutoff_hz / rate_hz;
  const double center = 0.5 * static_cast<double>(n - 1);
  std::vector<double> taps(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double m = static_cast<double>(k) - center;
    const double window =
        n == 1 ? 1.0
               : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                        static_cast<double>(n - 1));
    taps[k] = window * sinc_lowpass_tap(fc, m);
  }
  // Mirror to make symmetry exact rather than rounding-limited.
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double avg = 0.5 * (taps[k] + taps[n - 1 - k]);
    taps[k] = avg;
    taps[n - 1 - k] = avg;
  }
  return taps;
}

std::vector<double> highpass_taps(double cutoff_hz, std::size_t n, double rate_hz) {
  auto taps = lowpass_taps(cutoff_hz, n, rate_hz);
  for (double& t : taps) t = -t;
  taps[(n - 1) / 2] += 1.0;
  return taps;
}

std::vector<double> center_pad(const std::vector<double>& taps, std::size_t n) {
  std::vector<double> out(n, 0.0);
  const std::size_t off = (n - taps.size()) / 2;
  std::copy(taps.begin(), taps.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
  return out;
}

void symmetrize(std::vector<double>& taps) {
  const std::size_t n = taps.size();
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double avg = 0.5 * (taps[k] + taps[n - 1 - k]);
    taps[k] = avg;
    taps[n - 1 - k] = avg;
  }
}

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t r = i % period;
  if (r < 0) r += period;
  if (r >= static_cast<std::ptrdiff_t>(n)) r = period - r;
  return static_cast<std::size_t>(r);
}

}  // namespace

std::size_t hamming_tap_count(double transition_hz, double rate_hz) {
  if (!(transition_hz > 0.0)) throw std::invalid_argument("transition width must be positive");
  auto n = static_cast<std::size_t>(std::ceil(kHammingTransitionFactor * rate_hz / transition_hz));
  if (n % 2 == 0) ++n;
  if (n > kMaxFirTaps) {
    throw std::invalid_argument("transition width " + std::to_string(transition_hz) +
                                " Hz needs " + std::to_string(n) + " taps, above the cap of " +
                                std::to_string(kMaxFirTaps));
  }
  return n;
}

FirFilter design_lowpass(double cutoff_hz, double transition_hz, double rate_hz) {
  if (!(rate_hz > 0.0)) throw std::invalid_argument("sample rate must be positive");
  if (!(cutoff_hz > 0.0) || cutoff_hz >= rate_hz / 2.0) {
    throw std::invalid_argument("low-pass cutoff must lie in (0, Nyquist)");
  }
  FirFilter f;
  f.kind = FilterKind::LowPass;
  f.high_hz = cutoff_hz;
  f.transition = {transition_hz, transition_hz};
  f.design_rate_hz = rate_hz;
  f.taps = lowpass_taps(cutoff_hz, hamming_tap_count(transition_hz, rate_hz), rate_hz);
  return f;
}

FirFilter design_windowed_sinc(FilterKind kind, double low_hz, double high_hz,
                               TransitionWidths transition, double rate_hz) {
  if (!(rate_hz > 0.0)) throw std::invalid_argument("sample rate must be positive");
  if (!(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < rate_hz / 2.0)) {
    throw std::invalid_argument("band edges must satisfy 0 < low < high < Nyquist (" +
                                std::to_string(rate_hz / 2.0) + " Hz)");
  }
  if (kind == FilterKind::LowPass) {
    throw std::invalid_argument("use design_lowpass for single-edge filters");
  }
  const std::size_t n_low = hamming_tap_count(transition.low_hz, rate_hz);
  const std::size_t n_high = hamming_tap_count(transition.high_hz, rate_hz);

  FirFilter f;
  f.kind = kind;
  f.low_hz = low_hz;
  f.high_hz = high_hz;
  f.transition = transition;
  f.design_rate_hz = rate_hz;
  if (kind == FilterKind::BandPass) {
    const auto hp = highpass_taps(low_hz, n_low, rate_hz);
    const auto lp = lowpass_taps(high_hz, n_high, rate_hz);
    f.taps = spectral::convolve(hp, lp);
    if (f.taps.size() > kMaxFirTaps) {
      throw std::invalid_argument("band-pass cascade exceeds the tap-count cap");
    }
  } else {
    const std::size_t n = std::max(n_low, n_high);
    auto lp = center_pad(lowpass_taps(low_hz, n_low, rate_hz), n);
    const auto hp = center_pad(highpass_taps(high_hz, n_high, rate_hz), n);
    for (std::size_t k = 0; k < n; ++k) lp[k] += hp[k];
    f.taps = std::move(lp);
  }
  symmetrize(f.taps);
  return f;
}

std::vector<double> filter_zero_delay(std::span<const double> x, std::span<const double> taps) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t delay = (taps.size() - 1) / 2;
  std::vector<double> padded(n + 2 * delay);
  for (std::size_t i = 0; i < padded.size(); ++i) {
    padded[i] = x[reflect_index(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(delay), n)];
  }
  const auto full = spectral::convolve(padded, taps);
  // full[j] aligns with padded[j - delay]; input sample t sits at padded[t + delay].
  return {full.begin() + static_cast<std::ptrdiff_t>(2 * delay),
          full.begin() + static_cast<std::ptrdiff_t>(2 * delay + n)};
}

ContinuousRecording apply_fir(const ContinuousRecording& rec, const FirFilter& f) {
  if (f.design_rate_hz != rec.sample_rate_hz) {
    throw std::invalid_argument("filter designed for " + std::to_string(f.design_rate_hz) +
                                " Hz applied to a " + std::to_string(rec.sample_rate_hz) +
                                " Hz recording");
  }
  ContinuousRecording out = rec;
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    const auto y = filter_zero_delay(rec.channel(c), f.taps);
    std::copy(y.begin(), y.end(), out.channel(c).begin());
  }
  return out;
}

}  // namespace eegdecode
