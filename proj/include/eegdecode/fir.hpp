#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "eegdecode/data.hpp"

namespace eegdecode {

enum class FilterKind { BandPass, BandStop, LowPass };

/// Transition width at the lower and upper band edge, in Hz.
struct TransitionWidths {
  double low_hz = 1.0;
  double high_hz = 1.0;
};

/// Linear-phase FIR filter. Taps are odd in number and symmetric, so the
/// group delay is exactly (N - 1) / 2 samples.
struct FirFilter {
  std::vector<double> taps;
  FilterKind kind = FilterKind::BandPass;
  double low_hz = 0.0;   // unused for LowPass
  double high_hz = 0.0;
  TransitionWidths transition;
  double design_rate_hz = 0.0;

  std::size_t group_delay() const { return (taps.size() - 1) / 2; }
};

inline constexpr std::size_t kMaxFirTaps = std::size_t{1} << 16;

/// Hamming-windowed sinc design. Each band edge gets its own transition band
/// centered on the edge: a band-pass is a high-pass/low-pass cascade folded
/// into a single kernel, a band-stop is the sum of a low-pass at the lower
/// edge and a high-pass at the upper edge.
FirFilter design_windowed_sinc(FilterKind kind, double low_hz, double high_hz,
                               TransitionWidths transition, double rate_hz);

/// Single-edge low-pass; `cutoff_hz` is the -6 dB point.
FirFilter design_lowpass(double cutoff_hz, double transition_hz, double rate_hz);

/// Hamming tap count for a transition width: smallest odd N >= 3.3 * rate / width.
std::size_t hamming_tap_count(double transition_hz, double rate_hz);

/// Filters one channel with group-delay compensation; edges are padded by
/// whole-sample mirror reflection so output length equals input length.
std::vector<double> filter_zero_delay(std::span<const double> x, std::span<const double> taps);

/// Applies `f` to every channel. Events are untouched.
ContinuousRecording apply_fir(const ContinuousRecording& rec, const FirFilter& f);

}  // namespace eegdecode
