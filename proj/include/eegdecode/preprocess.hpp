#pragma once

#include <string>
#include <utility>
#include <vector>

#include "eegdecode/data.hpp"
#include "eegdecode/fir.hpp"

namespace eegdecode {

/// Anti-alias low-pass used before decimation: cutoff at 0.9 of the target
/// Nyquist, transition 0.2 of it, so the stopband begins at the target Nyquist.
FirFilter anti_alias_filter(double source_rate_hz, double target_rate_hz);

/// Low-pass then keep every ratio-th sample (floor(n / ratio) samples). Event
/// indices are rescaled with round-to-nearest; events that land past the end
/// are dropped. Requires an integer rate ratio.
ContinuousRecording downsample(const ContinuousRecording& rec, double target_rate_hz);

/// Per-trial variant of downsample for epoched data.
EpochSet downsample(const EpochSet& es, double target_rate_hz);

/// Subtracts the instantaneous cross-channel mean. Needs >= 2 channels.
ContinuousRecording common_average_reference(const ContinuousRecording& rec);

struct EpochWindow {
  double start_ms = -200.0;
  double end_ms = 800.0;
};

struct EpochingResult {
  EpochSet epochs;
  std::size_t dropped_at_edges = 0;
};

/// One trial per event covering [event + start*rate, event + end*rate).
EpochingResult epoch(const ContinuousRecording& rec, EpochWindow window,
                     const std::string& subject_id = "");

/// Subtracts, per trial and channel, the mean over [from_ms, to_ms).
EpochSet baseline_correct(const EpochSet& es, double from_ms = -200.0, double to_ms = 0.0);

struct RejectionThresholds {
  double abs_amplitude_uv = 100.0;
  double channel_std_z = 5.0;
  double global_std_z = 5.0;

  void validate() const;
};

struct RejectionResult {
  EpochSet kept;
  std::vector<bool> kept_mask;
};

/// Drops a trial if any |sample| exceeds the absolute limit, if any channel's
/// trial std exceeds channel_std_z times that channel's median trial std, or if
/// the pooled all-channel trial std exceeds global_std_z times its median.
RejectionResult reject_artifacts(const EpochSet& es, const RejectionThresholds& th);

/// Settings for the continuous-to-model-input chain.
struct PreprocessConfig {
  double bandpass_low_hz = 1.0;
  double bandpass_high_hz = 100.0;
  TransitionWidths bandpass_transition{1.0, 10.0};
  bool notch_enabled = true;
  double notch_low_hz = 45.0;
  double notch_high_hz = 55.0;
  TransitionWidths notch_transition{2.0, 2.0};
  double intermediate_rate_hz = 512.0;
  double model_rate_hz = 256.0;
  EpochWindow window{};
  bool baseline_enabled = true;
  double baseline_from_ms = -200.0;
  double baseline_to_ms = 0.0;
  RejectionThresholds thresholds{};
  std::vector<std::string> channels = kOccipitalChannels;
};

struct PreprocessReport {
  std::size_t events = 0;
  std::size_t dropped_at_edges = 0;
  std::size_t rejected = 0;
  std::size_t kept = 0;
};

/// Band-pass, band-stop, decimate, CAR, epoch, baseline, reject, decimate
/// again to the model rate and select the model channels.
std::pair<EpochSet, PreprocessReport> preprocess(const ContinuousRecording& rec,
                                                 const PreprocessConfig& cfg,
                                                 const std::string& subject_id);

}  // namespace eegdecode
