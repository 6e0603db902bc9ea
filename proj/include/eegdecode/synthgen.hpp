#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "eegdecode/data.hpp"

namespace eegdecode {

/// Everything needed to regenerate one synthetic subject.
struct SubjectProfile {
  std::string subject_id = "S01";
  std::uint64_t seed = 0;
  std::array<double, kNumClasses> p1_amplitude_uv{};
  std::array<double, kNumClasses> p2_amplitude_uv{};
  std::array<double, kNumClasses> alpha_gain_uv{};
  std::array<double, kNumClasses> gamma_gain_uv{};
  double amplitude_scale = 1.0;
  /// Subject-level latency offset added to every component.
  double latency_shift_ms = 0.0;
  double noise_level_uv = 8.0;
  /// One weight per occipital channel, in kOccipitalChannels order.
  std::vector<double> topography;

  double p1_center_ms = 150.0;
  double p1_width_ms = 20.0;
  double p2_center_ms = 275.0;
  double p2_width_ms = 30.0;
  double jitter_ms = 10.0;
  /// Per-trial multiplicative amplitude variability (std of the factor).
  double trial_amplitude_sd = 0.2;
  double alpha_hz = 10.0;
  double gamma_hz = 40.0;
  double burst_start_ms = 50.0;
  double burst_end_ms = 600.0;
  double sample_rate_hz = 256.0;
  double window_start_ms = -200.0;
  double window_end_ms = 800.0;

  /// Throws std::invalid_argument on non-finite amplitudes, noise <= 0,
  /// topography outside [0, 1] or of the wrong length.
  void validate() const;
};

/// 1/f^exponent Gaussian noise with unit standard deviation, shaped in the
/// frequency domain.
std::vector<double> pink_noise(std::size_t n, double exponent, std::uint64_t seed);

/// Near-balanced labels (class i % 3), shuffled by the profile seed. Needs
/// n_trials >= kNumClasses.
EpochSet generate_subject(const SubjectProfile& profile, std::size_t n_trials);

struct RecordingOptions {
  double sample_rate_hz = 2048.0;
  double trial_spacing_s = 3.0;
  double lead_in_s = 2.0;
  double line_noise_uv = 20.0;  // 50 Hz
  double drift_uv = 30.0;       // slow drift below 0.5 Hz
  /// Trials that receive a large transient on the occipital channels, for rejection tests.
  std::vector<std::size_t> artifact_trials;
  double artifact_uv = 300.0;
};

/// 32-channel BioSemi-layout continuous recording: the occipital channels carry
/// the subject's responses, every channel carries 1/f noise, drift and mains
/// interference. One event per trial, spaced evenly.
ContinuousRecording generate_recording(const SubjectProfile& profile, std::size_t n_trials,
                                       const RecordingOptions& options = {});

struct CohortConfig {
  std::size_t n_subjects = 10;
  std::size_t trials_per_subject = 300;
  /// Scales class-dependent effect sizes.
  double separability = 1.0;
  /// Scales subject-level offsets; 0 makes every subject share one distribution.
  double inter_subject_shift = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const CohortConfig&) const = default;
};

/// Draws subject `index` of the cohort from the prior.
SubjectProfile draw_profile(const CohortConfig& cfg, std::size_t index);

struct Cohort {
  std::vector<SubjectProfile> profiles;
  std::vector<EpochSet> subjects;
};

Cohort generate_cohort(const CohortConfig& cfg);

}  // namespace eegdecode
