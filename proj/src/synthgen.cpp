#include "eegdecode/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "eegdecode/rng.hpp"
#include "eegdecode/spectral.hpp"

namespace eegdecode {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Cohort prior. The P1/P2 class patterns are signed and of equal norm, so the
// classes differ in ERP shape rather than in ERP energy. Scaled by separability.
constexpr double kP1Level = 0.0;
constexpr double kP2Level = 0.0;
constexpr std::array<double, kNumClasses> kP1Effect = {3.0, -3.0, 3.0};
constexpr std::array<double, kNumClasses> kP2Effect = {4.0, 4.0, -4.0};
constexpr double kAlphaLevel = 2.0;
constexpr std::array<double, kNumClasses> kAlphaEffect = {0.5, 0.0, -0.5};
constexpr double kGammaLevel = 0.8;
constexpr std::array<double, kNumClasses> kGammaEffect = {-0.2, 0.0, 0.2};
constexpr double kNoiseLevel = 2.5;
// Topography over P3 P4 P7 P8 PO3 PO4 O1 Oz O2.
constexpr std::array<double, 9> kTopography = {0.5, 0.5, 0.4, 0.4, 0.8, 0.8, 1.0, 1.0, 1.0};

// Subject-level spread at inter_subject_shift = 1.
constexpr double kGainLogSd = 0.25;
constexpr double kLatencySdMs = 20.0;
constexpr double kClassEffectSd = 0.5;
constexpr double kPatternRotationSd = 1.0;
constexpr double kTopographySd = 0.25;
constexpr double kNoiseLogSd = 0.15;

double gaussian(double t, double center, double width) {
  const double z = (t - center) / width;
  return std::exp(-0.5 * z * z);
}

/// Tukey-like envelope: raised-cosine ramps of 50 ms at both ends of [start, end].
double burst_envelope(double t, double start, double end) {
  if (t <= start || t >= end) return 0.0;
  const double ramp = std::min(50.0, (end - start) / 2.0);
  if (t < start + ramp) return 0.5 - 0.5 * std::cos(std::numbers::pi * (t - start) / ramp);
  if (t > end - ramp) return 0.5 - 0.5 * std::cos(std::numbers::pi * (end - t) / ramp);
  return 1.0;
}

struct TrialDraw {
  double jitter_ms;
  double amplitude;
  double alpha_phase;
  double gamma_phase;
};

TrialDraw draw_trial(Rng& rng, const SubjectProfile& p) {
  TrialDraw d;
  d.jitter_ms = rng.normal(0.0, p.jitter_ms);
  d.amplitude = std::max(0.0, 1.0 + rng.normal(0.0, p.trial_amplitude_sd));
  d.alpha_phase = rng.uniform(0.0, kTwoPi);
  d.gamma_phase = rng.uniform(0.0, kTwoPi);
  return d;
}

/// Noise-free response (before topography) at t_ms after stimulus onset.
double response(const SubjectProfile& p, int label, const TrialDraw& d, double t_ms) {
  const auto k = static_cast<std::size_t>(label);
  const double shift = p.latency_shift_ms + d.jitter_ms;
  double v = p.p1_amplitude_uv[k] * gaussian(t_ms, p.p1_center_ms + shift, p.p1_width_ms) +
             p.p2_amplitude_uv[k] * gaussian(t_ms, p.p2_center_ms + shift, p.p2_width_ms);
  const double env = burst_envelope(t_ms, p.burst_start_ms + shift, p.burst_end_ms + shift);
  if (env > 0.0) {
    const double s = t_ms / 1000.0;
    v += env * (p.alpha_gain_uv[k] * std::sin(kTwoPi * p.alpha_hz * s + d.alpha_phase) +
                p.gamma_gain_uv[k] * std::sin(kTwoPi * p.gamma_hz * s + d.gamma_phase));
  }
  return d.amplitude * p.amplitude_scale * v;
}

std::vector<int> balanced_labels(std::size_t n, std::uint64_t seed) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % kNumClasses);
  Rng rng(seed);
  rng.shuffle(labels);
  return labels;
}

}  // namespace

void SubjectProfile::validate() const {
  auto finite = [](const auto& arr) {
    return std::all_of(arr.begin(), arr.end(), [](double v) { return std::isfinite(v); });
  };
  if (!finite(p1_amplitude_uv) || !finite(p2_amplitude_uv) || !finite(alpha_gain_uv) ||
      !finite(gamma_gain_uv) || !std::isfinite(amplitude_scale) ||
      !std::isfinite(latency_shift_ms)) {
    throw std::invalid_argument("profile " + subject_id + ": non-finite amplitude or latency");
  }
  if (!(noise_level_uv > 0.0) || !std::isfinite(noise_level_uv)) {
    throw std::invalid_argument("profile " + subject_id + ": noise level must be > 0");
  }
  if (topography.size() != kOccipitalChannels.size()) {
    throw std::invalid_argument("profile " + subject_id + ": topography needs " +
                                std::to_string(kOccipitalChannels.size()) + " weights");
  }
  if (!std::all_of(topography.begin(), topography.end(),
                   [](double w) { return w >= 0.0 && w <= 1.0; })) {
    throw std::invalid_argument("profile " + subject_id + ": topography weight outside [0, 1]");
  }
  if (!(p1_width_ms > 0.0) || !(p2_width_ms > 0.0) || !(jitter_ms >= 0.0) ||
      !(trial_amplitude_sd >= 0.0) || !(sample_rate_hz > 0.0) ||
      !(window_end_ms > window_start_ms) || !(burst_end_ms > burst_start_ms)) {
    throw std::invalid_argument("profile " + subject_id + ": invalid timing parameters");
  }
  if (gamma_hz >= sample_rate_hz / 2.0 || alpha_hz >= sample_rate_hz / 2.0) {
    throw std::invalid_argument("profile " + subject_id + ": burst frequency above Nyquist");
  }
}

std::vector<double> pink_noise(std::size_t n, double exponent, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("pink_noise: need at least 2 samples");
  Rng rng(seed);
  std::vector<double> white(n);
  for (double& v : white) v = rng.normal();
  auto spectrum = spectral::rfft(white);
  spectrum[0] = 0.0;
  for (std::size_t k = 1; k < spectrum.size(); ++k) {
    spectrum[k] *= std::pow(static_cast<double>(k), -exponent / 2.0);
  }
  auto out = spectral::irfft(spectrum, n);
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double& v : out) {
    v -= mean;
    ss += v * v;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (sd > 0.0) {
    for (double& v : out) v /= sd;
  }
  return out;
}

EpochSet generate_subject(const SubjectProfile& p, std::size_t n_trials) {
  p.validate();
  if (n_trials < static_cast<std::size_t>(kNumClasses)) {
    throw std::invalid_argument("generate_subject: need at least one trial per class");
  }
  const double duration_ms = p.window_end_ms - p.window_start_ms;
  const auto n_time = static_cast<std::size_t>(std::lround(duration_ms * p.sample_rate_hz / 1000.0));
  const std::size_t C = kOccipitalChannels.size();

  EpochSet es;
  es.subject_id = p.subject_id;
  es.channels = kOccipitalChannels;
  es.sample_rate_hz = p.sample_rate_hz;
  es.window_start_ms = p.window_start_ms;
  es.window_end_ms = p.window_end_ms;
  es.n_time = n_time;
  es.labels = balanced_labels(n_trials, derive_seed(p.seed, 0x1ABE1));
  es.data.resize(n_trials * C * n_time);

  std::vector<double> clean(n_time);
  for (std::size_t i = 0; i < n_trials; ++i) {
    const std::uint64_t trial_seed = derive_seed(p.seed, 0x7000000 + i);
    Rng rng(trial_seed);
    const TrialDraw d = draw_trial(rng, p);
    for (std::size_t t = 0; t < n_time; ++t) {
      const double t_ms = p.window_start_ms + 1000.0 * static_cast<double>(t) / p.sample_rate_hz;
      clean[t] = response(p, es.labels[i], d, t_ms);
    }
    auto trial = es.trial(i);
    for (std::size_t c = 0; c < C; ++c) {
      const auto noise = pink_noise(n_time, 1.0, derive_seed(trial_seed, c + 1));
      for (std::size_t t = 0; t < n_time; ++t) {
        trial[c * n_time + t] = p.topography[c] * clean[t] + p.noise_level_uv * noise[t];
      }
    }
  }
  es.validate();
  return es;
}

ContinuousRecording generate_recording(const SubjectProfile& p, std::size_t n_trials,
                                       const RecordingOptions& o) {
  p.validate();
  if (n_trials == 0) throw std::invalid_argument("generate_recording: need at least one trial");
  const double rate = o.sample_rate_hz;
  const auto n_samples = static_cast<std::size_t>(
      std::lround((o.lead_in_s + static_cast<double>(n_trials) * o.trial_spacing_s + 1.0) * rate));
  ContinuousRecording rec;
  rec.sample_rate_hz = rate;
  rec.channels = kBiosemi32Channels;
  rec.n_samples = n_samples;
  rec.samples.assign(rec.channels.size() * n_samples, 0.0);

  const auto labels = balanced_labels(n_trials, derive_seed(p.seed, 0x1ABE1));
  for (std::size_t i = 0; i < n_trials; ++i) {
    const auto onset = static_cast<std::size_t>(
        std::lround((o.lead_in_s + static_cast<double>(i) * o.trial_spacing_s) * rate));
    rec.events.push_back({onset, labels[i]});
  }

  Rng rng(derive_seed(p.seed, 0xC0417));
  for (std::size_t c = 0; c < rec.channels.size(); ++c) {
    auto x = rec.channel(c);
    const auto noise = pink_noise(n_samples, 1.0, derive_seed(p.seed, 0xC0000 + c));
    const double line_phase = rng.uniform(0.0, kTwoPi);
    std::array<double, 3> drift_hz{}, drift_phase{};
    for (std::size_t k = 0; k < drift_hz.size(); ++k) {
      drift_hz[k] = rng.uniform(0.05, 0.4);
      drift_phase[k] = rng.uniform(0.0, kTwoPi);
    }
    for (std::size_t t = 0; t < n_samples; ++t) {
      const double s = static_cast<double>(t) / rate;
      double v = p.noise_level_uv * noise[t] + o.line_noise_uv * std::sin(kTwoPi * 50.0 * s + line_phase);
      for (std::size_t k = 0; k < drift_hz.size(); ++k) {
        v += o.drift_uv / 3.0 * std::sin(kTwoPi * drift_hz[k] * s + drift_phase[k]);
      }
      x[t] = v;
    }
  }

  std::vector<std::size_t> occipital;
  for (const auto& name : kOccipitalChannels) {
    occipital.push_back(static_cast<std::size_t>(
        std::find(rec.channels.begin(), rec.channels.end(), name) - rec.channels.begin()));
  }
  const auto from = static_cast<long>(std::floor(p.window_start_ms * rate / 1000.0));
  const auto to = static_cast<long>(std::ceil((p.window_end_ms + 200.0) * rate / 1000.0));
  for (std::size_t i = 0; i < n_trials; ++i) {
    Rng trial_rng(derive_seed(p.seed, 0x7000000 + i));
    const TrialDraw d = draw_trial(trial_rng, p);
    const bool artifact =
        std::find(o.artifact_trials.begin(), o.artifact_trials.end(), i) != o.artifact_trials.end();
    for (long k = from; k < to; ++k) {
      const long idx = static_cast<long>(rec.events[i].sample_index) + k;
      if (idx < 0 || idx >= static_cast<long>(n_samples)) continue;
      const double t_ms = 1000.0 * static_cast<double>(k) / rate;
      const double r = response(p, labels[i], d, t_ms);
      for (std::size_t c = 0; c < occipital.size(); ++c) {
        rec.channel(occipital[c])[static_cast<std::size_t>(idx)] += p.topography[c] * r;
      }
      if (artifact) {
        // Occipital only, so it survives re-referencing.
        const double bump = o.artifact_uv * gaussian(t_ms, 300.0, 60.0);
        for (std::size_t c : occipital) rec.channel(c)[static_cast<std::size_t>(idx)] += bump;
      }
    }
  }
  rec.validate();
  return rec;
}

void CohortConfig::validate() const {
  if (n_subjects < 2) throw std::invalid_argument("cohort needs at least 2 subjects");
  if (trials_per_subject < static_cast<std::size_t>(kNumClasses)) {
    throw std::invalid_argument("cohort needs at least one trial per class per subject");
  }
  if (!(separability > 0.0) || !std::isfinite(separability)) {
    throw std::invalid_argument("separability must be > 0");
  }
  if (!(inter_subject_shift >= 0.0) || !std::isfinite(inter_subject_shift)) {
    throw std::invalid_argument("inter_subject_shift must be >= 0");
  }
}

SubjectProfile draw_profile(const CohortConfig& cfg, std::size_t index) {
  cfg.validate();
  const double sep = cfg.separability;
  const double shift = cfg.inter_subject_shift;
  Rng rng(derive_seed(cfg.seed, 0x5B1EC7 + index));
  SubjectProfile p;
  char id[16];
  std::snprintf(id, sizeof id, "S%02zu", index + 1);
  p.subject_id = id;
  // Subjects share noise seeds only through the cohort seed.
  p.seed = derive_seed(cfg.seed, 0xDA7A + index);
  // Subjects disagree on the P1/P2 class patterns by a rotation in the (P1, P2)
  // plane; rotation keeps class distances, so separability stays per-subject.
  const double theta = shift * rng.normal(0.0, kPatternRotationSd);
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  for (std::size_t k = 0; k < static_cast<std::size_t>(kNumClasses); ++k) {
    const double a = sep * kP1Effect[k];
    const double b = sep * kP2Effect[k];
    p.p1_amplitude_uv[k] = kP1Level + cs * a - sn * b + shift * rng.normal(0.0, kClassEffectSd);
    p.p2_amplitude_uv[k] = kP2Level + sn * a + cs * b + shift * rng.normal(0.0, kClassEffectSd);
    p.alpha_gain_uv[k] = std::max(0.0, kAlphaLevel + sep * kAlphaEffect[k] +
                                            shift * rng.normal(0.0, 0.2 * kClassEffectSd));
    p.gamma_gain_uv[k] = std::max(0.0, kGammaLevel + sep * kGammaEffect[k] +
                                            shift * rng.normal(0.0, 0.1 * kClassEffectSd));
  }
  p.amplitude_scale = std::exp(shift * rng.normal(0.0, kGainLogSd));
  p.latency_shift_ms = shift * rng.normal(0.0, kLatencySdMs);
  p.noise_level_uv = kNoiseLevel * std::exp(shift * rng.normal(0.0, kNoiseLogSd));
  p.topography.resize(kTopography.size());
  for (std::size_t c = 0; c < kTopography.size(); ++c) {
    p.topography[c] = std::clamp(kTopography[c] + shift * rng.normal(0.0, kTopographySd), 0.0, 1.0);
  }
  return p;
}

Cohort generate_cohort(const CohortConfig& cfg) {
  cfg.validate();
  Cohort out;
  for (std::size_t i = 0; i < cfg.n_subjects; ++i) {
    out.profiles.push_back(draw_profile(cfg, i));
    out.subjects.push_back(generate_subject(out.profiles.back(), cfg.trials_per_subject));
  }
  return out;
}

}  // namespace eegdecode
