#include "eegdecode/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eegdecode {

namespace {

std::size_t integer_ratio(double source_rate_hz, double target_rate_hz) {
  if (!(target_rate_hz > 0.0)) throw std::invalid_argument("target rate must be positive");
  const double ratio = source_rate_hz / target_rate_hz;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9) {
    throw std::invalid_argument("rate ratio " + std::to_string(source_rate_hz) + "/" +
                                std::to_string(target_rate_hz) + " is not a positive integer");
  }
  return static_cast<std::size_t>(rounded);
}

double stddev(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

long to_samples(double ms, double rate_hz) { return std::lround(ms * rate_hz / 1000.0); }

}  // namespace

FirFilter anti_alias_filter(double source_rate_hz, double target_rate_hz) {
  const double target_nyquist = target_rate_hz / 2.0;
  return design_lowpass(0.9 * target_nyquist, 0.2 * target_nyquist, source_rate_hz);
}

ContinuousRecording downsample(const ContinuousRecording& rec, double target_rate_hz) {
  const std::size_t ratio = integer_ratio(rec.sample_rate_hz, target_rate_hz);
  if (ratio == 1) return rec;
  const auto filtered = apply_fir(rec, anti_alias_filter(rec.sample_rate_hz, target_rate_hz));

  ContinuousRecording out;
  out.sample_rate_hz = target_rate_hz;
  out.channels = rec.channels;
  out.n_samples = rec.n_samples / ratio;
  out.samples.resize(out.n_channels() * out.n_samples);
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    auto src = filtered.channel(c);
    auto dst = out.channel(c);
    for (std::size_t t = 0; t < out.n_samples; ++t) dst[t] = src[t * ratio];
  }
  for (const auto& ev : rec.events) {
    const auto idx = static_cast<std::size_t>(
        std::llround(static_cast<double>(ev.sample_index) / static_cast<double>(ratio)));
    if (idx < out.n_samples) out.events.push_back({idx, ev.label});
  }
  return out;
}

EpochSet downsample(const EpochSet& es, double target_rate_hz) {
  const std::size_t ratio = integer_ratio(es.sample_rate_hz, target_rate_hz);
  if (ratio == 1) return es;
  const auto f = anti_alias_filter(es.sample_rate_hz, target_rate_hz);
  EpochSet out = es;
  out.sample_rate_hz = target_rate_hz;
  out.n_time = es.n_time / ratio;
  out.data.assign(es.n_trials() * es.n_channels() * out.n_time, 0.0);
  for (std::size_t k = 0; k < es.n_trials(); ++k) {
    for (std::size_t c = 0; c < es.n_channels(); ++c) {
      const double* src = es.data.data() + (k * es.n_channels() + c) * es.n_time;
      const auto y = filter_zero_delay({src, es.n_time}, f.taps);
      double* dst = out.data.data() + (k * es.n_channels() + c) * out.n_time;
      for (std::size_t t = 0; t < out.n_time; ++t) dst[t] = y[t * ratio];
    }
  }
  return out;
}

ContinuousRecording common_average_reference(const ContinuousRecording& rec) {
  if (rec.n_channels() < 2) {
    throw std::invalid_argument("common average reference needs at least 2 channels");
  }
  ContinuousRecording out = rec;
  const double inv = 1.0 / static_cast<double>(rec.n_channels());
  std::vector<double> mean(rec.n_samples, 0.0);
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    auto ch = rec.channel(c);
    for (std::size_t t = 0; t < rec.n_samples; ++t) mean[t] += ch[t];
  }
  for (double& m : mean) m *= inv;
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    auto ch = out.channel(c);
    for (std::size_t t = 0; t < rec.n_samples; ++t) ch[t] -= mean[t];
  }
  return out;
}

EpochingResult epoch(const ContinuousRecording& rec, EpochWindow window,
                     const std::string& subject_id) {
  if (!(window.start_ms < window.end_ms)) {
    throw std::invalid_argument("epoch window start must precede its end");
  }
  const long offset = to_samples(window.start_ms, rec.sample_rate_hz);
  const long length = to_samples(window.end_ms - window.start_ms, rec.sample_rate_hz);
  if (length <= 0) throw std::invalid_argument("epoch window shorter than one sample");

  EpochingResult result;
  EpochSet& es = result.epochs;
  es.subject_id = subject_id;
  es.channels = rec.channels;
  es.sample_rate_hz = rec.sample_rate_hz;
  es.window_start_ms = window.start_ms;
  es.window_end_ms = window.end_ms;
  es.n_time = static_cast<std::size_t>(length);
  for (const auto& ev : rec.events) {
    const long first = static_cast<long>(ev.sample_index) + offset;
    if (first < 0 || first + length > static_cast<long>(rec.n_samples)) {
      ++result.dropped_at_edges;
      continue;
    }
    es.labels.push_back(ev.label);
    for (std::size_t c = 0; c < rec.n_channels(); ++c) {
      auto ch = rec.channel(c);
      es.data.insert(es.data.end(), ch.begin() + first, ch.begin() + first + length);
    }
  }
  es.validate();
  return result;
}

EpochSet baseline_correct(const EpochSet& es, double from_ms, double to_ms) {
  const long first = to_samples(from_ms - es.window_start_ms, es.sample_rate_hz);
  const long last = to_samples(to_ms - es.window_start_ms, es.sample_rate_hz);
  if (first < 0 || last > static_cast<long>(es.n_time) || first >= last) {
    throw std::invalid_argument("baseline interval outside the epoch window");
  }
  EpochSet out = es;
  const double inv = 1.0 / static_cast<double>(last - first);
  for (std::size_t k = 0; k < es.n_trials(); ++k) {
    for (std::size_t c = 0; c < es.n_channels(); ++c) {
      double* x = out.data.data() + (k * es.n_channels() + c) * es.n_time;
      double mean = 0.0;
      for (long t = first; t < last; ++t) mean += x[t];
      mean *= inv;
      for (std::size_t t = 0; t < es.n_time; ++t) x[t] -= mean;
    }
  }
  return out;
}

void RejectionThresholds::validate() const {
  if (!(abs_amplitude_uv > 0.0) || !(channel_std_z > 0.0) || !(global_std_z > 0.0)) {
    throw std::invalid_argument("rejection thresholds must be strictly positive");
  }
}

RejectionResult reject_artifacts(const EpochSet& es, const RejectionThresholds& th) {
  th.validate();
  const std::size_t n = es.n_trials();
  const std::size_t n_ch = es.n_channels();
  std::vector<double> channel_std(n * n_ch);
  std::vector<double> pooled_std(n);
  std::vector<bool> keep(n, true);
  for (std::size_t k = 0; k < n; ++k) {
    auto tr = es.trial(k);
    for (double v : tr) {
      if (std::abs(v) > th.abs_amplitude_uv) {
        keep[k] = false;
        break;
      }
    }
    for (std::size_t c = 0; c < n_ch; ++c) {
      channel_std[k * n_ch + c] = stddev(tr.subspan(c * es.n_time, es.n_time));
    }
    pooled_std[k] = stddev(tr);
  }
  for (std::size_t c = 0; c < n_ch; ++c) {
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = channel_std[k * n_ch + c];
    const double limit = th.channel_std_z * median(col);
    for (std::size_t k = 0; k < n; ++k) {
      if (col[k] > limit) keep[k] = false;
    }
  }
  const double global_limit = th.global_std_z * median(pooled_std);
  for (std::size_t k = 0; k < n; ++k) {
    if (pooled_std[k] > global_limit) keep[k] = false;
  }

  std::vector<std::size_t> kept_idx;
  for (std::size_t k = 0; k < n; ++k) {
    if (keep[k]) kept_idx.push_back(k);
  }
  return {subset(es, kept_idx), std::move(keep)};
}

std::pair<EpochSet, PreprocessReport> preprocess(const ContinuousRecording& rec,
                                                 const PreprocessConfig& cfg,
                                                 const std::string& subject_id) {
  rec.validate();
  PreprocessReport report;
  report.events = rec.events.size();
  auto x = apply_fir(rec, design_windowed_sinc(FilterKind::BandPass, cfg.bandpass_low_hz,
                                               cfg.bandpass_high_hz, cfg.bandpass_transition,
                                               rec.sample_rate_hz));
  if (cfg.notch_enabled) {
    x = apply_fir(x, design_windowed_sinc(FilterKind::BandStop, cfg.notch_low_hz,
                                          cfg.notch_high_hz, cfg.notch_transition,
                                          rec.sample_rate_hz));
  }
  x = downsample(x, cfg.intermediate_rate_hz);
  x = common_average_reference(x);
  auto ep = epoch(x, cfg.window, subject_id);
  report.dropped_at_edges = ep.dropped_at_edges;
  EpochSet es = std::move(ep.epochs);
  if (cfg.baseline_enabled) es = baseline_correct(es, cfg.baseline_from_ms, cfg.baseline_to_ms);
  auto rej = reject_artifacts(es, cfg.thresholds);
  report.rejected = es.n_trials() - rej.kept.n_trials();
  es = downsample(rej.kept, cfg.model_rate_hz);
  es = select_channels(es, cfg.channels);
  report.kept = es.n_trials();
  return {std::move(es), report};
}

}  // namespace eegdecode
