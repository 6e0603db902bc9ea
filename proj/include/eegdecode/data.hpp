#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eegdecode {

inline constexpr int kNumClasses = 3;

/// Grating spatial frequency (cycles per degree) for each dense class label.
inline constexpr std::array<double, kNumClasses> kClassCpd = {0.05, 0.1, 0.3};

/// The nine occipital/parietal channels fed to the classifier.
inline const std::vector<std::string> kOccipitalChannels = {
    "P3", "P4", "P7", "P8", "PO3", "PO4", "O1", "Oz", "O2"};

/// BioSemi 32-channel montage labels, in recording order.
inline const std::vector<std::string> kBiosemi32Channels = {
    "Fp1", "AF3", "F7",  "F3",  "FC1", "FC5", "T7", "C3",
    "CP1", "CP5", "P7",  "P3",  "Pz",  "PO3", "O1", "Oz",
    "O2",  "PO4", "P4",  "P8",  "CP6", "CP2", "C4", "T8",
    "FC6", "FC2", "F4",  "F8",  "AF4", "Fp2", "Fz", "Cz"};

struct Event {
  std::size_t sample_index = 0;
  int label = 0;

  bool operator==(const Event&) const = default;
};

/// Multichannel continuous signal in microvolts, stored channel-major.
struct ContinuousRecording {
  double sample_rate_hz = 0.0;
  std::vector<std::string> channels;
  std::size_t n_samples = 0;
  std::vector<double> samples;  // [channel * n_samples + t]
  std::vector<Event> events;

  std::size_t n_channels() const { return channels.size(); }
  std::span<double> channel(std::size_t c) {
    return {samples.data() + c * n_samples, n_samples};
  }
  std::span<const double> channel(std::size_t c) const {
    return {samples.data() + c * n_samples, n_samples};
  }

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;

  bool operator==(const ContinuousRecording&) const = default;
};

/// Rectangular set of labeled trials, stored [trial][channel][time].
struct EpochSet {
  std::string subject_id;
  std::vector<std::string> channels;
  double sample_rate_hz = 0.0;
  double window_start_ms = 0.0;
  double window_end_ms = 0.0;
  std::size_t n_time = 0;
  std::vector<double> data;
  std::vector<int> labels;
  std::vector<double> class_cpd{kClassCpd.begin(), kClassCpd.end()};

  std::size_t n_trials() const { return labels.size(); }
  std::size_t n_channels() const { return channels.size(); }
  std::size_t trial_size() const { return channels.size() * n_time; }

  std::span<double> trial(std::size_t i) {
    return {data.data() + i * trial_size(), trial_size()};
  }
  std::span<const double> trial(std::size_t i) const {
    return {data.data() + i * trial_size(), trial_size()};
  }
  double at(std::size_t trial_idx, std::size_t ch, std::size_t t) const {
    return data[(trial_idx * channels.size() + ch) * n_time + t];
  }

  /// Per-class trial counts.
  std::array<std::size_t, kNumClasses> class_counts() const;

  void validate() const;

  bool operator==(const EpochSet&) const = default;
};

/// Thrown by select_channels when requested labels are absent.
class UnknownChannelError : public std::invalid_argument {
 public:
  explicit UnknownChannelError(std::vector<std::string> missing);
  const std::vector<std::string>& missing() const { return missing_; }

 private:
  std::vector<std::string> missing_;
};

/// Returns the channels named in `names`, in that order.
EpochSet select_channels(const EpochSet& es, std::span<const std::string> names);
ContinuousRecording select_channels(const ContinuousRecording& rec,
                                    std::span<const std::string> names);

/// Trials at `indices`, in the given order.
EpochSet subset(const EpochSet& es, std::span<const std::size_t> indices);

/// Stacks compatible epoch sets; the subject id becomes "a+b+...".
EpochSet concatenate(std::span<const EpochSet> sets);

}  // namespace eegdecode
