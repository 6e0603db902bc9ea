#include "eegdecode/data.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace eegdecode {

namespace {

void check_unique(const std::vector<std::string>& channels) {
  std::unordered_set<std::string> seen;
  for (const auto& name : channels) {
    if (!seen.insert(name).second) {
      throw std::invalid_argument("duplicate channel label '" + name + "'");
    }
  }
}

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

std::vector<std::size_t> resolve(const std::vector<std::string>& have,
                                 std::span<const std::string> names) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < have.size(); ++i) pos.emplace(have[i], i);
  std::vector<std::size_t> idx;
  std::vector<std::string> missing;
  for (const auto& n : names) {
    auto it = pos.find(n);
    if (it == pos.end()) {
      missing.push_back(n);
    } else {
      idx.push_back(it->second);
    }
  }
  if (!missing.empty()) throw UnknownChannelError(std::move(missing));
  return idx;
}

}  // namespace

void ContinuousRecording::validate() const {
  if (!(sample_rate_hz > 0.0)) {
    throw std::invalid_argument("sample rate must be positive");
  }
  check_unique(channels);
  if (samples.size() != channels.size() * n_samples) {
    throw std::invalid_argument("sample buffer does not match channel x time shape");
  }
  for (const auto& ev : events) {
    if (ev.sample_index >= n_samples) {
      throw std::invalid_argument("event at sample " + std::to_string(ev.sample_index) +
                                  " outside recording of " + std::to_string(n_samples) +
                                  " samples");
    }
  }
}

std::array<std::size_t, kNumClasses> EpochSet::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (int l : labels) ++counts.at(static_cast<std::size_t>(l));
  return counts;
}

void EpochSet::validate() const {
  if (!(sample_rate_hz > 0.0)) {
    throw std::invalid_argument("sample rate must be positive");
  }
  check_unique(channels);
  if (data.size() != labels.size() * channels.size() * n_time) {
    throw std::invalid_argument("epoch buffer does not match trial x channel x time shape");
  }
  for (int l : labels) {
    if (l < 0 || l >= kNumClasses) {
      throw std::invalid_argument("class label " + std::to_string(l) + " outside 0..2");
    }
  }
}

UnknownChannelError::UnknownChannelError(std::vector<std::string> missing)
    : std::invalid_argument("unknown channel(s): " + join(missing)),
      missing_(std::move(missing)) {}

EpochSet select_channels(const EpochSet& es, std::span<const std::string> names) {
  const auto idx = resolve(es.channels, names);
  EpochSet out = es;
  out.channels.assign(names.begin(), names.end());
  out.data.assign(es.n_trials() * idx.size() * es.n_time, 0.0);
  for (std::size_t k = 0; k < es.n_trials(); ++k) {
    for (std::size_t c = 0; c < idx.size(); ++c) {
      const double* src = es.data.data() + (k * es.n_channels() + idx[c]) * es.n_time;
      double* dst = out.data.data() + (k * idx.size() + c) * es.n_time;
      std::copy(src, src + es.n_time, dst);
    }
  }
  return out;
}

ContinuousRecording select_channels(const ContinuousRecording& rec,
                                    std::span<const std::string> names) {
  const auto idx = resolve(rec.channels, names);
  ContinuousRecording out = rec;
  out.channels.assign(names.begin(), names.end());
  out.samples.assign(idx.size() * rec.n_samples, 0.0);
  for (std::size_t c = 0; c < idx.size(); ++c) {
    auto src = rec.channel(idx[c]);
    std::copy(src.begin(), src.end(), out.channel(c).begin());
  }
  return out;
}

EpochSet subset(const EpochSet& es, std::span<const std::size_t> indices) {
  EpochSet out = es;
  out.labels.clear();
  out.data.clear();
  out.labels.reserve(indices.size());
  out.data.reserve(indices.size() * es.trial_size());
  for (std::size_t i : indices) {
    if (i >= es.n_trials()) throw std::out_of_range("trial index out of range");
    out.labels.push_back(es.labels[i]);
    auto tr = es.trial(i);
    out.data.insert(out.data.end(), tr.begin(), tr.end());
  }
  return out;
}

EpochSet concatenate(std::span<const EpochSet> sets) {
  if (sets.empty()) throw std::invalid_argument("concatenate: no epoch sets");
  EpochSet out = sets.front();
  out.data.clear();
  out.labels.clear();
  out.subject_id.clear();
  for (const auto& s : sets) {
    if (s.channels != out.channels || s.n_time != out.n_time ||
        s.sample_rate_hz != out.sample_rate_hz) {
      throw std::invalid_argument("concatenate: incompatible epoch sets ('" +
                                  s.subject_id + "')");
    }
    if (!out.subject_id.empty()) out.subject_id += "+";
    out.subject_id += s.subject_id;
    out.data.insert(out.data.end(), s.data.begin(), s.data.end());
    out.labels.insert(out.labels.end(), s.labels.begin(), s.labels.end());
  }
  return out;
}

}  // namespace eegdecode
