#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "eegdecode/data.hpp"
#include "eegdecode/rng.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("eegdecode_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<double> randn(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  eegdecode::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, sd);
  return v;
}

// Random epoch set with balanced labels (i % 3).
inline eegdecode::EpochSet random_epochs(std::size_t n_trials, std::size_t n_channels,
                                         std::size_t n_time, std::uint64_t seed) {
  eegdecode::EpochSet es;
  es.subject_id = "T";
  for (std::size_t c = 0; c < n_channels; ++c) {
    es.channels.push_back(c < eegdecode::kOccipitalChannels.size()
                              ? eegdecode::kOccipitalChannels[c]
                              : "X" + std::to_string(c));
  }
  es.sample_rate_hz = 256.0;
  es.window_start_ms = -200.0;
  es.window_end_ms = -200.0 + 1000.0 * static_cast<double>(n_time) / 256.0;
  es.n_time = n_time;
  es.data = randn(n_trials * n_channels * n_time, seed);
  for (std::size_t i = 0; i < n_trials; ++i) es.labels.push_back(static_cast<int>(i % 3));
  return es;
}

}  // namespace testutil
