#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "eegdecode/data.hpp"

namespace eegdecode {

inline constexpr std::uint32_t kRecordingFormatVersion = 1;
inline constexpr std::uint32_t kEpochFormatVersion = 1;

/// Malformed or incompatible file content. `offset()` is the byte (binary
/// containers) or line number (text importers) where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

void save_recording(const ContinuousRecording& rec, const std::filesystem::path& path);
ContinuousRecording load_recording(const std::filesystem::path& path);

void save_epochs(const EpochSet& es, const std::filesystem::path& path);
EpochSet load_epochs(const std::filesystem::path& path);

/// Imports a channel x time CSV: header row of channel labels, one column per
/// channel, one row per sample. Events come from an optional sidecar with
/// `sample_index,label` lines.
ContinuousRecording import_csv(const std::filesystem::path& csv_path, double sample_rate_hz,
                               const std::optional<std::filesystem::path>& events_path = {});

}  // namespace eegdecode
