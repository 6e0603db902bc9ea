#pragma once

#include <cstdint>
#include <filesystem>

#include "eegdecode/network.hpp"

namespace eegdecode {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Binary ArchConfig plus every named parameter array, including BN running
/// statistics. Round trips are bit-exact.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);

/// Throws FormatError on bad magic, unsupported version, truncation, or arrays
/// whose names or shapes disagree with the stored architecture.
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace eegdecode
