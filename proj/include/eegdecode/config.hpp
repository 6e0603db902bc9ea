#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "eegdecode/baseline.hpp"
#include "eegdecode/evaluation.hpp"
#include "eegdecode/network.hpp"
#include "eegdecode/preprocess.hpp"
#include "eegdecode/synthgen.hpp"
#include "eegdecode/training.hpp"

namespace eegdecode {

/// Input files for the data-consuming subcommands.
struct DataConfig {
  /// Continuous recordings (.eegrec) for `preprocess`.
  std::vector<std::string> recordings;
  /// Epoch files (.eegep), one per subject, for the training subcommands.
  std::vector<std::string> epochs;
  /// Result files (.json) for `stats` and `export`.
  std::vector<std::string> results;

  bool operator==(const DataConfig&) const = default;
};

struct SynthConfig {
  CohortConfig cohort;
  /// Also write a 2048 Hz 32-channel continuous recording per subject.
  bool write_recordings = false;
  std::size_t recording_trials = 60;

  bool operator==(const SynthConfig&) const = default;
};

/// The whole configuration document. Every stanza is optional; missing keys
/// keep their defaults, unknown keys are errors.
struct RunConfig {
  DataConfig data;
  PreprocessConfig preprocess;
  ArchConfig arch;
  TrainConfig train;
  EvalConfig eval;
  /// "auto" or the protocol a training subcommand must match:
  /// "intra", "inter" or "finetune".
  std::string protocol = "auto";
  SvmConfig svm;
  SynthConfig synth;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  /// Pushes the global seed into every stanza (train, eval, svm, synth).
  void apply_seed();
  void validate() const;
};

/// Parse or validation failure. `line()` is 1-based, 0 when not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Parses JSON text (comments allowed) into a RunConfig. Checks syntax, types
/// and unknown keys only; call apply_seed() and validate() after any overrides.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical JSON text of the effective configuration (sorted keys).
std::string canonical_config(const RunConfig& cfg);

/// 64-bit FNV-1a of canonical_config, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace eegdecode
