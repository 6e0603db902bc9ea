#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegdecode/config.hpp"
#include "eegdecode/evaluation.hpp"
#include "eegdecode/training.hpp"

namespace eegdecode {

inline constexpr int kResultsFormatVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

using Json = nlohmann::json;

Json to_json(const TrainHistory& h);

/// Results documents. Each carries "format", "version" and "kind".
Json intra_results_json(const std::vector<IntraResult>& network,
                        const std::vector<IntraResult>& svm);
Json inter_base_json(const InterBaseResult& r);
Json finetune_json(const InterFinetunedResult& r);
Json report_json(const EvalReport& r);

/// Per-subject accuracy conditions found in results documents:
/// "intra" and "svm_intra" (fold means), "inter_base", "finetuned@<fraction>".
std::vector<Condition> conditions_from_results(const std::vector<Json>& docs);

struct ExportFile {
  std::string name;
  std::string content;
};

/// Plot-ready CSV series: per-subject accuracies by condition, fine-tune
/// validation histories and the fraction sweep, for whichever documents are given.
std::vector<ExportFile> export_series(const std::vector<Json>& docs);

/// Manifest written next to every output: command, seed, config hash and
/// canonical config, tool and format versions, inputs and outputs.
Json manifest_json(const std::string& command, const RunConfig& cfg,
                   const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs);

/// Pretty-printed JSON with a trailing newline.
void write_json(const Json& j, const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace eegdecode
