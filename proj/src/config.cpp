#include "eegdecode/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "eegdecode/rng.hpp"

namespace eegdecode {

using nlohmann::json;

ConfigError::ConfigError(const std::string& what, std::size_t line)
    : std::runtime_error(line ? "config line " + std::to_string(line) + ": " + what
                              : "config: " + what),
      line_(line) {}

namespace {

/// Reads one stanza, tracking which keys were consumed.
class Stanza {
 public:
  Stanza(const json& j, std::string path, const std::string& text)
      : j_(j), path_(std::move(path)), text_(text) {
    if (!j_.is_object()) fail("'" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail("'" + path_ + (path_.empty() ? "" : ".") + key + "' has the wrong type", key);
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail("unknown key '" + path_ + (path_.empty() ? "" : ".") + key + "'", key);
    }
  }

  [[noreturn]] void fail(const std::string& msg, const std::string& key = "") const {
    throw ConfigError(msg, locate(key.empty() ? path_.substr(path_.rfind('.') + 1) : key));
  }

 private:
  /// Best-effort line of the first `"key"` occurrence after the stanza's own name.
  std::size_t locate(const std::string& key) const {
    if (key.empty()) return 0;
    std::size_t from = 0;
    if (!path_.empty()) {
      const auto own = text_.find("\"" + path_.substr(path_.rfind('.') + 1) + "\"");
      if (own != std::string::npos && key != path_.substr(path_.rfind('.') + 1)) from = own;
    }
    auto pos = text_.find("\"" + key + "\"", from);
    if (pos == std::string::npos) pos = text_.find("\"" + key + "\"");
    if (pos == std::string::npos) return 0;
    return static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos), '\n')) + 1;
  }

  const json& j_;
  std::string path_;
  const std::string& text_;
  std::set<std::string> seen_;
};

void read_transition(Stanza& s, const char* key, TransitionWidths& t, const std::string& text,
                     const std::string& path) {
  if (const json* j = s.child(key)) {
    Stanza st(*j, path + "." + key, text);
    st.get("low_hz", t.low_hz);
    st.get("high_hz", t.high_hz);
    st.finish();
  }
}

}  // namespace

void RunConfig::apply_seed() {
  train.seed = derive_seed(seed, 1);
  eval.seed = derive_seed(seed, 2);
  svm.seed = derive_seed(seed, 3);
  synth.cohort.seed = derive_seed(seed, 4);
}

void RunConfig::validate() const {
  try {
    arch.validate();
    train.validate();
    eval.validate();
    synth.cohort.validate();
    preprocess.thresholds.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), 0);
  }
  if (protocol != "auto" && protocol != "intra" && protocol != "inter" && protocol != "finetune") {
    throw ConfigError("protocol must be auto, intra, inter or finetune", 0);
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty", 0);
  if (!(svm.c > 0.0)) throw ConfigError("svm.c must be > 0", 0);
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min(e.byte, text.size());
    const auto line = static_cast<std::size_t>(
                          std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n')) +
                      1;
    std::string msg = e.what();
    if (const auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
    throw ConfigError(msg, line);
  }

  RunConfig cfg;
  Stanza top(root, "", text);
  top.get("seed", cfg.seed);
  top.get("output_dir", cfg.output_dir);
  top.get("protocol", cfg.protocol);

  if (const json* j = top.child("data")) {
    Stanza s(*j, "data", text);
    s.get("recordings", cfg.data.recordings);
    s.get("epochs", cfg.data.epochs);
    s.get("results", cfg.data.results);
    s.finish();
  }
  if (const json* j = top.child("preprocess")) {
    auto& p = cfg.preprocess;
    Stanza s(*j, "preprocess", text);
    s.get("bandpass_low_hz", p.bandpass_low_hz);
    s.get("bandpass_high_hz", p.bandpass_high_hz);
    read_transition(s, "bandpass_transition", p.bandpass_transition, text, "preprocess");
    s.get("notch_enabled", p.notch_enabled);
    s.get("notch_low_hz", p.notch_low_hz);
    s.get("notch_high_hz", p.notch_high_hz);
    read_transition(s, "notch_transition", p.notch_transition, text, "preprocess");
    s.get("intermediate_rate_hz", p.intermediate_rate_hz);
    s.get("model_rate_hz", p.model_rate_hz);
    s.get("window_start_ms", p.window.start_ms);
    s.get("window_end_ms", p.window.end_ms);
    s.get("baseline_enabled", p.baseline_enabled);
    s.get("baseline_from_ms", p.baseline_from_ms);
    s.get("baseline_to_ms", p.baseline_to_ms);
    s.get("reject_abs_uv", p.thresholds.abs_amplitude_uv);
    s.get("reject_channel_std_z", p.thresholds.channel_std_z);
    s.get("reject_global_std_z", p.thresholds.global_std_z);
    s.get("channels", p.channels);
    s.finish();
  }
  if (const json* j = top.child("arch")) {
    auto& a = cfg.arch;
    Stanza s(*j, "arch", text);
    s.get("n_channels", a.n_channels);
    s.get("n_time", a.n_time);
    s.get("segment_len", a.segment_len);
    s.get("n_temporal_filters", a.n_temporal_filters);
    s.get("depth_multiplier", a.depth_multiplier);
    s.get("lstm_hidden", a.lstm_hidden);
    s.get("n_classes", a.n_classes);
    s.get("dropout_rate", a.dropout_rate);
    s.get("bn_epsilon", a.bn_epsilon);
    s.get("bn_momentum", a.bn_momentum);
    s.finish();
  }
  if (const json* j = top.child("train")) {
    auto& t = cfg.train;
    Stanza s(*j, "train", text);
    s.get("max_epochs", t.max_epochs);
    s.get("batch_size", t.batch_size);
    s.get("lr_initial", t.lr_initial);
    s.get("lr_reduced", t.lr_reduced);
    s.get("patience_for_drop", t.patience_for_drop);
    s.get("adam_beta1", t.adam_beta1);
    s.get("adam_beta2", t.adam_beta2);
    s.get("adam_eps", t.adam_eps);
    s.get("fine_tune_fraction", t.fine_tune_fraction);
    s.get("fine_tune_freeze_front_end", t.fine_tune_freeze_front_end);
    s.finish();
  }
  if (const json* j = top.child("eval")) {
    auto& e = cfg.eval;
    Stanza s(*j, "eval", text);
    s.get("outer_folds", e.outer_folds);
    s.get("validation_fraction", e.validation_fraction);
    s.get("fractions", e.fractions);
    s.get("finetune_test_fraction", e.finetune_test_fraction);
    s.finish();
  }
  if (const json* j = top.child("svm")) {
    Stanza s(*j, "svm", text);
    s.get("c", cfg.svm.c);
    s.get("max_iterations", cfg.svm.max_iterations);
    s.get("tolerance", cfg.svm.tolerance);
    s.finish();
  }
  if (const json* j = top.child("synth")) {
    auto& c = cfg.synth.cohort;
    Stanza s(*j, "synth", text);
    s.get("n_subjects", c.n_subjects);
    s.get("trials_per_subject", c.trials_per_subject);
    s.get("separability", c.separability);
    s.get("inter_subject_shift", c.inter_subject_shift);
    s.get("write_recordings", cfg.synth.write_recordings);
    s.get("recording_trials", cfg.synth.recording_trials);
    s.finish();
  }
  top.finish();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'", 0);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string canonical_config(const RunConfig& c) {
  const auto& p = c.preprocess;
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["protocol"] = c.protocol;
  j["data"] = {{"recordings", c.data.recordings}, {"epochs", c.data.epochs}, {"results", c.data.results}};
  j["preprocess"] = {
      {"bandpass_low_hz", p.bandpass_low_hz},
      {"bandpass_high_hz", p.bandpass_high_hz},
      {"bandpass_transition", {{"low_hz", p.bandpass_transition.low_hz}, {"high_hz", p.bandpass_transition.high_hz}}},
      {"notch_enabled", p.notch_enabled},
      {"notch_low_hz", p.notch_low_hz},
      {"notch_high_hz", p.notch_high_hz},
      {"notch_transition", {{"low_hz", p.notch_transition.low_hz}, {"high_hz", p.notch_transition.high_hz}}},
      {"intermediate_rate_hz", p.intermediate_rate_hz},
      {"model_rate_hz", p.model_rate_hz},
      {"window_start_ms", p.window.start_ms},
      {"window_end_ms", p.window.end_ms},
      {"baseline_enabled", p.baseline_enabled},
      {"baseline_from_ms", p.baseline_from_ms},
      {"baseline_to_ms", p.baseline_to_ms},
      {"reject_abs_uv", p.thresholds.abs_amplitude_uv},
      {"reject_channel_std_z", p.thresholds.channel_std_z},
      {"reject_global_std_z", p.thresholds.global_std_z},
      {"channels", p.channels}};
  const auto& a = c.arch;
  j["arch"] = {{"n_channels", a.n_channels},         {"n_time", a.n_time},
               {"segment_len", a.segment_len},       {"n_temporal_filters", a.n_temporal_filters},
               {"depth_multiplier", a.depth_multiplier}, {"lstm_hidden", a.lstm_hidden},
               {"n_classes", a.n_classes},           {"dropout_rate", a.dropout_rate},
               {"bn_epsilon", a.bn_epsilon},         {"bn_momentum", a.bn_momentum}};
  const auto& t = c.train;
  j["train"] = {{"max_epochs", t.max_epochs},
                {"batch_size", t.batch_size},
                {"lr_initial", t.lr_initial},
                {"lr_reduced", t.lr_reduced},
                {"patience_for_drop", t.patience_for_drop},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_eps", t.adam_eps},
                {"fine_tune_fraction", t.fine_tune_fraction},
                {"fine_tune_freeze_front_end", t.fine_tune_freeze_front_end}};
  const auto& e = c.eval;
  j["eval"] = {{"outer_folds", e.outer_folds},
               {"validation_fraction", e.validation_fraction},
               {"fractions", e.fractions},
               {"finetune_test_fraction", e.finetune_test_fraction}};
  j["svm"] = {{"c", c.svm.c}, {"max_iterations", c.svm.max_iterations}, {"tolerance", c.svm.tolerance}};
  const auto& s = c.synth.cohort;
  j["synth"] = {{"n_subjects", s.n_subjects},
                {"trials_per_subject", s.trials_per_subject},
                {"separability", s.separability},
                {"inter_subject_shift", s.inter_subject_shift},
                {"write_recordings", c.synth.write_recordings},
                {"recording_trials", c.synth.recording_trials}};
  return j.dump(2);
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace eegdecode
