// eegdecode: command-line front end for the decoding pipeline.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eegdecode/checkpoint.hpp"
#include "eegdecode/config.hpp"
#include "eegdecode/evaluation.hpp"
#include "eegdecode/io.hpp"
#include "eegdecode/preprocess.hpp"
#include "eegdecode/results.hpp"
#include "eegdecode/synthgen.hpp"

namespace fs = std::filesystem;
using namespace eegdecode;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsageError = 2,
  kConfigError = 3,
  kInputError = 4,
  kTrainingError = 5,
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite losses are reported with the protocol and subject in play.
template <class F>
auto with_context(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const NonFiniteLossError& e) {
    throw TrainingFailure(where + ": " + e.what());
  }
}

struct Run {
  std::string command;
  RunConfig cfg;
  fs::path out;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  void log(const std::string& msg) const { std::cerr << "[" << command << "] " << msg << '\n'; }

  fs::path output(const std::string& name) {
    outputs.push_back(name);
    return out / name;
  }

  void finish() {
    const fs::path m = out / ("manifest-" + command + ".json");
    write_json(manifest_json(command, cfg, inputs, outputs), m);
    log("wrote " + m.string());
  }
};

void require_protocol(const RunConfig& cfg, const std::string& wanted) {
  if (cfg.protocol != "auto" && cfg.protocol != wanted) {
    throw ConfigError("protocol is '" + cfg.protocol + "' but this command runs '" + wanted + "'", 0);
  }
}

void require_files(const std::vector<std::string>& paths, const char* key, std::size_t at_least) {
  if (paths.size() < at_least) {
    throw InputError(std::string("data.") + key + " needs at least " + std::to_string(at_least) +
                     " file(s), got " + std::to_string(paths.size()));
  }
  for (const auto& p : paths) {
    if (!fs::is_regular_file(p)) throw InputError("input file not found: " + p);
  }
}

std::vector<EpochSet> load_subjects(Run& run) {
  require_files(run.cfg.data.epochs, "epochs", 1);
  std::vector<EpochSet> subjects;
  for (const auto& p : run.cfg.data.epochs) {
    subjects.push_back(load_epochs(p));
    run.inputs.push_back(p);
    run.log("loaded " + p + " (" + std::to_string(subjects.back().n_trials()) + " trials)");
  }
  return subjects;
}

std::vector<Json> load_results(Run& run) {
  require_files(run.cfg.data.results, "results", 1);
  std::vector<Json> docs;
  for (const auto& p : run.cfg.data.results) {
    docs.push_back(read_json(p));
    run.inputs.push_back(p);
  }
  return docs;
}

Json profile_json(const SubjectProfile& p) {
  return Json{{"subject", p.subject_id},
              {"seed", p.seed},
              {"p1_amplitude_uv", p.p1_amplitude_uv},
              {"p2_amplitude_uv", p.p2_amplitude_uv},
              {"alpha_gain_uv", p.alpha_gain_uv},
              {"gamma_gain_uv", p.gamma_gain_uv},
              {"amplitude_scale", p.amplitude_scale},
              {"latency_shift_ms", p.latency_shift_ms},
              {"noise_level_uv", p.noise_level_uv},
              {"topography", p.topography},
              {"p1_center_ms", p.p1_center_ms},
              {"p1_width_ms", p.p1_width_ms},
              {"p2_center_ms", p.p2_center_ms},
              {"p2_width_ms", p.p2_width_ms},
              {"jitter_ms", p.jitter_ms},
              {"trial_amplitude_sd", p.trial_amplitude_sd},
              {"alpha_hz", p.alpha_hz},
              {"gamma_hz", p.gamma_hz},
              {"burst_start_ms", p.burst_start_ms},
              {"burst_end_ms", p.burst_end_ms},
              {"sample_rate_hz", p.sample_rate_hz},
              {"window_start_ms", p.window_start_ms},
              {"window_end_ms", p.window_end_ms}};
}

void cmd_synth(Run& run) {
  const auto& sc = run.cfg.synth;
  const Cohort cohort = generate_cohort(sc.cohort);
  Json profiles = Json::array();
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const auto& prof = cohort.profiles[i];
    save_epochs(cohort.subjects[i], run.output(prof.subject_id + ".eegep"));
    if (sc.write_recordings) {
      save_recording(generate_recording(prof, sc.recording_trials),
                     run.output(prof.subject_id + ".eegrec"));
    }
    profiles.push_back(profile_json(prof));
    run.log("generated " + prof.subject_id);
  }
  write_json(Json{{"cohort",
                   {{"n_subjects", sc.cohort.n_subjects},
                    {"trials_per_subject", sc.cohort.trials_per_subject},
                    {"separability", sc.cohort.separability},
                    {"inter_subject_shift", sc.cohort.inter_subject_shift},
                    {"seed", sc.cohort.seed}}},
                  {"profiles", profiles}},
             run.output("profiles.json"));
}

void cmd_preprocess(Run& run) {
  require_files(run.cfg.data.recordings, "recordings", 1);
  Json reports = Json::array();
  for (const auto& p : run.cfg.data.recordings) {
    run.inputs.push_back(p);
    const auto rec = load_recording(p);
    const std::string subject = fs::path(p).stem().string();
    auto [es, rep] = preprocess(rec, run.cfg.preprocess, subject);
    save_epochs(es, run.output(subject + ".eegep"));
    reports.push_back({{"recording", p},
                       {"subject", subject},
                       {"events", rep.events},
                       {"dropped_at_edges", rep.dropped_at_edges},
                       {"rejected", rep.rejected},
                       {"kept", rep.kept},
                       {"class_counts", es.class_counts()}});
    run.log(subject + ": kept " + std::to_string(rep.kept) + " of " + std::to_string(rep.events) +
            " events");
  }
  write_json(Json{{"recordings", reports}}, run.output("preprocess.json"));
}

void cmd_train_intra(Run& run) {
  require_protocol(run.cfg, "intra");
  const auto subjects = load_subjects(run);
  std::vector<IntraResult> net, svm;
  for (const auto& s : subjects) {
    net.push_back(with_context("intra-subject training, subject " + s.subject_id,
                               [&] { return run_intra(s, run.cfg.arch, run.cfg.train, run.cfg.eval); }));
    svm.push_back(run_intra_svm(s, run.cfg.svm, run.cfg.eval));
    run.log(s.subject_id + ": network " + format_mean_std(net.back().fold_accuracies()) + ", svm " +
            format_mean_std(svm.back().fold_accuracies()));
  }
  write_json(intra_results_json(net, svm), run.output("intra.json"));
}

void cmd_train_inter(Run& run) {
  require_protocol(run.cfg, "inter");
  const auto subjects = load_subjects(run);
  if (subjects.size() < 2) throw InputError("inter-subject training needs at least 2 subjects");
  const auto r = with_context("inter-subject training", [&] {
    return run_inter_base(subjects, run.cfg.arch, run.cfg.train, run.cfg.eval);
  });
  for (std::size_t s = 0; s < r.models.size(); ++s) {
    save_checkpoint(r.models[s].params, run.output("inter_" + r.models[s].held_out + ".ckpt"));
    run.log(r.subject_ids[s] + ": base accuracy " + format_mean_std({r.accuracies[s]}));
  }
  write_json(inter_base_json(r), run.output("inter_base.json"));
}

void cmd_finetune(Run& run) {
  require_protocol(run.cfg, "finetune");
  const auto subjects = load_subjects(run);
  if (subjects.size() < 2) throw InputError("fine-tuning needs at least 2 subjects");
  const auto r = with_context("fine-tuning sweep", [&] {
    return run_inter_finetuned(subjects, run.cfg.eval.fractions, run.cfg.arch, run.cfg.train,
                               run.cfg.eval);
  });
  for (std::size_t f = 0; f < r.curve.fractions.size(); ++f) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "fraction %g: ", r.curve.fractions[f]);
    run.log(buf + format_mean_std(r.accuracies_at(f)));
  }
  write_json(finetune_json(r), run.output("finetune.json"));
}

void cmd_stats(Run& run) {
  const auto docs = load_results(run);
  const auto rep = report(conditions_from_results(docs));
  for (const auto& l : rep.lines) std::cout << l << '\n';
  write_json(report_json(rep), run.output("stats.json"));
}

void cmd_export(Run& run) {
  const auto docs = load_results(run);
  const auto files = export_series(docs);
  if (files.empty()) throw InputError("no exportable series in the given results");
  fs::create_directories(run.out / "export");
  for (const auto& f : files) write_text(f.content, run.output("export/" + f.name));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG decoding pipeline: synthetic cohorts, preprocessing, training and statistics"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("-c,--config", config_path, "JSON configuration document")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Global seed; overrides the config");
  app.add_option("-o,--out", out_dir, "Output directory; overrides the config");

  struct Sub {
    const char* name;
    const char* help;
    void (*fn)(Run&);
  };
  const Sub subs[] = {
      {"synth", "Generate a synthetic cohort (.eegep, optional .eegrec)", cmd_synth},
      {"preprocess", "Turn continuous recordings into model-ready epochs", cmd_preprocess},
      {"train-intra", "Intra-subject cross-validation, network and SVM", cmd_train_intra},
      {"train-inter", "Leave-one-subject-out base models", cmd_train_inter},
      {"finetune-sweep", "Fine-tune base models on fractions of each held-out subject",
       cmd_finetune},
      {"stats", "Summaries and pairwise Wilcoxon tests over results files", cmd_stats},
      {"export", "Plot-ready CSV series from results files", cmd_export},
  };
  for (const auto& s : subs) {
    app.add_subcommand(s.name, s.help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsageError;
  }

  Run run;
  try {
    run.cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) run.cfg.seed = *seed;
    run.cfg.apply_seed();
    if (!out_dir.empty()) run.cfg.output_dir = out_dir;
    run.cfg.validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error";
    if (!config_path.empty()) std::cerr << " in " << config_path;
    if (e.line() > 0) std::cerr << " at line " << e.line();
    std::cerr << ": " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  run.out = run.cfg.output_dir;

  for (const auto& s : subs) {
    if (!app.got_subcommand(s.name)) continue;
    run.command = s.name;
    if (!config_path.empty()) run.inputs.push_back(config_path);
    try {
      fs::create_directories(run.out);
      s.fn(run);
      run.finish();
      return kOk;
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kConfigError;
    } catch (const InputError& e) {
      std::cerr << "input error: " << e.what() << '\n';
      return kInputError;
    } catch (const FormatError& e) {
      std::cerr << "input error: " << e.what() << '\n';
      return kInputError;
    } catch (const TrainingFailure& e) {
      std::cerr << "training error: " << e.what() << '\n';
      return kTrainingError;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kFailure;
    }
  }
  return kUsageError;
}
