#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "eegdecode/checkpoint.hpp"
#include "eegdecode/config.hpp"
#include "eegdecode/io.hpp"
#include "eegdecode/results.hpp"
#include "test_util.hpp"

#ifndef EEGDECODE_CLI
#error "EEGDECODE_CLI must name the command-line binary"
#endif

using namespace eegdecode;
namespace fs = std::filesystem;

namespace {

void put(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Runs the binary with stdout/stderr captured into `log`; returns the exit status.
int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(EEGDECODE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t config_error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return 999;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults from an empty document") {
    const auto c = parse_config("{}");
    CHECK(c.arch == ArchConfig{});
    CHECK(c.train == TrainConfig{});
    CHECK(c.protocol == "auto");
    CHECK(c.output_dir == "out");
  }
  SUBCASE("stanzas and comments") {
    const auto c = parse_config(R"({
  // global
  "seed": 5,
  "arch": {"lstm_hidden": 8},
  "train": {"max_epochs": 3, "lr_initial": 0.01, "lr_reduced": 0.001},
  "eval": {"outer_folds": 4, "fractions": [0, 0.5]},
  "synth": {"n_subjects": 3, "separability": 1.5},
  "data": {"epochs": ["a.eegep", "b.eegep"]},
  "preprocess": {"bandpass_transition": {"low_hz": 0.8}}
})");
    CHECK(c.seed == 5);
    CHECK(c.arch.lstm_hidden == 8);
    CHECK(c.train.max_epochs == 3);
    CHECK(c.eval.outer_folds == 4);
    CHECK(c.eval.fractions == std::vector<double>{0.0, 0.5});
    CHECK(c.synth.cohort.n_subjects == 3);
    CHECK(c.synth.cohort.separability == 1.5);
    CHECK(c.data.epochs.size() == 2);
    CHECK(c.preprocess.bandpass_transition.low_hz == 0.8);
  }
  SUBCASE("errors carry line numbers") {
    CHECK(config_error_line("{\n  \"seed\": 1,\n  \"bogus\": 2\n}") == 3);
    CHECK(config_error_line("{\n  \"arch\": {\n    \"lstm_hidden\": 8,\n    \"width\": 3\n  }\n}") == 4);
    CHECK(config_error_line("{\n  \"train\": {\n    \"max_epochs\": \"ten\"\n  }\n}") == 3);
    CHECK(config_error_line("{\n  \"seed\": 1,\n  \"arch\": {\n}") >= 3);
  }
  SUBCASE("validation") {
    auto c = parse_config(R"({"protocol": "sideways"})");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = parse_config(R"({"eval": {"outer_folds": 1}})");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = parse_config(R"({"svm": {"c": 0}})");
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  SUBCASE("seed propagation, canonical text and hash") {
    auto a = parse_config(R"({"seed": 7})");
    a.apply_seed();
    auto b = parse_config(R"({"seed": 8})");
    b.apply_seed();
    CHECK(a.train.seed != b.train.seed);
    CHECK(a.train.seed != a.eval.seed);
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a).size() == 16);
    // The canonical form parses back to the same configuration.
    auto again = parse_config(canonical_config(a));
    again.apply_seed();
    CHECK(canonical_config(again) == canonical_config(a));
    CHECK(config_hash(again) == config_hash(a));
    // Key order and whitespace do not matter.
    auto x = parse_config(R"({"seed": 1, "arch": {"lstm_hidden": 8}})");
    auto y = parse_config("{ \"arch\" : { \"lstm_hidden\" : 8 } ,\n \"seed\" : 1 }");
    CHECK(config_hash(x) == config_hash(y));
  }
  SUBCASE("load_config reports missing files") {
    CHECK_THROWS(load_config("/nonexistent/config.json"));
  }
  SUBCASE("the shipped example spells out the defaults") {
    auto c = load_config(fs::path(EEGDECODE_SOURCE_DIR) / "configs" / "example.jsonc");
    c.apply_seed();
    c.validate();
    RunConfig d;
    d.seed = 1;
    d.apply_seed();
    CHECK(canonical_config(c) == canonical_config(d));
  }
}

TEST_CASE("checkpoint") {
  testutil::TempDir dir("ckpt");
  ArchConfig a;
  a.lstm_hidden = 5;
  auto p = init_params(a, 3);
  p.bn_spatial.running_mean.data[0] = 0.125;
  const auto path = dir / "m.ckpt";
  save_checkpoint(p, path);
  CHECK(load_checkpoint(path) == p);

  const std::string bytes = testutil::slurp(path);
  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    put(dir / "bad.ckpt", b);
    CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), FormatError);
  }
  SUBCASE("truncated") {
    put(dir / "short.ckpt", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), FormatError);
  }
  SUBCASE("trailing bytes") {
    put(dir / "long.ckpt", bytes + "xx");
    CHECK_THROWS_AS(load_checkpoint(dir / "long.ckpt"), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS(load_checkpoint(dir / "none.ckpt"));
  }
}

TEST_CASE("results documents") {
  const std::vector<std::string> ids = {"S01", "S02"};
  IntraResult r1{"S01", {}}, r2{"S02", {}};
  for (double acc : {0.5, 0.7}) {
    FoldResult f;
    f.test = {0, 1};
    f.accuracy = acc;
    r1.folds.push_back(f);
    f.accuracy = acc + 0.1;
    r2.folds.push_back(f);
  }
  auto s1 = r1, s2 = r2;
  for (auto* s : {&s1, &s2}) {
    for (auto& f : s->folds) f.accuracy -= 0.2;
  }
  const Json intra = intra_results_json({r1, r2}, {s1, s2});
  CHECK(intra["format"] == "eegdecode-results");
  CHECK(intra["version"] == kResultsFormatVersion);
  CHECK(intra["kind"] == "intra");

  InterBaseResult base;
  base.subject_ids = ids;
  base.accuracies = {0.4, 0.45};
  const Json inter = inter_base_json(base);

  const auto conds = conditions_from_results({intra, inter});
  REQUIRE(conds.size() == 3);
  CHECK(conds[0].name == "intra");
  CHECK(conds[0].accuracies[0] == doctest::Approx(0.6));
  CHECK(conds[0].accuracies[1] == doctest::Approx(0.7));
  CHECK(conds[1].name == "svm_intra");
  CHECK(conds[2].name == "inter_base");
  CHECK(conds[2].subject_ids == ids);

  const auto rep = report(conds);
  CHECK(rep.pairwise.size() == 3);
  const Json rj = report_json(rep);
  CHECK(rj["kind"] == "stats");

  const auto files = export_series({intra, inter});
  bool found = false;
  for (const auto& f : files) {
    if (f.name == "subject_accuracy.csv") {
      found = true;
      CHECK(f.content.rfind("subject,intra,svm_intra,inter_base\n", 0) == 0);
    }
  }
  CHECK(found);

  testutil::TempDir dir("results");
  write_json(intra, dir / "intra.json");
  CHECK(read_json(dir / "intra.json") == intra);
  const std::string text = testutil::slurp(dir / "intra.json");
  CHECK(text.back() == '\n');

  RunConfig cfg;
  cfg.seed = 3;
  const Json m = manifest_json("stats", cfg, {"a.json"}, {"stats.json"});
  CHECK(m["command"] == "stats");
  CHECK(m["seed"] == 3);
  CHECK(m["config_hash"] == config_hash(cfg));
  CHECK(m["inputs"][0] == "a.json");
}

TEST_CASE("command line") {
  testutil::TempDir dir("cli");
  const fs::path out = dir.path / "out";
  const fs::path log = dir / "log.txt";
  const std::string subj1 = (out / "S01.eegep").string();
  const std::string subj2 = (out / "S02.eegep").string();
  const std::string common = R"(
  "seed": 11,
  "output_dir": ")" + out.string() + R"(",
  "synth": {"n_subjects": 2, "trials_per_subject": 90},
  "arch": {"n_temporal_filters": 4, "lstm_hidden": 6},
  "train": {"max_epochs": 2, "batch_size": 16, "lr_initial": 0.01, "lr_reduced": 0.001},
  "eval": {"outer_folds": 3, "fractions": [0, 0.1, 0.2, 0.4]},
  "data": {"epochs": [")" + subj1 + R"(", ")" + subj2 + R"("],
           "results": [")" + (out / "intra.json").string() + R"(", ")" +
                             (out / "finetune.json").string() + R"("]})";
  const fs::path cfg = dir / "run.json";
  put(cfg, "{" + common + "\n}\n");
  const std::string c = "-c " + cfg.string();

  REQUIRE(cli(c + " synth", log) == 0);
  CHECK(fs::exists(subj1));
  CHECK(fs::exists(out / "profiles.json"));
  CHECK(fs::exists(out / "manifest-synth.json"));
  CHECK(load_epochs(subj1).n_trials() == 90);

  REQUIRE(cli(c + " train-intra", log) == 0);
  const Json intra = read_json(out / "intra.json");
  CHECK(intra["kind"] == "intra");
  CHECK(intra["subjects"].size() == 2);
  CHECK(intra["subjects"][0]["fold_accuracies"].size() == 3);
  const std::string first = testutil::slurp(out / "intra.json");
  const std::string first_manifest = testutil::slurp(out / "manifest-train-intra.json");

  // Reruns are byte-identical.
  REQUIRE(cli(c + " train-intra", log) == 0);
  CHECK(testutil::slurp(out / "intra.json") == first);
  CHECK(testutil::slurp(out / "manifest-train-intra.json") == first_manifest);

  REQUIRE(cli(c + " finetune-sweep", log) == 0);
  const Json ft = read_json(out / "finetune.json");
  CHECK(ft["fractions"].size() == 4);
  CHECK(ft["curve"]["mean"].size() == 4);

  REQUIRE(cli(c + " stats", log) == 0);
  const std::string stats_out = testutil::slurp(log);
  CHECK(stats_out.find("intra: ") != std::string::npos);
  CHECK(fs::exists(out / "stats.json"));

  REQUIRE(cli(c + " export", log) == 0);
  CHECK(fs::exists(out / "export" / "finetune_sweep.csv"));
  CHECK(fs::exists(out / "export" / "subject_accuracy.csv"));

  SUBCASE("train-inter writes one checkpoint per subject") {
    REQUIRE(cli(c + " train-inter", log) == 0);
    const auto m = load_checkpoint(out / "inter_S01.ckpt");
    CHECK(m.arch.lstm_hidden == 6);
    CHECK(read_json(out / "inter_base.json")["kind"] == "inter_base");
  }
  SUBCASE("protocol guard") {
    const fs::path guarded = dir / "guarded.json";
    put(guarded, "{" + common + ",\n  \"protocol\": \"inter\"\n}\n");
    CHECK(cli("-c " + guarded.string() + " train-intra", log) == 3);
  }
  SUBCASE("exit codes") {
    CHECK(cli("", log) == 2);
    CHECK(cli(c + " no-such-command", log) == 2);
    const fs::path bad = dir / "bad.json";
    put(bad, "{\n  \"seed\": 1,\n  \"colour\": 2\n}\n");
    CHECK(cli("-c " + bad.string() + " synth", log) == 3);
    CHECK(testutil::slurp(log).find("line 3") != std::string::npos);
    const fs::path missing = dir / "missing.json";
    put(missing, "{\"output_dir\": \"" + out.string() + "\", \"data\": {\"epochs\": [\"" +
                     (dir.path / "nope.eegep").string() + "\"]}}");
    CHECK(cli("-c " + missing.string() + " train-intra", log) == 4);
    const fs::path garbage = dir / "garbage.eegep";
    put(garbage, "not an epoch file");
    put(missing, "{\"output_dir\": \"" + out.string() + "\", \"data\": {\"epochs\": [\"" +
                     garbage.string() + "\"]}}");
    CHECK(cli("-c " + missing.string() + " train-intra", log) == 4);
    const fs::path blowup = dir / "blowup.json";
    put(blowup, "{" + common + ",\n  \"protocol\": \"intra\"\n}\n");
    std::string text = testutil::slurp(blowup);
    text.replace(text.find("\"lr_initial\": 0.01"), 18, "\"lr_initial\": 1e300");
    put(blowup, text);
    CHECK(cli("-c " + blowup.string() + " train-intra", log) == 5);
    CHECK(testutil::slurp(log).find("subject S01") != std::string::npos);
  }
  SUBCASE("preprocess turns recordings into model epochs") {
    const fs::path raw = dir.path / "raw";
    const fs::path prep = dir.path / "prep";
    const fs::path rc = dir / "rec.json";
    put(rc, "{\n  \"seed\": 11,\n  \"output_dir\": \"" + raw.string() +
                "\",\n  \"synth\": {\"n_subjects\": 2, \"trials_per_subject\": 9, \"write_recordings\": true, "
                "\"recording_trials\": 12},\n  \"data\": {\"recordings\": [\"" +
                (raw / "S01.eegrec").string() + "\"]}\n}\n");
    REQUIRE(cli("-c " + rc.string() + " synth", log) == 0);
    REQUIRE(fs::exists(raw / "S01.eegrec"));
    REQUIRE(cli("-c " + rc.string() + " -o " + prep.string() + " preprocess", log) == 0);
    const auto es = load_epochs(prep / "S01.eegep");
    CHECK(es.channels == kOccipitalChannels);
    CHECK(es.n_time == 256);
    CHECK(es.sample_rate_hz == 256.0);
    const Json rep = read_json(prep / "preprocess.json")["recordings"][0];
    CHECK(rep["events"] == 12);
    CHECK(rep["kept"] == es.n_trials());
    std::size_t total = 0;
    for (const auto& n : rep["class_counts"]) total += n.get<std::size_t>();
    CHECK(total == es.n_trials());
  }
  SUBCASE("seed override changes the data") {
    const fs::path other = dir.path / "other";
    REQUIRE(cli(c + " --seed 12 -o " + other.string() + " synth", log) == 0);
    CHECK(testutil::slurp(other / "S01.eegep") != testutil::slurp(subj1));
    CHECK(read_json(other / "manifest-synth.json")["seed"] == 12);
  }
}
