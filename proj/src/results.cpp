#include "eegdecode/results.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <stdexcept>

#include "eegdecode/checkpoint.hpp"
#include "eegdecode/io.hpp"

namespace eegdecode {

namespace {

Json header(const char* kind) {
  return Json{{"format", "eegdecode-results"}, {"version", kResultsFormatVersion}, {"kind", kind}};
}

std::string fraction_label(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", f);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

Json intra_subject(const IntraResult& r) {
  Json folds = Json::array();
  for (const auto& f : r.folds) {
    Json j{{"accuracy", f.accuracy},
           {"train_trials", f.train.size()},
           {"validation_trials", f.validation.size()},
           {"test", f.test}};
    if (f.history.epochs() > 0) {
      j["best_epoch"] = f.history.best_epoch;
      j["history"] = to_json(f.history);
    }
    folds.push_back(std::move(j));
  }
  return Json{{"subject", r.subject_id},
              {"fold_accuracies", r.fold_accuracies()},
              {"mean_accuracy", r.mean_accuracy()},
              {"folds", folds}};
}

void check_doc(const Json& d) {
  if (!d.is_object() || d.value("format", "") != "eegdecode-results") {
    throw std::invalid_argument("not an eegdecode results document");
  }
  if (d.value("version", 0) != kResultsFormatVersion) {
    throw std::invalid_argument("unsupported results version " + d.value("version", Json()).dump());
  }
}

}  // namespace

Json to_json(const TrainHistory& h) {
  return Json{{"train_loss", h.train_loss},
              {"train_acc", h.train_acc},
              {"val_acc", h.val_acc},
              {"lr", h.lr},
              {"initial_val_acc", h.initial_val_acc},
              {"best_epoch", h.best_epoch}};
}

Json intra_results_json(const std::vector<IntraResult>& network,
                        const std::vector<IntraResult>& svm) {
  Json j = header("intra");
  Json subjects = Json::array();
  std::vector<double> means;
  for (const auto& r : network) {
    subjects.push_back(intra_subject(r));
    means.push_back(r.mean_accuracy());
  }
  j["subjects"] = subjects;
  j["summary"] = {{"mean", mean(means)}, {"std", stddev(means)}, {"text", format_mean_std(means)}};
  if (!svm.empty()) {
    Json s = Json::array();
    std::vector<double> sm;
    for (const auto& r : svm) {
      s.push_back(intra_subject(r));
      sm.push_back(r.mean_accuracy());
    }
    j["svm_subjects"] = s;
    j["svm_summary"] = {{"mean", mean(sm)}, {"std", stddev(sm)}, {"text", format_mean_std(sm)}};
  }
  return j;
}

Json inter_base_json(const InterBaseResult& r) {
  Json j = header("inter_base");
  Json subjects = Json::array();
  for (std::size_t s = 0; s < r.subject_ids.size(); ++s) {
    Json e{{"subject", r.subject_ids[s]}, {"accuracy", r.accuracies[s]}};
    if (s < r.models.size()) {
      e["pool_trials"] = r.models[s].pool_trials;
      e["history"] = to_json(r.models[s].history);
    }
    subjects.push_back(std::move(e));
  }
  j["subjects"] = subjects;
  j["summary"] = {{"mean", mean(r.accuracies)},
                  {"std", stddev(r.accuracies)},
                  {"text", format_mean_std(r.accuracies)}};
  return j;
}

Json finetune_json(const InterFinetunedResult& r) {
  Json j = header("finetune");
  j["fractions"] = r.curve.fractions;
  j["curve"] = {{"mean", r.curve.mean}, {"std", r.curve.std}};
  Json subjects = Json::array();
  for (const auto& s : r.subjects) {
    Json hist = Json::array();
    for (const auto& h : s.histories) hist.push_back(h.epochs() ? to_json(h) : Json());
    subjects.push_back({{"subject", s.subject_id},
                        {"base_accuracy", s.base_accuracy},
                        {"test", s.test},
                        {"accuracies", s.accuracies},
                        {"histories", hist}});
  }
  j["subjects"] = subjects;
  Json text = Json::array();
  for (std::size_t f = 0; f < r.curve.fractions.size(); ++f) {
    text.push_back(fraction_label(r.curve.fractions[f]) + ": " + format_mean_std(r.accuracies_at(f)));
  }
  j["summary"] = {{"text", text}};
  return j;
}

Json report_json(const EvalReport& r) {
  Json j = header("stats");
  Json conds = Json::array();
  for (const auto& c : r.conditions) {
    conds.push_back({{"name", c.name},
                     {"subjects", c.subject_ids},
                     {"accuracies", c.accuracies},
                     {"mean", mean(c.accuracies)},
                     {"std", stddev(c.accuracies)},
                     {"text", format_mean_std(c.accuracies)}});
  }
  j["conditions"] = conds;
  Json pairs = Json::array();
  for (const auto& p : r.pairwise) {
    Json e{{"a", p.a}, {"b", p.b}};
    if (p.result) {
      e["w"] = p.result->w;
      e["w_plus"] = p.result->w_plus;
      e["w_minus"] = p.result->w_minus;
      e["n_nonzero"] = p.result->n_nonzero;
      e["p_value"] = p.result->p_value;
      e["significant_at_0.05"] = p.result->p_value < 0.05;
    } else {
      e["error"] = p.error;
    }
    pairs.push_back(std::move(e));
  }
  j["pairwise"] = pairs;
  j["lines"] = r.lines;
  return j;
}

std::vector<Condition> conditions_from_results(const std::vector<Json>& docs) {
  std::vector<Condition> out;
  auto subjects_of = [](const Json& arr, const char* key) {
    Condition c;
    for (const auto& s : arr) {
      c.subject_ids.push_back(s.at("subject").get<std::string>());
      c.accuracies.push_back(s.at(key).get<double>());
    }
    return c;
  };
  for (const auto& d : docs) {
    check_doc(d);
    const std::string kind = d.at("kind");
    if (kind == "intra") {
      Condition c = subjects_of(d.at("subjects"), "mean_accuracy");
      c.name = "intra";
      out.push_back(c);
      if (d.contains("svm_subjects")) {
        Condition s = subjects_of(d.at("svm_subjects"), "mean_accuracy");
        s.name = "svm_intra";
        out.push_back(s);
      }
    } else if (kind == "inter_base") {
      Condition c = subjects_of(d.at("subjects"), "accuracy");
      c.name = "inter_base";
      out.push_back(c);
    } else if (kind == "finetune") {
      const auto fractions = d.at("fractions").get<std::vector<double>>();
      for (std::size_t f = 0; f < fractions.size(); ++f) {
        Condition c;
        c.name = "finetuned@" + fraction_label(fractions[f]);
        for (const auto& s : d.at("subjects")) {
          c.subject_ids.push_back(s.at("subject").get<std::string>());
          c.accuracies.push_back(s.at("accuracies").at(f).get<double>());
        }
        out.push_back(c);
      }
    }
  }
  return out;
}

std::vector<ExportFile> export_series(const std::vector<Json>& docs) {
  std::vector<ExportFile> files;
  const auto conditions = conditions_from_results(docs);
  if (!conditions.empty()) {
    // Subject x condition table (bar charts of per-subject accuracy).
    std::map<std::string, std::map<std::string, double>> table;
    std::vector<std::string> subjects;
    for (const auto& c : conditions) {
      for (std::size_t i = 0; i < c.subject_ids.size(); ++i) {
        if (!table.count(c.subject_ids[i])) subjects.push_back(c.subject_ids[i]);
        table[c.subject_ids[i]][c.name] = c.accuracies[i];
      }
    }
    std::ostringstream csv;
    csv << "subject";
    for (const auto& c : conditions) csv << ',' << c.name;
    csv << '\n';
    for (const auto& s : subjects) {
      csv << s;
      for (const auto& c : conditions) {
        csv << ',';
        if (auto it = table[s].find(c.name); it != table[s].end()) csv << num(it->second);
      }
      csv << '\n';
    }
    files.push_back({"subject_accuracy.csv", csv.str()});

    std::ostringstream summary;
    summary << "condition,mean,std\n";
    for (const auto& c : conditions) {
      summary << c.name << ',' << num(mean(c.accuracies)) << ',' << num(stddev(c.accuracies)) << '\n';
    }
    files.push_back({"condition_summary.csv", summary.str()});
  }
  for (const auto& d : docs) {
    if (d.at("kind") != "finetune") continue;
    const auto fractions = d.at("fractions").get<std::vector<double>>();
    std::ostringstream sweep;
    sweep << "fraction,mean,std\n";
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      sweep << num(fractions[f]) << ',' << num(d.at("curve").at("mean").at(f).get<double>()) << ','
            << num(d.at("curve").at("std").at(f).get<double>()) << '\n';
    }
    files.push_back({"finetune_sweep.csv", sweep.str()});

    // Validation accuracy per epoch while fine-tuning; epoch 0 is the base model.
    std::ostringstream hist;
    hist << "subject,fraction,epoch,val_acc,lr\n";
    for (const auto& s : d.at("subjects")) {
      const auto& hs = s.at("histories");
      for (std::size_t f = 0; f < hs.size(); ++f) {
        if (hs[f].is_null()) continue;
        const std::string subj = s.at("subject");
        hist << subj << ',' << num(fractions[f]) << ",0," << num(hs[f].at("initial_val_acc").get<double>())
             << ",\n";
        const auto val = hs[f].at("val_acc").get<std::vector<double>>();
        const auto lr = hs[f].at("lr").get<std::vector<double>>();
        for (std::size_t e = 0; e < val.size(); ++e) {
          hist << subj << ',' << num(fractions[f]) << ',' << e + 1 << ',' << num(val[e]) << ','
               << lr[e] << '\n';
        }
      }
    }
    files.push_back({"finetune_history.csv", hist.str()});
  }
  return files;
}

Json manifest_json(const std::string& command, const RunConfig& cfg,
                   const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs) {
  return Json{{"command", command},
              {"seed", cfg.seed},
              {"config_hash", config_hash(cfg)},
              {"config", Json::parse(canonical_config(cfg))},
              {"versions",
               {{"tool", kToolVersion},
                {"results_format", kResultsFormatVersion},
                {"epochs_format", kEpochFormatVersion},
                {"recording_format", kRecordingFormatVersion},
                {"checkpoint_format", kCheckpointFormatVersion}}},
              {"inputs", inputs},
              {"outputs", outputs}};
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_json(const Json& j, const std::filesystem::path& path) { write_text(j.dump(2) + "\n", path); }

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace eegdecode
