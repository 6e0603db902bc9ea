#include "eegdecode/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "eegdecode/rng.hpp"
#include "eegdecode/split.hpp"

namespace eegdecode {

void EvalConfig::validate() const {
  if (outer_folds < 2) throw std::invalid_argument("outer_folds must be >= 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must lie in (0, 1)");
  }
  if (!(finetune_test_fraction > 0.0 && finetune_test_fraction < 1.0)) {
    throw std::invalid_argument("finetune_test_fraction must lie in (0, 1)");
  }
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] >= 0.0 && fractions[i] <= 1.0)) {
      throw std::invalid_argument("fine-tune fractions must lie in [0, 1]");
    }
    if (i > 0 && !(fractions[i] > fractions[i - 1])) {
      throw std::invalid_argument("fine-tune fractions must be strictly increasing");
    }
  }
}

namespace {

std::vector<int> labels_at(const EpochSet& es, const std::vector<std::size_t>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = es.labels[idx[i]];
  return out;
}

std::vector<std::size_t> pick(const std::vector<std::size_t>& base,
                              const std::vector<std::size_t>& positions) {
  std::vector<std::size_t> out(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) out[i] = base[positions[i]];
  return out;
}

/// Splits `pool` (indices into es) into training and validation parts.
void carve_validation(const EpochSet& es, const std::vector<std::size_t>& pool, double fraction,
                      std::uint64_t seed, std::vector<std::size_t>& train,
                      std::vector<std::size_t>& val) {
  const auto labels = labels_at(es, pool);
  const auto val_pos = stratified_sample(labels, fraction, seed);
  val = pick(pool, val_pos);
  train = pick(pool, complement(pool.size(), val_pos));
  require_disjoint(train, val, "train/validation");
}

std::vector<std::vector<std::size_t>> outer_folds(const EpochSet& subject, const EvalConfig& eval) {
  eval.validate();
  if (subject.n_trials() < eval.outer_folds) {
    throw std::invalid_argument("subject " + subject.subject_id + " has " +
                                std::to_string(subject.n_trials()) + " trials, fewer than " +
                                std::to_string(eval.outer_folds) + " folds");
  }
  return stratified_folds(subject.labels, eval.outer_folds, derive_seed(eval.seed, 0xF01D));
}

}  // namespace

std::vector<double> IntraResult::fold_accuracies() const {
  std::vector<double> out;
  for (const auto& f : folds) out.push_back(f.accuracy);
  return out;
}

double IntraResult::mean_accuracy() const { return mean(fold_accuracies()); }

IntraResult run_intra(const EpochSet& subject, const ArchConfig& arch, const TrainConfig& train,
                      const EvalConfig& eval) {
  const auto folds = outer_folds(subject, eval);
  IntraResult out;
  out.subject_id = subject.subject_id;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    FoldResult f;
    f.test = folds[k];
    const auto outer_train = complement(subject.n_trials(), f.test);
    carve_validation(subject, outer_train, eval.validation_fraction,
                     derive_seed(eval.seed, 0xFA11 + k), f.train, f.validation);
    require_disjoint(f.test, f.train, "intra test/train");
    require_disjoint(f.test, f.validation, "intra test/validation");

    TrainConfig tc = train;
    tc.seed = derive_seed(train.seed, 0x1000 + k);
    auto r = eegdecode::train(arch, subset(subject, f.train), subset(subject, f.validation), tc);
    const EpochSet test = subset(subject, f.test);
    f.accuracy = accuracy(predict(r.params, test), test.labels);
    f.history = std::move(r.history);
    out.folds.push_back(std::move(f));
  }
  return out;
}

IntraResult run_intra_svm(const EpochSet& subject, const SvmConfig& svm, const EvalConfig& eval) {
  const auto folds = outer_folds(subject, eval);
  const auto features = band_power_features(subject);
  IntraResult out;
  out.subject_id = subject.subject_id;
  for (std::size_t k = 0; k < folds.size(); ++k) {
    FoldResult f;
    f.test = folds[k];
    f.train = complement(subject.n_trials(), f.test);
    require_disjoint(f.test, f.train, "svm test/train");
    std::vector<std::vector<double>> xtr, xte;
    for (std::size_t i : f.train) xtr.push_back(features[i]);
    for (std::size_t i : f.test) xte.push_back(features[i]);
    SvmConfig cfg = svm;
    cfg.seed = derive_seed(svm.seed, 0x5000 + k);
    const auto model = svm_fit(xtr, labels_at(subject, f.train), cfg);
    f.accuracy = accuracy(svm_predict(model, xte), labels_at(subject, f.test));
    out.folds.push_back(std::move(f));
  }
  return out;
}

std::vector<InterModel> train_inter_models(const std::vector<EpochSet>& subjects,
                                           const ArchConfig& arch, const TrainConfig& train,
                                           const EvalConfig& eval) {
  eval.validate();
  if (subjects.size() < 2) throw std::invalid_argument("inter-subject protocols need >= 2 subjects");
  std::vector<InterModel> out;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    std::vector<EpochSet> others;
    for (std::size_t j = 0; j < subjects.size(); ++j) {
      if (j != s) others.push_back(subjects[j]);
    }
    const EpochSet pool = concatenate(others);
    std::vector<std::size_t> all(pool.n_trials());
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::size_t> tr, va;
    carve_validation(pool, all, eval.validation_fraction, derive_seed(eval.seed, 0x1A7E + s), tr, va);

    TrainConfig tc = train;
    tc.seed = derive_seed(train.seed, 0x2000 + s);
    auto r = eegdecode::train(arch, subset(pool, tr), subset(pool, va), tc);
    out.push_back({subjects[s].subject_id, std::move(r.params), std::move(r.history), pool.n_trials()});
  }
  return out;
}

InterBaseResult run_inter_base(const std::vector<EpochSet>& subjects, const ArchConfig& arch,
                               const TrainConfig& train, const EvalConfig& eval) {
  InterBaseResult out;
  out.models = train_inter_models(subjects, arch, train, eval);
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    out.subject_ids.push_back(subjects[s].subject_id);
    out.accuracies.push_back(accuracy(predict(out.models[s].params, subjects[s]), subjects[s].labels));
  }
  return out;
}

std::vector<double> InterFinetunedResult::accuracies_at(std::size_t fraction_index) const {
  std::vector<double> out;
  for (const auto& s : subjects) out.push_back(s.accuracies.at(fraction_index));
  return out;
}

InterFinetunedResult run_inter_finetuned(const std::vector<EpochSet>& subjects,
                                         const std::vector<double>& fractions,
                                         const ArchConfig& arch, const TrainConfig& train,
                                         const EvalConfig& eval,
                                         const std::vector<InterModel>* base_models) {
  EvalConfig ec = eval;
  ec.fractions = fractions;
  ec.validate();
  if (fractions.empty()) throw std::invalid_argument("no fine-tune fractions given");
  std::vector<InterModel> trained;
  if (!base_models) {
    trained = train_inter_models(subjects, arch, train, eval);
    base_models = &trained;
  }
  if (base_models->size() != subjects.size()) {
    throw std::invalid_argument("one base model per subject required");
  }

  InterFinetunedResult out;
  out.curve.fractions = fractions;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const EpochSet& subj = subjects[s];
    const ModelParams& base = (*base_models)[s].params;
    FinetuneSubject fs;
    fs.subject_id = subj.subject_id;
    fs.base_accuracy = accuracy(predict(base, subj), subj.labels);
    fs.test = stratified_sample(subj.labels, eval.finetune_test_fraction,
                                derive_seed(eval.seed, 0x7E57 + s));
    fs.pool = complement(subj.n_trials(), fs.test);
    require_disjoint(fs.pool, fs.test, "fine-tune pool/test");
    const EpochSet pool = subset(subj, fs.pool);
    const EpochSet test = subset(subj, fs.test);

    for (double fraction : fractions) {
      if (fraction == 0.0) {
        fs.accuracies.push_back(accuracy(predict(base, test), test.labels));
        fs.histories.emplace_back();
        continue;
      }
      TrainConfig tc = train;
      tc.seed = derive_seed(train.seed, 0x3000 + s);
      auto r = fine_tune(base, pool, fraction, tc);
      fs.accuracies.push_back(accuracy(predict(r.params, test), test.labels));
      fs.histories.push_back(std::move(r.history));
    }
    out.subjects.push_back(std::move(fs));
  }
  for (std::size_t f = 0; f < fractions.size(); ++f) {
    const auto acc = out.accuracies_at(f);
    out.curve.mean.push_back(mean(acc));
    out.curve.std.push_back(stddev(acc));
  }
  return out;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean of an empty list");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string format_mean_std(const std::vector<double>& accuracies) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%% ± %.2f%%", 100.0 * mean(accuracies),
                100.0 * stddev(accuracies));
  return buf;
}

EvalReport report(const std::vector<Condition>& conditions) {
  if (conditions.empty()) throw std::invalid_argument("report: no conditions");
  for (const auto& c : conditions) {
    if (c.subject_ids != conditions.front().subject_ids || c.accuracies.size() != c.subject_ids.size()) {
      throw std::invalid_argument("report: condition '" + c.name +
                                  "' does not list the same subjects as '" +
                                  conditions.front().name + "'");
    }
  }
  EvalReport r;
  r.conditions = conditions;
  for (const auto& c : conditions) r.lines.push_back(c.name + ": " + format_mean_std(c.accuracies));
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    for (std::size_t j = i + 1; j < conditions.size(); ++j) {
      PairwiseTest t{conditions[i].name, conditions[j].name, std::nullopt, ""};
      try {
        t.result = wilcoxon_signed_rank(conditions[i].accuracies, conditions[j].accuracies);
        char buf[128];
        std::snprintf(buf, sizeof buf, "W=%.1f p=%.4f", t.result->w, t.result->p_value);
        r.lines.push_back(t.a + " vs " + t.b + ": " + buf);
      } catch (const std::invalid_argument& e) {
        t.error = e.what();
        r.lines.push_back(t.a + " vs " + t.b + ": " + t.error);
      }
      r.pairwise.push_back(std::move(t));
    }
  }
  return r;
}

}  // namespace eegdecode
