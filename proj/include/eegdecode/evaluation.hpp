#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eegdecode/baseline.hpp"
#include "eegdecode/data.hpp"
#include "eegdecode/network.hpp"
#include "eegdecode/training.hpp"
#include "eegdecode/wilcoxon.hpp"

namespace eegdecode {

struct EvalConfig {
  std::size_t outer_folds = 10;
  /// Share of each training portion held out for checkpoint selection and the lr rule.
  double validation_fraction = 1.0 / 9.0;
  std::vector<double> fractions = {0.0, 0.1, 0.2, 0.4};
  /// Per held-out subject: share kept as the fixed fine-tune test set.
  double finetune_test_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const EvalConfig&) const = default;
};

struct FoldResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  double accuracy = 0.0;
  TrainHistory history;
};

struct IntraResult {
  std::string subject_id;
  std::vector<FoldResult> folds;
  std::vector<double> fold_accuracies() const;
  double mean_accuracy() const;
};

/// K stratified outer folds; inside each, a stratified validation share of the
/// outer-train portion drives checkpoint selection. Test trials are asserted
/// disjoint from both training and validation indices.
IntraResult run_intra(const EpochSet& subject, const ArchConfig& arch, const TrainConfig& train,
                      const EvalConfig& eval);

/// Same outer folds with the band-power SVM fit on each full outer-train portion.
IntraResult run_intra_svm(const EpochSet& subject, const SvmConfig& svm, const EvalConfig& eval);

struct InterModel {
  std::string held_out;
  ModelParams params;
  TrainHistory history;
  std::size_t pool_trials = 0;
};

/// One model per held-out subject, trained on all other subjects with a
/// stratified validation share drawn from that pool.
std::vector<InterModel> train_inter_models(const std::vector<EpochSet>& subjects,
                                           const ArchConfig& arch, const TrainConfig& train,
                                           const EvalConfig& eval);

struct InterBaseResult {
  std::vector<std::string> subject_ids;
  std::vector<double> accuracies;  // on the whole held-out subject
  std::vector<InterModel> models;
};

InterBaseResult run_inter_base(const std::vector<EpochSet>& subjects, const ArchConfig& arch,
                               const TrainConfig& train, const EvalConfig& eval);

struct SweepCurve {
  std::vector<double> fractions;
  std::vector<double> mean;
  std::vector<double> std;
};

struct FinetuneSubject {
  std::string subject_id;
  /// Base model on every trial of the held-out subject.
  double base_accuracy = 0.0;
  std::vector<std::size_t> pool;
  std::vector<std::size_t> test;
  /// One entry per fraction, on the fixed test set.
  std::vector<double> accuracies;
  /// Fine-tuning histories per fraction (empty for fraction 0).
  std::vector<TrainHistory> histories;
};

struct InterFinetunedResult {
  std::vector<FinetuneSubject> subjects;
  SweepCurve curve;
  /// Accuracy lists per fraction across subjects.
  std::vector<double> accuracies_at(std::size_t fraction_index) const;
};

/// Splits each held-out subject once into pool and fixed test set, then
/// fine-tunes its base model on every fraction of the pool (0 = base model).
/// Base models are trained here unless supplied.
InterFinetunedResult run_inter_finetuned(const std::vector<EpochSet>& subjects,
                                         const std::vector<double>& fractions,
                                         const ArchConfig& arch, const TrainConfig& train,
                                         const EvalConfig& eval,
                                         const std::vector<InterModel>* base_models = nullptr);

double mean(const std::vector<double>& v);
/// Sample standard deviation (n - 1); 0 for fewer than two values.
double stddev(const std::vector<double>& v);

/// "60.08% ± 10.63%" style rendering of accuracies in [0, 1].
std::string format_mean_std(const std::vector<double>& accuracies);

struct Condition {
  std::string name;
  std::vector<std::string> subject_ids;
  std::vector<double> accuracies;
};

struct PairwiseTest {
  std::string a, b;
  std::optional<WilcoxonResult> result;
  std::string error;  // set when the test could not be computed
};

struct EvalReport {
  std::vector<Condition> conditions;
  std::vector<PairwiseTest> pairwise;
  std::vector<std::string> lines;  // human-readable summary
};

/// Summaries plus every pairwise Wilcoxon test between conditions. Conditions
/// must list the same subjects in the same order.
EvalReport report(const std::vector<Condition>& conditions);

}  // namespace eegdecode
