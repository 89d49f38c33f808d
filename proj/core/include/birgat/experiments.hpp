#pragma once

#include <map>

#include "birgat/trainer.hpp"

namespace birgat {

// ------------------------------------------------------- intent-count transfer

struct TransferConfig {
  EncoderConfig model;
  TrainConfig train;
  int fine_tune_steps = 200;  // fine-tuning reuses the main recipe at this length
  std::vector<int> few_shot_sizes = {5, 10, 20, 50};
  int eval_beam = 5;
  int max_test = 150;
  int train_intent_limit = 3;
};

struct TransferReport {
  double zero_shot_accuracy = 0.0;
  std::vector<std::pair<int, double>> few_shot;  // (n, accuracy)
  std::map<int, int> error_intent_histogram;     // predicted intent count of errors; -1 = unparseable
  int test_n = 0;
  int base_train_n = 0;
  std::string fine_tune_recipe;
};

/// Trains on samples with intent count <= limit, evaluates zero-shot on the
/// held-out >limit set, then fine-tunes on n held-out samples per few-shot
/// size and re-evaluates.
TransferReport transfer_experiment(const Ontology& ont, const std::vector<Sample>& corpus,
                                   const TransferConfig& cfg);

std::string transfer_report_json(const TransferReport& r);

// ----------------------------------------------------------- encoder ablation

struct AblationRow {
  bool oe = true;
  GnnMode gnn = GnnMode::Rgat;
  bool dca = true;
  std::vector<double> accuracies;  // per seed
  double mean = 0.0;
};

struct AblationConfig {
  EncoderConfig model;
  TrainConfig train;
  std::vector<uint64_t> seeds = {1, 2, 3};
  int eval_beam = 1;
};

/// The six-row OE x GNN x DCA grid, each trained per seed and scored on the
/// test split.
std::vector<AblationRow> ablation_grid(const Ontology& ont, const Splits& splits, const AblationConfig& cfg);

std::string ablation_report_json(const std::vector<AblationRow>& rows);
std::string ablation_report_table(const std::vector<AblationRow>& rows);

}  // namespace birgat
