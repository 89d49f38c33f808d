#pragma once

#include <string>
#include <vector>

#include "birgat/model.hpp"

namespace birgat {

struct TrainConfig {
  double lr = 5e-4;
  double weight_decay = 1e-4;
  double warmup_ratio = 0.1;
  int batch_size = 20;
  int total_steps = 20000;
  double beta1 = 0.9, beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 5.0;
  uint64_t seed = 1;
  int eval_every = 500;
  int eval_beam = 1;              // dev evaluation during training is greedy
  int max_decode_len = 160;
  double early_stop_dev_acc = 2.0;  // > 1 disables early stopping

  void validate() const;
};

/// Linear warmup to 1 over warmup_ratio * total_steps, then linear decay to 0
/// at total_steps.
double lr_schedule(int step, const TrainConfig& cfg);

/// AdamW with decoupled weight decay and global gradient-norm clipping.
class AdamW {
 public:
  explicit AdamW(const ParamStore& ps);

  /// Clips the global grad norm to cfg.grad_clip, then applies one update at
  /// learning rate cfg.lr * schedule_mult. Throws NonFiniteGradient (naming
  /// the parameter) without touching any state if a gradient is non-finite.
  void step(const ParamStore& ps, const TrainConfig& cfg, double schedule_mult);

  int step_count() const { return t_; }

  void add_to(TensorFile& file) const;
  void restore_from(const TensorFile& file, const ParamStore& ps);

 private:
  std::vector<std::vector<double>> m_, v_;
  int t_ = 0;
};

struct EvalResult {
  double accuracy = 0.0;
  double parse_failure_rate = 0.0;
  int n = 0;
};

/// Beam-decodes every sample, parses the output (failures and unfinished
/// hypotheses count as non-match) and scores canonical exact match.
EvalResult evaluate(const BirgatModel& model, const std::vector<Sample>& samples, int beam, int max_len);

struct MetricsRecord {
  int step = 0;
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
  double dev_parse_failure = 0.0;
};

struct TrainResult {
  double best_dev_accuracy = 0.0;
  int best_step = 0;
  int steps_run = 0;
  std::vector<MetricsRecord> log;
};

/// Teacher-forced training with periodic greedy dev evaluation; the model is
/// left holding the best-dev parameters. With out_dir set, writes
/// checkpoint.best / checkpoint.last / metrics.jsonl there.
TrainResult train(BirgatModel& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& dev_set, const TrainConfig& cfg, const std::string& out_dir = "");

void save_train_checkpoint(const std::string& path, const BirgatModel& model, const AdamW& opt, int step);
int load_train_checkpoint(const std::string& path, BirgatModel& model, AdamW& opt);

void write_metrics(const std::string& path, const std::vector<MetricsRecord>& log);

}  // namespace birgat
