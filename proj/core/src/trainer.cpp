#include "birgat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace birgat {

void TrainConfig::validate() const {
  if (lr <= 0.0 || weight_decay < 0.0 || batch_size < 1 || total_steps < 1 || grad_clip <= 0.0 ||
      adam_eps <= 0.0 || eval_every < 1 || max_decode_len < 2)
    throw Error("train config: all knobs must be positive");
  if (warmup_ratio <= 0.0 || warmup_ratio >= 1.0) throw Error("train config: warmup ratio must lie in (0,1)");
}

double lr_schedule(int step, const TrainConfig& cfg) {
  if (step < 0 || step > cfg.total_steps)
    throw Error("lr_schedule: step " + std::to_string(step) + " outside [0," + std::to_string(cfg.total_steps) + "]");
  const double warmup = cfg.warmup_ratio * cfg.total_steps;
  if (step <= warmup) return step / warmup;
  return (cfg.total_steps - step) / (cfg.total_steps - warmup);
}

AdamW::AdamW(const ParamStore& ps) {
  for (const auto& [_, p] : ps.items()) {
    m_.emplace_back(p->data.size(), 0.0);
    v_.emplace_back(p->data.size(), 0.0);
  }
}

void AdamW::step(const ParamStore& ps, const TrainConfig& cfg, double schedule_mult) {
  if (ps.size() != m_.size()) throw Error("AdamW: parameter store changed size");
  double sq = 0.0;
  for (const auto& [name, p] : ps.items())
    for (double g : p->grad) {
      if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient in parameter " + name);
      sq += g * g;
    }
  const double norm = std::sqrt(sq);
  const double clip_scale = norm > cfg.grad_clip ? cfg.grad_clip / norm : 1.0;

  ++t_;
  const double lr_t = cfg.lr * schedule_mult;
  const double bc1 = 1.0 - std::pow(cfg.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t_);
  size_t idx = 0;
  for (const auto& [_, p] : ps.items()) {
    auto& m = m_[idx];
    auto& v = v_[idx];
    ++idx;
    for (size_t i = 0; i < p->data.size(); ++i) {
      const double g = p->grad[i] * clip_scale;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p->data[i] -= lr_t * (mhat / (std::sqrt(vhat) + cfg.adam_eps)) + lr_t * cfg.weight_decay * p->data[i];
    }
  }
}

void AdamW::add_to(TensorFile& file) const {
  for (size_t i = 0; i < m_.size(); ++i) {
    file.tensors.emplace_back("adam.m." + std::to_string(i),
                              from_values({static_cast<int>(m_[i].size()), 1}, m_[i]));
    file.tensors.emplace_back("adam.v." + std::to_string(i),
                              from_values({static_cast<int>(v_[i].size()), 1}, v_[i]));
  }
  file.meta["adam_t"] = std::to_string(t_);
}

void AdamW::restore_from(const TensorFile& file, const ParamStore& ps) {
  if (ps.size() != m_.size()) throw Error("AdamW: parameter store changed size");
  for (size_t i = 0; i < m_.size(); ++i) {
    auto m = file.find("adam.m." + std::to_string(i));
    auto v = file.find("adam.v." + std::to_string(i));
    if (!m || !v) throw SchemaError("checkpoint missing optimizer moments for parameter " + std::to_string(i));
    if (m->data.size() != m_[i].size() || v->data.size() != v_[i].size())
      throw SchemaError("checkpoint optimizer moment size mismatch");
    m_[i] = m->data;
    v_[i] = v->data;
  }
  t_ = std::stoi(file.meta.at("adam_t"));
}

EvalResult evaluate(const BirgatModel& model, const std::vector<Sample>& samples, int beam, int max_len) {
  EvalResult r;
  r.n = static_cast<int>(samples.size());
  if (r.n == 0) return r;
  Tape tape(false);
  Rng rng(0);
  const TensorPtr o0 = model.ontology_rows(tape, false, rng);
  int hits = 0, failures = 0;
  for (const auto& s : samples) {
    const DecodeResult d = model.decode_with(o0, s.utterance, beam, max_len);
    bool ok = false;
    if (d.finished) {
      auto parsed = model.no_copy ? delinearize_spelled(d.tokens, model.ont) : delinearize(d.tokens, model.ont);
      if (std::holds_alternative<SemanticFrame>(parsed)) {
        ok = exact_match(std::get<SemanticFrame>(parsed), s.frame);
      } else {
        ++failures;
      }
    } else {
      ++failures;
    }
    hits += ok ? 1 : 0;
  }
  r.accuracy = static_cast<double>(hits) / r.n;
  r.parse_failure_rate = static_cast<double>(failures) / r.n;
  return r;
}

void save_train_checkpoint(const std::string& path, const BirgatModel& model, const AdamW& opt, int step) {
  TensorFile f;
  f.meta["config_fingerprint"] = model.config_fingerprint();
  f.meta["step"] = std::to_string(step);
  for (const auto& [name, p] : model.ps.items()) f.tensors.emplace_back(name, p);
  opt.add_to(f);
  save_tensors(path, f);
}

int load_train_checkpoint(const std::string& path, BirgatModel& model, AdamW& opt) {
  TensorFile f = load_tensors(path);
  auto fp = f.meta.find("config_fingerprint");
  if (fp != f.meta.end() && fp->second != model.config_fingerprint())
    throw SchemaError(path + ": checkpoint was written for a different model configuration");
  for (const auto& [name, p] : model.ps.items()) {
    auto src = f.find(name);
    if (!src) throw SchemaError(path + ": checkpoint missing tensor " + name);
    if (src->shape != p->shape) throw SchemaError(path + ": shape mismatch for " + name);
    p->data = src->data;
  }
  opt.restore_from(f, model.ps);
  return std::stoi(f.meta.at("step"));
}

void write_metrics(const std::string& path, const std::vector<MetricsRecord>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf),
                  "{\"step\":%d,\"train_loss\":%.17g,\"dev_accuracy\":%.17g,\"dev_parse_failure\":%.17g}\n",
                  r.step, r.train_loss, r.dev_accuracy, r.dev_parse_failure);
    out << buf;
  }
}

namespace {

/// Deterministic epoch order: seeded shuffle, stable sort into coarse
/// utterance-length buckets, batches cut in order, batch order reshuffled.
std::vector<std::vector<int>> epoch_batches(int n, int batch_size, uint64_t seed, uint64_t epoch,
                                            const std::vector<Sample>& samples) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  Rng rng(mix_seed(seed, 0xEBAC, epoch));
  rng.shuffle(idx);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return samples[a].utterance.size() / 4 < samples[b].utterance.size() / 4;
  });
  std::vector<std::vector<int>> batches;
  for (int at = 0; at < n; at += batch_size) {
    std::vector<int> b;
    for (int i = at; i < std::min(n, at + batch_size); ++i) b.push_back(idx[i]);
    batches.push_back(std::move(b));
  }
  rng.shuffle(batches);
  return batches;
}

std::vector<std::vector<double>> snapshot_params(const ParamStore& ps) {
  std::vector<std::vector<double>> out;
  for (const auto& [_, p] : ps.items()) out.push_back(p->data);
  return out;
}

void restore_params(const ParamStore& ps, const std::vector<std::vector<double>>& snap) {
  size_t i = 0;
  for (const auto& [_, p] : ps.items()) p->data = snap[i++];
}

}  // namespace

TrainResult train(BirgatModel& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& dev_set, const TrainConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  if (train_set.empty()) throw Error("train: empty training set");
  AdamW opt(model.ps);
  TrainResult result;
  auto best = snapshot_params(model.ps);

  const int n = static_cast<int>(train_set.size());
  uint64_t epoch = 0;
  auto batches = epoch_batches(n, cfg.batch_size, cfg.seed, epoch, train_set);
  size_t batch_at = 0;

  const std::string ckpt_last = out_dir.empty() ? "" : out_dir + "/checkpoint.last";
  const std::string ckpt_best = out_dir.empty() ? "" : out_dir + "/checkpoint.best";

  for (int step = 0; step < cfg.total_steps; ++step) {
    if (batch_at >= batches.size()) {
      ++epoch;
      batches = epoch_batches(n, cfg.batch_size, cfg.seed, epoch, train_set);
      batch_at = 0;
    }
    const auto& batch = batches[batch_at++];

    model.ps.zero_grad();
    double loss_sum = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    // the initial ontology rows are question-independent: encode them once
    // per step, fan their gradient in from every sample, then replay the
    // shared sub-graph
    Tape shared_tape;
    Rng shared_rng(mix_seed(cfg.seed, 0xB115, static_cast<uint64_t>(step)));
    const TensorPtr o0 = model.ontology_rows(shared_tape, true, shared_rng);
    for (size_t bi = 0; bi < batch.size(); ++bi) {
      Tape tape;
      Rng rng(mix_seed(cfg.seed, 0x5A5A + static_cast<uint64_t>(step), bi));
      auto nll = model.sample_nll_with(tape, train_set[batch[bi]], o0, true, rng);
      loss_sum += nll->data[0];
      tape.backward(nll, inv_b);
    }
    shared_tape.backward_seeded();
    const double batch_loss = loss_sum * inv_b;
    if (!std::isfinite(batch_loss)) {
      if (!out_dir.empty()) save_train_checkpoint(ckpt_last, model, opt, step);
      throw NonFiniteValue("train: loss diverged to non-finite at step " + std::to_string(step));
    }
    opt.step(model.ps, cfg, lr_schedule(step + 1, cfg));
    result.steps_run = step + 1;

    const bool final_step = step + 1 == cfg.total_steps;
    if ((step + 1) % cfg.eval_every == 0 || final_step) {
      const EvalResult ev = dev_set.empty() ? EvalResult{}
                                            : evaluate(model, dev_set, cfg.eval_beam, cfg.max_decode_len);
      result.log.push_back({step + 1, batch_loss, ev.accuracy, ev.parse_failure_rate});
      if (ev.accuracy > result.best_dev_accuracy || result.best_step == 0) {
        result.best_dev_accuracy = ev.accuracy;
        result.best_step = step + 1;
        best = snapshot_params(model.ps);
        if (!out_dir.empty()) save_train_checkpoint(ckpt_best, model, opt, step + 1);
      }
      if (!out_dir.empty()) {
        save_train_checkpoint(ckpt_last, model, opt, step + 1);
        write_metrics(out_dir + "/metrics.jsonl", result.log);
      }
      if (ev.accuracy >= cfg.early_stop_dev_acc) break;
    }
  }

  restore_params(model.ps, best);
  if (!out_dir.empty()) write_metrics(out_dir + "/metrics.jsonl", result.log);
  return result;
}

}  // namespace birgat
