#include "birgat/experiments.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace birgat {

using nlohmann::json;

TransferReport transfer_experiment(const Ontology& ont, const std::vector<Sample>& corpus,
                                   const TransferConfig& cfg) {
  const int limit = cfg.train_intent_limit;
  auto low = filter_by_intent_count(corpus, [&](int c) { return c <= limit; });
  auto high = filter_by_intent_count(corpus, [&](int c) { return c > limit; });
  if (high.empty()) throw InsufficientFewShotPool("transfer: corpus has no samples above the intent limit");

  Rng rng(mix_seed(cfg.train.seed, 0x7AFE));
  rng.shuffle(high);
  const int test_n = std::min<int>(cfg.max_test, static_cast<int>(high.size()));
  std::vector<Sample> test(high.begin(), high.begin() + test_n);
  std::vector<Sample> pool(high.begin() + test_n, high.end());
  const int need = cfg.few_shot_sizes.empty()
                       ? 0
                       : *std::max_element(cfg.few_shot_sizes.begin(), cfg.few_shot_sizes.end());
  if (static_cast<int>(pool.size()) < need)
    throw InsufficientFewShotPool("transfer: only " + std::to_string(pool.size()) +
                                  " held-out samples for few-shot size " + std::to_string(need));

  // base split of the low-intent data
  rng.shuffle(low);
  const int dev_n = std::max(1, static_cast<int>(low.size()) / 10);
  std::vector<Sample> dev(low.begin(), low.begin() + dev_n);
  std::vector<Sample> base_train(low.begin() + dev_n, low.end());

  Vocab vocab = build_vocab(base_train, ont, 1);
  BirgatModel model = BirgatModel::build(ont, vocab, cfg.model, cfg.train.seed, false);
  train(model, base_train, dev, cfg.train);

  TransferReport report;
  report.base_train_n = static_cast<int>(base_train.size());
  report.test_n = test_n;
  report.fine_tune_recipe = "main recipe, total_steps=" + std::to_string(cfg.fine_tune_steps) +
                            ", lr=" + std::to_string(cfg.train.lr);

  // zero-shot accuracy + error intent-count histogram
  int hits = 0;
  for (const auto& s : test) {
    const DecodeResult d = model.decode(s.utterance, cfg.eval_beam, cfg.train.max_decode_len);
    std::optional<SemanticFrame> parsed;
    if (d.finished) {
      auto p = delinearize(d.tokens, model.ont);
      if (std::holds_alternative<SemanticFrame>(p)) parsed = std::get<SemanticFrame>(p);
    }
    if (parsed && exact_match(*parsed, s.frame)) {
      ++hits;
    } else {
      ++report.error_intent_histogram[parsed ? parsed->intent_count() : -1];
    }
  }
  report.zero_shot_accuracy = static_cast<double>(hits) / test_n;

  // few-shot fine-tuning from the base parameters
  std::vector<std::vector<double>> base;
  for (const auto& [_, p] : model.ps.items()) base.push_back(p->data);
  for (int n : cfg.few_shot_sizes) {
    size_t i = 0;
    for (const auto& [_, p] : model.ps.items()) p->data = base[i++];
    if (n > 0) {
      std::vector<Sample> shots(pool.begin(), pool.begin() + n);
      TrainConfig ft = cfg.train;
      ft.total_steps = cfg.fine_tune_steps;
      ft.batch_size = std::min(cfg.train.batch_size, n);
      ft.eval_every = cfg.fine_tune_steps;  // no mid-run evaluation
      ft.early_stop_dev_acc = 2.0;
      ft.seed = mix_seed(cfg.train.seed, 0xF5, static_cast<uint64_t>(n));
      train(model, shots, {}, ft);
    }
    const EvalResult ev = evaluate(model, test, cfg.eval_beam, cfg.train.max_decode_len);
    report.few_shot.emplace_back(n, ev.accuracy);
  }
  size_t i = 0;
  for (const auto& [_, p] : model.ps.items()) p->data = base[i++];
  return report;
}

std::string transfer_report_json(const TransferReport& r) {
  json j;
  j["zero_shot_accuracy"] = r.zero_shot_accuracy;
  j["test_n"] = r.test_n;
  j["base_train_n"] = r.base_train_n;
  j["fine_tune_recipe"] = r.fine_tune_recipe;
  json fs = json::array();
  for (const auto& [n, acc] : r.few_shot) fs.push_back({{"n", n}, {"accuracy", acc}});
  j["few_shot"] = fs;
  json hist = json::object();
  for (const auto& [count, errs] : r.error_intent_histogram) hist[std::to_string(count)] = errs;
  j["error_intent_histogram"] = hist;
  return j.dump(2);
}

std::vector<AblationRow> ablation_grid(const Ontology& ont, const Splits& splits, const AblationConfig& cfg) {
  std::vector<AblationRow> rows = {
      {false, GnnMode::None, false, {}, 0.0}, {true, GnnMode::None, false, {}, 0.0},
      {true, GnnMode::Gat, false, {}, 0.0},   {true, GnnMode::Gat, true, {}, 0.0},
      {true, GnnMode::Rgat, false, {}, 0.0},  {true, GnnMode::Rgat, true, {}, 0.0},
  };
  const Vocab vocab = build_vocab(splits.train, ont, 1);
  for (auto& row : rows) {
    EncoderConfig mc = cfg.model;
    mc.ontology_encoding = row.oe;
    mc.gnn = row.gnn;
    mc.dual_cross_attention = row.dca;
    for (uint64_t seed : cfg.seeds) {
      BirgatModel model = BirgatModel::build(ont, vocab, mc, seed, false);
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      train(model, splits.train, splits.dev, tc);
      const EvalResult ev = evaluate(model, splits.test, cfg.eval_beam, cfg.train.max_decode_len);
      row.accuracies.push_back(ev.accuracy);
    }
    for (double a : row.accuracies) row.mean += a;
    row.mean /= static_cast<double>(row.accuracies.size());
  }
  return rows;
}

std::string ablation_report_json(const std::vector<AblationRow>& rows) {
  json j = json::array();
  for (const auto& r : rows)
    j.push_back({{"oe", r.oe},
                 {"gnn", gnn_mode_name(r.gnn)},
                 {"dca", r.dca},
                 {"accuracies", r.accuracies},
                 {"mean_accuracy", r.mean}});
  return j.dump(2);
}

std::string ablation_report_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "OE    GNN    DCA    mean_acc  per-seed\n";
  for (const auto& r : rows) {
    os << (r.oe ? "yes   " : "no    ") << gnn_mode_name(r.gnn);
    for (size_t i = std::string(gnn_mode_name(r.gnn)).size(); i < 7; ++i) os << ' ';
    os << (r.dca ? "yes    " : "no     ");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", r.mean);
    os << buf << "   ";
    for (double a : r.accuracies) {
      std::snprintf(buf, sizeof(buf), " %.4f", a);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace birgat
