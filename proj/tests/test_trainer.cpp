#include "birgat/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "birgat/toy_grammar.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace birgat;

namespace {

TrainConfig small_tc(int steps) {
  TrainConfig tc;
  tc.total_steps = steps;
  tc.batch_size = 8;
  tc.eval_every = steps;
  tc.lr = 3e-3;
  tc.seed = 7;
  tc.max_decode_len = 80;
  return tc;
}

EncoderConfig small_mc() {
  EncoderConfig cfg;
  cfg.m = 32;
  cfg.heads = 4;
  cfg.layers = 1;
  cfg.dropout = 0.1;
  cfg.ffn_mult = 2;
  cfg.max_target_len = 96;
  return cfg;
}

struct ToyData {
  Ontology ont = toy_ontology();
  std::vector<Sample> samples;
  Vocab vocab;
  ToyData() {
    auto g = toy_grammar(ont, 0.1, 0.1);
    samples = generate_mixed(g, ont, 60, 0.2, 99);
    vocab = build_vocab(samples, ont, 1);
  }
};

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("lr schedule is piecewise linear with its peak at the warmup boundary") {
  TrainConfig tc;
  tc.total_steps = 1000;
  tc.warmup_ratio = 0.1;
  CHECK(lr_schedule(0, tc) == 0.0);
  CHECK(lr_schedule(100, tc) == doctest::Approx(1.0));
  CHECK(lr_schedule(1000, tc) == 0.0);
  CHECK(lr_schedule(50, tc) == doctest::Approx(0.5));
  CHECK(lr_schedule(550, tc) == doctest::Approx(0.5));
  // continuity around the boundary
  CHECK(lr_schedule(99, tc) == doctest::Approx(0.99));
  CHECK(lr_schedule(101, tc) == doctest::Approx(1.0 - 1.0 / 900).epsilon(1e-9));
  CHECK_THROWS_AS(lr_schedule(1001, tc), Error);
}

TEST_CASE("adamw: zero gradients leave parameters alone unless weight decay shrinks them") {
  Rng rng(5);
  ParamStore ps;
  auto p = ps.create("w", {2, 2}, Init::Normal002, rng);
  const auto before = p->data;
  TrainConfig tc;
  tc.weight_decay = 0.0;
  AdamW opt(ps);
  ps.zero_grad();
  opt.step(ps, tc, 1.0);
  CHECK(p->data == before);

  tc.weight_decay = 0.5;
  ps.zero_grad();
  AdamW opt2(ps);
  opt2.step(ps, tc, 1.0);
  for (size_t i = 0; i < p->data.size(); ++i)
    CHECK(p->data[i] == doctest::Approx(before[i] * (1.0 - tc.lr * 0.5)).epsilon(1e-12));
}

TEST_CASE("adamw single-scalar first step matches the hand-computed update") {
  Rng rng(6);
  ParamStore ps;
  auto p = ps.create("w", {1, 1}, Init::Zeros, rng);
  p->data[0] = 1.0;
  TrainConfig tc;
  tc.lr = 0.01;
  tc.weight_decay = 0.0;
  AdamW opt(ps);
  p->grad[0] = 1.0;
  const double mult = 0.5;
  opt.step(ps, tc, mult);
  // bias-corrected first step: mhat = 1, vhat = 1 -> delta = lr*mult/(1+eps)
  const double want = 1.0 - 0.01 * mult * (1.0 / (1.0 + tc.adam_eps));
  CHECK(p->data[0] == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("adamw with wd=0 matches an independently hand-rolled adam over a 10-step trace") {
  ParamStore ps;
  Rng rng(7);
  auto p = ps.create("w", {1, 1}, Init::Zeros, rng);
  p->data[0] = 0.7;
  TrainConfig tc;
  tc.lr = 0.05;
  tc.weight_decay = 0.0;
  tc.grad_clip = 1e9;
  AdamW opt(ps);
  // reference loop computed independently: f(w) = 0.5 w^2, grad = w
  double w = 0.7, m = 0.0, v = 0.0;
  for (int t = 1; t <= 10; ++t) {
    p->grad[0] = p->data[0];
    opt.step(ps, tc, 1.0);
    const double g = w;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    w -= tc.lr * mhat / (std::sqrt(vhat) + tc.adam_eps);
    CHECK(p->data[0] == doctest::Approx(w).epsilon(1e-12));
  }
}

TEST_CASE("global gradient clipping caps the norm") {
  ParamStore ps;
  Rng rng(8);
  auto a = ps.create("a", {2, 2}, Init::Zeros, rng);
  auto b = ps.create("b", {1, 3}, Init::Zeros, rng);
  TrainConfig tc;
  tc.grad_clip = 1.0;
  tc.lr = 1.0;
  tc.weight_decay = 0.0;
  tc.adam_eps = 1e-12;
  for (auto& g : a->grad) g = 10.0;
  for (auto& g : b->grad) g = -10.0;
  AdamW opt(ps);
  opt.step(ps, tc, 1.0);
  // with clipping to 1, per-element g = 10/sqrt(700); one adam step moves by
  // lr * g/|g| magnitudes; just assert the step stayed bounded
  for (double x : a->data) CHECK(std::fabs(x) <= 1.0 + 1e-9);
}

TEST_CASE("non-finite gradients abort the step naming the parameter") {
  ParamStore ps;
  Rng rng(9);
  auto a = ps.create("enc.bad", {1, 2}, Init::Zeros, rng);
  a->grad[1] = std::numeric_limits<double>::quiet_NaN();
  AdamW opt(ps);
  TrainConfig tc;
  try {
    opt.step(ps, tc, 1.0);
    FAIL("expected NonFiniteGradient");
  } catch (const NonFiniteGradient& e) {
    CHECK(std::string(e.what()).find("enc.bad") != std::string::npos);
  }
}

TEST_CASE("training a tiny model reduces the loss and is seed-reproducible") {
  ToyData data;
  std::vector<Sample> train_set(data.samples.begin(), data.samples.begin() + 50);
  std::vector<Sample> dev_set(data.samples.begin() + 50, data.samples.end());

  auto model = BirgatModel::build(data.ont, data.vocab, small_mc(), 21);
  // loss before
  double loss0 = 0.0;
  for (int i = 0; i < 8; ++i) {
    Tape t(false);
    Rng r(0);
    loss0 += model.sample_nll(t, train_set[i], false, r)->data[0];
  }
  auto tc = small_tc(60);
  auto res = train(model, train_set, dev_set, tc);
  CHECK(res.steps_run == 60);
  double loss1 = 0.0;
  for (int i = 0; i < 8; ++i) {
    Tape t(false);
    Rng r(0);
    loss1 += model.sample_nll(t, train_set[i], false, r)->data[0];
  }
  CHECK(loss1 < loss0);

  // identical runs produce identical metric logs
  auto model2 = BirgatModel::build(data.ont, data.vocab, small_mc(), 21);
  auto res2 = train(model2, train_set, dev_set, tc);
  REQUIRE(res.log.size() == res2.log.size());
  for (size_t i = 0; i < res.log.size(); ++i) {
    CHECK(res.log[i].train_loss == res2.log[i].train_loss);
    CHECK(res.log[i].dev_accuracy == res2.log[i].dev_accuracy);
  }
  for (const auto& [name, p] : model.ps.items()) CHECK(p->data == model2.ps.get(name)->data);
}

TEST_CASE("evaluating gold-as-prediction scores accuracy 1 and an untrained model does not crash") {
  ToyData data;
  std::vector<std::pair<std::optional<SemanticFrame>, SemanticFrame>> pairs;
  for (int i = 0; i < 10; ++i) pairs.emplace_back(data.samples[i].frame, data.samples[i].frame);
  CHECK(sentence_accuracy(pairs) == 1.0);

  auto model = BirgatModel::build(data.ont, data.vocab, small_mc(), 3);
  std::vector<Sample> few(data.samples.begin(), data.samples.begin() + 5);
  auto ev = evaluate(model, few, 2, 40);
  CHECK(ev.n == 5);
  CHECK(ev.accuracy >= 0.0);
  CHECK(ev.accuracy <= 1.0);
  CHECK(ev.parse_failure_rate >= 0.0);
}

TEST_CASE("train checkpoint round-trips bit-identically and resumes equivalently") {
  namespace fs = std::filesystem;
  ToyData data;
  std::vector<Sample> train_set(data.samples.begin(), data.samples.begin() + 24);
  auto model = BirgatModel::build(data.ont, data.vocab, small_mc(), 4);
  AdamW opt(model.ps);
  TrainConfig tc = small_tc(10);

  // a few manual steps to populate moments
  for (int step = 0; step < 3; ++step) {
    model.ps.zero_grad();
    for (int bi = 0; bi < 4; ++bi) {
      Tape tape;
      Rng rng(mix_seed(tc.seed, step, bi));
      auto nll = model.sample_nll(tape, train_set[step * 4 + bi], true, rng);
      tape.backward(nll, 0.25);
    }
    opt.step(model.ps, tc, lr_schedule(step + 1, tc));
  }
  const auto path = (fs::temp_directory_path() / "birgat_ckpt_test").string();
  save_train_checkpoint(path, model, opt, 3);

  // byte-exact round trip
  save_tensors(path + ".again", load_tensors(path));
  std::ifstream f1(path, std::ios::binary), f2(path + ".again", std::ios::binary);
  std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(c1 == c2);

  // one more step, directly
  auto step_once = [&](BirgatModel& mm, AdamW& oo, int step) {
    mm.ps.zero_grad();
    for (int bi = 0; bi < 4; ++bi) {
      Tape tape;
      Rng rng(mix_seed(tc.seed, step, bi));
      auto nll = mm.sample_nll(tape, train_set[step * 4 + bi], true, rng);
      tape.backward(nll, 0.25);
    }
    oo.step(mm.ps, tc, lr_schedule(step + 1, tc));
  };
  auto direct = BirgatModel::build(data.ont, data.vocab, small_mc(), 4);
  AdamW direct_opt(direct.ps);
  const int got = load_train_checkpoint(path, direct, direct_opt);
  CHECK(got == 3);
  step_once(model, opt, 3);
  step_once(direct, direct_opt, 3);
  for (const auto& [name, p] : model.ps.items()) CHECK(p->data == direct.ps.get(name)->data);

  fs::remove(path);
  fs::remove(path + ".again");
}

TEST_SUITE_END();
