#include "birgat/grad_suite.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "birgat/grad_check.hpp"
#include "birgat/model.hpp"

namespace birgat {

using namespace ops;

namespace {

TensorPtr draw(std::vector<int> shape, Rng& rng, double scale = 0.5, bool rg = true) {
  auto t = make_tensor(std::move(shape), rg);
  for (double& x : t->data) x = scale * (2.0 * rng.u01() - 1.0);
  return t;
}

TensorPtr weighted(Tape& t, const TensorPtr& x) {
  auto w = make_tensor(x->shape, false);
  for (size_t i = 0; i < w->data.size(); ++i) w->data[i] = 0.05 * static_cast<double>((i % 17) + 1);
  return sum(t, mul(t, x, w));
}

void resolvable_params(ParamStore& ps, uint64_t seed, double scale = 0.3) {
  Rng rng(seed);
  for (const auto& [name, p] : ps.items()) {
    const double base = name.find(".ln.g") != std::string::npos ? 1.0 : 0.0;
    for (double& x : p->data) x = base + scale * (2.0 * rng.u01() - 1.0);
  }
}

struct MicroFixture {
  BirgatModel model;
  std::vector<std::string> question;
  std::vector<TargetTok> target;
};

MicroFixture micro_fixture(uint64_t seed) {
  const char* doc = R"({
    "domains": [
      {"name": "alpha", "intents": [{"name": "go", "slots": [{"name": "place"}]}]},
      {"name": "beta", "intents": [{"name": "halt", "slots": [{"name": "spot"}]}]}
    ]
  })";
  Vocab v;
  for (const char* w : {"alpha", "beta", "go", "halt", "place", "spot", "move", "to", "the", "dock"}) v.add(w);
  EncoderConfig cfg;
  cfg.m = 8;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.dropout = 0.0;
  cfg.ffn_mult = 2;
  cfg.distance_clip = 3;
  cfg.max_target_len = 16;
  MicroFixture fx{BirgatModel::build(parse_ontology_text(doc), v, cfg, seed), {"move", "to", "the", "dock"}, {}};
  resolvable_params(fx.model.ps, mix_seed(seed, 0xF1));
  // 8-token target: [ @alpha ( @go { @place = dock } ) ] minus the wrap -> use
  // a one-slot frame; make_target appends EOS
  SemanticFrame f;
  f.domains.push_back({0, {IntentNode{1, {SlotPair{2, {"dock"}}}}}});
  fx.target = make_target(linearize(f, fx.model.ont), fx.model.vocab, fx.model.ont);
  return fx;
}

}  // namespace

std::vector<GradSuiteRow> run_gradient_suite(uint64_t seed) {
  std::vector<GradSuiteRow> rows;
  auto run = [&](const std::string& name, double tol, const std::function<TensorPtr(Tape&)>& f,
                 const std::vector<std::pair<std::string, TensorPtr>>& params) {
    const auto r = grad_check(f, params);
    rows.push_back({name, r.max_rel_err, tol, r.max_rel_err < tol});
  };

  Rng rng(mix_seed(seed, 0xAB));
  // primitive ops at 1e-6
  {
    auto a = draw({3, 4}, rng), b = draw({3, 4}, rng), row = draw({1, 4}, rng);
    run("op.add", 1e-6, [&](Tape& t) { return weighted(t, add(t, a, b)); }, {{"a", a}, {"b", b}});
    run("op.add_broadcast", 1e-6, [&](Tape& t) { return weighted(t, add(t, a, row)); }, {{"a", a}, {"r", row}});
    run("op.mul", 1e-6, [&](Tape& t) { return weighted(t, mul(t, a, b)); }, {{"a", a}, {"b", b}});
    run("op.sub", 1e-6, [&](Tape& t) { return weighted(t, sub(t, a, b)); }, {{"a", a}, {"b", b}});
  }
  {
    auto a = draw({3, 4}, rng), b = draw({4, 2}, rng);
    run("op.matmul", 1e-6, [&](Tape& t) { return weighted(t, matmul(t, a, b)); }, {{"a", a}, {"b", b}});
    auto bt = draw({2, 4}, rng);
    run("op.matmul_nt", 1e-6, [&](Tape& t) { return weighted(t, matmul_nt(t, a, bt)); }, {{"a", a}, {"b", bt}});
    run("op.transpose", 1e-6, [&](Tape& t) { return weighted(t, transpose(t, a)); }, {{"a", a}});
  }
  {
    auto a = draw({2, 5}, rng);
    run("op.softmax", 1e-6, [&](Tape& t) { return weighted(t, softmax_rows(t, a)); }, {{"a", a}});
    run("op.tanh", 1e-6, [&](Tape& t) { return weighted(t, ops::tanh(t, a)); }, {{"a", a}});
    run("op.sigmoid", 1e-6, [&](Tape& t) { return weighted(t, sigmoid(t, a)); }, {{"a", a}});
    run("op.exp", 1e-6, [&](Tape& t) { return weighted(t, ops::exp(t, a)); }, {{"a", a}});
    auto pos = draw({2, 5}, rng);
    for (double& x : pos->data) x = 0.3 + std::fabs(x);
    run("op.log", 1e-6, [&](Tape& t) { return weighted(t, ops::log(t, pos)); }, {{"p", pos}});
    auto off = draw({2, 5}, rng);
    for (double& x : off->data) x += x >= 0 ? 0.25 : -0.25;
    run("op.relu", 1e-6, [&](Tape& t) { return weighted(t, relu(t, off)); }, {{"a", off}});
    run("op.clamp_min", 1e-6, [&](Tape& t) { return weighted(t, clamp_min(t, off, 0.05)); }, {{"a", off}});
    run("op.sum_mean", 1e-6, [&](Tape& t) { return add(t, sum(t, a), mean(t, a)); }, {{"a", a}});
    run("op.embedding_lookup", 1e-6,
        [&](Tape& t) { return weighted(t, embedding_lookup(t, a, {1, 0, 1})); }, {{"a", a}});
  }
  {
    auto x = draw({3, 6}, rng);
    auto g = draw({1, 6}, rng, 0.3);
    for (double& v : g->data) v += 1.0;
    auto b = draw({1, 6}, rng, 0.3);
    run("op.layer_norm", 1e-6, [&](Tape& t) { return weighted(t, layer_norm(t, x, g, b, 1e-5)); },
        {{"x", x}, {"g", g}, {"b", b}});
  }
  {
    auto logits = draw({3, 5}, rng);
    std::vector<int> targets = {1, 4, 0};
    run("op.cross_entropy", 1e-6,
        [&](Tape& t) { return cross_entropy(t, ops::log(t, softmax_rows(t, logits)), targets); },
        {{"logits", logits}});
  }
  {
    const int in = 5, hid = 3;
    LstmWeights w{draw({in, 4 * hid}, rng), draw({hid, 4 * hid}, rng), draw({1, 4 * hid}, rng)};
    auto x = draw({2, in}, rng);
    auto h0 = draw({2, hid}, rng, 0.4, false);
    auto c0 = draw({2, hid}, rng, 0.4, false);
    run("op.lstm_cell", 1e-5,
        [&](Tape& t) {
          auto [h, c] = lstm_cell(t, x, h0, c0, w);
          return add(t, weighted(t, h), weighted(t, c));
        },
        {{"w_x", w.w_x}, {"w_h", w.w_h}, {"b", w.b}, {"x", x}});
  }
  {
    const int n = 5, heads = 2, m = 8;
    auto qp = draw({n, m}, rng), kp = draw({n, m}, rng), vp = draw({n, m}, rng);
    auto zp = draw({4, m / heads}, rng);
    AttnGraph g;
    g.n_q = g.n_kv = n;
    g.offsets.assign(n + 1, 0);
    Rng grng(mix_seed(seed, 0x6E));
    for (int i = 0; i < n; ++i) {
      g.nbr.push_back(i);
      g.rel.push_back(grng.below(4));
      for (int j = 0; j < n; ++j)
        if (j != i && grng.bernoulli(0.5)) {
          g.nbr.push_back(j);
          g.rel.push_back(grng.below(4));
        }
      g.offsets[i + 1] = static_cast<int>(g.nbr.size());
    }
    run("op.graph_attention", 1e-6,
        [&](Tape& t) {
          return weighted(t, graph_attention(t, qp, kp, vp, zp, g, heads, std::sqrt(8.0), 0.0, false, nullptr));
        },
        {{"qp", qp}, {"kp", kp}, {"vp", vp}, {"zp", zp}});
    run("op.pointer_weights", 1e-6,
        [&](Tape& t) { return weighted(t, pointer_weights(t, qp, kp, heads, std::sqrt(8.0))); },
        {{"qp", qp}, {"kp", kp}});
  }

  // composite modules at 1e-4
  {
    auto fx = micro_fixture(seed);
    auto& model = fx.model;
    auto q_in = draw({4, 8}, rng);
    auto o_in = draw({6, 8}, rng);
    const auto q_graph = AttnGraph::complete(4, model.cfg.distance_clip, true);
    std::vector<std::pair<std::string, TensorPtr>> layer_params = {{"q_in", q_in}, {"o_in", o_in}};
    for (const auto& [name, p] : model.ps.items())
      if (name.rfind("enc.l0", 0) == 0 || name.rfind("enc.rel", 0) == 0) layer_params.emplace_back(name, p);
    run("module.birgat_layer", 1e-4,
        [&](Tape& t) {
          Rng r(0);
          auto [q, o] = birgat_layer(t, q_in, o_in, model.enc.layers[0], model.enc, model.cfg, q_graph,
                                     model.ont_graph, false, r);
          return add(t, weighted(t, q), weighted(t, o));
        },
        layer_params);

    // decoder step: loss through frozen memories
    const auto q_ids = model.question_ids(fx.question);
    TensorPtr qmem, omem;
    {
      Tape t(false);
      Rng r(0);
      std::tie(qmem, omem) = encode(t, q_ids, model.ont, model.vocab, model.cfg, model.enc, model.ont_graph,
                                    false, r);
      qmem->requires_grad = true;
      qmem->ensure_grad();
      omem->requires_grad = true;
      omem->ensure_grad();
    }
    std::vector<std::pair<std::string, TensorPtr>> dec_params = {{"qmem", qmem}, {"omem", omem}};
    for (const auto& [name, p] : model.ps.items())
      if (name.rfind("dec.", 0) == 0 || name == "embed.word") dec_params.emplace_back(name, p);
    run("module.decoder_step", 1e-4,
        [&](Tape& t) {
          Rng r(0);
          return sequence_loss(t, fx.target, fx.question, model.enc.word_embed, qmem, omem, model.cfg,
                               model.dec, model.vocab, false, false, r);
        },
        dec_params);

    // full encoder-decoder micro model over every registered parameter
    Sample s;
    s.utterance = fx.question;
    s.frame.domains.push_back({0, {IntentNode{1, {SlotPair{2, {"dock"}}}}}});
    s.meta = {{0}, 1, false};
    std::vector<std::pair<std::string, TensorPtr>> all_params(model.ps.items().begin(),
                                                              model.ps.items().end());
    run("model.full_micro", 1e-4,
        [&](Tape& t) {
          Rng r(0);
          return model.sample_nll(t, s, false, r);
        },
        all_params);
  }
  return rows;
}

bool gradient_suite_passed(const std::vector<GradSuiteRow>& rows) {
  for (const auto& r : rows)
    if (!r.pass) return false;
  return !rows.empty();
}

std::string gradient_suite_table(const std::vector<GradSuiteRow>& rows) {
  std::ostringstream os;
  os << "check                      max_rel_err   tolerance  status\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-26s %11.3e %11.1e  %s\n", r.name.c_str(), r.max_rel_err, r.tolerance,
                  r.pass ? "ok" : "FAIL");
    os << buf;
  }
  return os.str();
}

}  // namespace birgat
