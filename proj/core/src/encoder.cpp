#include "birgat/encoder.hpp"

#include <cmath>
#include <map>
#include <numeric>

namespace birgat {

using namespace ops;

const char* gnn_mode_name(GnnMode m) {
  switch (m) {
    case GnnMode::None: return "none";
    case GnnMode::Gat: return "gat";
    case GnnMode::Rgat: return "rgat";
  }
  return "?";
}

GnnMode gnn_mode_from(const std::string& name) {
  if (name == "none") return GnnMode::None;
  if (name == "gat") return GnnMode::Gat;
  if (name == "rgat") return GnnMode::Rgat;
  throw UsageError("unknown gnn mode '" + name + "' (expected none|gat|rgat)");
}

void EncoderConfig::validate() const {
  if (m <= 0 || heads <= 0 || m % heads != 0 || m % 2 != 0)
    throw Error("encoder config: hidden size must be positive and divisible by heads and by 2");
  if (layers < 1) throw Error("encoder config: layer count must be >= 1");
  if (distance_clip < 1) throw Error("encoder config: distance clip must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw Error("encoder config: dropout must lie in [0,1)");
  if (ffn_mult < 1) throw Error("encoder config: ffn multiplier must be >= 1");
  if (max_target_len < 2) throw Error("encoder config: max target length must be >= 2");
}

static AttnBlock make_attn_block(ParamStore& ps, const std::string& prefix, int m, Rng& rng) {
  AttnBlock b;
  b.wq = ps.create(prefix + ".wq", {m, m}, Init::Normal002, rng);
  b.wk = ps.create(prefix + ".wk", {m, m}, Init::Normal002, rng);
  b.wv = ps.create(prefix + ".wv", {m, m}, Init::Normal002, rng);
  b.wo = ps.create(prefix + ".wo", {m, m}, Init::Normal002, rng);
  b.ln_g = ps.create(prefix + ".ln.g", {1, m}, Init::Ones, rng);
  b.ln_b = ps.create(prefix + ".ln.b", {1, m}, Init::Zeros, rng);
  return b;
}

static Ffn make_ffn(ParamStore& ps, const std::string& prefix, int m, int mult, Rng& rng) {
  Ffn f;
  f.w1 = ps.create(prefix + ".w1", {m, m * mult}, Init::Normal002, rng);
  f.b1 = ps.create(prefix + ".b1", {1, m * mult}, Init::Zeros, rng);
  f.w2 = ps.create(prefix + ".w2", {m * mult, m}, Init::Normal002, rng);
  f.b2 = ps.create(prefix + ".b2", {1, m}, Init::Zeros, rng);
  f.ln_g = ps.create(prefix + ".ln.g", {1, m}, Init::Ones, rng);
  f.ln_b = ps.create(prefix + ".ln.b", {1, m}, Init::Zeros, rng);
  return f;
}

static LstmWeights make_lstm(ParamStore& ps, const std::string& prefix, int in, int hidden, Rng& rng) {
  LstmWeights w;
  w.w_x = ps.create(prefix + ".w_x", {in, 4 * hidden}, Init::Normal002, rng);
  w.w_h = ps.create(prefix + ".w_h", {hidden, 4 * hidden}, Init::Normal002, rng);
  w.b = ps.create(prefix + ".b", {1, 4 * hidden}, Init::Zeros, rng);
  return w;
}

EncoderParams build_encoder_params(ParamStore& ps, const EncoderConfig& cfg, int vocab_size, int ont_size,
                                   Rng& rng) {
  cfg.validate();
  EncoderParams p;
  p.word_embed = ps.create("embed.word", {vocab_size, cfg.m}, Init::Normal002, rng);
  p.type_embed = ps.create("enc.type_embed", {3, cfg.m}, Init::Normal002, rng);
  p.lstm_fw = make_lstm(ps, "enc.ont_lstm.fw", cfg.m, cfg.m / 2, rng);
  p.lstm_bw = make_lstm(ps, "enc.ont_lstm.bw", cfg.m, cfg.m / 2, rng);
  p.rel_ont = ps.create("enc.rel.ontology", {kRelationTypeCount, cfg.head_dim()}, Init::Normal002, rng);
  p.rel_dist = ps.create("enc.rel.distance", {2 * cfg.distance_clip + 1, cfg.head_dim()}, Init::Normal002, rng);
  if (!cfg.ontology_encoding)
    p.ont_item_embed = ps.create("enc.ont_item_embed", {ont_size, cfg.m}, Init::Normal002, rng);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string lp = "enc.l" + std::to_string(l);
    EncoderLayer layer;
    layer.q_self = make_attn_block(ps, lp + ".q_self", cfg.m, rng);
    layer.o_self = make_attn_block(ps, lp + ".o_self", cfg.m, rng);
    if (cfg.gnn == GnnMode::Rgat) {
      layer.q_self_wz = ps.create(lp + ".q_self.wz", {cfg.head_dim(), cfg.head_dim()}, Init::Normal002, rng);
      layer.o_self_wz = ps.create(lp + ".o_self.wz", {cfg.head_dim(), cfg.head_dim()}, Init::Normal002, rng);
    }
    layer.q_cross = make_attn_block(ps, lp + ".q_cross", cfg.m, rng);
    layer.o_cross = make_attn_block(ps, lp + ".o_cross", cfg.m, rng);
    layer.ffn = make_ffn(ps, lp + ".ffn", cfg.m, cfg.ffn_mult, rng);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ops::AttnGraph ontology_attention_graph(const RelationTable& rel, const Ontology& ont, GnnMode mode) {
  AttnGraph g;
  g.n_q = ont.size();
  g.n_kv = ont.size();
  g.offsets.assign(ont.size() + 1, 0);
  if (mode == GnnMode::Rgat) {
    for (int i = 0; i < ont.size(); ++i) {
      for (const auto& [j, r] : rel.adjacency[i]) {
        g.nbr.push_back(j);
        g.rel.push_back(static_cast<int>(r));
      }
      g.offsets[i + 1] = static_cast<int>(g.nbr.size());
    }
  } else {
    // dense attention among same-domain items, no relation features
    for (int i = 0; i < ont.size(); ++i) {
      const auto range = ont.domain_index.at(ont.domain_of(i));
      for (int j = range.first; j < range.second; ++j) g.nbr.push_back(j);
      g.offsets[i + 1] = static_cast<int>(g.nbr.size());
    }
  }
  return g;
}

TensorPtr encode_question_init(Tape& t, const std::vector<int>& token_ids, const EncoderConfig& cfg,
                               const EncoderParams& p, bool train, Rng& rng) {
  if (token_ids.empty()) throw Error("encode_question_init: empty question");
  auto q0 = embedding_lookup(t, p.word_embed, token_ids);
  return dropout(t, q0, cfg.dropout, train, rng);
}

TensorPtr encode_ontology_items(Tape& t, const Ontology& ont, const Vocab& vocab, const EncoderConfig& cfg,
                                const EncoderParams& p, bool train, Rng& rng) {
  const int n = ont.size();
  if (n == 0) throw Error("encode_ontology_items: empty ontology");
  if (!cfg.ontology_encoding) {
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    auto o0 = embedding_lookup(t, p.ont_item_embed, ids);
    return dropout(t, o0, cfg.dropout, train, rng);
  }

  // batch items of equal sequence length through the BiLSTM together
  std::map<int, std::vector<int>> buckets;  // seq len (type + name) -> item ids
  for (const auto& it : ont.items) buckets[static_cast<int>(it.name_tokens.size()) + 1].push_back(it.id);

  const int hid = cfg.m / 2;
  std::vector<TensorPtr> bucket_outs;
  std::vector<int> emitted;  // item id per emitted row
  for (const auto& [len, items] : buckets) {
    const int b = static_cast<int>(items.size());
    std::vector<TensorPtr> xs;
    {
      std::vector<int> kinds(b);
      for (int i = 0; i < b; ++i) kinds[i] = static_cast<int>(ont.item(items[i]).kind);
      xs.push_back(dropout(t, embedding_lookup(t, p.type_embed, kinds), cfg.dropout, train, rng));
    }
    for (int pos = 0; pos + 1 < len; ++pos) {
      std::vector<int> ids(b);
      for (int i = 0; i < b; ++i) ids[i] = vocab.lookup(ont.item(items[i]).name_tokens[pos]);
      xs.push_back(dropout(t, embedding_lookup(t, p.word_embed, ids), cfg.dropout, train, rng));
    }
    auto h = zeros({b, hid});
    auto c = zeros({b, hid});
    for (const auto& x : xs) std::tie(h, c) = lstm_cell(t, x, h, c, p.lstm_fw);
    auto h_fw = h;
    h = zeros({b, hid});
    c = zeros({b, hid});
    for (auto it = xs.rbegin(); it != xs.rend(); ++it) std::tie(h, c) = lstm_cell(t, *it, h, c, p.lstm_bw);
    bucket_outs.push_back(concat_cols(t, {h_fw, h}));
    emitted.insert(emitted.end(), items.begin(), items.end());
  }
  auto stacked = concat_rows(t, bucket_outs);
  std::vector<int> pos_of(n);
  for (size_t i = 0; i < emitted.size(); ++i) pos_of[emitted[i]] = static_cast<int>(i);
  return gather_rows(t, stacked, pos_of);
}

namespace {

TensorPtr attn_sublayer(Tape& t, const AttnBlock& blk, const TensorPtr& x_q, const TensorPtr& x_kv,
                        const TensorPtr& wz, const TensorPtr& ztable, const ops::AttnGraph& graph,
                        const EncoderConfig& cfg, bool train, Rng& rng) {
  auto qp = matmul(t, x_q, blk.wq);
  auto kp = matmul(t, x_kv, blk.wk);
  auto vp = matmul(t, x_kv, blk.wv);
  TensorPtr zp = (wz && ztable) ? matmul(t, ztable, wz) : nullptr;
  auto attn = graph_attention(t, qp, kp, vp, zp, graph, cfg.heads, std::sqrt(static_cast<double>(cfg.m)),
                              cfg.dropout, train, &rng);
  auto sub = matmul(t, attn, blk.wo);
  auto res = add(t, x_q, dropout(t, sub, cfg.dropout, train, rng));
  return layer_norm(t, res, blk.ln_g, blk.ln_b, kLayerNormEps);
}

TensorPtr ffn_apply(Tape& t, const Ffn& f, const TensorPtr& x, const EncoderConfig& cfg, bool train, Rng& rng) {
  auto inner = relu(t, add(t, matmul(t, x, f.w1), f.b1));
  auto sub = add(t, matmul(t, inner, f.w2), f.b2);
  auto res = add(t, x, dropout(t, sub, cfg.dropout, train, rng));
  return layer_norm(t, res, f.ln_g, f.ln_b, kLayerNormEps);
}

}  // namespace

std::pair<TensorPtr, TensorPtr> birgat_layer(Tape& t, const TensorPtr& q, const TensorPtr& o,
                                             const EncoderLayer& lp, const EncoderParams& p,
                                             const EncoderConfig& cfg, const ops::AttnGraph& q_graph,
                                             const ops::AttnGraph& o_graph, bool train, Rng& rng) {
  TensorPtr q1 = q, o1 = o;
  if (cfg.gnn != GnnMode::None) {
    const bool rel = cfg.gnn == GnnMode::Rgat;
    q1 = attn_sublayer(t, lp.q_self, q, q, rel ? lp.q_self_wz : nullptr, rel ? p.rel_dist : nullptr, q_graph,
                       cfg, train, rng);
    o1 = attn_sublayer(t, lp.o_self, o, o, rel ? lp.o_self_wz : nullptr, rel ? p.rel_ont : nullptr, o_graph,
                       cfg, train, rng);
  }
  TensorPtr q2 = q1, o2 = o1;
  if (cfg.dual_cross_attention) {
    auto qo = AttnGraph::dense_bipartite(q1->rows(), o1->rows());
    auto oq = AttnGraph::dense_bipartite(o1->rows(), q1->rows());
    q2 = attn_sublayer(t, lp.q_cross, q1, o1, nullptr, nullptr, qo, cfg, train, rng);
    o2 = attn_sublayer(t, lp.o_cross, o1, q1, nullptr, nullptr, oq, cfg, train, rng);
  }
  auto both = ffn_apply(t, lp.ffn, concat_rows(t, {q2, o2}), cfg, train, rng);
  return {slice_rows(t, both, 0, q2->rows()), slice_rows(t, both, q2->rows(), both->rows())};
}

std::pair<TensorPtr, TensorPtr> encode_with_ontology(Tape& t, const std::vector<int>& question_ids,
                                                     const TensorPtr& o0, const EncoderConfig& cfg,
                                                     const EncoderParams& p, const ops::AttnGraph& ont_graph,
                                                     bool train, Rng& rng) {
  cfg.validate();
  auto q = encode_question_init(t, question_ids, cfg, p, train, rng);
  auto o = o0;
  const auto q_graph = AttnGraph::complete(static_cast<int>(question_ids.size()), cfg.distance_clip,
                                           cfg.gnn == GnnMode::Rgat);
  for (const auto& layer : p.layers)
    std::tie(q, o) = birgat_layer(t, q, o, layer, p, cfg, q_graph, ont_graph, train, rng);
  return {q, o};
}

std::pair<TensorPtr, TensorPtr> encode(Tape& t, const std::vector<int>& question_ids, const Ontology& ont,
                                       const Vocab& vocab, const EncoderConfig& cfg, const EncoderParams& p,
                                       const ops::AttnGraph& ont_graph, bool train, Rng& rng) {
  auto o0 = encode_ontology_items(t, ont, vocab, cfg, p, train, rng);
  return encode_with_ontology(t, question_ids, o0, cfg, p, ont_graph, train, rng);
}

}  // namespace birgat
