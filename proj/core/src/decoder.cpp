#include "birgat/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace birgat {

using namespace ops;

DecoderParams build_decoder_params(ParamStore& ps, const EncoderConfig& cfg, Rng& rng) {
  DecoderParams d;
  d.pos = ps.create("dec.pos", {cfg.max_target_len, cfg.m}, Init::Normal002, rng);
  d.self_attn.wq = ps.create("dec.self.wq", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.self_attn.wk = ps.create("dec.self.wk", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.self_attn.wv = ps.create("dec.self.wv", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.self_attn.wo = ps.create("dec.self.wo", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.self_attn.ln_g = ps.create("dec.self.ln.g", {1, cfg.m}, Init::Ones, rng);
  d.self_attn.ln_b = ps.create("dec.self.ln.b", {1, cfg.m}, Init::Zeros, rng);
  d.cross_attn.wq = ps.create("dec.cross.wq", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.cross_attn.wk = ps.create("dec.cross.wk", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.cross_attn.wv = ps.create("dec.cross.wv", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.cross_attn.wo = ps.create("dec.cross.wo", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.cross_attn.ln_g = ps.create("dec.cross.ln.g", {1, cfg.m}, Init::Ones, rng);
  d.cross_attn.ln_b = ps.create("dec.cross.ln.b", {1, cfg.m}, Init::Zeros, rng);
  d.ffn.w1 = ps.create("dec.ffn.w1", {cfg.m, cfg.m * cfg.ffn_mult}, Init::Normal002, rng);
  d.ffn.b1 = ps.create("dec.ffn.b1", {1, cfg.m * cfg.ffn_mult}, Init::Zeros, rng);
  d.ffn.w2 = ps.create("dec.ffn.w2", {cfg.m * cfg.ffn_mult, cfg.m}, Init::Normal002, rng);
  d.ffn.b2 = ps.create("dec.ffn.b2", {1, cfg.m}, Init::Zeros, rng);
  d.ffn.ln_g = ps.create("dec.ffn.ln.g", {1, cfg.m}, Init::Ones, rng);
  d.ffn.ln_b = ps.create("dec.ffn.ln.b", {1, cfg.m}, Init::Zeros, rng);
  d.w_g = ps.create("dec.gate.w", {cfg.m, 3}, Init::Normal002, rng);
  d.w_gen = ps.create("dec.gen.w", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.ont_in_proj = ps.create("dec.ont_in_proj", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.ptrq_wq = ps.create("dec.ptr_q.wq", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.ptrq_wk = ps.create("dec.ptr_q.wk", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.ptro_wq = ps.create("dec.ptr_o.wq", {cfg.m, cfg.m}, Init::Normal002, rng);
  d.ptro_wk = ps.create("dec.ptr_o.wk", {cfg.m, cfg.m}, Init::Normal002, rng);
  return d;
}

std::vector<TargetTok> make_target(const LinearFrame& lin, const Vocab& vocab, const Ontology& ont) {
  std::vector<TargetTok> out;
  for (const auto& tok : lin) {
    TargetTok t;
    if (tok.kind == FrameTokKind::OntologyRef) {
      if (tok.ref_id < 0 || tok.ref_id >= ont.size())
        throw GoldContainsUnknownOntologyItem("target references unknown ontology item " +
                                              std::to_string(tok.ref_id));
      t.is_ont = true;
      t.id = tok.ref_id;
    } else if (tok.kind == FrameTokKind::Word) {
      t.id = vocab.lookup(tok.word);
      t.surface = tok.word;
    } else {
      t.id = Vocab::sentinel_id(tok.kind);
      t.surface = vocab.token(t.id);
    }
    out.push_back(std::move(t));
  }
  out.push_back(TargetTok{false, Vocab::kEos, "<eos>"});
  return out;
}

TensorPtr embed_output_token(Tape& t, const OutputToken& tok, int step, const TensorPtr& word_embed,
                             const TensorPtr& omem, const DecoderParams& dec) {
  const int pos_idx = std::min(step, dec.pos->rows() - 1);
  auto pos_row = embedding_lookup(t, dec.pos, {pos_idx});
  if (tok.kind == OutputToken::Kind::Ontology) {
    auto row = matmul(t, embedding_lookup(t, omem, {tok.id}), dec.ont_in_proj);
    return add(t, row, pos_row);
  }
  return add(t, embedding_lookup(t, word_embed, {tok.id}), pos_row);
}

namespace {

TensorPtr attn_plain(Tape& t, const AttnBlock& blk, const TensorPtr& x_q, const TensorPtr& kp,
                     const TensorPtr& vp, const AttnGraph& graph, const EncoderConfig& cfg, bool train,
                     Rng& rng) {
  auto qp = matmul(t, x_q, blk.wq);
  auto attn = graph_attention(t, qp, kp, vp, nullptr, graph, cfg.heads, std::sqrt(static_cast<double>(cfg.m)),
                              cfg.dropout, train, &rng);
  auto sub = matmul(t, attn, blk.wo);
  auto res = add(t, x_q, dropout(t, sub, cfg.dropout, train, rng));
  return layer_norm(t, res, blk.ln_g, blk.ln_b, kLayerNormEps);
}

TensorPtr ffn_block(Tape& t, const Ffn& f, const TensorPtr& x, const EncoderConfig& cfg, bool train, Rng& rng) {
  auto inner = relu(t, add(t, matmul(t, x, f.w1), f.b1));
  auto sub = add(t, matmul(t, inner, f.w2), f.b2);
  auto res = add(t, x, dropout(t, sub, cfg.dropout, train, rng));
  return layer_norm(t, res, f.ln_g, f.ln_b, kLayerNormEps);
}

}  // namespace

TensorPtr decoder_hidden_states(Tape& t, const std::vector<TargetTok>& target, const TensorPtr& word_embed,
                                const TensorPtr& qmem, const TensorPtr& omem, const EncoderConfig& cfg,
                                const DecoderParams& dec, bool train, Rng& rng) {
  const int T = static_cast<int>(target.size());
  if (T < 1) throw Error("decoder: empty target");
  if (T > dec.pos->rows())
    throw Error("decoder: target length " + std::to_string(T) + " exceeds position table " +
                std::to_string(dec.pos->rows()));

  // input prefix = BOS, target[0..T-2]
  std::vector<int> vocab_ids(T, Vocab::kBos);
  std::vector<int> ont_ids(T, 0);
  std::vector<uint8_t> is_vocab(T, 1);
  bool any_ont = false;
  for (int i = 1; i < T; ++i) {
    const auto& tok = target[i - 1];
    if (tok.is_ont) {
      is_vocab[i] = 0;
      ont_ids[i] = tok.id;
      vocab_ids[i] = Vocab::kPad;
      any_ont = true;
    } else {
      vocab_ids[i] = tok.id;
    }
  }
  auto emb = embedding_lookup(t, word_embed, vocab_ids);
  if (any_ont) {
    auto ont_rows = matmul(t, gather_rows(t, omem, ont_ids), dec.ont_in_proj);
    emb = where_rows(t, is_vocab, emb, ont_rows);
  }
  std::vector<int> positions(T);
  for (int i = 0; i < T; ++i) positions[i] = i;
  auto x = add(t, emb, embedding_lookup(t, dec.pos, positions));
  x = dropout(t, x, cfg.dropout, train, rng);

  auto x1 = attn_plain(t, dec.self_attn, x, matmul(t, x, dec.self_attn.wk), matmul(t, x, dec.self_attn.wv),
                       AttnGraph::causal(T), cfg, train, rng);
  auto mem = concat_rows(t, {qmem, omem});
  auto x2 = attn_plain(t, dec.cross_attn, x1, matmul(t, mem, dec.cross_attn.wk),
                       matmul(t, mem, dec.cross_attn.wv), AttnGraph::dense_bipartite(T, mem->rows()), cfg,
                       train, rng);
  return ffn_block(t, dec.ffn, x2, cfg, train, rng);
}

MixtureOut mixture(Tape& t, const TensorPtr& s, const TensorPtr& word_embed, const TensorPtr& qmem,
                   const TensorPtr& omem, const EncoderConfig& cfg, const DecoderParams& dec) {
  MixtureOut out;
  const double scale = std::sqrt(static_cast<double>(cfg.m));
  out.gate = softmax_rows(t, matmul(t, s, dec.w_g));
  out.pgen = softmax_rows(t, matmul_nt(t, matmul(t, s, dec.w_gen), word_embed));
  out.ptrq = pointer_weights(t, matmul(t, s, dec.ptrq_wq), matmul(t, qmem, dec.ptrq_wk), cfg.heads, scale);
  out.ptro = pointer_weights(t, matmul(t, s, dec.ptro_wq), matmul(t, omem, dec.ptro_wk), cfg.heads, scale);
  return out;
}

TensorPtr sequence_loss(Tape& t, const std::vector<TargetTok>& target,
                        const std::vector<std::string>& question_tokens, const TensorPtr& word_embed,
                        const TensorPtr& qmem, const TensorPtr& omem, const EncoderConfig& cfg,
                        const DecoderParams& dec, const Vocab& vocab, bool no_copy, bool train, Rng& rng) {
  const int T = static_cast<int>(target.size());
  auto s = decoder_hidden_states(t, target, word_embed, qmem, omem, cfg, dec, train, rng);

  // positions of each question surface form, for the copy sum
  std::map<std::string, std::vector<int>> qpos;
  if (!no_copy)
    for (size_t k = 0; k < question_tokens.size(); ++k) qpos[question_tokens[k]].push_back(static_cast<int>(k));

  TensorPtr gate, pgen, ptrq, ptro;
  if (no_copy) {
    pgen = softmax_rows(t, matmul_nt(t, matmul(t, s, dec.w_gen), word_embed));
  } else {
    auto mix = mixture(t, s, word_embed, qmem, omem, cfg, dec);
    gate = mix.gate;
    pgen = mix.pgen;
    ptrq = mix.ptrq;
    ptro = mix.ptro;
  }

  std::vector<TensorPtr> nlls;
  nlls.reserve(T);
  for (int i = 0; i < T; ++i) {
    const auto& tok = target[i];
    TensorPtr p;
    if (no_copy) {
      if (tok.is_ont)
        throw GoldContainsUnknownOntologyItem("no-copy targets must not contain ontology references");
      p = pick(t, pgen, i, tok.id);
    } else if (tok.is_ont) {
      p = mul(t, pick(t, gate, i, 2), pick(t, ptro, i, tok.id));
    } else {
      // generation path only for genuine vocabulary entries; copy path by
      // surface match over question positions
      const bool in_vocab = tok.id != Vocab::kUnk || tok.surface == vocab.token(Vocab::kUnk);
      if (in_vocab) p = mul(t, pick(t, gate, i, 0), pick(t, pgen, i, tok.id));
      auto it = qpos.find(tok.surface);
      if (it != qpos.end()) {
        TensorPtr copy_mass;
        for (int k : it->second) {
          auto w = pick(t, ptrq, i, k);
          copy_mass = copy_mass ? add(t, copy_mass, w) : w;
        }
        auto gated = mul(t, pick(t, gate, i, 1), copy_mass);
        p = p ? add(t, p, gated) : gated;
      }
      if (!p) p = scalar(0.0);  // unreachable token: floored below
    }
    nlls.push_back(ops::log(t, clamp_min(t, p, 1e-12)));
  }
  TensorPtr total = nlls[0];
  for (int i = 1; i < T; ++i) total = add(t, total, nlls[i]);
  return scale(t, total, -1.0);
}

// ------------------------------------------------------------- ModelScorer

struct ModelScorer::State {
  TensorPtr kcache, vcache;  // {fed, m}
  int fed = 0;
  std::vector<double> gate;  // empty in no-copy mode
  std::vector<double> pgen;
  std::vector<double> ptrq;
  std::vector<double> ptro;
};

ModelScorer::ModelScorer(const EncoderConfig& cfg, const DecoderParams& dec, const TensorPtr& word_embed,
                         const Vocab& vocab, const TensorPtr& qmem, const TensorPtr& omem,
                         const std::vector<std::string>& question_tokens, bool no_copy)
    : cfg_(cfg), dec_(dec), word_embed_(word_embed), vocab_(vocab), qmem_(qmem), omem_(omem),
      no_copy_(no_copy) {
  Tape t(false);
  auto mem = concat_rows(t, {qmem_, omem_});
  kcross_ = matmul(t, mem, dec_.cross_attn.wk);
  vcross_ = matmul(t, mem, dec_.cross_attn.wv);
  if (!no_copy_) {
    kptr_q_ = matmul(t, qmem_, dec_.ptrq_wk);
    kptr_o_ = matmul(t, omem_, dec_.ptro_wk);
    std::map<std::string, QuestionGroup> groups;
    for (size_t k = 0; k < question_tokens.size(); ++k) {
      auto& g = groups[question_tokens[k]];
      g.surface = question_tokens[k];
      g.vocab_id = vocab_.lookup(question_tokens[k]);
      g.positions.push_back(static_cast<int>(k));
    }
    for (auto& [_, g] : groups) qgroups_.push_back(std::move(g));
  }
}

OutputToken ModelScorer::eos() const { return OutputToken{OutputToken::Kind::Vocab, Vocab::kEos, "<eos>"}; }

std::shared_ptr<const ModelScorer::State> ModelScorer::step(const TensorPtr& kcache, const TensorPtr& vcache,
                                                            int fed, const TensorPtr& x) const {
  Tape t(false);
  Rng rng(0);
  auto st = std::make_shared<State>();
  auto k_new = matmul(t, x, dec_.self_attn.wk);
  auto v_new = matmul(t, x, dec_.self_attn.wv);
  st->kcache = kcache ? concat_rows(t, {kcache, k_new}) : k_new;
  st->vcache = vcache ? concat_rows(t, {vcache, v_new}) : v_new;
  st->fed = fed + 1;

  const double scale_div = std::sqrt(static_cast<double>(cfg_.m));
  auto qp = matmul(t, x, dec_.self_attn.wq);
  auto attn = graph_attention(t, qp, st->kcache, st->vcache, nullptr, AttnGraph::dense_bipartite(1, st->fed),
                              cfg_.heads, scale_div, 0.0, false, nullptr);
  auto x1 = layer_norm(t, add(t, x, matmul(t, attn, dec_.self_attn.wo)), dec_.self_attn.ln_g,
                       dec_.self_attn.ln_b, kLayerNormEps);
  auto cq = matmul(t, x1, dec_.cross_attn.wq);
  auto cattn = graph_attention(t, cq, kcross_, vcross_, nullptr,
                               AttnGraph::dense_bipartite(1, kcross_->rows()), cfg_.heads, scale_div, 0.0,
                               false, nullptr);
  auto x2 = layer_norm(t, add(t, x1, matmul(t, cattn, dec_.cross_attn.wo)), dec_.cross_attn.ln_g,
                       dec_.cross_attn.ln_b, kLayerNormEps);
  auto inner = relu(t, add(t, matmul(t, x2, dec_.ffn.w1), dec_.ffn.b1));
  auto s = layer_norm(t, add(t, x2, add(t, matmul(t, inner, dec_.ffn.w2), dec_.ffn.b2)), dec_.ffn.ln_g,
                      dec_.ffn.ln_b, kLayerNormEps);

  auto pgen = softmax_rows(t, matmul_nt(t, matmul(t, s, dec_.w_gen), word_embed_));
  st->pgen = pgen->data;
  if (!no_copy_) {
    auto gate = softmax_rows(t, matmul(t, s, dec_.w_g));
    st->gate = gate->data;
    auto pq = pointer_weights(t, matmul(t, s, dec_.ptrq_wq), kptr_q_, cfg_.heads, scale_div);
    st->ptrq = pq->data;
    auto po = pointer_weights(t, matmul(t, s, dec_.ptro_wq), kptr_o_, cfg_.heads, scale_div);
    st->ptro = po->data;
  }
  return st;
}

std::shared_ptr<const void> ModelScorer::initial() const {
  Tape t(false);
  auto x = embed_output_token(t, OutputToken{OutputToken::Kind::Vocab, Vocab::kBos, "<bos>"}, 0, word_embed_,
                              omem_, dec_);
  return step(nullptr, nullptr, 0, x);
}

std::shared_ptr<const void> ModelScorer::advance(const std::shared_ptr<const void>& state,
                                                 const OutputToken& tok) const {
  auto st = std::static_pointer_cast<const State>(state);
  Tape t(false);
  // OOV copies arrive with id = UNK and re-enter through the UNK embedding
  auto x = embed_output_token(t, tok, st->fed, word_embed_, omem_, dec_);
  return step(st->kcache, st->vcache, st->fed, x);
}

std::vector<BeamCandidate> ModelScorer::candidates(const std::shared_ptr<const void>& state) const {
  auto st = std::static_pointer_cast<const State>(state);
  std::vector<BeamCandidate> out;
  const int v_size = static_cast<int>(st->pgen.size());
  out.reserve(v_size + (no_copy_ ? 0 : static_cast<int>(st->ptro.size()) + qgroups_.size()));
  const double g0 = no_copy_ ? 1.0 : st->gate[0];
  for (int v = 0; v < v_size; ++v)
    out.push_back({OutputToken{OutputToken::Kind::Vocab, v, vocab_.token(v)}, g0 * st->pgen[v]});
  if (!no_copy_) {
    const double g1 = st->gate[1], g2 = st->gate[2];
    for (const auto& grp : qgroups_) {
      double mass = 0.0;
      for (int k : grp.positions) mass += st->ptrq[k];
      mass *= g1;
      if (grp.vocab_id != Vocab::kUnk)
        out[grp.vocab_id].prob += mass;  // merged by surface form with the gen path
      else
        out.push_back({OutputToken{OutputToken::Kind::Vocab, Vocab::kUnk, grp.surface}, mass});
    }
    for (size_t i = 0; i < st->ptro.size(); ++i)
      out.push_back({OutputToken{OutputToken::Kind::Ontology, static_cast<int>(i), {}}, g2 * st->ptro[i]});
  }
  return out;
}

}  // namespace birgat
