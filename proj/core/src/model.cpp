#include "birgat/model.hpp"

#include <sstream>

namespace birgat {

BirgatModel BirgatModel::build(Ontology ont, Vocab vocab, EncoderConfig cfg, uint64_t seed, bool no_copy) {
  cfg.validate();
  BirgatModel m;
  m.cfg = cfg;
  m.no_copy = no_copy;
  m.ont = std::move(ont);
  m.rel = build_relation_table(m.ont);
  m.vocab = std::move(vocab);
  Rng rng(mix_seed(seed, 0x9A9A));
  m.enc = build_encoder_params(m.ps, m.cfg, m.vocab.size(), m.ont.size(), rng);
  m.dec = build_decoder_params(m.ps, m.cfg, rng);
  if (m.cfg.gnn != GnnMode::None) m.ont_graph = ontology_attention_graph(m.rel, m.ont, m.cfg.gnn);
  return m;
}

std::vector<int> BirgatModel::question_ids(const std::vector<std::string>& utterance) const {
  std::vector<int> ids;
  ids.reserve(utterance.size());
  for (const auto& w : utterance) ids.push_back(vocab.lookup(w));
  return ids;
}

std::pair<TensorPtr, TensorPtr> BirgatModel::encode_question(Tape& t, const std::vector<std::string>& utterance,
                                                             bool train, Rng& rng) const {
  return encode(t, question_ids(utterance), ont, vocab, cfg, enc, ont_graph, train, rng);
}

TensorPtr BirgatModel::ontology_rows(Tape& t, bool train, Rng& rng) const {
  return encode_ontology_items(t, ont, vocab, cfg, enc, train, rng);
}

std::vector<TargetTok> BirgatModel::target_for(const SemanticFrame& frame) const {
  const LinearFrame lin = no_copy ? linearize_spelled(frame, ont) : linearize(frame, ont);
  return make_target(lin, vocab, ont);
}

TensorPtr BirgatModel::sample_nll(Tape& t, const Sample& sample, bool train, Rng& rng) const {
  auto [q, o] = encode_question(t, sample.utterance, train, rng);
  return sequence_loss(t, target_for(sample.frame), sample.utterance, enc.word_embed, q, o, cfg, dec, vocab,
                       no_copy, train, rng);
}

TensorPtr BirgatModel::sample_nll_with(Tape& t, const Sample& sample, const TensorPtr& o0, bool train,
                                       Rng& rng) const {
  auto [q, o] = encode_with_ontology(t, question_ids(sample.utterance), o0, cfg, enc, ont_graph, train, rng);
  return sequence_loss(t, target_for(sample.frame), sample.utterance, enc.word_embed, q, o, cfg, dec, vocab,
                       no_copy, train, rng);
}

LinearFrame BirgatModel::output_to_frame_tokens(const std::vector<OutputToken>& toks) const {
  LinearFrame out;
  for (const auto& tok : toks) {
    if (tok.kind == OutputToken::Kind::Ontology) {
      out.push_back(FrameTok::ref(tok.id));
    } else if (auto k = Vocab::sentinel_kind(tok.id)) {
      out.push_back(FrameTok::sentinel(*k));
    } else {
      out.push_back(FrameTok::word_tok(tok.surface));
    }
  }
  return out;
}

DecodeResult BirgatModel::decode(const std::vector<std::string>& utterance, int beam, int max_len) const {
  Tape t(false);
  Rng rng(0);
  auto o0 = ontology_rows(t, false, rng);
  return decode_with(o0, utterance, beam, max_len);
}

DecodeResult BirgatModel::decode_with(const TensorPtr& o0, const std::vector<std::string>& utterance,
                                      int beam, int max_len) const {
  Tape t(false);
  Rng rng(0);
  auto [q, o] = encode_with_ontology(t, question_ids(utterance), o0, cfg, enc, ont_graph, false, rng);
  ModelScorer scorer(cfg, dec, enc.word_embed, vocab, q, o, utterance, no_copy);
  const BeamResult r = beam == 1 ? greedy_decode(scorer, max_len) : beam_search(scorer, beam, max_len);
  DecodeResult out;
  out.tokens = output_to_frame_tokens(r.tokens);
  out.logprob = r.logprob;
  out.finished = r.finished;
  return out;
}

std::string BirgatModel::config_fingerprint() const {
  std::ostringstream os;
  os << cfg.m << "/" << cfg.layers << "/" << cfg.heads << "/" << cfg.dropout << "/" << cfg.ffn_mult << "/"
     << cfg.distance_clip << "/" << cfg.max_target_len << "/" << gnn_mode_name(cfg.gnn) << "/"
     << (cfg.dual_cross_attention ? "dca" : "nodca") << "/" << (cfg.ontology_encoding ? "oe" : "nooe") << "/"
     << (no_copy ? "nocopy" : "copy") << "/V" << vocab.size() << "/O" << ont.size();
  uint64_t h = 1469598103934665603ull;
  for (char c : os.str()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

void BirgatModel::save_params(const std::string& path, const std::map<std::string, std::string>& extra_meta) const {
  TensorFile f;
  f.meta["config_fingerprint"] = config_fingerprint();
  for (const auto& [k, v] : extra_meta) f.meta[k] = v;
  for (const auto& [name, tvec] : ps.items()) f.tensors.emplace_back(name, tvec);
  save_tensors(path, f);
}

void BirgatModel::load_params(const std::string& path) {
  TensorFile f = load_tensors(path);
  auto fp = f.meta.find("config_fingerprint");
  if (fp != f.meta.end() && fp->second != config_fingerprint())
    throw SchemaError(path + ": checkpoint was written for a different model configuration");
  for (const auto& [name, param] : ps.items()) {
    TensorPtr src = f.find(name);
    if (!src) throw SchemaError(path + ": checkpoint is missing tensor " + name);
    if (src->shape != param->shape)
      throw SchemaError(path + ": shape mismatch for " + name + ": " + src->shape_str() + " vs " +
                        param->shape_str());
    param->data = src->data;
  }
}

}  // namespace birgat
