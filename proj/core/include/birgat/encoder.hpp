#pragma once

#include "birgat/corpus.hpp"
#include "birgat/nn.hpp"
#include "birgat/ontology.hpp"
#include "birgat/ops.hpp"
#include "birgat/param_store.hpp"

namespace birgat {

enum class GnnMode { None, Gat, Rgat };
const char* gnn_mode_name(GnnMode m);
GnnMode gnn_mode_from(const std::string& name);

struct EncoderConfig {
  int m = 256;
  int layers = 2;
  int heads = 8;
  double dropout = 0.2;
  int ffn_mult = 4;
  int distance_clip = 8;
  int max_target_len = 192;
  GnnMode gnn = GnnMode::Rgat;
  bool dual_cross_attention = true;
  bool ontology_encoding = true;

  int head_dim() const { return m / heads; }
  void validate() const;
};

struct AttnBlock {
  TensorPtr wq, wk, wv, wo;
  TensorPtr ln_g, ln_b;
};

struct Ffn {
  TensorPtr w1, b1, w2, b2;
  TensorPtr ln_g, ln_b;
};

struct EncoderLayer {
  AttnBlock q_self, o_self;
  TensorPtr q_self_wz, o_self_wz;  // head_dim x head_dim, RGAT only
  AttnBlock q_cross, o_cross;
  Ffn ffn;  // shared by both segments
};

struct EncoderParams {
  TensorPtr word_embed;  // |V| x m, shared with the decoder output side
  TensorPtr type_embed;  // 3 x m (Domain/Intent/Slot prefix token)
  LstmWeights lstm_fw, lstm_bw;
  TensorPtr rel_ont;   // 7 x head_dim, shared across layers and heads
  TensorPtr rel_dist;  // (2k+1) x head_dim
  TensorPtr ont_item_embed;  // |O| x m, only when ontology encoding is off
  std::vector<EncoderLayer> layers;
};

EncoderParams build_encoder_params(ParamStore& ps, const EncoderConfig& cfg, int vocab_size, int ont_size,
                                   Rng& rng);

/// Attention support over ontology items: typed sparse edges from the
/// relation table (RGAT), or dense within each domain block (GAT).
ops::AttnGraph ontology_attention_graph(const RelationTable& rel, const Ontology& ont, GnnMode mode);

/// Type-aware BiLSTM over [type, name tokens] per item, rows in id order.
/// With ontology encoding off, rows come from a learned per-item table.
TensorPtr encode_ontology_items(Tape& t, const Ontology& ont, const Vocab& vocab, const EncoderConfig& cfg,
                                const EncoderParams& p, bool train, Rng& rng);

TensorPtr encode_question_init(Tape& t, const std::vector<int>& token_ids, const EncoderConfig& cfg,
                               const EncoderParams& p, bool train, Rng& rng);

std::pair<TensorPtr, TensorPtr> birgat_layer(Tape& t, const TensorPtr& q, const TensorPtr& o,
                                             const EncoderLayer& lp, const EncoderParams& p,
                                             const EncoderConfig& cfg, const ops::AttnGraph& q_graph,
                                             const ops::AttnGraph& o_graph, bool train, Rng& rng);

/// Full encoder: initial embeddings through L BiRGAT layers.
std::pair<TensorPtr, TensorPtr> encode(Tape& t, const std::vector<int>& question_ids, const Ontology& ont,
                                       const Vocab& vocab, const EncoderConfig& cfg, const EncoderParams& p,
                                       const ops::AttnGraph& ont_graph, bool train, Rng& rng);

/// Same, but reusing precomputed initial ontology rows (they do not depend on
/// the question, so batches and evaluation share them).
std::pair<TensorPtr, TensorPtr> encode_with_ontology(Tape& t, const std::vector<int>& question_ids,
                                                     const TensorPtr& o0, const EncoderConfig& cfg,
                                                     const EncoderParams& p, const ops::AttnGraph& ont_graph,
                                                     bool train, Rng& rng);

constexpr double kLayerNormEps = 1e-5;

}  // namespace birgat
