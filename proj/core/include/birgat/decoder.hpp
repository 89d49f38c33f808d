#pragma once

#include "birgat/beam.hpp"
#include "birgat/encoder.hpp"

namespace birgat {

struct DecoderParams {
  TensorPtr pos;  // max_target_len x m learned absolute positions
  AttnBlock self_attn, cross_attn;
  Ffn ffn;
  TensorPtr w_g;          // m x 3 gate
  TensorPtr w_gen;        // m x m generation projection
  TensorPtr ont_in_proj;  // m x m, feeds selected ontology memory rows back in
  TensorPtr ptrq_wq, ptrq_wk;  // pointer attention over question memory
  TensorPtr ptro_wq, ptro_wk;  // pointer attention over ontology memory
};

DecoderParams build_decoder_params(ParamStore& ps, const EncoderConfig& cfg, Rng& rng);

/// One gold output position: a vocabulary word (with surface form) or an
/// ontology item. Targets end with EOS.
struct TargetTok {
  bool is_ont = false;
  int id = 0;
  std::string surface;
};

std::vector<TargetTok> make_target(const LinearFrame& lin, const Vocab& vocab, const Ontology& ont);

/// Decoder input embedding for one token at one step: shared word embedding
/// plus learned position, or a projected ontology memory row plus position.
TensorPtr embed_output_token(Tape& t, const OutputToken& tok, int step, const TensorPtr& word_embed,
                             const TensorPtr& omem, const DecoderParams& dec);

/// Teacher-forced hidden states: causal self-attention over the embedded
/// gold prefix, cross-attention over [Q;O], feedforward; row t is s_{t+1}.
TensorPtr decoder_hidden_states(Tape& t, const std::vector<TargetTok>& target, const TensorPtr& word_embed,
                                const TensorPtr& qmem, const TensorPtr& omem, const EncoderConfig& cfg,
                                const DecoderParams& dec, bool train, Rng& rng);

struct MixtureOut {
  TensorPtr gate;  // {T,3}
  TensorPtr pgen;  // {T,|V|}
  TensorPtr ptrq;  // {T,|Q|}
  TensorPtr ptro;  // {T,|O|}
};

MixtureOut mixture(Tape& t, const TensorPtr& s, const TensorPtr& word_embed, const TensorPtr& qmem,
                   const TensorPtr& omem, const EncoderConfig& cfg, const DecoderParams& dec);

/// Teacher-forced negative log likelihood of the gold sequence. A gold word's
/// probability merges the generation and copy paths by surface form; gold
/// ontology items take the gated pointer mass. Probabilities floor at 1e-12.
/// With no_copy the gate is pinned to pure generation and pointers are off.
TensorPtr sequence_loss(Tape& t, const std::vector<TargetTok>& target,
                        const std::vector<std::string>& question_tokens, const TensorPtr& word_embed,
                        const TensorPtr& qmem, const TensorPtr& omem, const EncoderConfig& cfg,
                        const DecoderParams& dec, const Vocab& vocab, bool no_copy, bool train, Rng& rng);

/// Incremental inference scorer over frozen memories (eval mode, cached
/// self-attention keys/values and precomputed cross/pointer projections).
class ModelScorer : public SequenceScorer {
 public:
  ModelScorer(const EncoderConfig& cfg, const DecoderParams& dec, const TensorPtr& word_embed,
              const Vocab& vocab, const TensorPtr& qmem, const TensorPtr& omem,
              const std::vector<std::string>& question_tokens, bool no_copy);

  std::shared_ptr<const void> initial() const override;
  std::vector<BeamCandidate> candidates(const std::shared_ptr<const void>& state) const override;
  std::shared_ptr<const void> advance(const std::shared_ptr<const void>& state,
                                      const OutputToken& tok) const override;
  OutputToken eos() const override;

 private:
  struct State;
  std::shared_ptr<const State> step(const TensorPtr& kcache, const TensorPtr& vcache, int fed,
                                    const TensorPtr& x) const;

  const EncoderConfig& cfg_;
  const DecoderParams& dec_;
  TensorPtr word_embed_;
  const Vocab& vocab_;
  TensorPtr qmem_, omem_;
  TensorPtr kcross_, vcross_, kptr_q_, kptr_o_;
  bool no_copy_;
  struct QuestionGroup {
    std::string surface;
    int vocab_id = 0;
    std::vector<int> positions;
  };
  std::vector<QuestionGroup> qgroups_;
};

}  // namespace birgat
