#pragma once

#include "birgat/checkpoint.hpp"
#include "birgat/decoder.hpp"
#include "birgat/encoder.hpp"

namespace birgat {

struct DecodeResult {
  LinearFrame tokens;
  double logprob = 0.0;
  bool finished = false;
};

/// Full encoder-decoder over a fixed ontology and vocabulary.
struct BirgatModel {
  EncoderConfig cfg;
  bool no_copy = false;  // gate pinned to generation; targets spell item names
  Ontology ont;
  RelationTable rel;
  Vocab vocab;
  ParamStore ps;
  EncoderParams enc;
  DecoderParams dec;
  ops::AttnGraph ont_graph;

  static BirgatModel build(Ontology ont, Vocab vocab, EncoderConfig cfg, uint64_t seed, bool no_copy = false);

  std::pair<TensorPtr, TensorPtr> encode_question(Tape& t, const std::vector<std::string>& utterance,
                                                  bool train, Rng& rng) const;

  /// Initial ontology rows; question-independent, so a batch or an
  /// evaluation pass computes them once and shares them.
  TensorPtr ontology_rows(Tape& t, bool train, Rng& rng) const;

  /// Gold target tokens for one sample (ref or spelled form per no_copy).
  std::vector<TargetTok> target_for(const SemanticFrame& frame) const;

  /// Teacher-forced sequence NLL of one sample.
  TensorPtr sample_nll(Tape& t, const Sample& sample, bool train, Rng& rng) const;
  /// Same, reusing shared initial ontology rows.
  TensorPtr sample_nll_with(Tape& t, const Sample& sample, const TensorPtr& o0, bool train, Rng& rng) const;

  DecodeResult decode(const std::vector<std::string>& utterance, int beam, int max_len) const;
  DecodeResult decode_with(const TensorPtr& o0, const std::vector<std::string>& utterance, int beam,
                           int max_len) const;

  std::vector<int> question_ids(const std::vector<std::string>& utterance) const;

  /// Output tokens -> frame tokens (vocab sentinels/words and ontology refs).
  LinearFrame output_to_frame_tokens(const std::vector<OutputToken>& toks) const;

  void save_params(const std::string& path, const std::map<std::string, std::string>& extra_meta = {}) const;
  void load_params(const std::string& path);  // by name, shapes must match

  std::string config_fingerprint() const;
};

}  // namespace birgat
