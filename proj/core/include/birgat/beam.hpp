#pragma once

#include <memory>
#include <string>
#include <vector>

namespace birgat {

/// Decoder output token: either a word from the fixed vocabulary (sentinels,
/// EOS and copied question words included; copies carry their surface form)
/// or an ontology item selection.
struct OutputToken {
  enum class Kind { Vocab, Ontology };
  Kind kind = Kind::Vocab;
  int id = -1;           // vocab id or ontology item id
  std::string surface;   // surface form for vocab-kind word tokens

  bool operator==(const OutputToken&) const = default;
};

/// Deterministic tie-break order: vocab before ontology, then id, then surface.
bool token_less(const OutputToken& a, const OutputToken& b);

struct BeamCandidate {
  OutputToken tok;
  double prob = 0.0;  // next-token probability (not log)
};

/// Next-token distribution provider for the search. States are immutable;
/// advance() returns the state after appending one token.
class SequenceScorer {
 public:
  virtual ~SequenceScorer() = default;
  virtual std::shared_ptr<const void> initial() const = 0;
  virtual std::vector<BeamCandidate> candidates(const std::shared_ptr<const void>& state) const = 0;
  virtual std::shared_ptr<const void> advance(const std::shared_ptr<const void>& state,
                                              const OutputToken& tok) const = 0;
  /// The end-of-sequence token this scorer emits.
  virtual OutputToken eos() const = 0;
};

struct BeamResult {
  std::vector<OutputToken> tokens;  // EOS excluded
  double logprob = 0.0;             // includes the EOS term when finished
  bool finished = false;
};

/// Width-`beam` search: keeps the `beam` best partial hypotheses by summed
/// log probability, expands each with its top `beam` continuations, parks
/// hypotheses at EOS, and returns the best completed one (no length
/// normalization). Ties break by token-id lexicographic order.
BeamResult beam_search(const SequenceScorer& scorer, int beam, int max_len);

/// Argmax decoding; identical to beam_search with beam = 1.
BeamResult greedy_decode(const SequenceScorer& scorer, int max_len);

}  // namespace birgat
