#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "birgat/frames.hpp"

namespace birgat {

struct SampleMeta {
  std::vector<int> domain_ids;
  int intent_count = 0;
  bool synthesized = false;
  bool operator==(const SampleMeta&) const = default;
};

struct Sample {
  std::vector<std::string> utterance;  // non-empty
  SemanticFrame frame;
  SampleMeta meta;
  bool operator==(const Sample&) const = default;
};

/// Fixed word vocabulary. Ids 0..3 are PAD/BOS/EOS/UNK, 4..10 the seven
/// sentinel tokens (in FrameTokKind order); regular tokens follow.
class Vocab {
 public:
  static constexpr int kPad = 0, kBos = 1, kEos = 2, kUnk = 3;
  static constexpr int kFirstSentinel = 4;
  static constexpr int kSentinelCount = 7;
  static constexpr int kFirstRegular = kFirstSentinel + kSentinelCount;

  Vocab();

  int add(const std::string& token);  // no-op if present; returns id
  int lookup(const std::string& token) const;  // UNK fallback
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }
  bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }

  static int sentinel_id(FrameTokKind k);       // throws for non-sentinels
  static std::optional<FrameTokKind> sentinel_kind(int id);

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

/// Vocabulary over utterance tokens and gold value tokens with corpus
/// frequency >= min_freq. `exclude` forces tokens out (they map to UNK);
/// `include_ontology_names` force-adds every ontology name token (used by
/// the no-copy ablation, whose targets spell item names).
Vocab build_vocab(const std::vector<Sample>& samples, const Ontology& ont, int min_freq,
                  const std::set<std::string>& exclude = {}, bool include_ontology_names = false);

struct Splits {
  std::vector<Sample> train, dev, test;
};

/// Disjoint, exhaustive, seed-deterministic shuffle split.
Splits split_corpus(std::vector<Sample> samples, const std::vector<double>& ratios, uint64_t seed);

std::vector<Sample> filter_by_intent_count(const std::vector<Sample>& samples,
                                           const std::function<bool(int)>& pred);

/// Line format: utterance<TAB>linearized-frame-text<TAB>meta-json
void save_corpus(const std::string& path, const std::vector<Sample>& samples, const Ontology& ont);
std::vector<Sample> load_corpus(const std::string& path, const Ontology& ont);

}  // namespace birgat
