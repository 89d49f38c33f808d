#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "birgat/ontology.hpp"

namespace birgat {

struct SlotPair {
  int slot_id = -1;
  std::vector<std::string> value;  // non-empty token sequence
  bool operator==(const SlotPair&) const = default;
};

struct IntentNode {
  int intent_id = -1;
  std::vector<SlotPair> slots;  // may be empty
  bool operator==(const IntentNode&) const = default;
};

struct DomainNode {
  int domain_id = -1;
  std::vector<IntentNode> intents;  // non-empty
  bool operator==(const DomainNode&) const = default;
};

/// 3-layer semantic frame: domains -> intents -> slot/value pairs.
/// Duplicate (slot, value) pairs under different intents are permitted.
struct SemanticFrame {
  std::vector<DomainNode> domains;  // non-empty
  bool operator==(const SemanticFrame&) const = default;

  int intent_count() const;
  std::vector<int> domain_ids() const;
};

/// (domain, intent, slot, value) quadruples, sorted; the frame's content as
/// a multiset.
std::vector<std::tuple<int, int, int, std::vector<std::string>>> frame_quadruples(const SemanticFrame& f);

void validate_frame(const SemanticFrame& f, const Ontology& ont);  // throws InvalidFrame

// ------------------------------------------------------------ linearization

enum class FrameTokKind {
  OpenDomain,   // [
  CloseDomain,  // ]
  OpenIntent,   // (
  CloseIntent,  // )
  OpenSlot,     // {
  CloseSlot,    // }
  Eq,           // =
  OntologyRef,
  Word,
};

struct FrameTok {
  FrameTokKind kind = FrameTokKind::Word;
  int ref_id = -1;    // OntologyRef only
  std::string word;   // Word only

  bool operator==(const FrameTok&) const = default;

  static FrameTok sentinel(FrameTokKind k) { return {k, -1, {}}; }
  static FrameTok ref(int id) { return {FrameTokKind::OntologyRef, id, {}}; }
  static FrameTok word_tok(std::string w) { return {FrameTokKind::Word, -1, std::move(w)}; }
};

using LinearFrame = std::vector<FrameTok>;

struct ParseError {
  size_t position = 0;    // token index the scan failed at
  std::string expected;
  std::string message;
};

/// Grammar (one token per item):
///   output       := domain_block+
///   domain_block := "[" Ref(domain) intent_block+ "]"
///   intent_block := "(" Ref(intent) slot_pair* ")"
///   slot_pair    := "{" Ref(slot) "=" Word+ "}"
/// Intents must be children of the enclosing domain, slots children of the
/// enclosing intent. Deterministic; preserves sibling order.
LinearFrame linearize(const SemanticFrame& f, const Ontology& ont);
std::variant<SemanticFrame, ParseError> delinearize(const LinearFrame& tokens, const Ontology& ont);

/// Ablation variant: ontology items appear as their name tokens instead of
/// atomic refs; parsing resolves names by exact match within the enclosing
/// scope.
LinearFrame linearize_spelled(const SemanticFrame& f, const Ontology& ont);
std::variant<SemanticFrame, ParseError> delinearize_spelled(const LinearFrame& tokens, const Ontology& ont);

// -------------------------------------------------------------- comparison

/// Sibling order normalization: domains by id, intents by (id, slot content),
/// slots by (id, value). Idempotent.
SemanticFrame canonicalize(const SemanticFrame& f);

enum class MatchMode { Canonical, Strict };

bool exact_match(const SemanticFrame& pred, const SemanticFrame& gold, MatchMode mode = MatchMode::Canonical);

/// Fraction of pairs whose prediction parses and exactly matches gold.
/// Unparseable predictions arrive as nullopt and count as non-match.
double sentence_accuracy(const std::vector<std::pair<std::optional<SemanticFrame>, SemanticFrame>>& pairs,
                         MatchMode mode = MatchMode::Canonical);

// ----------------------------------------------------------- text rendering

/// Space-separated rendering: sentinels as their literal characters, words
/// as-is, refs as @<id>:<kind-letter>:<name-with-hyphens>.
std::string render_frame_text(const LinearFrame& tokens, const Ontology& ont);
std::variant<LinearFrame, ParseError> parse_frame_text(const std::string& text, const Ontology& ont);

}  // namespace birgat
