#include "birgat/frames.hpp"

#include <algorithm>
#include <sstream>

namespace birgat {

int SemanticFrame::intent_count() const {
  int n = 0;
  for (const auto& d : domains) n += static_cast<int>(d.intents.size());
  return n;
}

std::vector<int> SemanticFrame::domain_ids() const {
  std::vector<int> out;
  for (const auto& d : domains) out.push_back(d.domain_id);
  return out;
}

std::vector<std::tuple<int, int, int, std::vector<std::string>>> frame_quadruples(const SemanticFrame& f) {
  std::vector<std::tuple<int, int, int, std::vector<std::string>>> out;
  for (const auto& d : f.domains)
    for (const auto& i : d.intents)
      for (const auto& s : i.slots) out.emplace_back(d.domain_id, i.intent_id, s.slot_id, s.value);
  std::sort(out.begin(), out.end());
  return out;
}

void validate_frame(const SemanticFrame& f, const Ontology& ont) {
  if (f.domains.empty()) throw InvalidFrame("frame has no domains");
  for (const auto& d : f.domains) {
    if (!ont.is_kind(d.domain_id, ItemKind::Domain))
      throw InvalidFrame("frame references non-domain id " + std::to_string(d.domain_id));
    if (d.intents.empty())
      throw InvalidFrame("domain '" + ont.item(d.domain_id).name_joined() + "' has no intents");
    for (const auto& i : d.intents) {
      if (!ont.is_kind(i.intent_id, ItemKind::Intent))
        throw InvalidFrame("frame references non-intent id " + std::to_string(i.intent_id));
      if (ont.item(i.intent_id).parent_id != std::optional<int>(d.domain_id))
        throw InvalidFrame("intent '" + ont.item(i.intent_id).name_joined() + "' is not a child of domain '" +
                           ont.item(d.domain_id).name_joined() + "'");
      for (const auto& s : i.slots) {
        if (!ont.is_kind(s.slot_id, ItemKind::Slot))
          throw InvalidFrame("frame references non-slot id " + std::to_string(s.slot_id));
        if (ont.item(s.slot_id).parent_id != std::optional<int>(i.intent_id))
          throw InvalidFrame("slot '" + ont.item(s.slot_id).name_joined() + "' is not a child of intent '" +
                             ont.item(i.intent_id).name_joined() + "'");
        if (s.value.empty()) throw InvalidFrame("empty slot value under slot id " + std::to_string(s.slot_id));
      }
    }
  }
}

// ------------------------------------------------------------ linearization

LinearFrame linearize(const SemanticFrame& f, const Ontology& ont) {
  validate_frame(f, ont);
  LinearFrame out;
  for (const auto& d : f.domains) {
    out.push_back(FrameTok::sentinel(FrameTokKind::OpenDomain));
    out.push_back(FrameTok::ref(d.domain_id));
    for (const auto& i : d.intents) {
      out.push_back(FrameTok::sentinel(FrameTokKind::OpenIntent));
      out.push_back(FrameTok::ref(i.intent_id));
      for (const auto& s : i.slots) {
        out.push_back(FrameTok::sentinel(FrameTokKind::OpenSlot));
        out.push_back(FrameTok::ref(s.slot_id));
        out.push_back(FrameTok::sentinel(FrameTokKind::Eq));
        for (const auto& w : s.value) out.push_back(FrameTok::word_tok(w));
        out.push_back(FrameTok::sentinel(FrameTokKind::CloseSlot));
      }
      out.push_back(FrameTok::sentinel(FrameTokKind::CloseIntent));
    }
    out.push_back(FrameTok::sentinel(FrameTokKind::CloseDomain));
  }
  return out;
}

LinearFrame linearize_spelled(const SemanticFrame& f, const Ontology& ont) {
  LinearFrame refs = linearize(f, ont);
  LinearFrame out;
  for (const auto& tok : refs) {
    if (tok.kind == FrameTokKind::OntologyRef)
      for (const auto& w : ont.item(tok.ref_id).name_tokens) out.push_back(FrameTok::word_tok(w));
    else
      out.push_back(tok);
  }
  return out;
}

// ------------------------------------------------------------------ parsing

namespace {

/// LL(1) scan over the sentinel grammar. Shared by the ref and spelled modes;
/// `spelled` switches ontology references from atomic tokens to exact-name
/// resolution against the enclosing scope.
class FrameParser {
 public:
  FrameParser(const LinearFrame& toks, const Ontology& ont, bool spelled)
      : toks_(toks), ont_(ont), spelled_(spelled) {}

  std::variant<SemanticFrame, ParseError> run() {
    SemanticFrame frame;
    if (at_end()) return fail("'[' to open a domain block");
    while (!at_end()) {
      auto d = parse_domain();
      if (!d) return *err_;
      frame.domains.push_back(std::move(*d));
    }
    return frame;
  }

 private:
  bool at_end() const { return pos_ >= toks_.size(); }
  const FrameTok* peek() const { return at_end() ? nullptr : &toks_[pos_]; }
  bool peek_is(FrameTokKind k) const { return !at_end() && toks_[pos_].kind == k; }

  ParseError fail(const std::string& expected) {
    err_ = ParseError{pos_, expected,
                      at_end() ? "unexpected end of input, expected " + expected
                               : "unexpected token at position " + std::to_string(pos_) + ", expected " + expected};
    return *err_;
  }

  bool expect(FrameTokKind k, const char* what) {
    if (!peek_is(k)) {
      fail(what);
      return false;
    }
    ++pos_;
    return true;
  }

  /// Resolves the next ontology reference of the wanted kind under `parent`
  /// (-1 for domains). Returns -1 and sets err_ on failure.
  int parse_item(ItemKind want, int parent) {
    const std::string what = std::string(kind_name(want)) + " reference";
    if (spelled_) {
      std::vector<std::string> name;
      while (peek_is(FrameTokKind::Word)) {
        name.push_back(toks_[pos_].word);
        ++pos_;
      }
      if (name.empty()) {
        fail(what + " (name tokens)");
        return -1;
      }
      int id = ont_.find_by_name(want, name, parent < 0 ? std::nullopt : std::optional<int>(parent));
      if (id < 0) {
        fail("known " + std::string(kind_name(want)) + " name under the enclosing scope");
        return -1;
      }
      return id;
    }
    if (!peek_is(FrameTokKind::OntologyRef)) {
      fail(what);
      return -1;
    }
    const int id = toks_[pos_].ref_id;
    if (id < 0 || id >= ont_.size()) {
      fail("valid ontology id, got " + std::to_string(id));
      return -1;
    }
    if (ont_.item(id).kind != want) {
      fail(what + ", got " + kind_name(ont_.item(id).kind) + " id " + std::to_string(id));
      return -1;
    }
    if (parent >= 0 && ont_.item(id).parent_id != std::optional<int>(parent)) {
      fail(std::string(kind_name(want)) + " that is a child of item " + std::to_string(parent));
      return -1;
    }
    ++pos_;
    return id;
  }

  std::optional<DomainNode> parse_domain() {
    if (!expect(FrameTokKind::OpenDomain, "'[' to open a domain block")) return std::nullopt;
    DomainNode d;
    d.domain_id = parse_item(ItemKind::Domain, -1);
    if (d.domain_id < 0) return std::nullopt;
    if (!peek_is(FrameTokKind::OpenIntent)) {
      fail("'(' to open an intent block");
      return std::nullopt;
    }
    while (peek_is(FrameTokKind::OpenIntent)) {
      auto i = parse_intent(d.domain_id);
      if (!i) return std::nullopt;
      d.intents.push_back(std::move(*i));
    }
    if (!expect(FrameTokKind::CloseDomain, "']' to close the domain block")) return std::nullopt;
    return d;
  }

  std::optional<IntentNode> parse_intent(int domain_id) {
    if (!expect(FrameTokKind::OpenIntent, "'('")) return std::nullopt;
    IntentNode node;
    node.intent_id = parse_item(ItemKind::Intent, domain_id);
    if (node.intent_id < 0) return std::nullopt;
    while (peek_is(FrameTokKind::OpenSlot)) {
      auto s = parse_slot(node.intent_id);
      if (!s) return std::nullopt;
      node.slots.push_back(std::move(*s));
    }
    if (!expect(FrameTokKind::CloseIntent, "')' to close the intent block")) return std::nullopt;
    return node;
  }

  std::optional<SlotPair> parse_slot(int intent_id) {
    if (!expect(FrameTokKind::OpenSlot, "'{'")) return std::nullopt;
    SlotPair s;
    s.slot_id = parse_item(ItemKind::Slot, intent_id);
    if (s.slot_id < 0) return std::nullopt;
    if (!expect(FrameTokKind::Eq, "'=' between slot and value")) return std::nullopt;
    while (peek_is(FrameTokKind::Word)) {
      s.value.push_back(toks_[pos_].word);
      ++pos_;
    }
    if (s.value.empty()) {
      fail("non-empty slot value");
      return std::nullopt;
    }
    if (!expect(FrameTokKind::CloseSlot, "'}' to close the slot pair")) return std::nullopt;
    return s;
  }

  const LinearFrame& toks_;
  const Ontology& ont_;
  bool spelled_;
  size_t pos_ = 0;
  std::optional<ParseError> err_;
};

}  // namespace

std::variant<SemanticFrame, ParseError> delinearize(const LinearFrame& tokens, const Ontology& ont) {
  return FrameParser(tokens, ont, false).run();
}

std::variant<SemanticFrame, ParseError> delinearize_spelled(const LinearFrame& tokens, const Ontology& ont) {
  return FrameParser(tokens, ont, true).run();
}

// -------------------------------------------------------------- comparison

namespace {

std::string slot_sort_key(const SlotPair& s) {
  std::string k = std::to_string(s.slot_id);
  for (const auto& w : s.value) k += "\x01" + w;
  return k;
}

std::string intent_sort_key(const IntentNode& i) {
  std::string k = std::to_string(i.intent_id);
  for (const auto& s : i.slots) k += "\x02" + slot_sort_key(s);
  return k;
}

std::string domain_sort_key(const DomainNode& d) {
  std::string k = std::to_string(d.domain_id);
  for (const auto& i : d.intents) k += "\x03" + intent_sort_key(i);
  return k;
}

}  // namespace

SemanticFrame canonicalize(const SemanticFrame& f) {
  SemanticFrame out = f;
  for (auto& d : out.domains) {
    for (auto& i : d.intents)
      std::sort(i.slots.begin(), i.slots.end(), [](const SlotPair& a, const SlotPair& b) {
        return std::tie(a.slot_id, a.value) < std::tie(b.slot_id, b.value);
      });
    std::sort(d.intents.begin(), d.intents.end(), [](const IntentNode& a, const IntentNode& b) {
      if (a.intent_id != b.intent_id) return a.intent_id < b.intent_id;
      return intent_sort_key(a) < intent_sort_key(b);
    });
  }
  std::sort(out.domains.begin(), out.domains.end(), [](const DomainNode& a, const DomainNode& b) {
    if (a.domain_id != b.domain_id) return a.domain_id < b.domain_id;
    return domain_sort_key(a) < domain_sort_key(b);
  });
  return out;
}

bool exact_match(const SemanticFrame& pred, const SemanticFrame& gold, MatchMode mode) {
  if (mode == MatchMode::Strict) return pred == gold;
  return canonicalize(pred) == canonicalize(gold);
}

double sentence_accuracy(const std::vector<std::pair<std::optional<SemanticFrame>, SemanticFrame>>& pairs,
                         MatchMode mode) {
  if (pairs.empty()) return 0.0;
  int hits = 0;
  for (const auto& [pred, gold] : pairs)
    if (pred && exact_match(*pred, gold, mode)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

// ----------------------------------------------------------- text rendering

namespace {

const char* sentinel_lexeme(FrameTokKind k) {
  switch (k) {
    case FrameTokKind::OpenDomain: return "[";
    case FrameTokKind::CloseDomain: return "]";
    case FrameTokKind::OpenIntent: return "(";
    case FrameTokKind::CloseIntent: return ")";
    case FrameTokKind::OpenSlot: return "{";
    case FrameTokKind::CloseSlot: return "}";
    case FrameTokKind::Eq: return "=";
    default: return nullptr;
  }
}

}  // namespace

std::string render_frame_text(const LinearFrame& tokens, const Ontology& ont) {
  std::string out;
  for (const auto& tok : tokens) {
    if (!out.empty()) out += ' ';
    if (const char* s = sentinel_lexeme(tok.kind)) {
      out += s;
    } else if (tok.kind == FrameTokKind::OntologyRef) {
      const auto& it = ont.item(tok.ref_id);
      out += '@' + std::to_string(tok.ref_id) + ':' + kind_letter(it.kind) + ':' + it.name_joined('-');
    } else {
      out += tok.word;
    }
  }
  return out;
}

std::variant<LinearFrame, ParseError> parse_frame_text(const std::string& text, const Ontology& ont) {
  LinearFrame out;
  std::istringstream is(text);
  std::string lex;
  size_t pos = 0;
  while (is >> lex) {
    if (lex == "[") out.push_back(FrameTok::sentinel(FrameTokKind::OpenDomain));
    else if (lex == "]") out.push_back(FrameTok::sentinel(FrameTokKind::CloseDomain));
    else if (lex == "(") out.push_back(FrameTok::sentinel(FrameTokKind::OpenIntent));
    else if (lex == ")") out.push_back(FrameTok::sentinel(FrameTokKind::CloseIntent));
    else if (lex == "{") out.push_back(FrameTok::sentinel(FrameTokKind::OpenSlot));
    else if (lex == "}") out.push_back(FrameTok::sentinel(FrameTokKind::CloseSlot));
    else if (lex == "=") out.push_back(FrameTok::sentinel(FrameTokKind::Eq));
    else if (lex.size() > 1 && lex[0] == '@') {
      size_t c1 = lex.find(':');
      size_t c2 = c1 == std::string::npos ? std::string::npos : lex.find(':', c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos)
        return ParseError{pos, "@<id>:<kind>:<name>", "malformed ontology reference '" + lex + "'"};
      int id = -1;
      try {
        id = std::stoi(lex.substr(1, c1 - 1));
      } catch (...) {
        return ParseError{pos, "integer ontology id", "malformed ontology reference '" + lex + "'"};
      }
      if (id < 0 || id >= ont.size())
        return ParseError{pos, "ontology id in range", "unknown ontology id in '" + lex + "'"};
      const char kl = lex[c1 + 1];
      if (c2 != c1 + 2 || kl != kind_letter(ont.item(id).kind))
        return ParseError{pos, "kind letter matching item " + std::to_string(id),
                          "kind mismatch in reference '" + lex + "'"};
      out.push_back(FrameTok::ref(id));
    } else {
      out.push_back(FrameTok::word_tok(lex));
    }
    ++pos;
  }
  return out;
}

}  // namespace birgat
