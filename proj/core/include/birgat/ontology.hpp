#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "birgat/errors.hpp"

namespace birgat {

enum class ItemKind { Domain, Intent, Slot };

const char* kind_name(ItemKind k);   // "domain" / "intent" / "slot"
char kind_letter(ItemKind k);        // 'D' / 'I' / 'S'

struct OntologyItem {
  int id = -1;
  ItemKind kind = ItemKind::Domain;
  std::vector<std::string> name_tokens;      // non-empty
  std::optional<int> parent_id;              // absent iff Domain
  // Slot items may carry a canonical value inventory (used by the corpus
  // generator); each value is a token sequence.
  std::vector<std::vector<std::string>> values;

  std::string name_joined(char sep = ' ') const;
};

/// The domain -> intent -> slot hierarchy. Ids are dense 0..n-1 in document
/// order and each domain's items occupy a contiguous id block.
struct Ontology {
  std::vector<OntologyItem> items;
  // domain id -> [begin, end) id range of the domain's block (inclusive of
  // the domain item itself)
  std::map<int, std::pair<int, int>> domain_index;

  int size() const { return static_cast<int>(items.size()); }
  const OntologyItem& item(int id) const;
  bool is_kind(int id, ItemKind k) const { return id >= 0 && id < size() && items[id].kind == k; }
  int domain_of(int id) const;  // walks the parent chain
  std::vector<int> children(int id) const;
  std::vector<int> domain_ids() const;
  /// Item of the given kind+parent whose name tokens match exactly; -1 if none.
  int find_by_name(ItemKind k, const std::vector<std::string>& name, std::optional<int> parent) const;

  void validate() const;  // throws on invariant violations
};

enum class RelationType {
  SlotToIntent = 0,
  IntentToSlot = 1,
  SlotToDomain = 2,
  DomainToSlot = 3,
  IntentToDomain = 4,
  DomainToIntent = 5,
  SelfLoop = 6,
};
constexpr int kRelationTypeCount = 7;
RelationType inverse_relation(RelationType r);

/// Sparse pairwise relations among ontology items; also the attention
/// neighborhood N(i). No entry ever connects items of two different domains.
struct RelationTable {
  int size = 0;
  std::map<std::pair<int, int>, RelationType> entries;
  std::vector<std::vector<std::pair<int, RelationType>>> adjacency;  // per i: (j, type)

  std::optional<RelationType> find(int i, int j) const;
};

Ontology load_ontology(const std::string& path);
Ontology parse_ontology_text(const std::string& text, const std::string& origin = "<string>");

RelationTable build_relation_table(const Ontology& ont);

/// Re-indexed sub-ontology containing only the listed domains' blocks, in
/// the order the blocks appear in the original.
Ontology domain_subset(const Ontology& ont, const std::vector<int>& domains);

}  // namespace birgat
