#include "birgat/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace birgat {

using nlohmann::json;

const char* kind_name(ItemKind k) {
  switch (k) {
    case ItemKind::Domain: return "domain";
    case ItemKind::Intent: return "intent";
    case ItemKind::Slot: return "slot";
  }
  return "?";
}

char kind_letter(ItemKind k) {
  switch (k) {
    case ItemKind::Domain: return 'D';
    case ItemKind::Intent: return 'I';
    case ItemKind::Slot: return 'S';
  }
  return '?';
}

std::string OntologyItem::name_joined(char sep) const {
  std::string out;
  for (size_t i = 0; i < name_tokens.size(); ++i) {
    if (i) out += sep;
    out += name_tokens[i];
  }
  return out;
}

const OntologyItem& Ontology::item(int id) const {
  if (id < 0 || id >= size()) throw Error("ontology: item id " + std::to_string(id) + " out of range");
  return items[id];
}

int Ontology::domain_of(int id) const {
  const OntologyItem* it = &item(id);
  while (it->parent_id) it = &item(*it->parent_id);
  return it->id;
}

std::vector<int> Ontology::children(int id) const {
  std::vector<int> out;
  for (const auto& it : items)
    if (it.parent_id && *it.parent_id == id) out.push_back(it.id);
  return out;
}

std::vector<int> Ontology::domain_ids() const {
  std::vector<int> out;
  for (const auto& it : items)
    if (it.kind == ItemKind::Domain) out.push_back(it.id);
  return out;
}

int Ontology::find_by_name(ItemKind k, const std::vector<std::string>& name, std::optional<int> parent) const {
  for (const auto& it : items)
    if (it.kind == k && it.name_tokens == name && it.parent_id == parent) return it.id;
  return -1;
}

void Ontology::validate() const {
  for (int i = 0; i < size(); ++i) {
    const auto& it = items[i];
    if (it.id != i) throw MalformedDocument("ontology: ids not dense at position " + std::to_string(i));
    if (it.name_tokens.empty()) throw MalformedDocument("ontology: empty name at id " + std::to_string(i));
    switch (it.kind) {
      case ItemKind::Domain:
        if (it.parent_id) throw OrphanItem("domain '" + it.name_joined() + "' must not have a parent");
        break;
      case ItemKind::Intent:
        if (!it.parent_id || !is_kind(*it.parent_id, ItemKind::Domain))
          throw OrphanItem("intent '" + it.name_joined() + "' lacks a domain parent");
        break;
      case ItemKind::Slot:
        if (!it.parent_id || !is_kind(*it.parent_id, ItemKind::Intent))
          throw OrphanItem("slot '" + it.name_joined() + "' lacks an intent parent");
        break;
    }
  }
  // contiguous domain blocks
  for (const auto& [d, range] : domain_index) {
    if (!is_kind(d, ItemKind::Domain)) throw MalformedDocument("ontology: domain_index keyed by non-domain");
    for (int i = range.first; i < range.second; ++i)
      if (domain_of(i) != d)
        throw MalformedDocument("ontology: domain block of '" + item(d).name_joined() + "' is not contiguous");
  }
  for (const auto& it : items) {
    int d = domain_of(it.id);
    auto r = domain_index.find(d);
    if (r == domain_index.end() || it.id < r->second.first || it.id >= r->second.second)
      throw MalformedDocument("ontology: item '" + it.name_joined() + "' outside its domain block");
  }
}

// -------------------------------------------------------------- JSON loader

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw MalformedDocument("ontology: unknown key '" + it.key() + "' in " + where);
}

std::vector<std::string> split_name(const json& j, const std::string& where) {
  if (!j.is_string() || j.get<std::string>().empty())
    throw MalformedDocument("ontology: '" + where + "' must be a non-empty string");
  std::istringstream is(j.get<std::string>());
  std::vector<std::string> toks;
  std::string t;
  while (is >> t) toks.push_back(t);
  if (toks.empty()) throw MalformedDocument("ontology: blank name in " + where);
  return toks;
}

}  // namespace

Ontology parse_ontology_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw MalformedDocument(origin + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("domains") || !doc["domains"].is_array())
    throw MalformedDocument(origin + ": top level must be an object with a 'domains' array");
  reject_unknown_keys(doc, {"domains"}, "top level");

  Ontology ont;
  auto add_item = [&](ItemKind k, std::vector<std::string> name, std::optional<int> parent) {
    OntologyItem it;
    it.id = ont.size();
    it.kind = k;
    it.name_tokens = std::move(name);
    it.parent_id = parent;
    ont.items.push_back(std::move(it));
    return ont.items.back().id;
  };

  std::set<std::string> domain_names;
  for (const auto& dj : doc["domains"]) {
    if (!dj.is_object()) throw MalformedDocument(origin + ": domain entries must be objects");
    reject_unknown_keys(dj, {"name", "description", "intents"}, "domain");
    if (!dj.contains("name")) throw MalformedDocument(origin + ": domain missing 'name'");
    auto dname = split_name(dj["name"], "domain.name");
    const std::string dkey = dj["name"].get<std::string>();
    if (!domain_names.insert(dkey).second) throw DuplicateName("duplicate domain name '" + dkey + "'");
    const int did = add_item(ItemKind::Domain, dname, std::nullopt);
    const int block_begin = did;
    if (!dj.contains("intents") || !dj["intents"].is_array() || dj["intents"].empty())
      throw MalformedDocument(origin + ": domain '" + dkey + "' needs a non-empty 'intents' array");
    std::set<std::string> intent_names;
    for (const auto& ij : dj["intents"]) {
      if (!ij.is_object()) throw MalformedDocument(origin + ": intent entries must be objects");
      reject_unknown_keys(ij, {"name", "slots"}, "intent");
      if (!ij.contains("name")) throw MalformedDocument(origin + ": intent missing 'name' in domain '" + dkey + "'");
      const std::string ikey = ij["name"].get<std::string>();
      if (!intent_names.insert(ikey).second)
        throw DuplicateName("duplicate intent name '" + ikey + "' in domain '" + dkey + "'");
      const int iid = add_item(ItemKind::Intent, split_name(ij["name"], "intent.name"), did);
      if (ij.contains("slots")) {
        if (!ij["slots"].is_array()) throw MalformedDocument(origin + ": 'slots' must be an array");
        std::set<std::string> slot_names;
        for (const auto& sj : ij["slots"]) {
          if (!sj.is_object()) throw MalformedDocument(origin + ": slot entries must be objects");
          reject_unknown_keys(sj, {"name", "values"}, "slot");
          if (!sj.contains("name")) throw MalformedDocument(origin + ": slot missing 'name'");
          const std::string skey = sj["name"].get<std::string>();
          if (!slot_names.insert(skey).second)
            throw DuplicateName("duplicate slot name '" + skey + "' in intent '" + ikey + "'");
          const int sid = add_item(ItemKind::Slot, split_name(sj["name"], "slot.name"), iid);
          if (sj.contains("values")) {
            if (!sj["values"].is_array()) throw MalformedDocument(origin + ": slot 'values' must be an array");
            for (const auto& vj : sj["values"])
              ont.items[sid].values.push_back(split_name(vj, "slot.values[]"));
          }
        }
      }
    }
    ont.domain_index[did] = {block_begin, ont.size()};
  }
  ont.validate();
  return ont;
}

Ontology load_ontology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ontology file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ontology_text(ss.str(), path);
}

// ----------------------------------------------------------- relation table

RelationType inverse_relation(RelationType r) {
  switch (r) {
    case RelationType::SlotToIntent: return RelationType::IntentToSlot;
    case RelationType::IntentToSlot: return RelationType::SlotToIntent;
    case RelationType::SlotToDomain: return RelationType::DomainToSlot;
    case RelationType::DomainToSlot: return RelationType::SlotToDomain;
    case RelationType::IntentToDomain: return RelationType::DomainToIntent;
    case RelationType::DomainToIntent: return RelationType::IntentToDomain;
    case RelationType::SelfLoop: return RelationType::SelfLoop;
  }
  return RelationType::SelfLoop;
}

std::optional<RelationType> RelationTable::find(int i, int j) const {
  auto it = entries.find({i, j});
  if (it == entries.end()) return std::nullopt;
  return it->second;
}

RelationTable build_relation_table(const Ontology& ont) {
  RelationTable table;
  table.size = ont.size();
  table.adjacency.resize(ont.size());
  auto put = [&](int i, int j, RelationType r) { table.entries[{i, j}] = r; };
  for (const auto& it : ont.items) {
    put(it.id, it.id, RelationType::SelfLoop);
    if (it.kind == ItemKind::Intent) {
      put(it.id, *it.parent_id, RelationType::IntentToDomain);
      put(*it.parent_id, it.id, RelationType::DomainToIntent);
    } else if (it.kind == ItemKind::Slot) {
      const int intent = *it.parent_id;
      const int domain = *ont.item(intent).parent_id;
      put(it.id, intent, RelationType::SlotToIntent);
      put(intent, it.id, RelationType::IntentToSlot);
      put(it.id, domain, RelationType::SlotToDomain);
      put(domain, it.id, RelationType::DomainToSlot);
    }
  }
  for (const auto& [key, r] : table.entries) table.adjacency[key.first].emplace_back(key.second, r);
  return table;
}

Ontology domain_subset(const Ontology& ont, const std::vector<int>& domains) {
  if (domains.empty()) throw EmptySelection("domain_subset: empty domain selection");
  std::set<int> want;
  for (int d : domains) {
    if (!ont.is_kind(d, ItemKind::Domain)) throw UnknownDomain("domain_subset: id " + std::to_string(d) + " is not a domain");
    want.insert(d);
  }
  Ontology out;
  std::vector<int> remap(ont.size(), -1);
  for (const auto& [d, range] : ont.domain_index) {
    if (!want.count(d)) continue;
    const int begin = out.size();
    for (int i = range.first; i < range.second; ++i) {
      OntologyItem it = ont.items[i];
      remap[i] = out.size();
      it.id = out.size();
      if (it.parent_id) it.parent_id = remap[*it.parent_id];
      out.items.push_back(std::move(it));
    }
    out.domain_index[remap[d]] = {begin, out.size()};
  }
  out.validate();
  return out;
}

}  // namespace birgat
