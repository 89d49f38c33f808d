#include <set>

#include "birgat/ontology.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace birgat;

namespace {

const char* kMinimalDoc = R"({
  "domains": [
    {"name": "music", "intents": [
      {"name": "play", "slots": [{"name": "song"}]}
    ]}
  ]
})";

const char* kFiveDomainDoc = R"({
  "domains": [
    {"name": "map", "intents": [{"name": "open map"}]},
    {"name": "weather", "intents": [{"name": "ask weather"}]},
    {"name": "phone", "intents": [{"name": "call"}]},
    {"name": "in-vehicle control", "intents": [{"name": "turn on", "slots": [{"name": "obj"}]},
                                               {"name": "close", "slots": [{"name": "obj"}]}]},
    {"name": "music", "intents": [{"name": "play", "slots": [{"name": "song"}]}]}
  ]
})";

}  // namespace

TEST_SUITE_BEGIN("ontology");

TEST_CASE("minimal hierarchy loads with dense ids and parents") {
  auto ont = parse_ontology_text(kMinimalDoc);
  REQUIRE(ont.size() == 3);
  CHECK(ont.item(0).kind == ItemKind::Domain);
  CHECK(ont.item(1).kind == ItemKind::Intent);
  CHECK(ont.item(2).kind == ItemKind::Slot);
  CHECK(!ont.item(0).parent_id);
  CHECK(*ont.item(1).parent_id == 0);
  CHECK(*ont.item(2).parent_id == 1);
}

TEST_CASE("five-domain document loads five domain items") {
  auto ont = parse_ontology_text(kFiveDomainDoc);
  CHECK(ont.domain_ids().size() == 5);
  std::set<std::string> names;
  for (int d : ont.domain_ids()) names.insert(ont.item(d).name_joined());
  CHECK(names == std::set<std::string>{"map", "weather", "phone", "in-vehicle control", "music"});
  // domain blocks contiguous
  for (const auto& [d, range] : ont.domain_index)
    for (int i = range.first; i < range.second; ++i) CHECK(ont.domain_of(i) == d);
}

TEST_CASE("schema violations are rejected") {
  CHECK_THROWS_AS(parse_ontology_text("not json at all"), MalformedDocument);
  CHECK_THROWS_AS(parse_ontology_text(R"({"domains": [], "extra": 1})"), MalformedDocument);
  // unknown keys are rejected
  CHECK_THROWS_AS(parse_ontology_text(R"({"domains": [{"name": "a", "wat": 1,
    "intents": [{"name": "b"}]}]})"),
                  MalformedDocument);
  // duplicate names within one parent
  CHECK_THROWS_AS(parse_ontology_text(R"({"domains": [{"name": "a", "intents": [
    {"name": "b"}, {"name": "b"}]}]})"),
                  DuplicateName);
  // a domain with no intents is an orphan-producing document
  CHECK_THROWS_AS(parse_ontology_text(R"({"domains": [{"name": "a", "intents": []}]})"), MalformedDocument);
}

TEST_CASE("slot with a missing intent parent fails validation as an orphan") {
  Ontology ont;
  ont.items.push_back({0, ItemKind::Domain, {"music"}, std::nullopt, {}});
  ont.items.push_back({1, ItemKind::Slot, {"song"}, 0, {}});  // slot under a domain
  ont.domain_index[0] = {0, 2};
  CHECK_THROWS_AS(ont.validate(), OrphanItem);
}

TEST_CASE("relation table holds exactly the hierarchy edges plus self-loops") {
  auto ont = parse_ontology_text(kMinimalDoc);  // ids: domain 0, intent 1, slot 2
  auto table = build_relation_table(ont);
  CHECK(table.entries.size() == 3 + 6);  // 3 self-loops + 3 edges both ways
  CHECK(*table.find(2, 1) == RelationType::SlotToIntent);
  CHECK(*table.find(1, 2) == RelationType::IntentToSlot);
  CHECK(*table.find(2, 0) == RelationType::SlotToDomain);
  CHECK(*table.find(0, 2) == RelationType::DomainToSlot);
  CHECK(*table.find(1, 0) == RelationType::IntentToDomain);
  CHECK(*table.find(0, 1) == RelationType::DomainToIntent);
  for (int i = 0; i < 3; ++i) CHECK(*table.find(i, i) == RelationType::SelfLoop);
}

TEST_CASE("no relation ever crosses two domains") {
  auto ont = parse_ontology_text(kFiveDomainDoc);
  auto table = build_relation_table(ont);
  for (const auto& [key, r] : table.entries) CHECK(ont.domain_of(key.first) == ont.domain_of(key.second));
}

TEST_CASE("single-domain-only ontology yields only the self-loop") {
  Ontology ont;
  ont.items.push_back({0, ItemKind::Domain, {"solo"}, std::nullopt, {}});
  ont.domain_index[0] = {0, 1};
  ont.validate();
  auto table = build_relation_table(ont);
  REQUIRE(table.entries.size() == 1);
  CHECK(*table.find(0, 0) == RelationType::SelfLoop);
}

TEST_CASE("relation table entry count and symmetry over random ontologies") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    auto ont = testutil::random_ontology(rng);
    auto table = build_relation_table(ont);
    int intents = 0, slots = 0;
    for (const auto& it : ont.items) {
      intents += it.kind == ItemKind::Intent;
      slots += it.kind == ItemKind::Slot;
    }
    CHECK(static_cast<int>(table.entries.size()) == ont.size() + 2 * intents + 2 * slots + 2 * slots);
    for (const auto& [key, r] : table.entries) {
      auto inv = table.find(key.second, key.first);
      REQUIRE(inv.has_value());
      CHECK(*inv == inverse_relation(r));
    }
  }
}

TEST_CASE("domain_subset reindexes blocks and preserves relation structure") {
  auto ont = parse_ontology_text(kFiveDomainDoc);
  // music block only
  const auto music = ont.domain_ids().back();
  auto sub = domain_subset(ont, {music});
  REQUIRE(sub.size() == 3);
  CHECK(sub.item(0).name_joined() == "music");
  CHECK(sub.item(1).name_joined() == "play");
  CHECK(sub.item(2).name_joined() == "song");

  // full subset is identity up to ids
  auto all = domain_subset(ont, ont.domain_ids());
  REQUIRE(all.size() == ont.size());
  for (int i = 0; i < ont.size(); ++i) CHECK(all.item(i).name_tokens == ont.item(i).name_tokens);

  CHECK_THROWS_AS(domain_subset(ont, {}), EmptySelection);
  CHECK_THROWS_AS(domain_subset(ont, {1}), UnknownDomain);  // id 1 is an intent
}

TEST_CASE("subset relations equal the restriction of the full table") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    auto ont = testutil::random_ontology(rng, 3, 2, 2);
    auto full = build_relation_table(ont);
    auto domains = ont.domain_ids();
    if (domains.size() < 2) continue;
    std::vector<int> keep = {domains[0], domains.back()};
    auto sub = domain_subset(ont, keep);
    auto sub_table = build_relation_table(sub);

    // old id -> new id map, in block order
    std::vector<int> remap(ont.size(), -1);
    int at = 0;
    for (int d : ont.domain_ids()) {
      if (d != keep[0] && d != keep[1]) continue;
      auto [b, e] = ont.domain_index.at(d);
      for (int i = b; i < e; ++i) remap[i] = at++;
    }
    int restricted = 0;
    for (const auto& [key, r] : full.entries) {
      if (remap[key.first] < 0 || remap[key.second] < 0) continue;
      ++restricted;
      auto got = sub_table.find(remap[key.first], remap[key.second]);
      REQUIRE(got.has_value());
      CHECK(*got == r);
    }
    CHECK(restricted == static_cast<int>(sub_table.entries.size()));
  }
}

TEST_SUITE_END();
