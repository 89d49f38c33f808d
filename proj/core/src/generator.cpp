#include "birgat/generator.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace birgat {

using nlohmann::json;

const DomainGrammar* GeneratorGrammar::find_domain(int domain_id) const {
  for (const auto& d : domains)
    if (d.domain_id == domain_id) return &d;
  return nullptr;
}

bool contains_span(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (size_t i = 0; i + needle.size() <= hay.size(); ++i)
    if (std::equal(needle.begin(), needle.end(), hay.begin() + i)) return true;
  return false;
}

// --------------------------------------------------------------- load/parse

namespace {

std::vector<std::string> tokenize(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

std::string join(const std::vector<std::string>& toks, char sep = ' ') {
  std::string out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out += sep;
    out += toks[i];
  }
  return out;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where,
                    const std::string& origin) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw MalformedDocument(origin + ": unknown key '" + it.key() + "' in " + where);
}

}  // namespace

GeneratorGrammar parse_grammar_text(const std::string& text, const Ontology& ont, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw MalformedDocument(origin + ": " + e.what());
  }
  if (!doc.is_object()) throw MalformedDocument(origin + ": grammar must be a JSON object");
  reject_unknown(doc,
                 {"domains", "paraphrases", "p_unaligned", "p_duplicate", "intent_count_weights", "conjunctions"},
                 "top level", origin);
  GeneratorGrammar g;
  g.p_unaligned = doc.value("p_unaligned", 0.0);
  g.p_duplicate = doc.value("p_duplicate", 0.0);
  if (g.p_unaligned < 0.0 || g.p_unaligned > 1.0 || g.p_duplicate < 0.0 || g.p_duplicate > 1.0)
    throw MalformedDocument(origin + ": probabilities must lie in [0,1]");
  if (doc.contains("intent_count_weights")) {
    g.intent_count_weights = doc["intent_count_weights"].get<std::vector<double>>();
    if (g.intent_count_weights.empty()) throw MalformedDocument(origin + ": intent_count_weights empty");
    for (double w : g.intent_count_weights)
      if (w < 0.0) throw MalformedDocument(origin + ": negative intent count weight");
  }
  if (doc.contains("conjunctions")) {
    g.conjunctions = doc["conjunctions"].get<std::vector<std::string>>();
    if (g.conjunctions.empty()) throw MalformedDocument(origin + ": conjunctions empty");
  }
  if (!doc.contains("domains") || !doc["domains"].is_array())
    throw MalformedDocument(origin + ": grammar needs a 'domains' array");

  for (const auto& dj : doc["domains"]) {
    reject_unknown(dj, {"name", "intents"}, "grammar domain", origin);
    const auto dname = tokenize(dj.at("name").get<std::string>());
    const int did = ont.find_by_name(ItemKind::Domain, dname, std::nullopt);
    if (did < 0) throw MalformedDocument(origin + ": grammar domain '" + join(dname) + "' not in ontology");
    DomainGrammar dg;
    dg.domain_id = did;
    for (const auto& ij : dj.at("intents")) {
      reject_unknown(ij, {"name", "weight", "templates"}, "grammar intent", origin);
      const auto iname = tokenize(ij.at("name").get<std::string>());
      const int iid = ont.find_by_name(ItemKind::Intent, iname, did);
      if (iid < 0)
        throw MalformedDocument(origin + ": grammar intent '" + join(iname) + "' not in domain '" + join(dname) + "'");
      IntentGrammar ig;
      ig.intent_id = iid;
      ig.weight = ij.value("weight", 1.0);
      if (ig.weight <= 0.0) throw MalformedDocument(origin + ": intent weight must be positive");
      for (const auto& tj : ij.at("templates")) {
        auto toks = tokenize(tj.get<std::string>());
        if (toks.empty()) throw MalformedDocument(origin + ": empty template in intent '" + join(iname) + "'");
        std::set<std::string> seen;
        for (const auto& tok : toks) {
          if (tok.size() > 2 && tok.front() == '<' && tok.back() == '>') {
            const std::string sname = tok.substr(1, tok.size() - 2);
            if (!seen.insert(sname).second)
              throw MalformedDocument(origin + ": placeholder <" + sname + "> repeated in one template");
            std::string spaced = sname;
            std::replace(spaced.begin(), spaced.end(), '-', ' ');
            const int sid = ont.find_by_name(ItemKind::Slot, tokenize(spaced), iid);
            if (sid < 0)
              throw MalformedDocument(origin + ": placeholder <" + sname + "> names no slot of intent '" +
                                      join(iname) + "'");
            if (ont.item(sid).values.empty())
              throw MalformedDocument(origin + ": slot '" + sname + "' has no values in the ontology");
          }
        }
        ig.templates.push_back(std::move(toks));
      }
      if (ig.templates.empty()) throw MalformedDocument(origin + ": intent '" + join(iname) + "' has no templates");
      dg.intents.push_back(std::move(ig));
    }
    if (dg.intents.empty()) throw MalformedDocument(origin + ": grammar domain '" + join(dname) + "' has no intents");
    g.domains.push_back(std::move(dg));
  }
  if (doc.contains("paraphrases")) {
    if (!doc["paraphrases"].is_object()) throw MalformedDocument(origin + ": 'paraphrases' must be an object");
    for (auto it = doc["paraphrases"].begin(); it != doc["paraphrases"].end(); ++it) {
      std::vector<std::vector<std::string>> phrases;
      for (const auto& pj : it.value()) {
        auto toks = tokenize(pj.get<std::string>());
        if (toks.empty()) throw MalformedDocument(origin + ": empty paraphrase for value '" + it.key() + "'");
        if (contains_span(toks, tokenize(it.key())))
          throw MalformedDocument(origin + ": paraphrase of '" + it.key() + "' contains the value verbatim");
        phrases.push_back(std::move(toks));
      }
      if (phrases.empty()) throw MalformedDocument(origin + ": value '" + it.key() + "' has no paraphrases");
      g.paraphrases[it.key()] = std::move(phrases);
    }
  }
  return g;
}

GeneratorGrammar load_grammar(const std::string& path, const Ontology& ont) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grammar file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_grammar_text(ss.str(), ont, path);
}

// ---------------------------------------------------------------- sampling

namespace {

struct SlotInstance {
  int slot_id = -1;
  std::vector<std::string> value;        // gold value tokens
  std::vector<std::string> realization;  // tokens placed into the utterance
  size_t template_pos = 0;               // placeholder position in the template
};

struct IntentInstance {
  int intent_id = -1;
  const std::vector<std::string>* tmpl = nullptr;
  std::vector<SlotInstance> slots;
};

int resolve_placeholder(const Ontology& ont, int intent_id, const std::string& tok) {
  if (tok.size() > 2 && tok.front() == '<' && tok.back() == '>') {
    std::string sname = tok.substr(1, tok.size() - 2);
    std::replace(sname.begin(), sname.end(), '-', ' ');
    std::istringstream is(sname);
    std::vector<std::string> name;
    std::string t;
    while (is >> t) name.push_back(t);
    return ont.find_by_name(ItemKind::Slot, name, intent_id);
  }
  return -1;
}

Sample gen_one(const GeneratorGrammar& g, const Ontology& ont, const DomainGrammar& dg, int forced_count,
               Rng& rng) {
  const int avail = static_cast<int>(dg.intents.size());
  int count = forced_count;
  if (count <= 0) {
    std::vector<double> w(g.intent_count_weights.begin(),
                          g.intent_count_weights.begin() + std::min<size_t>(g.intent_count_weights.size(), avail));
    count = rng.weighted(w) + 1;
  }
  count = std::min(count, avail);

  // weighted draw of distinct intents
  std::vector<int> pool(avail);
  for (int i = 0; i < avail; ++i) pool[i] = i;
  std::vector<IntentInstance> intents;
  for (int c = 0; c < count; ++c) {
    std::vector<double> w;
    for (int idx : pool) w.push_back(dg.intents[idx].weight);
    const int pick = rng.weighted(w);
    const IntentGrammar& ig = dg.intents[pool[pick]];
    pool.erase(pool.begin() + pick);
    IntentInstance inst;
    inst.intent_id = ig.intent_id;
    inst.tmpl = &ig.templates[rng.below(static_cast<int>(ig.templates.size()))];
    for (size_t p = 0; p < inst.tmpl->size(); ++p) {
      const int sid = resolve_placeholder(ont, ig.intent_id, (*inst.tmpl)[p]);
      if (sid < 0) continue;
      SlotInstance si;
      si.slot_id = sid;
      const auto& values = ont.item(sid).values;
      si.value = values[rng.below(static_cast<int>(values.size()))];
      si.template_pos = p;
      inst.slots.push_back(std::move(si));
    }
    intents.push_back(std::move(inst));
  }

  // duplicate alignments: force two intents to share one value string
  if (count >= 2 && rng.bernoulli(g.p_duplicate)) {
    bool done = false;
    for (size_t i1 = 0; i1 < intents.size() && !done; ++i1)
      for (size_t i2 = i1 + 1; i2 < intents.size() && !done; ++i2)
        for (auto& sa : intents[i1].slots) {
          if (done) break;
          for (auto& sb : intents[i2].slots) {
            const auto& va = ont.item(sa.slot_id).values;
            const auto& vb = ont.item(sb.slot_id).values;
            std::vector<std::vector<std::string>> common;
            for (const auto& v : va)
              if (std::find(vb.begin(), vb.end(), v) != vb.end()) common.push_back(v);
            if (common.empty()) continue;
            const auto& shared = common[rng.below(static_cast<int>(common.size()))];
            sa.value = shared;
            sb.value = shared;
            done = true;
            break;
          }
        }
  }

  // realizations: paraphrase = value implied but not present verbatim
  for (auto& inst : intents)
    for (auto& si : inst.slots) {
      si.realization = si.value;
      if (rng.bernoulli(g.p_unaligned)) {
        auto it = g.paraphrases.find(join(si.value));
        if (it != g.paraphrases.end())
          si.realization = it->second[rng.below(static_cast<int>(it->second.size()))];
      }
    }

  Sample s;
  DomainNode dn;
  dn.domain_id = dg.domain_id;
  for (size_t k = 0; k < intents.size(); ++k) {
    const auto& inst = intents[k];
    if (k) s.utterance.push_back(g.conjunctions[rng.below(static_cast<int>(g.conjunctions.size()))]);
    size_t next_slot = 0;
    for (size_t p = 0; p < inst.tmpl->size(); ++p) {
      if (next_slot < inst.slots.size() && inst.slots[next_slot].template_pos == p) {
        for (const auto& w : inst.slots[next_slot].realization) s.utterance.push_back(w);
        ++next_slot;
      } else {
        s.utterance.push_back((*inst.tmpl)[p]);
      }
    }
    IntentNode in;
    in.intent_id = inst.intent_id;
    for (const auto& si : inst.slots) in.slots.push_back({si.slot_id, si.value});
    dn.intents.push_back(std::move(in));
  }
  s.frame.domains.push_back(std::move(dn));
  s.meta.domain_ids = {dg.domain_id};
  s.meta.intent_count = count;
  s.meta.synthesized = false;

  if (g.p_unaligned == 0.0)
    for (const auto& q : frame_quadruples(s.frame))
      if (!contains_span(s.utterance, std::get<3>(q)))
        throw Error("generator: aligned value missing from utterance (grammar bug)");
  return s;
}

}  // namespace

std::vector<Sample> generate_single_domain(const GeneratorGrammar& g, const Ontology& ont, int domain_id,
                                           int n, uint64_t seed) {
  if (n < 1) throw Error("generate_single_domain: n must be >= 1");
  const DomainGrammar* dg = g.find_domain(domain_id);
  if (!dg) throw DomainNotInGrammar("domain id " + std::to_string(domain_id) + " not covered by the grammar");
  std::vector<Sample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(domain_id), static_cast<uint64_t>(i)));
    out.push_back(gen_one(g, ont, *dg, 0, rng));
  }
  return out;
}

Sample synthesize_cross_domain(const Sample& a, const Sample& b, const std::string& conjunction) {
  for (int da : a.meta.domain_ids)
    for (int db : b.meta.domain_ids)
      if (da == db) throw SameDomain("cross-domain synthesis requires two different domains");
  Sample s;
  s.utterance = a.utterance;
  s.utterance.push_back(conjunction);
  s.utterance.insert(s.utterance.end(), b.utterance.begin(), b.utterance.end());
  s.frame.domains = a.frame.domains;
  s.frame.domains.insert(s.frame.domains.end(), b.frame.domains.begin(), b.frame.domains.end());
  s.meta.domain_ids = a.meta.domain_ids;
  s.meta.domain_ids.insert(s.meta.domain_ids.end(), b.meta.domain_ids.begin(), b.meta.domain_ids.end());
  s.meta.intent_count = a.meta.intent_count + b.meta.intent_count;
  s.meta.synthesized = true;
  return s;
}

std::vector<Sample> generate_mixed(const GeneratorGrammar& g, const Ontology& ont, int n, double cross_frac,
                                   uint64_t seed) {
  if (g.domains.empty()) throw DomainNotInGrammar("grammar covers no domains");
  std::vector<Sample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, 0xCAFEull, static_cast<uint64_t>(i)));
    std::vector<double> w(g.intent_count_weights);
    const int count = rng.weighted(w) + 1;
    const bool cross = g.domains.size() >= 2 && count >= 2 && rng.bernoulli(cross_frac);
    if (cross) {
      const int d1 = rng.below(static_cast<int>(g.domains.size()));
      int d2 = rng.below(static_cast<int>(g.domains.size()) - 1);
      if (d2 >= d1) ++d2;
      const int c1 = 1 + rng.below(count - 1);
      Sample a = gen_one(g, ont, g.domains[d1], c1, rng);
      Sample b = gen_one(g, ont, g.domains[d2], count - c1, rng);
      out.push_back(synthesize_cross_domain(a, b, g.conjunctions[rng.below(static_cast<int>(g.conjunctions.size()))]));
    } else {
      const int d = rng.below(static_cast<int>(g.domains.size()));
      out.push_back(gen_one(g, ont, g.domains[d], count, rng));
    }
  }
  return out;
}

}  // namespace birgat
