#pragma once

#include <map>
#include <string>
#include <vector>

#include "birgat/corpus.hpp"
#include "birgat/rng.hpp"

namespace birgat {

struct IntentGrammar {
  int intent_id = -1;
  double weight = 1.0;  // sampling weight within the domain
  std::vector<std::vector<std::string>> templates;  // tokens; "<slot-name>" placeholders
};

struct DomainGrammar {
  int domain_id = -1;
  std::vector<IntentGrammar> intents;
};

/// Template grammar driving the synthetic corpus generator. Slot value
/// inventories come from the ontology; paraphrases realize a value in the
/// utterance without its tokens appearing verbatim (the unaligned case).
struct GeneratorGrammar {
  std::vector<DomainGrammar> domains;
  std::map<std::string, std::vector<std::vector<std::string>>> paraphrases;  // joined value -> phrases
  double p_unaligned = 0.0;
  double p_duplicate = 0.0;
  std::vector<double> intent_count_weights = {1.0};  // index i -> weight of count i+1
  std::vector<std::string> conjunctions = {"and"};

  const DomainGrammar* find_domain(int domain_id) const;
  int max_intent_count() const { return static_cast<int>(intent_count_weights.size()); }
};

GeneratorGrammar parse_grammar_text(const std::string& text, const Ontology& ont,
                                    const std::string& origin = "<string>");
GeneratorGrammar load_grammar(const std::string& path, const Ontology& ont);

/// n single-domain samples for one domain; intent count drawn from the
/// grammar's distribution (capped by the domain's intent inventory).
/// Deterministic in seed; sample i depends only on (seed, i).
std::vector<Sample> generate_single_domain(const GeneratorGrammar& g, const Ontology& ont, int domain_id,
                                           int n, uint64_t seed);

/// Concatenates two single-domain samples from different domains.
Sample synthesize_cross_domain(const Sample& a, const Sample& b, const std::string& conjunction);

/// Mixed corpus: each sample is cross-domain with probability cross_frac
/// (total intent count still follows the grammar's distribution).
std::vector<Sample> generate_mixed(const GeneratorGrammar& g, const Ontology& ont, int n,
                                   double cross_frac, uint64_t seed);

/// True iff `needle` occurs as a contiguous subsequence of `hay`.
bool contains_span(const std::vector<std::string>& hay, const std::vector<std::string>& needle);

}  // namespace birgat
