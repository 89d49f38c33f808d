#pragma once

#include <string>

#include "birgat/generator.hpp"
#include "birgat/ontology.hpp"

namespace birgat {

/// Built-in 3-domain / 4-intents-per-domain / 3-slots-per-intent preset used
/// by the demo pipeline and the end-to-end test harnesses. Slot names repeat
/// across the intents of a domain and one intent per domain is sampled
/// rarely, so structural and name-reading model components both carry
/// signal.
std::string toy_ontology_text();

/// Matching template grammar. `max_intents` extends the intent count
/// distribution (3 for the standard corpus, 4 for the transfer corpus).
std::string toy_grammar_text(double p_unaligned, double p_duplicate, int max_intents = 3);

Ontology toy_ontology();
GeneratorGrammar toy_grammar(const Ontology& ont, double p_unaligned, double p_duplicate, int max_intents = 3);

}  // namespace birgat
