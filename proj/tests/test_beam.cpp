#include "birgat/beam.hpp"

#include <cmath>
#include <map>

#include "birgat/model.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace birgat;

namespace {

OutputToken tok(int id) { return {OutputToken::Kind::Vocab, id, std::string(1, char('a' + id))}; }
const OutputToken kEosTok{OutputToken::Kind::Vocab, 99, "<eos>"};

/// Hand-built scorer: explicit per-prefix distributions over tokens {0,1} + EOS.
class TableScorer : public SequenceScorer {
 public:
  // dist maps prefix string -> {p(tok 0), p(tok 1), p(EOS)}
  explicit TableScorer(std::map<std::string, std::array<double, 3>> dist) : dist_(std::move(dist)) {}

  std::shared_ptr<const void> initial() const override { return std::make_shared<std::string>(""); }

  std::vector<BeamCandidate> candidates(const std::shared_ptr<const void>& state) const override {
    const auto& prefix = *std::static_pointer_cast<const std::string>(state);
    auto it = dist_.find(prefix);
    if (it == dist_.end()) return {};
    return {{tok(0), it->second[0]}, {tok(1), it->second[1]}, {kEosTok, it->second[2]}};
  }

  std::shared_ptr<const void> advance(const std::shared_ptr<const void>& state,
                                      const OutputToken& t) const override {
    auto next = *std::static_pointer_cast<const std::string>(state);
    next += char('a' + t.id);
    return std::make_shared<std::string>(next);
  }

  OutputToken eos() const override { return kEosTok; }

  /// Exhaustive enumeration over all finished sequences of length <= max_len.
  std::pair<std::string, double> exhaustive_best(int max_len) const {
    std::string best;
    double best_p = -1.0;
    std::function<void(std::string, double, int)> walk = [&](std::string prefix, double p, int depth) {
      auto it = dist_.find(prefix);
      if (it == dist_.end()) return;
      if (depth < max_len) {
        const double pe = p * it->second[2];
        if (pe > best_p || (pe == best_p && prefix < best)) {
          best_p = pe;
          best = prefix;
        }
        walk(prefix + "a", p * it->second[0], depth + 1);
        walk(prefix + "b", p * it->second[1], depth + 1);
      }
    };
    walk("", 1.0, 0);
    return {best, best_p};
  }

 private:
  std::map<std::string, std::array<double, 3>> dist_;
};

std::string render(const std::vector<OutputToken>& toks) {
  std::string s;
  for (const auto& t : toks) s += char('a' + t.id);
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("beam");

TEST_CASE("beam(5) finds the exhaustive argmax on a hand-built 3-step model with a greedy trap") {
  // greedy goes a-first but the b branch finishes with far higher mass
  TableScorer scorer({
      {"", {0.60, 0.35, 0.05}},
      {"a", {0.50, 0.50, 0.00}},
      {"b", {0.05, 0.05, 0.90}},
      {"aa", {0.45, 0.45, 0.10}},
      {"ab", {0.25, 0.25, 0.50}},
      {"ba", {0.50, 0.50, 0.00}},
      {"bb", {0.50, 0.50, 0.00}},
      {"aaa", {0, 0, 1}}, {"aab", {0, 0, 1}}, {"aba", {0, 0, 1}}, {"abb", {0, 0, 1}},
      {"baa", {0, 0, 1}}, {"bab", {0, 0, 1}}, {"bba", {0, 0, 1}}, {"bbb", {0, 0, 1}},
  });
  auto [want, want_p] = scorer.exhaustive_best(3);
  CHECK(want == "b");
  auto beam = beam_search(scorer, 5, 3);
  REQUIRE(beam.finished);
  CHECK(render(beam.tokens) == want);
  CHECK(std::exp(beam.logprob) == doctest::Approx(want_p).epsilon(1e-12));
  // and greedy falls into the trap, scoring strictly worse
  auto greedy = greedy_decode(scorer, 3);
  CHECK(render(greedy.tokens) != want);
  CHECK(greedy.logprob < beam.logprob);
}

TEST_CASE("beam(5) equals exhaustive enumeration on 50 random table models") {
  Rng rng(606);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<std::string, std::array<double, 3>> dist;
    const std::vector<std::string> prefixes = {"",   "a",  "b",  "aa", "ab", "ba", "bb",
                                               "aaa", "aab", "aba", "abb", "baa", "bab", "bba", "bbb"};
    for (const auto& p : prefixes) {
      double x = 0.05 + rng.u01(), y = 0.05 + rng.u01(), z = 0.05 + rng.u01();
      const double s = x + y + z;
      dist[p] = {x / s, y / s, z / s};
    }
    TableScorer scorer(dist);
    auto [want, want_p] = scorer.exhaustive_best(3);
    auto beam = beam_search(scorer, 5, 3);
    REQUIRE(beam.finished);
    CHECK(render(beam.tokens) == want);
    CHECK(std::exp(beam.logprob) == doctest::Approx(want_p).epsilon(1e-10));
  }
}

// Width monotonicity is not a theorem for synchronous beam search (a wider
// beam may evict a prefix whose completion a narrower beam kept), so it is
// checked on model-generated distributions rather than adversarial tables.
TEST_CASE("beam width monotonicity holds across model-generated distributions") {
  const char* doc = R"({
    "domains": [
      {"name": "alpha", "intents": [{"name": "go", "slots": [{"name": "place"}]}]},
      {"name": "beta", "intents": [{"name": "stop", "slots": [{"name": "place"}]}]}
    ]
  })";
  Vocab v;
  for (const char* w : {"alpha", "beta", "go", "stop", "place", "here", "now"}) v.add(w);
  EncoderConfig cfg;
  cfg.m = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.dropout = 0.0;
  cfg.ffn_mult = 2;
  cfg.max_target_len = 16;
  Rng seeds(607);
  for (int trial = 0; trial < 20; ++trial) {
    auto model = BirgatModel::build(parse_ontology_text(doc), v, cfg, seeds.next());
    std::vector<std::string> utt = testutil::random_words(seeds, 2 + seeds.below(3));
    const double s1 = model.decode(utt, 1, 12).logprob;
    const double s2 = model.decode(utt, 2, 12).logprob;
    const double s5 = model.decode(utt, 5, 12).logprob;
    CHECK(s2 >= s1 - 1e-12);
    CHECK(s5 >= s2 - 1e-12);
  }
}

TEST_CASE("no EOS mass and max_len 2 yields a flagged unfinished output of length 2") {
  TableScorer scorer({
      {"", {0.6, 0.4, 0.0}},
      {"a", {0.5, 0.5, 0.0}},
      {"b", {0.5, 0.5, 0.0}},
      {"aa", {0.5, 0.5, 0.0}},
      {"ab", {0.5, 0.5, 0.0}},
      {"ba", {0.5, 0.5, 0.0}},
      {"bb", {0.5, 0.5, 0.0}},
  });
  auto r = beam_search(scorer, 5, 2);
  CHECK(!r.finished);
  CHECK(r.tokens.size() == 2);
  auto g = greedy_decode(scorer, 2);
  CHECK(!g.finished);
  CHECK(g.tokens.size() == 2);
}

TEST_CASE("beam width 1 reproduces greedy decoding on 50 random model states") {
  const char* doc = R"({
    "domains": [
      {"name": "alpha", "intents": [{"name": "go", "slots": [{"name": "place"}]}]},
      {"name": "beta", "intents": [{"name": "stop", "slots": [{"name": "place"}]}]}
    ]
  })";
  Vocab v;
  for (const char* w : {"alpha", "beta", "go", "stop", "place", "here", "now"}) v.add(w);
  EncoderConfig cfg;
  cfg.m = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.dropout = 0.0;
  cfg.ffn_mult = 2;
  cfg.max_target_len = 16;
  Rng seeds(608);
  for (int trial = 0; trial < 50; ++trial) {
    auto model = BirgatModel::build(parse_ontology_text(doc), v, cfg, seeds.next());
    std::vector<std::string> utt = testutil::random_words(seeds, 2 + seeds.below(4));
    auto a = model.decode(utt, 1, 12);
    Tape t(false);
    Rng r0(0);
    auto [qm, om] = model.encode_question(t, utt, false, r0);
    ModelScorer scorer(model.cfg, model.dec, model.enc.word_embed, model.vocab, qm, om, utt, false);
    auto b = beam_search(scorer, 1, 12);
    CHECK(model.output_to_frame_tokens(b.tokens) == a.tokens);
    CHECK(a.logprob == doctest::Approx(b.logprob).epsilon(1e-12));
    CHECK(a.finished == b.finished);
  }
}

TEST_SUITE_END();
