#include "birgat/beam.hpp"

#include <algorithm>
#include <cmath>

namespace birgat {

bool token_less(const OutputToken& a, const OutputToken& b) {
  if (a.kind != b.kind) return a.kind == OutputToken::Kind::Vocab;
  if (a.id != b.id) return a.id < b.id;
  return a.surface < b.surface;
}

namespace {

struct Hyp {
  std::shared_ptr<const void> state;
  std::vector<OutputToken> tokens;
  double logp = 0.0;
};

bool tokens_less(const std::vector<OutputToken>& a, const std::vector<OutputToken>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), token_less);
}

bool hyp_better(const Hyp& a, const Hyp& b) {
  if (a.logp != b.logp) return a.logp > b.logp;
  return tokens_less(a.tokens, b.tokens);
}

bool cand_better(const BeamCandidate& a, const BeamCandidate& b) {
  if (a.prob != b.prob) return a.prob > b.prob;
  return token_less(a.tok, b.tok);
}

}  // namespace

BeamResult beam_search(const SequenceScorer& scorer, int beam, int max_len) {
  const OutputToken eos = scorer.eos();
  std::vector<Hyp> live;
  live.push_back(Hyp{scorer.initial(), {}, 0.0});
  std::vector<Hyp> done;
  Hyp best_unfinished = live.front();

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    // expansions carry (parent, token) only; states materialize after pruning
    std::vector<Hyp> next;
    std::vector<int> parent_of;
    for (size_t hi = 0; hi < live.size(); ++hi) {
      const auto& hyp = live[hi];
      auto cands = scorer.candidates(hyp.state);
      const int keep = std::min<int>(beam, static_cast<int>(cands.size()));
      std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(), cand_better);
      for (int c = 0; c < keep; ++c) {
        if (cands[c].prob <= 0.0) break;  // sorted, rest are zero too
        const double logp = hyp.logp + std::log(cands[c].prob);
        if (cands[c].tok == eos) {
          done.push_back(Hyp{nullptr, hyp.tokens, logp});
        } else {
          Hyp h{nullptr, hyp.tokens, logp};
          h.tokens.push_back(cands[c].tok);
          next.push_back(std::move(h));
          parent_of.push_back(static_cast<int>(hi));
        }
      }
    }
    std::vector<int> order(next.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return hyp_better(next[a], next[b]); });
    if (static_cast<int>(order.size()) > beam) order.resize(beam);
    if (order.empty()) break;
    best_unfinished = next[order.front()];

    // log-probs only decrease with length, so once the best completed
    // hypothesis beats every live one the search cannot improve
    bool exhausted = step + 1 == max_len;
    if (!exhausted && !done.empty()) {
      const auto best_done = std::min_element(done.begin(), done.end(), hyp_better);
      exhausted = !hyp_better(next[order.front()], *best_done);
    }
    if (exhausted) break;

    std::vector<Hyp> pruned;
    pruned.reserve(order.size());
    for (int idx : order) {
      Hyp h = std::move(next[idx]);
      h.state = scorer.advance(live[parent_of[idx]].state, h.tokens.back());
      pruned.push_back(std::move(h));
    }
    live = std::move(pruned);
  }

  BeamResult out;
  if (!done.empty()) {
    const auto best = std::min_element(done.begin(), done.end(), hyp_better);
    out.tokens = best->tokens;
    out.logprob = best->logp;
    out.finished = true;
  } else {
    out.tokens = best_unfinished.tokens;
    out.logprob = best_unfinished.logp;
    out.finished = false;
  }
  return out;
}

BeamResult greedy_decode(const SequenceScorer& scorer, int max_len) {
  const OutputToken eos = scorer.eos();
  BeamResult out;
  auto state = scorer.initial();
  for (int step = 0; step < max_len; ++step) {
    auto cands = scorer.candidates(state);
    if (cands.empty()) break;
    const auto best = std::min_element(cands.begin(), cands.end(), cand_better);
    if (best->prob <= 0.0) break;
    out.logprob += std::log(best->prob);
    if (best->tok == eos) {
      out.finished = true;
      return out;
    }
    out.tokens.push_back(best->tok);
    state = scorer.advance(state, best->tok);
  }
  out.finished = false;
  return out;
}

}  // namespace birgat
