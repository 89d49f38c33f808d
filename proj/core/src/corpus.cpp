#include "birgat/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "birgat/rng.hpp"
#include "json.hpp"

namespace birgat {

using nlohmann::json;

namespace {
const char* kSpecialNames[] = {"<pad>", "<bos>", "<eos>", "<unk>", "[", "]", "(", ")", "{", "}", "="};
}

Vocab::Vocab() {
  for (const char* s : kSpecialNames) add(s);
}

int Vocab::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  const int id = size();
  id_to_token_.push_back(token);
  token_to_id_[token] = id;
  return id;
}

int Vocab::lookup(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw Error("vocab: id " + std::to_string(id) + " out of range");
  return id_to_token_[id];
}

int Vocab::sentinel_id(FrameTokKind k) {
  const int i = static_cast<int>(k);
  if (i >= kSentinelCount) throw Error("vocab: not a sentinel kind");
  return kFirstSentinel + i;
}

std::optional<FrameTokKind> Vocab::sentinel_kind(int id) {
  if (id < kFirstSentinel || id >= kFirstSentinel + kSentinelCount) return std::nullopt;
  return static_cast<FrameTokKind>(id - kFirstSentinel);
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& t : id_to_token_) out << t << "\n";
  if (!out) throw IoError("write failed: " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocab file " + path);
  Vocab v;
  std::string line;
  int idx = 0;
  while (std::getline(in, line)) {
    if (idx < v.size()) {
      if (line != v.token(idx))
        throw SchemaError(path + ": line " + std::to_string(idx + 1) + " must be special token '" +
                          v.token(idx) + "', got '" + line + "'");
    } else {
      if (line.empty()) throw SchemaError(path + ": empty token at line " + std::to_string(idx + 1));
      v.add(line);
    }
    ++idx;
  }
  if (idx < Vocab::kFirstRegular) throw SchemaError(path + ": truncated vocab file");
  return v;
}

Vocab build_vocab(const std::vector<Sample>& samples, const Ontology& ont, int min_freq,
                  const std::set<std::string>& exclude, bool include_ontology_names) {
  std::map<std::string, int> freq;
  for (const auto& s : samples) {
    for (const auto& t : s.utterance) ++freq[t];
    for (const auto& q : frame_quadruples(s.frame))
      for (const auto& t : std::get<3>(q)) ++freq[t];
  }
  Vocab v;
  std::vector<std::pair<int, std::string>> order;
  for (const auto& [tok, n] : freq)
    if (n >= min_freq && !exclude.count(tok) && !v.contains(tok)) order.emplace_back(-n, tok);
  std::sort(order.begin(), order.end());
  for (const auto& [negn, tok] : order) v.add(tok);
  if (include_ontology_names)
    for (const auto& item : ont.items)
      for (const auto& t : item.name_tokens)
        if (!exclude.count(t)) v.add(t);
  return v;
}

Splits split_corpus(std::vector<Sample> samples, const std::vector<double>& ratios, uint64_t seed) {
  if (ratios.size() != 3) throw BadRatios("split_corpus: need exactly 3 ratios");
  double total = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw BadRatios("split_corpus: negative ratio");
    total += r;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw BadRatios("split_corpus: ratios sum to " + std::to_string(total));
  Rng rng(mix_seed(seed, 0xC0FFEEull));
  rng.shuffle(samples);
  const auto n = static_cast<double>(samples.size());
  const auto b1 = static_cast<size_t>(std::llround(ratios[0] * n));
  const auto b2 = static_cast<size_t>(std::llround((ratios[0] + ratios[1]) * n));
  Splits out;
  out.train.assign(samples.begin(), samples.begin() + b1);
  out.dev.assign(samples.begin() + b1, samples.begin() + b2);
  out.test.assign(samples.begin() + b2, samples.end());
  return out;
}

std::vector<Sample> filter_by_intent_count(const std::vector<Sample>& samples,
                                           const std::function<bool(int)>& pred) {
  std::vector<Sample> out;
  for (const auto& s : samples)
    if (pred(s.meta.intent_count)) out.push_back(s);
  return out;
}

void save_corpus(const std::string& path, const std::vector<Sample>& samples, const Ontology& ont) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const auto& s : samples) {
    std::string utt;
    for (size_t i = 0; i < s.utterance.size(); ++i) {
      if (i) utt += ' ';
      utt += s.utterance[i];
    }
    json meta = {{"domains", s.meta.domain_ids}, {"intents", s.meta.intent_count}, {"synthesized", s.meta.synthesized}};
    out << utt << '\t' << render_frame_text(linearize(s.frame, ont), ont) << '\t' << meta.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<Sample> load_corpus(const std::string& path, const Ontology& ont) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file " + path);
  std::vector<Sample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto where = path + ":" + std::to_string(lineno);
    size_t t1 = line.find('\t');
    size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw SchemaError(where + ": expected 3 tab-separated fields");
    Sample s;
    {
      std::istringstream us(line.substr(0, t1));
      std::string tok;
      while (us >> tok) s.utterance.push_back(tok);
      if (s.utterance.empty()) throw SchemaError(where + ": empty utterance");
    }
    {
      auto toks = parse_frame_text(line.substr(t1 + 1, t2 - t1 - 1), ont);
      if (std::holds_alternative<ParseError>(toks))
        throw SchemaError(where + ": bad frame text: " + std::get<ParseError>(toks).message);
      auto parsed = delinearize(std::get<LinearFrame>(toks), ont);
      if (std::holds_alternative<ParseError>(parsed))
        throw SchemaError(where + ": bad frame: " + std::get<ParseError>(parsed).message);
      s.frame = std::get<SemanticFrame>(parsed);
    }
    try {
      json meta = json::parse(line.substr(t2 + 1));
      s.meta.domain_ids = meta.at("domains").get<std::vector<int>>();
      s.meta.intent_count = meta.at("intents").get<int>();
      s.meta.synthesized = meta.at("synthesized").get<bool>();
    } catch (const json::exception& e) {
      throw SchemaError(where + ": bad meta json: " + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace birgat
