#include "birgat/toy_grammar.hpp"

#include "json.hpp"

namespace birgat {

using nlohmann::json;

namespace {

json slot(const char* name, std::initializer_list<const char*> values) {
  json v = json::array();
  for (const char* x : values) v.push_back(x);
  return json{{"name", name}, {"values", v}};
}

json intent(const char* name, std::initializer_list<json> slots) {
  json s = json::array();
  for (const auto& x : slots) s.push_back(x);
  return json{{"name", name}, {"slots", s}};
}

}  // namespace

std::string toy_ontology_text() {
  const json zone = slot("zone", {"driver side", "passenger side", "rear row", "whole cabin", "front row"});
  const json change = slot("change", {"one degree", "two degrees", "five degrees", "ten degrees"});
  const json speed = slot("speed", {"low", "medium", "high", "turbo"});
  const json track = slot("track", {"smooth jazz", "classic rock", "midnight blues", "synthwave", "morning pop"});
  const json level = slot("level", {"soft", "normal", "loud", "max"});
  const json source = slot("source", {"radio", "bluetooth", "usb drive", "cloud library"});
  const json place = slot("place", {"city office", "central station", "south airport", "harbor park"});
  const json mode = slot("mode", {"fastest", "shortest", "scenic", "toll free"});
  const json stops = slot("stops", {"one", "two", "three"});

  json doc;
  doc["domains"] = json::array({
      json{{"name", "climate"},
           {"intents", json::array({
                           intent("raise temperature", {zone, change, speed}),
                           intent("lower temperature", {zone, change, speed}),
                           intent("start airflow", {zone, change, speed}),
                           intent("stop airflow", {zone, change, speed}),
                       })}},
      json{{"name", "media"},
           {"intents", json::array({
                           intent("play track", {track, level, source}),
                           intent("queue track", {track, level, source}),
                           intent("raise volume", {track, level, source}),
                           intent("lower volume", {track, level, source}),
                       })}},
      json{{"name", "trips"},
           {"intents", json::array({
                           intent("set destination", {place, mode, stops}),
                           intent("cancel destination", {place, mode, stops}),
                           intent("add stop", {place, mode, stops}),
                           intent("show route", {place, mode, stops}),
                       })}},
  });
  return doc.dump(2);
}

std::string toy_grammar_text(double p_unaligned, double p_duplicate, int max_intents) {
  auto gintent = [](const char* name, double weight, std::initializer_list<const char*> templates) {
    json t = json::array();
    for (const char* x : templates) t.push_back(x);
    return json{{"name", name}, {"weight", weight}, {"templates", t}};
  };

  json doc;
  doc["p_unaligned"] = p_unaligned;
  doc["p_duplicate"] = p_duplicate;
  doc["conjunctions"] = {"and", "then", "also"};
  std::vector<double> w = {0.40, 0.35, 0.25, 0.15};
  w.resize(std::min<size_t>(std::max(max_intents, 1), w.size()));
  doc["intent_count_weights"] = w;

  doc["domains"] = json::array({
      json{{"name", "climate"},
           {"intents",
            json::array({
                gintent("raise temperature", 1.0,
                        {"raise the temperature by <change>", "warm up the <zone>",
                         "raise the heat in the <zone> by <change>"}),
                gintent("lower temperature", 1.0,
                        {"lower the temperature by <change>", "cool down the <zone>",
                         "drop the heat in the <zone> by <change>"}),
                gintent("start airflow", 1.0,
                        {"start the airflow at <speed> power", "get air moving in the <zone>",
                         "turn on the fans"}),
                gintent("stop airflow", 0.3,
                        {"stop the airflow in the <zone>", "turn off the fans",
                         "kill the airflow at <speed> power"}),
            })}},
      json{{"name", "media"},
           {"intents",
            json::array({
                gintent("play track", 1.0,
                        {"play some <track>", "put on <track> from the <source>",
                         "play <track> at <level> volume"}),
                gintent("queue track", 0.3,
                        {"queue up some <track>", "add <track> to the playlist",
                         "queue <track> from the <source>"}),
                gintent("raise volume", 1.0,
                        {"raise the volume to <level>", "turn the music up",
                         "crank the <source> volume to <level>"}),
                gintent("lower volume", 1.0,
                        {"lower the volume to <level>", "turn the music down",
                         "soften the <source> volume to <level>"}),
            })}},
      json{{"name", "trips"},
           {"intents",
            json::array({
                gintent("set destination", 1.0,
                        {"set the destination to <place>", "navigate to <place>",
                         "take me to <place> the <mode> way"}),
                gintent("cancel destination", 0.3,
                        {"cancel the trip to <place>", "drop the route to <place>",
                         "cancel the <mode> route"}),
                gintent("add stop", 1.0,
                        {"add a stop at <place>", "plan <stops> stops",
                         "add <stops> stops near <place>"}),
                gintent("show route", 1.0,
                        {"show the <mode> route to <place>", "display the route with <stops> stops",
                         "show me the way to <place>"}),
            })}},
  });

  doc["paraphrases"] = json{
      {"driver side", {"on my side"}},
      {"passenger side", {"next to me"}},
      {"rear row", {"in the back"}},
      {"whole cabin", {"everywhere"}},
      {"front row", {"up front"}},
      {"one degree", {"a touch"}},
      {"two degrees", {"a little"}},
      {"five degrees", {"a lot"}},
      {"ten degrees", {"way up"}},
      {"low", {"gently"}},
      {"medium", {"moderately"}},
      {"high", {"strongly"}},
      {"turbo", {"full blast"}},
      {"smooth jazz", {"something mellow"}},
      {"classic rock", {"something loud"}},
      {"midnight blues", {"something moody"}},
      {"synthwave", {"something retro"}},
      {"morning pop", {"something upbeat"}},
      {"soft", {"quite faint"}},
      {"normal", {"standard loudness"}},
      {"loud", {"pretty booming"}},
      {"max", {"absolute peak"}},
      {"radio", {"the airwaves"}},
      {"bluetooth", {"my phone"}},
      {"usb drive", {"the stick"}},
      {"cloud library", {"my collection"}},
      {"city office", {"my work"}},
      {"central station", {"the trains"}},
      {"south airport", {"my flight"}},
      {"harbor park", {"the waterfront"}},
      {"fastest", {"quickest"}},
      {"shortest", {"briefest"}},
      {"scenic", {"pretty"}},
      {"toll free", {"cheap"}},
      {"one", {"a single"}},
      {"two", {"a couple of"}},
      {"three", {"a few"}},
  };
  return doc.dump(2);
}

Ontology toy_ontology() { return parse_ontology_text(toy_ontology_text(), "<toy-ontology>"); }

GeneratorGrammar toy_grammar(const Ontology& ont, double p_unaligned, double p_duplicate, int max_intents) {
  return parse_grammar_text(toy_grammar_text(p_unaligned, p_duplicate, max_intents), ont, "<toy-grammar>");
}

}  // namespace birgat
