#include "uniex/data.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace uniex {

namespace {

std::string join(const std::vector<std::string>& words, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += words[i];
  }
  return out;
}

nlohmann::json span_json(const ExDocument& doc, const Span& s) {
  return {{"start", s.start}, {"end", s.end}, {"text", doc.surface(s)}};
}

Span span_from_json(const nlohmann::json& j) {
  return {j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
}

void check_surface(const ExDocument& doc, const nlohmann::json& j, const Span& s) {
  if (j.contains("text") && j.at("text").get<std::string>() != doc.surface(s)) {
    throw std::invalid_argument("surface '" + j.at("text").get<std::string>() +
                                "' does not match tokens '" + doc.surface(s) + "'");
  }
}

}  // namespace

std::string ExDocument::surface(const Span& span) const {
  if (span.start > span.end || span.end >= tokens.size()) return {};
  return join(tokens, span.start, span.end + 1);
}

void ExDocument::validate() const {
  auto check = [&](const Span& s) {
    if (s.start > s.end || s.end >= tokens.size()) {
      throw std::invalid_argument("document '" + id + "': span (" + std::to_string(s.start) + ", " +
                                  std::to_string(s.end) + ") outside " +
                                  std::to_string(tokens.size()) + " tokens");
    }
  };
  for (const auto& e : gold.entities) check(e.span);
  for (const auto& r : gold.relations) {
    check(r.subject);
    check(r.object);
  }
  for (const auto& ev : gold.events) {
    check(ev.trigger);
    for (const auto& a : ev.arguments) check(a.span);
  }
  for (const auto& s : gold.sentiments) {
    check(s.aspect);
    check(s.opinion);
  }
}

nlohmann::json to_json(const ExDocument& doc) {
  nlohmann::json j;
  j["id"] = doc.id;
  j["text"] = doc.text;
  j["tokens"] = doc.tokens;
  j["task"] = doc.task;
  auto ents = nlohmann::json::array();
  for (const auto& e : doc.gold.entities) {
    auto s = span_json(doc, e.span);
    s["type"] = e.label;
    ents.push_back(s);
  }
  auto rels = nlohmann::json::array();
  for (const auto& r : doc.gold.relations) {
    rels.push_back({{"head", span_json(doc, r.subject)}, {"type", r.label}, {"tail", span_json(doc, r.object)}});
  }
  auto evs = nlohmann::json::array();
  for (const auto& ev : doc.gold.events) {
    auto args = nlohmann::json::array();
    for (const auto& a : ev.arguments) {
      auto s = span_json(doc, a.span);
      s["role"] = a.role;
      args.push_back(s);
    }
    evs.push_back({{"type", ev.label}, {"trigger", span_json(doc, ev.trigger)}, {"arguments", args}});
  }
  auto sents = nlohmann::json::array();
  for (const auto& s : doc.gold.sentiments) {
    sents.push_back({{"aspect", span_json(doc, s.aspect)},
                     {"polarity", s.polarity},
                     {"opinion", span_json(doc, s.opinion)}});
  }
  j["entities"] = ents;
  j["relations"] = rels;
  j["events"] = evs;
  j["sentiments"] = sents;
  return j;
}

ExDocument document_from_json(const nlohmann::json& j) {
  ExDocument doc;
  doc.id = j.value("id", "");
  doc.text = j.value("text", "");
  doc.task = j.value("task", "");
  doc.tokens = j.contains("tokens") ? j.at("tokens").get<std::vector<std::string>>()
                                    : split_words(doc.text);
  auto read_span = [&](const nlohmann::json& s) {
    const auto span = span_from_json(s);
    if (span.start > span.end || span.end >= doc.tokens.size()) {
      throw std::invalid_argument("span (" + std::to_string(span.start) + ", " +
                                  std::to_string(span.end) + ") outside the tokens");
    }
    check_surface(doc, s, span);
    return span;
  };
  for (const auto& e : j.value("entities", nlohmann::json::array())) {
    doc.gold.entities.push_back({read_span(e), e.at("type").get<std::string>()});
  }
  for (const auto& r : j.value("relations", nlohmann::json::array())) {
    doc.gold.relations.push_back(
        {read_span(r.at("head")), r.at("type").get<std::string>(), read_span(r.at("tail"))});
  }
  for (const auto& ev : j.value("events", nlohmann::json::array())) {
    Event e{ev.at("type").get<std::string>(), read_span(ev.at("trigger")), {}};
    for (const auto& a : ev.value("arguments", nlohmann::json::array())) {
      e.arguments.push_back({read_span(a), a.at("role").get<std::string>()});
    }
    doc.gold.events.push_back(std::move(e));
  }
  for (const auto& s : j.value("sentiments", nlohmann::json::array())) {
    doc.gold.sentiments.push_back({read_span(s.at("aspect")), s.at("polarity").get<std::string>(),
                                   read_span(s.at("opinion"))});
  }
  doc.gold.normalize();
  return doc;
}

std::vector<ExDocument> read_jsonl(std::istream& is) {
  std::vector<ExDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(document_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ConversionError(lineno, e.what());
    }
  }
  return docs;
}

std::vector<ExDocument> read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_jsonl(is);
  } catch (const ConversionError& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_jsonl(std::ostream& os, const std::vector<ExDocument>& docs) {
  for (const auto& d : docs) os << to_json(d).dump() << '\n';
}

void write_jsonl(const std::filesystem::path& path, const std::vector<ExDocument>& docs) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    write_jsonl(os, docs);
    if (!os) throw std::runtime_error("short write on " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ColumnConversion convert_column_ner(std::istream& is, const std::string& task) {
  static const std::map<std::string, std::string> kExpand = {
      {"PER", "Person"}, {"LOC", "Location"}, {"ORG", "Organization"}, {"MISC", "Miscellaneous"}};
  ColumnConversion out;
  std::vector<std::string> tokens;
  std::vector<TypedSpan> spans;
  std::optional<std::size_t> open_start;
  std::string open_type;

  auto close = [&]() {
    if (open_start) spans.push_back({{*open_start, tokens.size() - 1}, open_type});
    open_start.reset();
  };
  auto flush = [&]() {
    close();
    if (!tokens.empty()) {
      ExDocument doc;
      doc.id = "sent-" + std::to_string(out.docs.size());
      doc.tokens = tokens;
      doc.text = join(tokens, 0, tokens.size());
      doc.task = task;
      doc.gold.entities = spans;
      doc.gold.normalize();
      out.docs.push_back(std::move(doc));
    }
    tokens.clear();
    spans.clear();
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto cols = split_words(line);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols[0] == "-DOCSTART-") continue;
    if (cols.size() < 2) throw ConversionError(lineno, "expected 'token tag', got '" + line + "'");
    const std::string& tag = cols.back();
    std::string prefix, type;
    if (tag == "O") {
      prefix = "O";
    } else if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
      prefix = tag.substr(0, 1);
      type = tag.substr(2);
      if (auto it = kExpand.find(type); it != kExpand.end()) type = it->second;
    } else {
      throw ConversionError(lineno, "unrecognized tag '" + tag + "'");
    }

    if (prefix == "O") {
      close();
    } else if (prefix == "B" || !open_start || open_type != type) {
      if (prefix == "I") ++out.dangling_inside_tags;
      close();
      open_start = tokens.size();
      open_type = type;
    }
    tokens.push_back(cols[0]);
  }
  flush();
  return out;
}

Span span_from_one_based(long long start, long long end) {
  if (start < 1 || end < start) {
    throw std::invalid_argument("invalid 1-based span (" + std::to_string(start) + ", " +
                                std::to_string(end) + ")");
  }
  return {static_cast<std::size_t>(start - 1), static_cast<std::size_t>(end - 1)};
}

std::vector<ExDocument> convert_generic_json(std::istream& is) {
  std::vector<ExDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ExDocument doc;
      doc.id = j.value("id", "doc-" + std::to_string(docs.size()));
      doc.text = j.at("text").get<std::string>();
      doc.task = j.value("task", "");
      doc.tokens = j.contains("tokens") ? j.at("tokens").get<std::vector<std::string>>()
                                        : split_words(doc.text);

      struct Item {
        std::string surface;
        Span span;
        std::string type;
      };
      std::vector<Item> items;
      for (const auto& e : j.value("entities", nlohmann::json::array())) {
        if (!e.is_array() || e.size() != 4) {
          throw std::invalid_argument("entity items are [surface, start, end, type]");
        }
        Item it{e[0].get<std::string>(),
                span_from_one_based(e[1].get<long long>(), e[2].get<long long>()),
                e[3].get<std::string>()};
        if (it.span.end >= doc.tokens.size()) {
          throw std::invalid_argument("entity '" + it.surface + "' ends past the last token");
        }
        if (doc.surface(it.span) != it.surface) {
          throw std::invalid_argument("surface '" + it.surface + "' does not match tokens '" +
                                      doc.surface(it.span) + "'");
        }
        items.push_back(std::move(it));
      }

      auto resolve = [&](const nlohmann::json& ref) -> std::size_t {
        if (ref.is_number_integer()) {
          const auto i = ref.get<long long>();
          if (i < 0 || static_cast<std::size_t>(i) >= items.size()) {
            throw std::invalid_argument("entity index " + std::to_string(i) + " out of range");
          }
          return static_cast<std::size_t>(i);
        }
        const auto s = ref.get<std::string>();
        std::optional<std::size_t> found;
        for (std::size_t i = 0; i < items.size(); ++i) {
          if (items[i].surface != s) continue;
          if (found) throw std::invalid_argument("reference '" + s + "' is ambiguous; use an index");
          found = i;
        }
        if (!found) throw std::invalid_argument("reference '" + s + "' matches no entity item");
        return *found;
      };

      std::set<std::size_t> consumed, kept;
      for (const auto& r : j.value("relations", nlohmann::json::array())) {
        if (!r.is_array() || r.size() != 3) throw std::invalid_argument("relations are [subject, type, object]");
        const auto a = resolve(r[0]), b = resolve(r[2]);
        doc.gold.relations.push_back({items[a].span, r[1].get<std::string>(), items[b].span});
        kept.insert(a);
        kept.insert(b);
      }
      for (const auto& ev : j.value("events", nlohmann::json::array())) {
        if (!ev.is_array() || ev.size() < 2) {
          throw std::invalid_argument("events are [type, trigger, argument...]");
        }
        const auto t = resolve(ev[1]);
        Event e{ev[0].get<std::string>(), items[t].span, {}};
        consumed.insert(t);
        for (std::size_t k = 2; k < ev.size(); ++k) {
          const auto a = resolve(ev[k]);
          e.arguments.push_back({items[a].span, items[a].type});
          consumed.insert(a);
        }
        doc.gold.events.push_back(std::move(e));
      }
      for (const auto& s : j.value("sentiments", nlohmann::json::array())) {
        if (!s.is_array() || s.size() != 3) throw std::invalid_argument("sentiments are [polarity, aspect, opinion]");
        const auto a = resolve(s[1]), o = resolve(s[2]);
        doc.gold.sentiments.push_back({items[a].span, s[0].get<std::string>(), items[o].span});
        consumed.insert(a);
        consumed.insert(o);
      }
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (consumed.count(i) && !kept.count(i)) continue;
        doc.gold.entities.push_back({items[i].span, items[i].type});
      }
      doc.gold.normalize();
      docs.push_back(std::move(doc));
    } catch (const ConversionError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConversionError(lineno, e.what());
    }
  }
  return docs;
}

Vocabulary build_vocab(const std::vector<ExDocument>& corpus, const SchemaSet& schemas) {
  std::vector<std::string> words;
  for (const auto& d : corpus) words.insert(words.end(), d.tokens.begin(), d.tokens.end());
  for (std::size_t r = 0; r < schemas.size(); ++r) {
    for (auto& w : split_words(schemas.name(r))) words.push_back(std::move(w));
  }
  return Vocabulary::from_words(words);
}

// ---------------------------------------------------------------------------
// Synthetic fixtures

FixtureKind fixture_kind_from_string(const std::string& s) {
  if (s == "entity") return FixtureKind::entity;
  if (s == "relation") return FixtureKind::relation;
  if (s == "event") return FixtureKind::event;
  if (s == "sentiment") return FixtureKind::sentiment;
  throw std::invalid_argument("unknown fixture kind '" + s + "'");
}

const char* to_string(FixtureKind kind) {
  switch (kind) {
    case FixtureKind::entity:
      return "entity";
    case FixtureKind::relation:
      return "relation";
    case FixtureKind::event:
      return "event";
    case FixtureKind::sentiment:
      break;
  }
  return "sentiment";
}

SchemaSet fixture_schema(FixtureKind kind) {
  using K = LabelKind;
  SchemaSet s;
  switch (kind) {
    case FixtureKind::entity:
      s.task_name = "Entity Extraction";
      s.classification = {{"Person", K::entity}, {"Location", K::entity}, {"Organization", K::entity}};
      break;
    case FixtureKind::relation:
      s.task_name = "Relation Extraction";
      s.classification = {{"Person", K::entity}, {"Location", K::entity}, {"Organization", K::entity}};
      s.association = {{"live in", K::relation}, {"work for", K::relation}, {"located in", K::relation}};
      s.bindings = {{"live in", "Person"},     {"live in", "Location"},
                    {"work for", "Person"},    {"work for", "Organization"},
                    {"located in", "Organization"}, {"located in", "Location"}};
      break;
    case FixtureKind::event:
      s.task_name = "Event Extraction";
      s.classification = {{"Trigger", K::trigger}, {"Victim", K::role},   {"Attacker", K::role},
                          {"Target", K::role},     {"Person", K::role},   {"Place", K::role},
                          {"Injure", K::event},    {"Attack", K::event},  {"Born", K::event}};
      s.association = {{"Trigger-Argument", K::trigger_argument}};
      s.bindings = {{"Injure", "Trigger"},  {"Injure", "Victim"},   {"Injure", "Place"},
                    {"Attack", "Trigger"},  {"Attack", "Attacker"}, {"Attack", "Target"},
                    {"Attack", "Place"},    {"Born", "Trigger"},    {"Born", "Person"},
                    {"Born", "Place"}};
      for (const char* role : {"Trigger", "Victim", "Attacker", "Target", "Person", "Place"}) {
        s.bindings.emplace_back("Trigger-Argument", role);
      }
      break;
    case FixtureKind::sentiment:
      s.task_name = "Sentiment Extraction";
      s.classification = {{"Aspect", K::aspect}, {"Opinion", K::opinion}};
      s.association = {{"Positive", K::polarity}, {"Negative", K::polarity}, {"Neutral", K::polarity}};
      for (const char* p : {"Positive", "Negative", "Neutral"}) {
        s.bindings.emplace_back(p, "Aspect");
        s.bindings.emplace_back(p, "Opinion");
      }
      break;
  }
  s.validate();
  return s;
}

namespace {

const std::vector<std::string> kPersons = {"John Smith", "Maria Garcia", "Ahmed Khan", "Li Wei",
                                           "Anna Kowalski", "David Brown", "Betsy Ross", "Omar"};
const std::vector<std::string> kLocations = {"Paris", "New York", "Nablus", "Philadelphia",
                                             "Tokyo", "Cairo", "Lima", "Oslo"};
const std::vector<std::string> kOrgs = {"Acme Corp", "United Nations", "Red Cross", "Boeing",
                                        "Reuters", "Global Bank"};
const std::vector<std::string> kAspects = {"pasta", "duck breast special", "service",
                                           "wine list", "dessert", "staff"};
const std::vector<std::string> kPositive = {"incredible", "delicious", "great", "friendly"};
const std::vector<std::string> kNegative = {"terrible", "slow", "bland", "rude"};
const std::vector<std::string> kNeutral = {"average", "okay", "ordinary"};

class SentenceBuilder {
 public:
  Span phrase(const std::string& text) {
    const auto words = split_words(text);
    const std::size_t start = tokens_.size();
    tokens_.insert(tokens_.end(), words.begin(), words.end());
    return {start, tokens_.size() - 1};
  }
  void words(const std::string& text) { phrase(text); }
  std::vector<std::string> take() { return std::move(tokens_); }

 private:
  std::vector<std::string> tokens_;
};

class Picker {
 public:
  explicit Picker(std::uint64_t seed) : rng_(seed) {}
  const std::string& one(const std::vector<std::string>& pool) {
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng_)];
  }
  // Two distinct draws.
  std::pair<std::string, std::string> two(const std::vector<std::string>& pool) {
    const auto& a = one(pool);
    std::string b;
    do {
      b = one(pool);
    } while (b == a);
    return {a, b};
  }
  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

 private:
  std::mt19937_64 rng_;
};

using Template = std::function<ExtractionRecord(SentenceBuilder&, Picker&)>;

std::vector<Template> entity_templates() {
  return {
      [](SentenceBuilder& b, Picker& pk) {
        const auto p = b.phrase(pk.one(kPersons));
        b.words("visited");
        const auto l = b.phrase(pk.one(kLocations));
        b.words("last week .");
        return ExtractionRecord{{{p, "Person"}, {l, "Location"}}, {}, {}, {}};
      },
      [](SentenceBuilder& b, Picker& pk) {
        const auto p = b.phrase(pk.one(kPersons));
        b.words("works for");
        const auto o = b.phrase(pk.one(kOrgs));
        b.words(".");
        return ExtractionRecord{{{p, "Person"}, {o, "Organization"}}, {}, {}, {}};
      },
      [](SentenceBuilder& b, Picker& pk) {
        // Location nested inside an organization name.
        const auto p = b.phrase(pk.one(kPersons));
        b.words("studied at");
        const auto uni = b.phrase("University of");
        const auto l = b.phrase(pk.one(kLocations));
        b.words(".");
        return ExtractionRecord{
            {{p, "Person"}, {{uni.start, l.end}, "Organization"}, {l, "Location"}}, {}, {}, {}};
      },
      [](SentenceBuilder& b, Picker& pk) {
        const auto o = b.phrase(pk.one(kOrgs));
        b.words("opened an office in");
        const auto l = b.phrase(pk.one(kLocations));
        b.words(".");
        return ExtractionRecord{{{o, "Organization"}, {l, "Location"}}, {}, {}, {}};
      },
      [](SentenceBuilder& b, Picker& pk) {
        const auto [n1, n2] = pk.two(kPersons);
        const auto p1 = b.phrase(n1);
        b.words("met");
        const auto p2 = b.phrase(n2);
        b.words("in");
        const auto l = b.phrase(pk.one(kLocations));
        b.words(".");
        return ExtractionRecord{{{p1, "Person"}, {p2, "Person"}, {l, "Location"}}, {}, {}, {}};
      },
  };
}

std::vector<Template> relation_templates() {
  return {
      [](SentenceBuilder& b, Picker& pk) {
        const auto p = b.phrase(pk.one(kPersons));
        b.words("lives in");
        const auto l = b.phrase(pk.one(kLocations));
        b.words(".");
        return ExtractionRecord{{{p, "Person"}, {l, "Location"}}, {{p, "live in", l}}, {}, {}};
      },
      [](SentenceBuilder& b, Picker& pk) {
        const auto p = b.phrase(pk.one(kPersons));
        b.words("works for");
        const auto o = b.phrase(pk.one(kOrgs));
        b.words(".");
        return ExtractionRecord{{{p, "Person"}, {o, "Organization"}}, {{p, "work for", o}}, {}, {}};
      },
      [](SentenceBuilder& b, Picker& pk) {
        const auto o = b.phrase(pk.one(kOrgs));
        b.words("is based in");
        const auto l = b.phrase(pk.one(kLocations));
        b.words(".");
        return ExtractionRecord{{{o, "Organization"}, {l, "Location"}}, {{o, "located in", l}}, {}, {}};
      },
      [](SentenceBuilder& b, Picker& pk) {
        const auto p = b.phrase(pk.one(kPersons));
        b.words(", who lives in");
        const auto l = b.phrase(pk.one(kLocations));
        b.words(", works for");
        const auto o = b.phrase(pk.one(kOrgs));
        b.words(".");
        return ExtractionRecord{{{p, "Person"}, {l, "Location"}, {o, "Organization"}},
                                {{p, "live in", l}, {p, "work for", o}},
                                {},
                                {}};
      },
      [](SentenceBuilder& b, Picker& pk) {
        const auto p = b.phrase(pk.one(kPersons));
        b.words("works for");
        const auto o = b.phrase(pk.one(kOrgs));
        b.words("in");
        const auto l = b.phrase(pk.one(kLocations));
        b.words(".");
        return ExtractionRecord{{{p, "Person"}, {o, "Organization"}, {l, "Location"}},
                                {{p, "work for", o}, {o, "located in", l}},
                                {},
                                {}};
      },
  };
}

std::vector<Template> event_templates() {
  return {
      [](SentenceBuilder& b, Picker& pk) {
        const auto p = b.phrase(pk.one(kPersons));
        b.words("was");
        const auto t = b.phrase(pk.one({"wounded", "injured", "hurt"}));
        b.words("in");
        const auto l = b.phrase(pk.one(kLocations));
        b.words(".");
        return ExtractionRecord{{}, {}, {{"Injure", t, {{p, "Victim"}, {l, "Place"}}}}, {}};
      },
      [](SentenceBuilder& b, Picker& pk) {
        const auto [n1, n2] = pk.two(kPersons);
        const auto a = b.phrase(n1);
        const auto t = b.phrase(pk.one({"attacked", "assaulted"}));
        const auto v = b.phrase(n2);
        b.words("in");
        const auto l = b.phrase(pk.one(kLocations));
        b.words(".");
        return ExtractionRecord{
            {}, {}, {{"Attack", t, {{a, "Attacker"}, {v, "Target"}, {l, "Place"}}}}, {}};
      },
      [](SentenceBuilder& b, Picker& pk) {
        const auto p = b.phrase(pk.one(kPersons));
        b.words("was");
        const auto t = b.phrase("born");
        b.words("in");
        const auto l = b.phrase(pk.one(kLocations));
        b.words(".");
        return ExtractionRecord{{}, {}, {{"Born", t, {{p, "Person"}, {l, "Place"}}}}, {}};
      },
      [](SentenceBuilder& b, Picker& pk) {
        const auto [n1, n2] = pk.two(kPersons);
        const auto a = b.phrase(n1);
        const auto t = b.phrase(pk.one({"attacked", "assaulted"}));
        const auto v = b.phrase(n2);
        b.words(".");
        return ExtractionRecord{{}, {}, {{"Attack", t, {{a, "Attacker"}, {v, "Target"}}}}, {}};
      },
  };
}

std::vector<Template> sentiment_templates() {
  auto polarity = [](Picker& pk) -> std::pair<std::string, const std::vector<std::string>*> {
    switch (pk.below(3)) {
      case 0:
        return {"Positive", &kPositive};
      case 1:
        return {"Negative", &kNegative};
      default:
        return {"Neutral", &kNeutral};
    }
  };
  return {
      [polarity](SentenceBuilder& b, Picker& pk) {
        const auto [label, pool] = polarity(pk);
        b.words("The");
        const auto a = b.phrase(pk.one(kAspects));
        b.words("was");
        const auto o = b.phrase(pk.one(*pool));
        b.words(".");
        return ExtractionRecord{{}, {}, {}, {{a, label, o}}};
      },
      [polarity](SentenceBuilder& b, Picker& pk) {
        const auto [label, pool] = polarity(pk);
        b.words("We had the");
        const auto a = b.phrase(pk.one(kAspects));
        b.words("and it was");
        const auto o = b.phrase(pk.one(*pool));
        b.words(".");
        return ExtractionRecord{{}, {}, {}, {{a, label, o}}};
      },
      [polarity](SentenceBuilder& b, Picker& pk) {
        const auto [l1, pool1] = polarity(pk);
        const auto [l2, pool2] = polarity(pk);
        const auto [n1, n2] = pk.two(kAspects);
        b.words("The");
        const auto a1 = b.phrase(n1);
        b.words("was");
        const auto o1 = b.phrase(pk.one(*pool1));
        b.words("but the");
        const auto a2 = b.phrase(n2);
        b.words("was");
        auto w2 = pk.one(*pool2);
        const auto o2 = b.phrase(w2);
        b.words(".");
        return ExtractionRecord{{}, {}, {}, {{a1, l1, o1}, {a2, l2, o2}}};
      },
  };
}

}  // namespace

Dataset make_fixture(FixtureKind kind, std::size_t size, std::uint64_t seed) {
  if (size == 0) throw std::invalid_argument("fixture size must be positive");
  Dataset ds{fixture_schema(kind), {}};
  std::vector<Template> templates;
  switch (kind) {
    case FixtureKind::entity:
      templates = entity_templates();
      break;
    case FixtureKind::relation:
      templates = relation_templates();
      break;
    case FixtureKind::event:
      templates = event_templates();
      break;
    case FixtureKind::sentiment:
      templates = sentiment_templates();
      break;
  }
  Picker pk(seed);
  const std::size_t offset = pk.below(templates.size());
  for (std::size_t i = 0; i < size; ++i) {
    SentenceBuilder b;
    ExDocument doc;
    doc.gold = templates[(offset + i) % templates.size()](b, pk);
    doc.tokens = b.take();
    doc.text = join(doc.tokens, 0, doc.tokens.size());
    doc.task = ds.schemas.task_name;
    doc.id = std::string(to_string(kind)) + "-" + std::to_string(seed) + "-" + std::to_string(i);
    doc.gold.normalize();
    ds.docs.push_back(std::move(doc));
  }
  return ds;
}

}  // namespace uniex
