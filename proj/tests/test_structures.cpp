#include <doctest.h>

#include <numeric>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "uniex/data.hpp"
#include "uniex/structures.hpp"

using namespace uniex;

namespace {

SchemaSet load_schema(const std::string& name) {
  return SchemaSet::load(std::string(UNIEX_DATA_DIR) + "/schemas/" + name + ".json");
}

std::vector<ExDocument> load_fixture(const std::string& name) {
  return read_jsonl(std::filesystem::path(UNIEX_DATA_DIR) / "fixtures/appendix" / (name + ".ex.jsonl"));
}

std::size_t count(const nd::Array& a, std::size_t r) {
  std::size_t n = 0;
  for (std::size_t p = 0; p < a.dim(1); ++p)
    for (std::size_t q = 0; q < a.dim(2); ++q) n += a.at(r, p, q) != 0.0;
  return n;
}

nd::Array filled(std::size_t ns, std::size_t nx, double v) { return nd::Array({ns, nx, nx}, v); }

}  // namespace

TEST_CASE("CoNLL03 targets") {
  const auto s = load_schema("conll03");
  const auto doc = load_fixture("conll03").at(0);
  const auto nx = doc.tokens.size();
  const auto y = build_target_tensor(doc.gold, s, nx);
  CHECK(count(y.values, 0) == 2);
  CHECK(y.values.at(0, 0, 0) == 1.0);
  CHECK(y.values.at(0, 3, 3) == 1.0);
  const auto person = *s.index_of("Person"), location = *s.index_of("Location");
  CHECK(y.values.at(person, 0, 0) == 1.0);
  CHECK(y.values.at(location, 3, 3) == 1.0);
  CHECK(count(y.values, person) == 1);
  CHECK(count(y.values, location) == 1);
  CHECK(count(y.valid, 0) == nx * (nx + 1) / 2);
  for (std::size_t r = 1; r < s.size(); ++r) CHECK(count(y.valid, r) == 2);
}

TEST_CASE("CoNLL04 relation targets sit on interleaved cells") {
  const auto s = load_schema("conll04");
  const auto doc = load_fixture("conll04").at(0);
  const auto y = build_target_tensor(doc.gold, s, doc.tokens.size());
  const auto live = *s.index_of("live in");
  CHECK(y.values.at(live, 4, 9) == 1.0);
  CHECK(y.values.at(live, 5, 9) == 1.0);
  CHECK(count(y.values, live) == 2);
  // Two spans give two ordered pairs, each with a start and an end cell.
  CHECK(count(y.valid, live) == 4);
}

TEST_CASE("empty gold") {
  const auto s = load_schema("conll04");
  const auto y = build_target_tensor({}, s, 5);
  for (double v : y.values.raw()) CHECK(v == 0.0);
  CHECK(count(y.valid, 0) == 15);
  for (std::size_t r = 1; r < s.size(); ++r) CHECK(count(y.valid, r) == 0);
}

TEST_CASE("targets reject bad spans and dangling relation endpoints") {
  const auto s = support::small_relation_schema();
  ExtractionRecord out_of_range;
  out_of_range.entities = {{{2, 6}, "Person"}};
  CHECK_THROWS_AS(build_target_tensor(out_of_range, s, 5), std::out_of_range);
  ExtractionRecord dangling;
  dangling.entities = {{{0, 0}, "Person"}};
  dangling.relations = {{{0, 0}, "live in", {3, 3}}};
  CHECK_THROWS_AS(build_target_tensor(dangling, s, 5), std::invalid_argument);
}

TEST_CASE("positives only where valid, association valid count bounded") {
  for (auto kind : {FixtureKind::entity, FixtureKind::relation, FixtureKind::event, FixtureKind::sentiment}) {
    const auto ds = make_fixture(kind, 10, 4);
    for (const auto& d : ds.docs) {
      const auto y = build_target_tensor(d.gold, ds.schemas, d.tokens.size());
      for (std::size_t i = 0; i < y.values.size(); ++i) CHECK(y.values[i] <= y.valid[i]);
      const auto k = collect_gold(d.gold, ds.schemas).span_types.size();
      for (std::size_t r = 1 + ds.schemas.classification.size(); r < ds.schemas.size(); ++r) {
        CHECK(count(y.valid, r) <= 2 * k * (k - 1));
      }
    }
  }
}

TEST_CASE("detection decoding") {
  auto s = filled(1, 5, 0.4);
  CHECK(decode_detection(s).empty());
  s = filled(1, 5, 0.1);
  s.at(0, 0, 0) = 0.9;
  s.at(0, 3, 3) = 0.8;
  s.at(0, 4, 1) = 0.99;
  CHECK(decode_detection(s) == std::vector<Span>{{0, 0}, {3, 3}});
  s.at(0, 0, 2) = 0.7;
  CHECK(decode_detection(s) == std::vector<Span>{{0, 0}, {0, 2}, {3, 3}});
}

TEST_CASE("classification decoding") {
  const auto schemas = support::small_relation_schema();
  const auto person = *schemas.index_of("Person"), location = *schemas.index_of("Location");
  auto s = filled(schemas.size(), 4, 0.3);
  s.at(person, 1, 2) = 0.9;
  CHECK(decode_classification(s, {{1, 2}}, schemas) == std::vector<SpanLabel>{{{1, 2}, person}});
  CHECK(decode_classification(s, {}, schemas).empty());
  s.at(person, 1, 2) = 0.8;
  s.at(location, 1, 2) = 0.7;
  CHECK(decode_classification(s, {{1, 2}}, schemas).size() == 2);
}

TEST_CASE("association needs both interleaved cells") {
  const auto schemas = support::small_relation_schema();
  const auto person = *schemas.index_of("Person"), location = *schemas.index_of("Location");
  const auto live = *schemas.index_of("live in");
  const std::vector<SpanLabel> labelled{{{0, 1}, person}, {{3, 4}, location}};
  auto s = filled(schemas.size(), 5, 0.2);
  s.at(live, 0, 3) = 0.9;
  s.at(live, 1, 4) = 0.8;
  CHECK(decode_association(s, labelled, schemas) == std::vector<SpanLink>{{{0, 1}, live, {3, 4}}});
  s.at(live, 1, 4) = 0.3;
  CHECK(decode_association(s, labelled, schemas).empty());

  const std::vector<SpanLabel> single{{{0, 0}, person}, {{3, 3}, location}};
  s = filled(schemas.size(), 5, 0.2);
  s.at(live, 0, 3) = 0.9;
  CHECK(decode_association(s, single, schemas).size() == 1);
}

TEST_CASE("association respects bindings") {
  const auto schemas = support::small_relation_schema();
  const auto org = *schemas.index_of("Organization"), location = *schemas.index_of("Location");
  const auto live = *schemas.index_of("live in");
  auto s = filled(schemas.size(), 4, 0.2);
  s.at(live, 0, 2) = 0.9;
  const std::vector<SpanLabel> unbound{{{0, 0}, org}, {{2, 2}, location}};
  CHECK(decode_association(s, unbound, schemas).empty());
}

TEST_CASE("appendix event and sentiment assemble") {
  for (const char* name : {"ace05_evt", "16res", "conll04", "conll03"}) {
    CAPTURE(name);
    const auto s = load_schema(name);
    const auto doc = load_fixture(name).at(0);
    const auto y = build_target_tensor(doc.gold, s, doc.tokens.size());
    CHECK(decode(cast_target_to_scores(y), s) == doc.gold);
  }
  const auto evt = load_fixture("ace05_evt").at(0).gold;
  REQUIRE(evt.events.size() == 1);
  CHECK(evt.events[0].label == "Injure");
  CHECK(evt.events[0].trigger == Span{5, 5});
  CHECK(evt.events[0].arguments == std::vector<Argument>{{{1, 2}, "Victim"}, {{8, 8}, "Place"}});
  const auto sent = load_fixture("16res").at(0).gold;
  CHECK(sent.sentiments == std::vector<Sentiment>{{{3, 5}, "Positive", {13, 13}}});
}

TEST_CASE("typed spans without links give entities only") {
  const auto schemas = support::small_relation_schema();
  const auto person = *schemas.index_of("Person"), location = *schemas.index_of("Location");
  const auto rec = assemble_record({{{0, 0}, person}, {{2, 3}, location}}, {}, schemas);
  CHECK(rec.entities.size() == 2);
  CHECK(rec.relations.empty());
}

TEST_CASE("event type without a trigger label is dropped") {
  const auto s = load_schema("ace05_evt");
  const auto injure = *s.index_of("Injure");
  AssemblyDiagnostics diag;
  const auto rec = assemble_record({{{5, 5}, injure}}, {}, s, &diag);
  CHECK(rec.events.empty());
  CHECK(diag.dropped_triggers == 1);
}

TEST_CASE("argument with two roles keeps both and is counted") {
  const auto s = load_schema("ace05_evt");
  const auto trig = *s.index_of("Trigger"), injure = *s.index_of("Injure");
  const auto victim = *s.index_of("Victim"), place = *s.index_of("Place");
  const auto link = *s.unique_of_kind(LabelKind::trigger_argument);
  AssemblyDiagnostics diag;
  const auto rec = assemble_record({{{1, 1}, trig}, {{1, 1}, injure}, {{3, 3}, victim}, {{3, 3}, place}},
                                   {{{1, 1}, link, {3, 3}}}, s, &diag);
  REQUIRE(rec.events.size() == 1);
  CHECK(rec.events[0].arguments.size() == 2);
  CHECK(diag.multi_role_arguments == 1);
}

TEST_CASE("pipeline equals brute force on random tensors") {
  std::vector<SchemaSet> sets;
  for (const char* n : {"conll03", "conll04", "ace05_evt", "16res"}) sets.push_back(load_schema(n));
  for (auto k : {FixtureKind::relation, FixtureKind::event, FixtureKind::sentiment}) {
    sets.push_back(fixture_schema(k));
  }
  std::mt19937_64 rng(12);
  for (int i = 0; i < 200; ++i) {
    const auto& s = sets[i % sets.size()];
    const std::size_t nx = 1 + rng() % 8;
    const double p = 0.2 + 0.6 * static_cast<double>(rng() % 100) / 100.0;
    const auto scores = oracle::random_scores(s.size(), nx, p, rng);
    CHECK(decode(scores, s) == brute_force_decode(scores, s));
  }
}

TEST_CASE("saturated tensors") {
  const auto s = support::small_relation_schema();
  const std::size_t nx = 4;
  const auto hi = filled(s.size(), nx, 0.6);
  const auto rec = decode(hi, s);
  CHECK(rec == brute_force_decode(hi, s));
  const std::size_t spans = nx * (nx + 1) / 2;
  CHECK(rec.entities.size() == spans * s.classification.size());
  // Every span carries every entity type, so each relation links every ordered pair.
  CHECK(rec.relations.size() == s.association.size() * spans * (spans - 1));
  CHECK(decode(filled(s.size(), nx, 0.4), s).empty());
}

TEST_CASE("round trip on fixtures") {
  for (auto kind : {FixtureKind::entity, FixtureKind::relation, FixtureKind::event, FixtureKind::sentiment}) {
    CAPTURE(to_string(kind));
    const auto ds = make_fixture(kind, 30, 9);
    for (const auto& d : ds.docs) {
      const auto y = build_target_tensor(d.gold, ds.schemas, d.tokens.size());
      CHECK(decode(cast_target_to_scores(y), ds.schemas) == d.gold);
    }
  }
}

TEST_CASE("decoding commutes with schema permutation") {
  const auto s = load_schema("conll04");
  std::mt19937_64 rng(14);
  for (int i = 0; i < 20; ++i) {
    std::vector<std::size_t> co(s.classification.size()), ao(s.association.size());
    std::iota(co.begin(), co.end(), 0);
    std::iota(ao.begin(), ao.end(), 0);
    std::shuffle(co.begin(), co.end(), rng);
    std::shuffle(ao.begin(), ao.end(), rng);
    const auto p = s.permuted(co, ao);
    const std::size_t nx = 1 + rng() % 7;
    const auto scores = oracle::random_scores(s.size(), nx, 0.5, rng);
    nd::Array moved(scores.shape());
    for (std::size_t rb = 0; rb < p.size(); ++rb) {
      const auto ra = *s.index_of(p.name(rb));
      for (std::size_t a = 0; a < nx; ++a)
        for (std::size_t b = 0; b < nx; ++b) moved.at(rb, a, b) = scores.at(ra, a, b);
    }
    CHECK(decode(moved, p) == decode(scores, s));
  }
}
