#include <doctest.h>

#include <algorithm>
#include <random>

#include "uniex/eval.hpp"

using namespace uniex;

namespace {

ExDocument doc(std::vector<std::string> tokens) {
  ExDocument d;
  d.id = "d";
  d.tokens = std::move(tokens);
  return d;
}

const std::vector<std::string> kTokens{"Anna", "met", "Bob", "in", "Paris", "and", "Anna", "left", "Rome"};

void check_ratio(double v, double num, double den) { CHECK(std::abs(v - num / den) <= 1e-12); }

}  // namespace

TEST_CASE("entity F1 hand counts") {
  auto gold = doc(kTokens);
  gold.gold.entities = {{{0, 0}, "Person"}, {{2, 2}, "Person"}, {{4, 4}, "Location"}, {{8, 8}, "Location"}};
  auto same = gold;
  const auto exact = entity_f1({same}, {gold});
  CHECK(exact.precision() == 1.0);
  CHECK(exact.recall() == 1.0);
  CHECK(exact.f1() == 1.0);

  auto pred = doc(kTokens);
  pred.gold.entities = {{{0, 0}, "Person"}, {{4, 4}, "Location"}, {{6, 6}, "Person"}};
  const auto r = entity_f1({pred}, {gold});
  CHECK(r.counts == Counts{2, 1, 2});
  check_ratio(r.precision(), 2, 3);
  check_ratio(r.recall(), 1, 2);
  check_ratio(r.f1(), 4, 7);

  auto wrong_type = doc(kTokens);
  wrong_type.gold.entities = {{{0, 0}, "Location"}};
  auto one = doc(kTokens);
  one.gold.entities = {{{0, 0}, "Person"}};
  CHECK(entity_f1({wrong_type}, {one}).counts == Counts{0, 1, 1});
}

TEST_CASE("relation strict and triplet") {
  auto gold = doc(kTokens);
  gold.gold.entities = {{{0, 0}, "Person"}, {{4, 4}, "Location"}, {{8, 8}, "Location"}};
  gold.gold.relations = {{{0, 0}, "live in", {4, 4}}, {{0, 0}, "live in", {8, 8}}};
  CHECK(relation_strict_f1({gold}, {gold}).f1() == 1.0);
  CHECK(relation_triplet_f1({gold}, {gold}).f1() == 1.0);

  // Same spans, one endpoint typed differently: not strict, still a triplet.
  auto typed = gold;
  typed.gold.entities[1].label = "Organization";
  CHECK(relation_strict_f1({typed}, {gold}).counts == Counts{1, 1, 1});
  CHECK(relation_triplet_f1({typed}, {gold}).counts == Counts{2, 0, 0});

  // Same surface at another offset matches by string only.
  auto moved = doc(kTokens);
  moved.gold.entities = {{{6, 6}, "Person"}, {{4, 4}, "Location"}};
  moved.gold.relations = {{{6, 6}, "live in", {4, 4}}};
  CHECK(relation_triplet_f1({moved}, {gold}).counts == Counts{1, 0, 1});
  CHECK(relation_strict_f1({moved}, {gold}).counts == Counts{0, 1, 2});

  auto label = gold;
  label.gold.relations = {{{0, 0}, "work for", {4, 4}}};
  CHECK(relation_triplet_f1({label}, {gold}).counts == Counts{0, 1, 2});

  // Hand count: 3 predicted, 1 strict hit, 2 gold.
  auto mixed = gold;
  mixed.gold.relations = {{{0, 0}, "live in", {4, 4}}, {{0, 0}, "work for", {8, 8}}, {{4, 4}, "live in", {8, 8}}};
  const auto m = relation_strict_f1({mixed}, {gold});
  CHECK(m.counts == Counts{1, 2, 1});
  check_ratio(m.precision(), 1, 3);
  check_ratio(m.recall(), 1, 2);
  check_ratio(m.f1(), 2, 5);
}

TEST_CASE("event trigger and argument") {
  ExDocument gold = doc({"Senator", "Chuck", "Hagel", "was", "twice", "wounded", "while", "in", "Vietnam", "."});
  gold.gold.events = {{"Injure", {5, 5}, {{{1, 2}, "Victim"}, {{8, 8}, "Place"}}}};
  auto [t, a] = event_f1({gold}, {gold});
  CHECK(t.f1() == 1.0);
  CHECK(a.f1() == 1.0);

  auto wrong_event = gold;
  wrong_event.gold.events[0].label = "Attack";
  auto [t2, a2] = event_f1({wrong_event}, {gold});
  CHECK(t2.counts == Counts{0, 1, 1});
  CHECK(a2.counts == Counts{0, 2, 2});

  // Hand count: Victim right, Place mislabelled, extra Agent.
  auto mixed = gold;
  mixed.gold.events[0].arguments = {{{1, 2}, "Victim"}, {{8, 8}, "Agent"}, {{0, 0}, "Agent"}};
  auto [t3, a3] = event_f1({mixed}, {gold});
  CHECK(t3.f1() == 1.0);
  CHECK(a3.counts == Counts{1, 2, 1});
  check_ratio(a3.f1(), 2, 5);
}

TEST_CASE("sentiment triplet") {
  ExDocument gold = doc({"the", "duck", "was", "great", "but", "service", "slow"});
  gold.gold.sentiments = {{{1, 1}, "Positive", {3, 3}}, {{5, 5}, "Negative", {6, 6}}};
  CHECK(sentiment_triplet_f1({gold}, {gold}).f1() == 1.0);
  auto polarity = gold;
  polarity.gold.sentiments[0].polarity = "Negative";
  CHECK(sentiment_triplet_f1({polarity}, {gold}).counts == Counts{1, 1, 1});
  auto mixed = gold;
  mixed.gold.sentiments = {{{1, 1}, "Positive", {3, 3}}, {{1, 1}, "Positive", {6, 6}},
                           {{5, 5}, "Positive", {6, 6}}, {{0, 1}, "Negative", {6, 6}}};
  const auto r = sentiment_triplet_f1({mixed}, {gold});
  CHECK(r.counts == Counts{1, 3, 1});
  check_ratio(r.precision(), 1, 4);
  check_ratio(r.recall(), 1, 2);
  check_ratio(r.f1(), 1, 3);
}

TEST_CASE("duplicates count once") {
  CHECK(match_keys({"a", "a", "b"}, {"a", "c"}) == Counts{1, 2, 1});
  CHECK(match_keys({"a", "a"}, {"a", "a"}) == Counts{2, 0, 0});
}

TEST_CASE("empty edges") {
  auto empty = doc(kTokens);
  const auto r = entity_f1({empty}, {empty});
  CHECK(r.precision() == 1.0);
  CHECK(r.recall() == 1.0);
  CHECK(r.f1() == 1.0);
  auto gold = doc(kTokens);
  gold.gold.entities = {{{0, 0}, "Person"}};
  const auto missed = entity_f1({empty}, {gold});
  CHECK(missed.precision() == 0.0);
  CHECK(missed.recall() == 0.0);
  CHECK(missed.f1() == 0.0);
  const auto spurious = entity_f1({gold}, {empty});
  CHECK(spurious.precision() == 0.0);
  CHECK(spurious.recall() == 0.0);
  CHECK_THROWS_AS(entity_f1({empty, empty}, {empty}), std::invalid_argument);
}

TEST_CASE("micro counts sum per-document counts and ignore order") {
  std::mt19937_64 rng(3);
  const std::vector<std::string> types{"A", "B"};
  std::vector<ExDocument> pred, gold;
  for (int i = 0; i < 30; ++i) {
    auto g = doc(kTokens), p = doc(kTokens);
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t s = rng() % 9;
      g.gold.entities.push_back({{s, s}, types[rng() % 2]});
      const std::size_t t = rng() % 9;
      p.gold.entities.push_back({{t, t}, types[rng() % 2]});
    }
    gold.push_back(g);
    pred.push_back(p);
  }
  Counts sum;
  for (std::size_t i = 0; i < gold.size(); ++i) sum += entity_f1({pred[i]}, {gold[i]}).counts;
  const auto total = entity_f1(pred, gold);
  CHECK(total.counts == sum);

  std::vector<std::size_t> order(gold.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<ExDocument> p2, g2;
  for (auto i : order) {
    p2.push_back(pred[i]);
    std::reverse(p2.back().gold.entities.begin(), p2.back().gold.entities.end());
    g2.push_back(gold[i]);
  }
  CHECK(entity_f1(p2, g2).counts == total.counts);
}

TEST_CASE("reports") {
  auto gold = doc(kTokens);
  gold.gold.entities = {{{0, 0}, "Person"}, {{4, 4}, "Location"}};
  gold.gold.relations = {{{0, 0}, "live in", {4, 4}}};
  const auto reports = evaluate_task(TaskKind::relation, {gold}, {gold});
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].name == "entity");
  CHECK(reports[1].name == "relation_strict");
  CHECK(reports[2].name == "relation_triplet");
  const auto kv = format_key_values(reports);
  CHECK(kv.find("relation_strict.f1=1") != std::string::npos);
  CHECK(format_table(reports).find("relation_triplet") != std::string::npos);
  CHECK(task_kind_from_string("event") == TaskKind::event);
  CHECK_THROWS(task_kind_from_string("parsing"));
}
