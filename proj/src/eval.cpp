#include "uniex/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace uniex {

namespace {

std::string span_key(const Span& s) {
  return std::to_string(s.start) + ":" + std::to_string(s.end);
}

// Entity types the record assigns to a span, sorted and joined.
std::string types_key(const ExtractionRecord& rec, const Span& s) {
  std::set<std::string> types;
  for (const auto& e : rec.entities) {
    if (e.span == s) types.insert(e.label);
  }
  std::string out;
  for (const auto& t : types) {
    if (!out.empty()) out += ',';
    out += t;
  }
  return out;
}

using KeyFn = std::function<std::vector<std::string>(const ExDocument&)>;

MetricReport score(const std::string& name, const std::vector<ExDocument>& pred,
                   const std::vector<ExDocument>& gold, const KeyFn& keys) {
  if (pred.size() != gold.size()) {
    throw std::invalid_argument(name + ": " + std::to_string(pred.size()) + " predicted documents vs " +
                                std::to_string(gold.size()) + " gold documents");
  }
  MetricReport r{name, {}};
  for (std::size_t i = 0; i < pred.size(); ++i) r.counts += match_keys(keys(pred[i]), keys(gold[i]));
  return r;
}

}  // namespace

double MetricReport::precision() const {
  const auto denom = counts.tp + counts.fp;
  if (denom == 0) return counts.fn == 0 ? 1.0 : 0.0;
  return static_cast<double>(counts.tp) / static_cast<double>(denom);
}

double MetricReport::recall() const {
  const auto denom = counts.tp + counts.fn;
  if (denom == 0) return counts.fp == 0 ? 1.0 : 0.0;
  return static_cast<double>(counts.tp) / static_cast<double>(denom);
}

double MetricReport::f1() const {
  const double p = precision(), r = recall();
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

Counts match_keys(std::vector<std::string> pred, std::vector<std::string> gold) {
  std::map<std::string, std::size_t> remaining;
  for (auto& g : gold) ++remaining[g];
  Counts c;
  for (auto& p : pred) {
    auto it = remaining.find(p);
    if (it != remaining.end() && it->second > 0) {
      --it->second;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = gold.size() - c.tp;
  return c;
}

MetricReport entity_f1(const std::vector<ExDocument>& pred, const std::vector<ExDocument>& gold) {
  return score("entity", pred, gold, [](const ExDocument& d) {
    std::vector<std::string> keys;
    for (const auto& e : d.gold.entities) keys.push_back(span_key(e.span) + "|" + e.label);
    return keys;
  });
}

MetricReport relation_strict_f1(const std::vector<ExDocument>& pred,
                                const std::vector<ExDocument>& gold) {
  return score("relation_strict", pred, gold, [](const ExDocument& d) {
    std::vector<std::string> keys;
    for (const auto& r : d.gold.relations) {
      keys.push_back(r.label + "|" + span_key(r.subject) + "|" + types_key(d.gold, r.subject) + "|" +
                     span_key(r.object) + "|" + types_key(d.gold, r.object));
    }
    return keys;
  });
}

MetricReport relation_triplet_f1(const std::vector<ExDocument>& pred,
                                 const std::vector<ExDocument>& gold) {
  return score("relation_triplet", pred, gold, [](const ExDocument& d) {
    std::vector<std::string> keys;
    for (const auto& r : d.gold.relations) {
      keys.push_back(r.label + '\x1f' + d.surface(r.subject) + '\x1f' + d.surface(r.object));
    }
    return keys;
  });
}

std::pair<MetricReport, MetricReport> event_f1(const std::vector<ExDocument>& pred,
                                               const std::vector<ExDocument>& gold) {
  auto trig = score("event_trigger", pred, gold, [](const ExDocument& d) {
    std::vector<std::string> keys;
    for (const auto& ev : d.gold.events) keys.push_back(span_key(ev.trigger) + "|" + ev.label);
    return keys;
  });
  auto arg = score("event_argument", pred, gold, [](const ExDocument& d) {
    std::vector<std::string> keys;
    for (const auto& ev : d.gold.events) {
      for (const auto& a : ev.arguments) keys.push_back(span_key(a.span) + "|" + a.role + "|" + ev.label);
    }
    return keys;
  });
  return {trig, arg};
}

MetricReport sentiment_triplet_f1(const std::vector<ExDocument>& pred,
                                  const std::vector<ExDocument>& gold) {
  return score("sentiment_triplet", pred, gold, [](const ExDocument& d) {
    std::vector<std::string> keys;
    for (const auto& s : d.gold.sentiments) {
      keys.push_back(span_key(s.aspect) + "|" + span_key(s.opinion) + "|" + s.polarity);
    }
    return keys;
  });
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "entity") return TaskKind::entity;
  if (s == "relation") return TaskKind::relation;
  if (s == "event") return TaskKind::event;
  if (s == "sentiment") return TaskKind::sentiment;
  throw std::invalid_argument("unknown task '" + s + "' (entity, relation, event, sentiment)");
}

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::entity:
      return "entity";
    case TaskKind::relation:
      return "relation";
    case TaskKind::event:
      return "event";
    case TaskKind::sentiment:
      break;
  }
  return "sentiment";
}

std::vector<MetricReport> evaluate_task(TaskKind kind, const std::vector<ExDocument>& pred,
                                        const std::vector<ExDocument>& gold) {
  switch (kind) {
    case TaskKind::entity:
      return {entity_f1(pred, gold)};
    case TaskKind::relation:
      return {entity_f1(pred, gold), relation_strict_f1(pred, gold), relation_triplet_f1(pred, gold)};
    case TaskKind::event: {
      auto [t, a] = event_f1(pred, gold);
      return {t, a};
    }
    case TaskKind::sentiment:
      break;
  }
  return {sentiment_triplet_f1(pred, gold)};
}

std::string format_table(const std::vector<MetricReport>& reports) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-18s %6s %6s %6s %9s %9s %9s\n", "metric", "tp", "fp", "fn",
                "precision", "recall", "f1");
  os << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof line, "%-18s %6zu %6zu %6zu %9.4f %9.4f %9.4f\n", r.name.c_str(),
                  r.counts.tp, r.counts.fp, r.counts.fn, r.precision(), r.recall(), r.f1());
    os << line;
  }
  return os.str();
}

std::string format_key_values(const std::vector<MetricReport>& reports) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& r : reports) {
    os << r.name << ".tp=" << r.counts.tp << '\n'
       << r.name << ".fp=" << r.counts.fp << '\n'
       << r.name << ".fn=" << r.counts.fn << '\n'
       << r.name << ".precision=" << r.precision() << '\n'
       << r.name << ".recall=" << r.recall() << '\n'
       << r.name << ".f1=" << r.f1() << '\n';
  }
  return os.str();
}

}  // namespace uniex
