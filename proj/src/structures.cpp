#include "uniex/structures.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace uniex {

namespace {

template <typename T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

std::string span_str(const Span& s) {
  return "(" + std::to_string(s.start) + ", " + std::to_string(s.end) + ")";
}

std::size_t require_label(const SchemaSet& schemas, const std::string& name, SchemaRole role,
                          const char* what) {
  auto r = schemas.index_of(name);
  if (!r || schemas.role(*r) != role) {
    throw std::invalid_argument(std::string(what) + " label '" + name + "' is not in the schema set");
  }
  return *r;
}

std::size_t require_kind(const SchemaSet& schemas, LabelKind kind) {
  auto r = schemas.unique_of_kind(kind);
  if (!r) {
    throw std::invalid_argument(std::string("schema set needs exactly one label of kind ") +
                                to_string(kind));
  }
  return *r;
}

bool carries_kind(const std::set<std::size_t>& types, const SchemaSet& schemas, LabelKind kind) {
  return std::any_of(types.begin(), types.end(),
                     [&](std::size_t t) { return schemas.kind(t) == kind; });
}

}  // namespace

ExtractionRecord& ExtractionRecord::normalize() {
  for (auto& e : events) sort_unique(e.arguments);
  sort_unique(entities);
  sort_unique(relations);
  sort_unique(events);
  sort_unique(sentiments);
  return *this;
}

std::size_t ExtractionRecord::target_count() const {
  std::size_t n = entities.size() + relations.size() + sentiments.size();
  for (const auto& e : events) n += 1 + e.arguments.size();
  return n;
}

GoldTables collect_gold(const ExtractionRecord& gold, const SchemaSet& schemas) {
  GoldTables t;
  for (const auto& e : gold.entities) {
    t.span_types[e.span].insert(require_label(schemas, e.label, SchemaRole::classification, "entity"));
  }
  for (const auto& r : gold.relations) {
    const auto table = require_label(schemas, r.label, SchemaRole::association, "relation");
    for (const auto& end : {r.subject, r.object}) {
      if (!t.span_types.count(end)) {
        throw std::invalid_argument("relation '" + r.label + "' endpoint " + span_str(end) +
                                    " is not a gold entity span");
      }
    }
    t.links.emplace(r.subject, table, r.object);
  }
  if (!gold.events.empty()) {
    const auto trigger = require_kind(schemas, LabelKind::trigger);
    const auto link = require_kind(schemas, LabelKind::trigger_argument);
    for (const auto& ev : gold.events) {
      const auto type = require_label(schemas, ev.label, SchemaRole::classification, "event");
      t.span_types[ev.trigger].insert(trigger);
      t.span_types[ev.trigger].insert(type);
      for (const auto& arg : ev.arguments) {
        t.span_types[arg.span].insert(require_label(schemas, arg.role, SchemaRole::classification, "role"));
        t.links.emplace(ev.trigger, link, arg.span);
      }
    }
  }
  if (!gold.sentiments.empty()) {
    const auto aspect = require_kind(schemas, LabelKind::aspect);
    const auto opinion = require_kind(schemas, LabelKind::opinion);
    for (const auto& s : gold.sentiments) {
      const auto table = require_label(schemas, s.polarity, SchemaRole::association, "polarity");
      t.span_types[s.aspect].insert(aspect);
      t.span_types[s.opinion].insert(opinion);
      t.links.emplace(s.aspect, table, s.opinion);
    }
  }
  return t;
}

TargetTensor build_target_tensor(const ExtractionRecord& gold, const SchemaSet& schemas,
                                 std::size_t nx) {
  const auto tables = collect_gold(gold, schemas);
  for (const auto& [span, _] : tables.span_types) {
    if (span.start > span.end || span.end >= nx) {
      throw std::out_of_range("gold span " + span_str(span) + " outside a text of " +
                              std::to_string(nx) + " tokens");
    }
  }
  const std::size_t ns = schemas.size();
  TargetTensor y{nd::Array({ns, nx, nx}, 0.0), nd::Array({ns, nx, nx}, 0.0)};

  for (std::size_t p = 0; p < nx; ++p) {
    for (std::size_t q = p; q < nx; ++q) y.valid.at(0, p, q) = 1.0;
  }
  for (const auto& [span, types] : tables.span_types) {
    y.values.at(0, span.start, span.end) = 1.0;
    for (std::size_t r = 1; r <= schemas.classification.size(); ++r) {
      y.valid.at(r, span.start, span.end) = 1.0;
      if (types.count(r)) y.values.at(r, span.start, span.end) = 1.0;
    }
  }
  const std::size_t first_assoc = 1 + schemas.classification.size();
  for (std::size_t r = first_assoc; r < ns; ++r) {
    for (const auto& [a, _] : tables.span_types) {
      for (const auto& [b, __] : tables.span_types) {
        if (a == b) continue;
        y.valid.at(r, a.start, b.start) = 1.0;
        y.valid.at(r, a.end, b.end) = 1.0;
      }
    }
  }
  for (const auto& [from, r, to] : tables.links) {
    y.values.at(r, from.start, to.start) = 1.0;
    y.values.at(r, from.end, to.end) = 1.0;
  }
  return y;
}

nd::Array cast_target_to_scores(const TargetTensor& target) {
  nd::Array s(target.values.shape());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = target.values[i] != 0.0 ? 0.9 : 0.1;
  return s;
}

std::vector<Span> decode_detection(const nd::Array& scores, double threshold) {
  std::vector<Span> spans;
  const std::size_t nx = scores.dim(1);
  for (std::size_t p = 0; p < nx; ++p) {
    for (std::size_t q = p; q < nx; ++q) {
      if (scores.at(0, p, q) > threshold) spans.push_back({p, q});
    }
  }
  return spans;
}

std::vector<SpanLabel> decode_classification(const nd::Array& scores, const std::vector<Span>& spans,
                                             const SchemaSet& schemas, double threshold) {
  std::vector<SpanLabel> out;
  for (const auto& span : spans) {
    for (std::size_t r = 1; r <= schemas.classification.size(); ++r) {
      if (scores.at(r, span.start, span.end) > threshold) out.push_back({span, r});
    }
  }
  return out;
}

std::vector<SpanLink> decode_association(const nd::Array& scores,
                                         const std::vector<SpanLabel>& labelled,
                                         const SchemaSet& schemas, double threshold) {
  std::map<Span, std::vector<std::size_t>> by_span;
  for (const auto& l : labelled) by_span[l.span].push_back(l.table);

  std::vector<SpanLink> out;
  for (std::size_t r = 1 + schemas.classification.size(); r < schemas.size(); ++r) {
    std::vector<Span> candidates;
    const bool filtered = schemas.has_bindings(r);
    for (const auto& [span, types] : by_span) {
      const bool ok = !filtered || std::any_of(types.begin(), types.end(),
                                               [&](std::size_t t) { return schemas.bound(r, t); });
      if (ok) candidates.push_back(span);
    }
    for (const auto& a : candidates) {
      for (const auto& b : candidates) {
        if (a == b) continue;
        if (scores.at(r, a.start, b.start) > threshold && scores.at(r, a.end, b.end) > threshold) {
          out.push_back({a, r, b});
        }
      }
    }
  }
  return out;
}

ExtractionRecord assemble_record(const std::vector<SpanLabel>& labelled,
                                 const std::vector<SpanLink>& links, const SchemaSet& schemas,
                                 AssemblyDiagnostics* diagnostics) {
  AssemblyDiagnostics diag;
  std::map<Span, std::set<std::size_t>> types;
  for (const auto& l : labelled) types[l.span].insert(l.table);

  ExtractionRecord rec;
  for (const auto& [span, ts] : types) {
    for (auto t : ts) {
      if (schemas.kind(t) == LabelKind::entity) rec.entities.push_back({span, schemas.name(t)});
    }
  }

  for (const auto& link : links) {
    const auto kind = schemas.kind(link.table);
    if (kind == LabelKind::relation) {
      rec.relations.push_back({link.from, schemas.name(link.table), link.to});
    } else if (kind == LabelKind::polarity) {
      if (carries_kind(types[link.from], schemas, LabelKind::aspect) &&
          carries_kind(types[link.to], schemas, LabelKind::opinion)) {
        rec.sentiments.push_back({link.from, schemas.name(link.table), link.to});
      }
    }
  }

  for (const auto& [span, ts] : types) {
    const bool is_trigger = carries_kind(ts, schemas, LabelKind::trigger);
    for (auto t : ts) {
      if (schemas.kind(t) != LabelKind::event) continue;
      if (!is_trigger) {
        ++diag.dropped_triggers;
        continue;
      }
      Event ev{schemas.name(t), span, {}};
      for (const auto& link : links) {
        if (link.from != span || schemas.kind(link.table) != LabelKind::trigger_argument) continue;
        std::size_t roles = 0;
        for (auto role : types[link.to]) {
          if (schemas.kind(role) != LabelKind::role) continue;
          ev.arguments.push_back({link.to, schemas.name(role)});
          ++roles;
        }
        if (roles > 1) ++diag.multi_role_arguments;
      }
      rec.events.push_back(std::move(ev));
    }
  }
  if (diagnostics) *diagnostics = diag;
  rec.normalize();
  return rec;
}

ExtractionRecord decode(const nd::Array& scores, const SchemaSet& schemas, double threshold,
                        AssemblyDiagnostics* diagnostics) {
  const auto spans = decode_detection(scores, threshold);
  const auto labelled = decode_classification(scores, spans, schemas, threshold);
  const auto links = decode_association(scores, labelled, schemas, threshold);
  return assemble_record(labelled, links, schemas, diagnostics);
}

ExtractionRecord brute_force_decode(const nd::Array& scores, const SchemaSet& schemas,
                                    double threshold) {
  const std::size_t nx = scores.dim(1);
  const std::size_t nc = schemas.classification.size();
  auto above = [&](std::size_t r, std::size_t p, std::size_t q) {
    return scores.at(r, p, q) > threshold;
  };
  auto kind_is = [&](std::size_t r, LabelKind k) { return schemas.kind(r) == k; };
  // A span survives when detected and carrying at least one label.
  auto label_set = [&](std::size_t p, std::size_t q) {
    std::vector<std::size_t> out;
    if (p > q || !above(0, p, q)) return out;
    for (std::size_t r = 1; r <= nc; ++r) {
      if (above(r, p, q)) out.push_back(r);
    }
    return out;
  };
  auto has_kind = [&](const std::vector<std::size_t>& ls, LabelKind k) {
    for (auto r : ls) {
      if (kind_is(r, k)) return true;
    }
    return false;
  };
  auto linked = [&](std::size_t r, std::size_t p1, std::size_t q1, std::size_t p2, std::size_t q2) {
    if (p1 == p2 && q1 == q2) return false;
    const auto l1 = label_set(p1, q1);
    const auto l2 = label_set(p2, q2);
    if (l1.empty() || l2.empty()) return false;
    if (schemas.has_bindings(r)) {
      bool ok1 = false, ok2 = false;
      for (auto t : l1) ok1 = ok1 || schemas.bound(r, t);
      for (auto t : l2) ok2 = ok2 || schemas.bound(r, t);
      if (!ok1 || !ok2) return false;
    }
    return above(r, p1, p2) && above(r, q1, q2);
  };

  ExtractionRecord rec;
  for (std::size_t p1 = 0; p1 < nx; ++p1) {
    for (std::size_t q1 = p1; q1 < nx; ++q1) {
      const auto l1 = label_set(p1, q1);
      for (auto r : l1) {
        if (kind_is(r, LabelKind::entity)) rec.entities.push_back({{p1, q1}, schemas.name(r)});
        if (kind_is(r, LabelKind::event) && has_kind(l1, LabelKind::trigger)) {
          Event ev{schemas.name(r), {p1, q1}, {}};
          for (std::size_t a = 1 + nc; a < schemas.size(); ++a) {
            if (!kind_is(a, LabelKind::trigger_argument)) continue;
            for (std::size_t p2 = 0; p2 < nx; ++p2) {
              for (std::size_t q2 = p2; q2 < nx; ++q2) {
                if (!linked(a, p1, q1, p2, q2)) continue;
                for (auto role : label_set(p2, q2)) {
                  if (kind_is(role, LabelKind::role)) ev.arguments.push_back({{p2, q2}, schemas.name(role)});
                }
              }
            }
          }
          rec.events.push_back(std::move(ev));
        }
      }
      for (std::size_t a = 1 + nc; a < schemas.size(); ++a) {
        for (std::size_t p2 = 0; p2 < nx; ++p2) {
          for (std::size_t q2 = p2; q2 < nx; ++q2) {
            if (!linked(a, p1, q1, p2, q2)) continue;
            if (kind_is(a, LabelKind::relation)) {
              rec.relations.push_back({{p1, q1}, schemas.name(a), {p2, q2}});
            } else if (kind_is(a, LabelKind::polarity) && has_kind(l1, LabelKind::aspect) &&
                       has_kind(label_set(p2, q2), LabelKind::opinion)) {
              rec.sentiments.push_back({{p1, q1}, schemas.name(a), {p2, q2}});
            }
          }
        }
      }
    }
  }
  rec.normalize();
  return rec;
}

}  // namespace uniex
