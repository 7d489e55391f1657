#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "uniex/ndiff.hpp"
#include "uniex/record.hpp"
#include "uniex/schema.hpp"

namespace uniex {

inline constexpr double kDefaultThreshold = 0.5;

// Supervision for one sentence. values(r, p, q) is 1 only where valid is 1.
struct TargetTensor {
  nd::Array values;
  nd::Array valid;
};

// Gold spans with the schema indices they carry, plus the gold span pairs
// per association table. Shared by target building and evaluation.
struct GoldTables {
  std::map<Span, std::set<std::size_t>> span_types;
  std::set<std::tuple<Span, std::size_t, Span>> links;  // (from, table, to)
};

GoldTables collect_gold(const ExtractionRecord& gold, const SchemaSet& schemas);

TargetTensor build_target_tensor(const ExtractionRecord& gold, const SchemaSet& schemas,
                                 std::size_t text_length);

// Scores a perfect model would emit for Y: 0.9 where Y is 1, 0.1 elsewhere.
nd::Array cast_target_to_scores(const TargetTensor& target);

struct SpanLabel {
  Span span;
  std::size_t table = 0;  // classification schema index
  friend auto operator<=>(const SpanLabel&, const SpanLabel&) = default;
};

struct SpanLink {
  Span from;
  std::size_t table = 0;  // association schema index
  Span to;
  friend auto operator<=>(const SpanLink&, const SpanLink&) = default;
};

// Every (p, q) with q >= p and S[0, p, q] > threshold, in (p, q) order.
std::vector<Span> decode_detection(const nd::Array& scores, double threshold = kDefaultThreshold);

// (span, label) for every classification table scoring the span's
// (start, end) cell above threshold. Multi-label.
std::vector<SpanLabel> decode_classification(const nd::Array& scores, const std::vector<Span>& spans,
                                             const SchemaSet& schemas,
                                             double threshold = kDefaultThreshold);

// Ordered pairs of distinct labelled spans whose (start_i, start_j) and
// (end_i, end_j) cells both clear the threshold in an association table.
// When the table has bindings, both spans must carry a bound label.
std::vector<SpanLink> decode_association(const nd::Array& scores,
                                         const std::vector<SpanLabel>& labelled,
                                         const SchemaSet& schemas,
                                         double threshold = kDefaultThreshold);

struct AssemblyDiagnostics {
  std::size_t dropped_triggers = 0;  // event-typed spans without a Trigger label
  std::size_t multi_role_arguments = 0;
};

ExtractionRecord assemble_record(const std::vector<SpanLabel>& labelled,
                                 const std::vector<SpanLink>& links, const SchemaSet& schemas,
                                 AssemblyDiagnostics* diagnostics = nullptr);

// decode_detection -> decode_classification -> decode_association ->
// assemble_record.
ExtractionRecord decode(const nd::Array& scores, const SchemaSet& schemas,
                        double threshold = kDefaultThreshold,
                        AssemblyDiagnostics* diagnostics = nullptr);

// Reference decoder: enumerates every span and every span pair directly
// against the score tensor.
ExtractionRecord brute_force_decode(const nd::Array& scores, const SchemaSet& schemas,
                                    double threshold = kDefaultThreshold);

}  // namespace uniex
