#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "uniex/data.hpp"

namespace uniex {

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

// Micro-averaged strict scores. With no predictions, precision is 1 when
// nothing was missed and 0 otherwise; recall mirrors this for empty gold.
struct MetricReport {
  std::string name;
  Counts counts;

  double precision() const;
  double recall() const;
  double f1() const;
};

// Predictions and gold are aligned document lists; the i-th prediction is
// scored against the i-th gold document. Throws std::invalid_argument on a
// length mismatch.
MetricReport entity_f1(const std::vector<ExDocument>& pred, const std::vector<ExDocument>& gold);
// Endpoints must also carry the same entity types, read from each side's
// own entity list.
MetricReport relation_strict_f1(const std::vector<ExDocument>& pred,
                                const std::vector<ExDocument>& gold);
// Subject and object compared by surface string.
MetricReport relation_triplet_f1(const std::vector<ExDocument>& pred,
                                 const std::vector<ExDocument>& gold);
// (trigger, argument) reports.
std::pair<MetricReport, MetricReport> event_f1(const std::vector<ExDocument>& pred,
                                               const std::vector<ExDocument>& gold);
MetricReport sentiment_triplet_f1(const std::vector<ExDocument>& pred,
                                  const std::vector<ExDocument>& gold);

// One-to-one exact-key multiset matching.
Counts match_keys(std::vector<std::string> pred, std::vector<std::string> gold);

enum class TaskKind { entity, relation, event, sentiment };
TaskKind task_kind_from_string(const std::string& s);
const char* to_string(TaskKind kind);

// Entity: entity. Relation: entity, relation strict, relation triplet.
// Event: trigger, argument. Sentiment: sentiment triplet.
std::vector<MetricReport> evaluate_task(TaskKind kind, const std::vector<ExDocument>& pred,
                                        const std::vector<ExDocument>& gold);

std::string format_table(const std::vector<MetricReport>& reports);
// "<name>.<field>=<value>" per line.
std::string format_key_values(const std::vector<MetricReport>& reports);

}  // namespace uniex
