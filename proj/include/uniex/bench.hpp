#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "uniex/data.hpp"
#include "uniex/model.hpp"

namespace uniex {

struct BenchOptions {
  std::size_t batch = 1;
  std::size_t warmup = 2;   // untimed passes over the dataset
  std::size_t repeats = 5;  // timed passes; per-sentence times are medians
  // Decode the score-cast gold tables instead of the model's scores, so the
  // decode stage sees exactly the gold number of targets.
  bool decode_gold = false;
};

struct SentenceTiming {
  std::string id;
  std::size_t targets = 0;
  std::size_t text_length = 0;
  double total_seconds = 0.0;   // encode + score + decode
  double decode_seconds = 0.0;  // decode stage only
};

struct BenchReport {
  std::vector<SentenceTiming> sentences;
  double sentences_per_second = 0.0;
  std::size_t batch = 1;
  // Median per-sentence times grouped by gold target count.
  std::map<std::size_t, double> total_by_targets;
  std::map<std::size_t, double> decode_by_targets;

  // max/min - 1 over total_by_targets; 0 with fewer than two groups.
  double total_spread() const;
  double decode_spread() const;
  std::string to_key_values() const;
};

BenchReport run_bench(const Model& model, const std::vector<ExDocument>& docs,
                      const BenchOptions& options);

// Relation-schema documents of exactly text_length tokens, each carrying the
// requested number of single-type entity targets on disjoint two-token spans.
std::vector<ExDocument> make_density_documents(const std::vector<std::size_t>& target_counts,
                                               std::size_t text_length, std::uint64_t seed);

}  // namespace uniex
