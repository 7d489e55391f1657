#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uniex/record.hpp"
#include "uniex/schema.hpp"
#include "uniex/vocab.hpp"

namespace uniex {

struct ExDocument {
  std::string id;
  std::string text;
  std::vector<std::string> tokens;
  std::string task;
  ExtractionRecord gold;

  // Space-joined tokens covered by the span.
  std::string surface(const Span& span) const;
  // Throws std::invalid_argument when a gold span falls outside the tokens.
  void validate() const;

  friend bool operator==(const ExDocument&, const ExDocument&) = default;
};

struct Dataset {
  SchemaSet schemas;
  std::vector<ExDocument> docs;
};

// Raised by converters; carries the 1-based input line of the offending record.
class ConversionError : public std::runtime_error {
 public:
  ConversionError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// EX-JSONL: one document per line, UTF-8. Field layout:
//   {"id", "text", "tokens": [..], "task",
//    "entities":   [{"start", "end", "type", "text"}],
//    "relations":  [{"head": {"start","end","text"}, "type", "tail": {...}}],
//    "events":     [{"type", "trigger": {...}, "arguments": [{"start","end","role","text"}]}],
//    "sentiments": [{"aspect": {...}, "polarity", "opinion": {...}}]}
// Offsets are 0-based, inclusive. "text" fields inside spans are surface
// strings checked on read.
nlohmann::json to_json(const ExDocument& doc);
ExDocument document_from_json(const nlohmann::json& j);
std::vector<ExDocument> read_jsonl(std::istream& is);
std::vector<ExDocument> read_jsonl(const std::filesystem::path& path);
void write_jsonl(std::ostream& os, const std::vector<ExDocument>& docs);
// Writes to a temporary sibling and renames it into place.
void write_jsonl(const std::filesystem::path& path, const std::vector<ExDocument>& docs);

struct ColumnConversion {
  std::vector<ExDocument> docs;
  std::size_t dangling_inside_tags = 0;
};

// Token-per-line BIO input ("token ... TAG", blank line between sentences,
// -DOCSTART- lines skipped). Short CoNLL tags PER/LOC/ORG/MISC are expanded
// to Person/Location/Organization/Miscellaneous.
ColumnConversion convert_column_ner(std::istream& is, const std::string& task = "Entity Extraction");

// Line-delimited records in the human-readable tuple style, 1-based inclusive
// word offsets:
//   {"text", "task", "tokens"?: [..],
//    "entities":   [[surface, start, end, type], ...],
//    "relations":  [[subject, relation, object], ...],
//    "events":     [[event_type, trigger, argument...], ...],
//    "sentiments": [[polarity, aspect, opinion], ...]}
// Relation/event/sentiment members refer to entity items by surface string
// (which must be unique) or by 0-based item index. Items consumed as event
// triggers/arguments or sentiment aspects/opinions leave the entity list;
// argument roles come from the item type.
std::vector<ExDocument> convert_generic_json(std::istream& is);

// 1-based inclusive offsets -> internal 0-based inclusive spans.
Span span_from_one_based(long long start, long long end);

Vocabulary build_vocab(const std::vector<ExDocument>& corpus, const SchemaSet& schemas);

enum class FixtureKind { entity, relation, event, sentiment };
FixtureKind fixture_kind_from_string(const std::string& s);
const char* to_string(FixtureKind kind);

SchemaSet fixture_schema(FixtureKind kind);
// Templated sentences with known gold structures; deterministic in seed.
Dataset make_fixture(FixtureKind kind, std::size_t size, std::uint64_t seed);

}  // namespace uniex
