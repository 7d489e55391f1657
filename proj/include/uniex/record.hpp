#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <vector>

namespace uniex {

// Token offsets are 0-based and inclusive on both ends everywhere inside the
// library. Converters translate other conventions at the boundary.
inline constexpr std::size_t kIndexBase = 0;
inline constexpr bool kInclusiveEnd = true;

struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  friend auto operator<=>(const Span&, const Span&) = default;
};

struct TypedSpan {
  Span span;
  std::string label;
  friend auto operator<=>(const TypedSpan&, const TypedSpan&) = default;
};

struct Relation {
  Span subject;
  std::string label;
  Span object;
  friend auto operator<=>(const Relation&, const Relation&) = default;
};

struct Argument {
  Span span;
  std::string role;
  friend auto operator<=>(const Argument&, const Argument&) = default;
};

struct Event {
  std::string label;
  Span trigger;
  std::vector<Argument> arguments;
  friend auto operator<=>(const Event&, const Event&) = default;
};

struct Sentiment {
  Span aspect;
  std::string polarity;
  Span opinion;
  friend auto operator<=>(const Sentiment&, const Sentiment&) = default;
};

struct ExtractionRecord {
  std::vector<TypedSpan> entities;
  std::vector<Relation> relations;
  std::vector<Event> events;
  std::vector<Sentiment> sentiments;

  // Sorts every list (and every event's arguments) and drops duplicates.
  ExtractionRecord& normalize();
  bool empty() const {
    return entities.empty() && relations.empty() && events.empty() && sentiments.empty();
  }
  std::size_t target_count() const;

  friend bool operator==(const ExtractionRecord&, const ExtractionRecord&) = default;
};

}  // namespace uniex
