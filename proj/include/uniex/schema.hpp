#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "uniex/ndiff.hpp"
#include "uniex/vocab.hpp"

namespace uniex {

// What a label means once a span or span pair carries it.
enum class LabelKind {
  entity,
  trigger,
  role,
  event,
  aspect,
  opinion,
  relation,
  polarity,
  trigger_argument,
};

enum class SchemaRole { detection, classification, association };

const char* to_string(LabelKind kind);
LabelKind label_kind_from_string(const std::string& s);
bool is_classification_kind(LabelKind kind);

struct Label {
  std::string name;
  LabelKind kind = LabelKind::entity;

  friend bool operator==(const Label&, const Label&) = default;
};

// The label inventory of one task. Schema index r addresses the first axis
// of every score tensor: r = 0 is the detection schema, then the
// classification labels in order, then the association labels.
struct SchemaSet {
  std::string task_name;
  std::vector<Label> classification;
  std::vector<Label> association;
  // Undirected (association-or-event label, classification label) pairs.
  std::vector<std::pair<std::string, std::string>> bindings;

  std::size_t size() const { return 1 + classification.size() + association.size(); }
  SchemaRole role(std::size_t r) const;
  const std::string& name(std::size_t r) const;
  // Detection has no label kind.
  std::optional<LabelKind> kind(std::size_t r) const;
  std::optional<std::size_t> index_of(const std::string& name) const;

  // True when schemas r1 and r2 are paired by a binding (in either order).
  bool bound(std::size_t r1, std::size_t r2) const;
  // Classification schemas bound to r.
  std::vector<std::size_t> bound_to(std::size_t r) const;
  bool has_bindings(std::size_t r) const;

  // Label of the given kind, if the set defines exactly one.
  std::optional<std::size_t> unique_of_kind(LabelKind kind) const;

  // Throws std::invalid_argument on duplicate names, dangling bindings or
  // kinds placed in the wrong list.
  void validate() const;

  // Same labels with classification/association lists reordered; bindings
  // carry over by name.
  SchemaSet permuted(std::span<const std::size_t> class_order,
                     std::span<const std::size_t> assoc_order) const;

  nlohmann::json to_json() const;
  static SchemaSet from_json(const nlohmann::json& j);
  static SchemaSet load(const std::filesystem::path& path);

  friend bool operator==(const SchemaSet&, const SchemaSet&) = default;
};

struct PromptOptions {
  std::size_t max_length = 512;   // total tokens, schema prompt + text + separators
  std::size_t text_offset = 64;   // first position id of the text block
  bool sam_enabled = true;        // false: all-ones visibility (W/O SAM)
  bool text_sees_labels = false;  // text queries may attend label keys
  bool label_placeholders = false;  // replace label words by [unused k] (W/O Label)
};

inline constexpr int kTextBlock = -1;

struct UnifiedInput {
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> positions;
  // Owner block per token: the schema index r for prompt blocks, kTextBlock
  // for the text block (which includes both separators).
  std::vector<int> block_index;
  std::vector<bool> is_separator;
  // mask(i, j) = 1 when query token i may attend key token j.
  nd::Array mask;
  std::vector<std::size_t> schema_anchor;
  std::vector<std::size_t> text_range;
  std::size_t truncated_tokens = 0;

  std::size_t length() const { return tokens.size(); }
  std::size_t text_length() const { return text_range.size(); }
};

// Assembles the token layout, then fills positions and mask.
UnifiedInput build_prompt(const SchemaSet& schemas, const Vocabulary& vocab,
                          std::span<const std::string> text, const PromptOptions& opts = {});

// Block-local positions: every prompt block restarts at 0, the text block
// starts at text_offset.
std::vector<std::size_t> assign_positions(const UnifiedInput& input, std::size_t text_offset);

nd::Array build_attention_mask(const UnifiedInput& input, const SchemaSet& schemas,
                               bool sam_enabled, bool text_sees_labels = false);

}  // namespace uniex
