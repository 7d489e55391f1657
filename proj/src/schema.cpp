#include "uniex/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

namespace uniex {

namespace {

struct KindName {
  LabelKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {LabelKind::entity, "entity"},   {LabelKind::trigger, "trigger"},
    {LabelKind::role, "role"},       {LabelKind::event, "event"},
    {LabelKind::aspect, "aspect"},   {LabelKind::opinion, "opinion"},
    {LabelKind::relation, "relation"}, {LabelKind::polarity, "polarity"},
    {LabelKind::trigger_argument, "trigger_argument"},
};

Label parse_label(const nlohmann::json& j, LabelKind default_kind) {
  if (j.is_string()) return {j.get<std::string>(), default_kind};
  Label l;
  l.name = j.at("name").get<std::string>();
  l.kind = j.contains("kind") ? label_kind_from_string(j.at("kind").get<std::string>())
                              : default_kind;
  return l;
}

}  // namespace

const char* to_string(LabelKind kind) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == kind) return kn.name;
  }
  return "?";
}

LabelKind label_kind_from_string(const std::string& s) {
  for (const auto& kn : kKindNames) {
    if (s == kn.name) return kn.kind;
  }
  throw std::invalid_argument("unknown label kind '" + s + "'");
}

bool is_classification_kind(LabelKind kind) {
  switch (kind) {
    case LabelKind::relation:
    case LabelKind::polarity:
    case LabelKind::trigger_argument:
      return false;
    default:
      return true;
  }
}

SchemaRole SchemaSet::role(std::size_t r) const {
  if (r == 0) return SchemaRole::detection;
  if (r <= classification.size()) return SchemaRole::classification;
  if (r < size()) return SchemaRole::association;
  throw std::out_of_range("schema index " + std::to_string(r));
}

const std::string& SchemaSet::name(std::size_t r) const {
  switch (role(r)) {
    case SchemaRole::detection:
      return task_name;
    case SchemaRole::classification:
      return classification[r - 1].name;
    case SchemaRole::association:
      break;
  }
  return association[r - 1 - classification.size()].name;
}

std::optional<LabelKind> SchemaSet::kind(std::size_t r) const {
  switch (role(r)) {
    case SchemaRole::detection:
      return std::nullopt;
    case SchemaRole::classification:
      return classification[r - 1].kind;
    case SchemaRole::association:
      break;
  }
  return association[r - 1 - classification.size()].kind;
}

std::optional<std::size_t> SchemaSet::index_of(const std::string& label) const {
  for (std::size_t r = 1; r < size(); ++r) {
    if (name(r) == label) return r;
  }
  return std::nullopt;
}

bool SchemaSet::bound(std::size_t r1, std::size_t r2) const {
  const auto& n1 = name(r1);
  const auto& n2 = name(r2);
  return std::any_of(bindings.begin(), bindings.end(), [&](const auto& b) {
    return (b.first == n1 && b.second == n2) || (b.first == n2 && b.second == n1);
  });
}

std::vector<std::size_t> SchemaSet::bound_to(std::size_t r) const {
  std::vector<std::size_t> out;
  for (std::size_t c = 1; c <= classification.size(); ++c) {
    if (c != r && bound(r, c)) out.push_back(c);
  }
  return out;
}

bool SchemaSet::has_bindings(std::size_t r) const {
  const auto& n = name(r);
  return std::any_of(bindings.begin(), bindings.end(),
                     [&](const auto& b) { return b.first == n || b.second == n; });
}

std::optional<std::size_t> SchemaSet::unique_of_kind(LabelKind k) const {
  std::optional<std::size_t> found;
  for (std::size_t r = 1; r < size(); ++r) {
    if (kind(r) == k) {
      if (found) return std::nullopt;
      found = r;
    }
  }
  return found;
}

void SchemaSet::validate() const {
  if (task_name.empty()) throw std::invalid_argument("schema set needs a task name");
  std::set<std::string> seen{task_name};
  for (const auto& l : classification) {
    if (!is_classification_kind(l.kind)) {
      throw std::invalid_argument("label '" + l.name + "' of kind " + to_string(l.kind) +
                                  " cannot classify spans");
    }
    if (!seen.insert(l.name).second) throw std::invalid_argument("duplicate label '" + l.name + "'");
  }
  for (const auto& l : association) {
    if (is_classification_kind(l.kind)) {
      throw std::invalid_argument("label '" + l.name + "' of kind " + to_string(l.kind) +
                                  " cannot associate spans");
    }
    if (!seen.insert(l.name).second) throw std::invalid_argument("duplicate label '" + l.name + "'");
  }
  for (const auto& [a, b] : bindings) {
    auto ra = index_of(a);
    auto rb = index_of(b);
    if (!ra || !rb) {
      throw std::invalid_argument("binding (" + a + ", " + b + ") names an unknown label");
    }
    auto pairs_with_class = [&](std::size_t owner, std::size_t other) {
      const bool owner_ok = role(owner) == SchemaRole::association || kind(owner) == LabelKind::event;
      return owner_ok && role(other) == SchemaRole::classification && owner != other;
    };
    if (!pairs_with_class(*ra, *rb) && !pairs_with_class(*rb, *ra)) {
      throw std::invalid_argument("binding (" + a + ", " + b +
                                  ") must pair an association or event label with a "
                                  "classification label");
    }
  }
}

SchemaSet SchemaSet::permuted(std::span<const std::size_t> class_order,
                              std::span<const std::size_t> assoc_order) const {
  if (class_order.size() != classification.size() || assoc_order.size() != association.size()) {
    throw std::invalid_argument("permutation size does not match label counts");
  }
  SchemaSet out = *this;
  for (std::size_t i = 0; i < class_order.size(); ++i) {
    out.classification[i] = classification.at(class_order[i]);
  }
  for (std::size_t i = 0; i < assoc_order.size(); ++i) {
    out.association[i] = association.at(assoc_order[i]);
  }
  return out;
}

nlohmann::json SchemaSet::to_json() const {
  nlohmann::json j;
  j["task_name"] = task_name;
  auto labels = nlohmann::json::array();
  for (const auto& l : classification) labels.push_back({{"name", l.name}, {"kind", to_string(l.kind)}});
  auto assocs = nlohmann::json::array();
  for (const auto& l : association) assocs.push_back({{"name", l.name}, {"kind", to_string(l.kind)}});
  auto binds = nlohmann::json::array();
  for (const auto& [a, b] : bindings) binds.push_back({a, b});
  j["labels"] = labels;
  j["associations"] = assocs;
  j["bindings"] = binds;
  return j;
}

SchemaSet SchemaSet::from_json(const nlohmann::json& j) {
  SchemaSet s;
  s.task_name = j.at("task_name").get<std::string>();
  for (const auto& l : j.value("labels", nlohmann::json::array())) {
    s.classification.push_back(parse_label(l, LabelKind::entity));
  }
  for (const auto& l : j.value("associations", nlohmann::json::array())) {
    s.association.push_back(parse_label(l, LabelKind::relation));
  }
  for (const auto& b : j.value("bindings", nlohmann::json::array())) {
    if (!b.is_array() || b.size() != 2) throw std::invalid_argument("binding must be a pair of names");
    s.bindings.emplace_back(b[0].get<std::string>(), b[1].get<std::string>());
  }
  s.validate();
  return s;
}

SchemaSet SchemaSet::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open schema file " + path.string());
  try {
    return from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

UnifiedInput build_prompt(const SchemaSet& schemas, const Vocabulary& vocab,
                          std::span<const std::string> text, const PromptOptions& opts) {
  if (text.empty()) throw std::invalid_argument("build_prompt: empty text");
  UnifiedInput in;

  auto push = [&](std::size_t id, int block, bool sep) {
    in.tokens.push_back(id);
    in.block_index.push_back(block);
    in.is_separator.push_back(sep);
  };

  for (std::size_t r = 0; r < schemas.size(); ++r) {
    const auto role = schemas.role(r);
    const std::size_t ident = role == SchemaRole::detection        ? Vocabulary::kDetectId
                              : role == SchemaRole::classification ? Vocabulary::kClassifyId
                                                                   : Vocabulary::kAssociateId;
    in.schema_anchor.push_back(in.tokens.size());
    push(ident, static_cast<int>(r), false);
    if (opts.label_placeholders && role != SchemaRole::detection) {
      push(vocab.placeholder(r - 1), static_cast<int>(r), false);
    } else {
      for (const auto& w : split_words(schemas.name(r))) push(vocab.id(w), static_cast<int>(r), false);
    }
  }

  const std::size_t prompt_len = in.tokens.size();
  if (prompt_len + 3 > opts.max_length) {
    throw std::invalid_argument("build_prompt: schema prompt of " + std::to_string(prompt_len) +
                                " tokens leaves no room for text within " +
                                std::to_string(opts.max_length));
  }
  const std::size_t keep = std::min(text.size(), opts.max_length - prompt_len - 2);
  in.truncated_tokens = text.size() - keep;

  push(Vocabulary::kSep, kTextBlock, true);
  for (std::size_t i = 0; i < keep; ++i) {
    in.text_range.push_back(in.tokens.size());
    push(vocab.id(text[i]), kTextBlock, false);
  }
  push(Vocabulary::kSep, kTextBlock, true);

  in.positions = assign_positions(in, opts.text_offset);
  in.mask = build_attention_mask(in, schemas, opts.sam_enabled, opts.text_sees_labels);
  return in;
}

std::vector<std::size_t> assign_positions(const UnifiedInput& input, std::size_t text_offset) {
  const std::size_t n = input.block_index.size();
  std::vector<std::size_t> pos(n);
  std::size_t i = 0;
  while (i < n) {
    const int block = input.block_index[i];
    std::size_t j = i;
    while (j < n && input.block_index[j] == block) ++j;
    const std::size_t len = j - i;
    const std::size_t base = block == kTextBlock ? text_offset : 0;
    if (block != kTextBlock && len >= text_offset) {
      throw std::invalid_argument("prompt block " + std::to_string(block) + " has " +
                                  std::to_string(len) +
                                  " tokens; increase the text position offset beyond it");
    }
    for (std::size_t k = 0; k < len; ++k) pos[i + k] = base + k;
    i = j;
  }
  return pos;
}

nd::Array build_attention_mask(const UnifiedInput& input, const SchemaSet& schemas,
                               bool sam_enabled, bool text_sees_labels) {
  const std::size_t n = input.block_index.size();
  nd::Array mask({n, n}, 1.0);
  if (!sam_enabled) return mask;

  // Visibility between prompt blocks depends only on the block pair.
  const std::size_t ns = schemas.size();
  std::vector<std::vector<bool>> label_pair(ns, std::vector<bool>(ns, false));
  for (std::size_t a = 1; a < ns; ++a) {
    for (std::size_t b = 1; b < ns; ++b) label_pair[a][b] = a == b || schemas.bound(a, b);
  }

  for (std::size_t q = 0; q < n; ++q) {
    for (std::size_t k = 0; k < n; ++k) {
      const int bq = input.block_index[q];
      const int bk = input.block_index[k];
      bool visible;
      if (input.is_separator[q] || input.is_separator[k] || bq == bk || bq == 0 || bk == 0) {
        visible = true;
      } else if (bk == kTextBlock) {
        visible = true;  // label query, text key
      } else if (bq == kTextBlock) {
        visible = text_sees_labels;
      } else {
        visible = label_pair[static_cast<std::size_t>(bq)][static_cast<std::size_t>(bk)];
      }
      mask.at(q, k) = visible ? 1.0 : 0.0;
    }
  }
  return mask;
}

}  // namespace uniex
