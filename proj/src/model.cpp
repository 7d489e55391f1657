#include "uniex/model.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace uniex {

nlohmann::json Ablations::to_json() const {
  return {{"no_sam", no_sam}, {"no_triaffine", no_triaffine}, {"no_label_names", no_label_names}};
}

Ablations Ablations::from_json(const nlohmann::json& j) {
  Ablations a;
  a.no_sam = j.value("no_sam", false);
  a.no_triaffine = j.value("no_triaffine", false);
  a.no_label_names = j.value("no_label_names", false);
  return a;
}

ModelConfig ModelConfig::with(const Ablations& ablations) const {
  ModelConfig c = *this;
  if (ablations.no_sam) c.prompt.sam_enabled = false;
  if (ablations.no_triaffine) c.head = HeadKind::multihead_selection;
  if (ablations.no_label_names) c.prompt.label_placeholders = true;
  return c;
}

void ModelConfig::validate() const {
  encoder.validate();
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("threshold must lie in (0, 1), got " + std::to_string(threshold));
  }
  if (prompt.text_offset + 3 > encoder.max_position) {
    throw std::invalid_argument("max_position " + std::to_string(encoder.max_position) +
                                " leaves no room for text after offset " +
                                std::to_string(prompt.text_offset));
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"encoder", encoder.to_json()},
          {"head", to_string(head)},
          {"threshold", threshold},
          {"prompt",
           {{"max_length", prompt.max_length},
            {"text_offset", prompt.text_offset},
            {"sam_enabled", prompt.sam_enabled},
            {"text_sees_labels", prompt.text_sees_labels},
            {"label_placeholders", prompt.label_placeholders}}}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.encoder = EncoderConfig::from_json(j.at("encoder"));
  c.head = head_kind_from_string(j.at("head").get<std::string>());
  c.threshold = j.value("threshold", kDefaultThreshold);
  const auto& p = j.at("prompt");
  c.prompt.max_length = p.value("max_length", c.prompt.max_length);
  c.prompt.text_offset = p.value("text_offset", c.prompt.text_offset);
  c.prompt.sam_enabled = p.value("sam_enabled", c.prompt.sam_enabled);
  c.prompt.text_sees_labels = p.value("text_sees_labels", c.prompt.text_sees_labels);
  c.prompt.label_placeholders = p.value("label_placeholders", c.prompt.label_placeholders);
  return c;
}

ExtractionRecord clip_record(const ExtractionRecord& record, std::size_t n) {
  auto inside = [n](const Span& s) { return s.end < n; };
  ExtractionRecord out;
  for (const auto& e : record.entities) {
    if (inside(e.span)) out.entities.push_back(e);
  }
  for (const auto& r : record.relations) {
    if (inside(r.subject) && inside(r.object)) out.relations.push_back(r);
  }
  for (const auto& ev : record.events) {
    if (!inside(ev.trigger)) continue;
    Event kept{ev.label, ev.trigger, {}};
    for (const auto& a : ev.arguments) {
      if (inside(a.span)) kept.arguments.push_back(a);
    }
    out.events.push_back(std::move(kept));
  }
  for (const auto& s : record.sentiments) {
    if (inside(s.aspect) && inside(s.opinion)) out.sentiments.push_back(s);
  }
  out.normalize();
  return out;
}

Model Model::create(Vocabulary vocab, SchemaSet schemas, ModelConfig config) {
  schemas.validate();
  config.encoder.vocab_size = vocab.size();
  config.validate();
  Model m;
  m.vocab_ = std::move(vocab);
  m.schemas_ = std::move(schemas);
  m.config_ = config;
  init_encoder_params(config.encoder, m.params_);
  init_head_params(config.head, config.encoder.hidden, config.encoder.seed, config.encoder.init_std,
                   m.params_);
  return m;
}

UnifiedInput Model::prompt(const std::vector<std::string>& tokens) const {
  // Text positions run from text_offset through text_offset + N_x + 1.
  const std::size_t room = config_.encoder.max_position - config_.prompt.text_offset - 2;
  const std::size_t keep = std::min(tokens.size(), room);
  auto in = build_prompt(schemas_, vocab_, std::span<const std::string>(tokens.data(), keep),
                         config_.prompt);
  in.truncated_tokens += tokens.size() - keep;
  return in;
}

nd::Var Model::forward_logits(const UnifiedInput& input) const {
  const auto enc = encode(input, params_, config_.encoder);
  if (config_.head == HeadKind::triaffine) return triaffine_logits(enc, triaffine_params(params_));
  return multihead_selection_logits(enc, multihead_params(params_));
}

nd::Var Model::forward(const UnifiedInput& input) const { return nd::sigmoid(forward_logits(input)); }

nd::Array Model::scores(const std::vector<std::string>& tokens) const {
  return forward(prompt(tokens)).value();
}

ExtractionRecord Model::predict(const std::vector<std::string>& tokens,
                                AssemblyDiagnostics* diagnostics) const {
  return decode(scores(tokens), schemas_, config_.threshold, diagnostics);
}

ExDocument Model::predict_document(const ExDocument& doc, AssemblyDiagnostics* diagnostics) const {
  ExDocument out = doc;
  out.gold = predict(doc.tokens, diagnostics);
  return out;
}

Model Model::with_schemas(SchemaSet schemas) const {
  schemas.validate();
  Model m = *this;
  m.schemas_ = std::move(schemas);
  return m;
}

void Model::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  params_.save(dir / "params.bin");
  const nlohmann::json j = {{"config", config_.to_json()},
                            {"schemas", schemas_.to_json()},
                            {"vocab", vocab_.to_json()}};
  const auto tmp = dir / "model.json.tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, dir / "model.json");
}

Model Model::load(const std::filesystem::path& dir) {
  std::ifstream is(dir / "model.json");
  if (!is) throw std::runtime_error("no model.json in " + dir.string());
  const auto j = nlohmann::json::parse(is);
  Model m;
  m.config_ = ModelConfig::from_json(j.at("config"));
  m.schemas_ = SchemaSet::from_json(j.at("schemas"));
  m.vocab_ = Vocabulary::from_json(j.at("vocab"));
  if (m.vocab_.size() != m.config_.encoder.vocab_size) {
    throw std::runtime_error("vocabulary has " + std::to_string(m.vocab_.size()) +
                             " entries but the encoder expects " +
                             std::to_string(m.config_.encoder.vocab_size));
  }
  m.params_ = ParamStore::load(dir / "params.bin");
  return m;
}

}  // namespace uniex
