#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uniex/data.hpp"
#include "uniex/encoder.hpp"
#include "uniex/params.hpp"
#include "uniex/schema.hpp"
#include "uniex/scoring.hpp"
#include "uniex/structures.hpp"
#include "uniex/vocab.hpp"

namespace uniex {

struct Ablations {
  bool no_sam = false;
  bool no_triaffine = false;
  bool no_label_names = false;

  nlohmann::json to_json() const;
  static Ablations from_json(const nlohmann::json& j);
  friend bool operator==(const Ablations&, const Ablations&) = default;
};

struct ModelConfig {
  EncoderConfig encoder;
  HeadKind head = HeadKind::triaffine;
  PromptOptions prompt;
  double threshold = kDefaultThreshold;

  // Switches the mask, the head, or the label tokens; nothing else.
  ModelConfig with(const Ablations& ablations) const;
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Drops gold items touching tokens at or past text_length.
ExtractionRecord clip_record(const ExtractionRecord& record, std::size_t text_length);

class Model {
 public:
  // Fills in config.encoder.vocab_size and initializes encoder and head.
  static Model create(Vocabulary vocab, SchemaSet schemas, ModelConfig config);

  UnifiedInput prompt(const std::vector<std::string>& tokens) const;
  // Score tensor (N_s, N_x, N_x) as a differentiable value.
  nd::Var forward(const UnifiedInput& input) const;
  // The score tensor before the sigmoid.
  nd::Var forward_logits(const UnifiedInput& input) const;
  nd::Array scores(const std::vector<std::string>& tokens) const;
  ExtractionRecord predict(const std::vector<std::string>& tokens,
                           AssemblyDiagnostics* diagnostics = nullptr) const;
  // Same id, text and tokens; gold holds the prediction.
  ExDocument predict_document(const ExDocument& doc, AssemblyDiagnostics* diagnostics = nullptr) const;

  // Writes params.bin and model.json into dir.
  void save(const std::filesystem::path& dir) const;
  static Model load(const std::filesystem::path& dir);

  const Vocabulary& vocab() const { return vocab_; }
  const SchemaSet& schemas() const { return schemas_; }
  // Predictions and prompts for a reordered label set; parameters are shared.
  Model with_schemas(SchemaSet schemas) const;
  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  Vocabulary vocab_;
  SchemaSet schemas_;
  ModelConfig config_;
  ParamStore params_;
};

}  // namespace uniex
