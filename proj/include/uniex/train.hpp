#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uniex/data.hpp"
#include "uniex/eval.hpp"
#include "uniex/model.hpp"
#include "uniex/ndiff.hpp"
#include "uniex/structures.hpp"

namespace uniex {

// Sum of BCE over cells with valid = 1.
nd::Var masked_loss(const nd::Var& scores, const TargetTensor& target);
// masked_loss(sigmoid(logits), target), evaluated stably. Used for training.
nd::Var masked_loss_logits(const nd::Var& logits, const TargetTensor& target);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::size_t epochs = 500;
  double warmup_rate = 0.06;
  bool linear_decay = true;
  std::uint64_t seed = 13;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  Ablations ablations;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Learning rate for 0-based optimizer step `step` out of `total`.
double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total);

class Adam {
 public:
  explicit Adam(const TrainConfig& config) : config_(config) {}
  // One update of every parameter in the store with its accumulated gradient.
  void step(ParamStore& params, double lr);
  std::size_t steps() const { return t_; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  TrainConfig config_;
  std::map<std::string, Moments> state_;
  std::size_t t_ = 0;
};

// Which task a schema set describes, from its association kinds.
TaskKind infer_task_kind(const SchemaSet& schemas);
// The headline metric per task: entity F1, relation strict F1, event
// argument F1, sentiment triplet F1.
MetricReport primary_metric(TaskKind kind, const std::vector<ExDocument>& pred,
                            const std::vector<ExDocument>& gold);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double f1 = 0.0;
};

struct TrainHooks {
  // Called after every epoch; returning false ends training early.
  std::function<bool(const EpochStats&)> on_epoch;
  // Written (and rewritten) after every epoch when non-empty.
  std::filesystem::path trace_path;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::size_t epoch, const std::string& doc_id)
      : std::runtime_error("non-finite loss in epoch " + std::to_string(epoch) + " on sentence '" +
                           doc_id + "'"),
        epoch_(epoch),
        doc_id_(doc_id) {}
  std::size_t epoch() const { return epoch_; }
  const std::string& doc_id() const { return doc_id_; }

 private:
  std::size_t epoch_;
  std::string doc_id_;
};

// Loss of one sentence, gold clipped to the kept text.
nd::Var sentence_loss(const Model& model, const ExDocument& doc);

// Adam with linear warmup then linear decay. Sentences are shuffled each
// epoch from a stream seeded by config.seed; a batch's loss is the mean of
// its sentence losses.
std::vector<EpochStats> train(Model& model, const std::vector<ExDocument>& docs,
                              const TrainConfig& config, const TrainHooks& hooks = {});

void write_trace(const std::filesystem::path& path, const std::vector<EpochStats>& trace);
std::vector<EpochStats> read_trace(const std::filesystem::path& path);

struct GradCheckConfig {
  std::size_t hidden = 8;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ffn_hidden = 16;
  std::size_t text_length = 6;
  double init_std = 0.5;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 7;
  HeadKind head = HeadKind::triaffine;
  bool sam_enabled = true;

  nlohmann::json to_json() const;
};

struct GradCheckReport {
  nd::GradCheckResult result;
  std::size_t parameters = 0;
  double seconds = 0.0;
  bool passed = false;
};

// Full loss path (prompt, encoder, head, masked BCE) on a tiny instance with
// two classification labels and one association label.
GradCheckReport run_gradcheck(const GradCheckConfig& config);

}  // namespace uniex
