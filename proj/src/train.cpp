#include "uniex/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace uniex {

nd::Var masked_loss(const nd::Var& scores, const TargetTensor& target) {
  return nd::masked_bce(scores, target.values, target.valid);
}

nd::Var masked_loss_logits(const nd::Var& logits, const TargetTensor& target) {
  return nd::masked_bce_logits(logits, target.values, target.valid);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(warmup_rate >= 0.0 && warmup_rate < 1.0)) {
    throw std::invalid_argument("warmup_rate must lie in [0, 1)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be non-negative");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"epochs", epochs},               {"warmup_rate", warmup_rate},
          {"linear_decay", linear_decay},   {"seed", seed},
          {"beta1", beta1},                 {"beta2", beta2},
          {"epsilon", epsilon},             {"weight_decay", weight_decay},
          {"ablations", ablations.to_json()}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.warmup_rate = j.value("warmup_rate", c.warmup_rate);
  c.linear_decay = j.value("linear_decay", c.linear_decay);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  if (j.contains("ablations")) c.ablations = Ablations::from_json(j.at("ablations"));
  return c;
}

double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total) {
  const auto warmup = static_cast<std::size_t>(config.warmup_rate * static_cast<double>(total));
  if (step < warmup) {
    return config.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  if (!config.linear_decay || total <= warmup) return config.learning_rate;
  const double left = static_cast<double>(total - std::min(step, total - 1));
  return config.learning_rate * left / static_cast<double>(total - warmup);
}

void Adam::step(ParamStore& params, double lr) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (const auto& name : params.names()) {
    nd::Var p = params.get(name);
    const auto& g = p.grad();
    if (g.size() == 0) continue;
    auto& theta = p.mutable_value().raw();
    auto& st = state_[name];
    if (st.m.empty()) {
      st.m.assign(theta.size(), 0.0);
      st.v.assign(theta.size(), 0.0);
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g.raw()[i] + config_.weight_decay * theta[i];
      st.m[i] = b1 * st.m[i] + (1.0 - b1) * gi;
      st.v[i] = b2 * st.v[i] + (1.0 - b2) * gi * gi;
      theta[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + config_.epsilon);
    }
  }
}

TaskKind infer_task_kind(const SchemaSet& schemas) {
  for (const auto& a : schemas.association) {
    if (a.kind == LabelKind::trigger_argument) return TaskKind::event;
    if (a.kind == LabelKind::polarity) return TaskKind::sentiment;
  }
  for (const auto& a : schemas.association) {
    if (a.kind == LabelKind::relation) return TaskKind::relation;
  }
  return TaskKind::entity;
}

MetricReport primary_metric(TaskKind kind, const std::vector<ExDocument>& pred,
                            const std::vector<ExDocument>& gold) {
  switch (kind) {
    case TaskKind::entity:
      return entity_f1(pred, gold);
    case TaskKind::relation:
      return relation_strict_f1(pred, gold);
    case TaskKind::event:
      return event_f1(pred, gold).second;
    case TaskKind::sentiment:
      break;
  }
  return sentiment_triplet_f1(pred, gold);
}

namespace {

struct Prepared {
  UnifiedInput input;
  TargetTensor target;
  ExDocument clipped;
};

Prepared prepare(const Model& model, const ExDocument& doc) {
  Prepared p;
  p.input = model.prompt(doc.tokens);
  const auto n = p.input.text_length();
  p.clipped = doc;
  p.clipped.gold = clip_record(doc.gold, n);
  p.target = build_target_tensor(p.clipped.gold, model.schemas(), n);
  return p;
}

}  // namespace

nd::Var sentence_loss(const Model& model, const ExDocument& doc) {
  const auto p = prepare(model, doc);
  return masked_loss_logits(model.forward_logits(p.input), p.target);
}

std::vector<EpochStats> train(Model& model, const std::vector<ExDocument>& docs,
                              const TrainConfig& config, const TrainHooks& hooks) {
  if (docs.empty()) throw std::invalid_argument("train: empty dataset");
  config.validate();

  std::vector<Prepared> prepared;
  std::vector<ExDocument> gold;
  prepared.reserve(docs.size());
  for (const auto& d : docs) {
    prepared.push_back(prepare(model, d));
    gold.push_back(prepared.back().clipped);
  }
  const auto kind = infer_task_kind(model.schemas());

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t per_epoch = (docs.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total = per_epoch * config.epochs;
  Adam adam(config);
  std::size_t step = 0;

  std::vector<EpochStats> trace;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < docs.size(); b += config.batch_size) {
      const std::size_t e = std::min(docs.size(), b + config.batch_size);
      const double weight = 1.0 / static_cast<double>(e - b);
      model.params().zero_grad();
      for (std::size_t k = b; k < e; ++k) {
        const auto& p = prepared[order[k]];
        const auto loss = masked_loss_logits(model.forward_logits(p.input), p.target);
        const double v = loss.value()[0];
        if (!std::isfinite(v)) throw NonFiniteLoss(epoch, docs[order[k]].id);
        loss_sum += v;
        nd::backward(nd::scale(loss, weight));
      }
      adam.step(model.params(), scheduled_lr(config, step++, total));
    }

    std::vector<ExDocument> pred;
    pred.reserve(docs.size());
    for (const auto& p : prepared) {
      ExDocument d = p.clipped;
      d.gold = decode(model.forward(p.input).value(), model.schemas(), model.config().threshold);
      pred.push_back(std::move(d));
    }
    trace.push_back({epoch, loss_sum / static_cast<double>(docs.size()),
                     primary_metric(kind, pred, gold).f1()});
    if (!hooks.trace_path.empty()) write_trace(hooks.trace_path, trace);
    if (hooks.on_epoch && !hooks.on_epoch(trace.back())) break;
  }
  model.params().zero_grad();
  return trace;
}

void write_trace(const std::filesystem::path& path, const std::vector<EpochStats>& trace) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os.precision(17);
    os << "epoch,mean_loss,f1\n";
    for (const auto& s : trace) os << s.epoch << ',' << s.mean_loss << ',' << s.f1 << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::vector<EpochStats> read_trace(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<EpochStats> out;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    EpochStats s;
    char c1 = 0, c2 = 0;
    if (!(ls >> s.epoch >> c1 >> s.mean_loss >> c2 >> s.f1) || c1 != ',' || c2 != ',') {
      throw std::runtime_error(path.string() + ": malformed trace line '" + line + "'");
    }
    out.push_back(s);
  }
  return out;
}

nlohmann::json GradCheckConfig::to_json() const {
  return {{"hidden", hidden},         {"layers", layers}, {"heads", heads},
          {"ffn_hidden", ffn_hidden}, {"text_length", text_length},
          {"init_std", init_std},     {"step", step},     {"tolerance", tolerance},
          {"seed", seed},             {"head", to_string(head)},
          {"sam_enabled", sam_enabled}};
}

GradCheckReport run_gradcheck(const GradCheckConfig& config) {
  if (config.text_length < 5) throw std::invalid_argument("gradcheck needs at least 5 text tokens");
  const auto start = std::chrono::steady_clock::now();

  SchemaSet schemas;
  schemas.task_name = "Relation Extraction";
  schemas.classification = {{"Person", LabelKind::entity}, {"Location", LabelKind::entity}};
  schemas.association = {{"live in", LabelKind::relation}};
  schemas.bindings = {{"live in", "Person"}, {"live in", "Location"}};

  std::vector<std::string> words = {"Anna", "lives", "in", "New", "York"};
  for (std::size_t i = words.size(); i < config.text_length; ++i) words.push_back("w" + std::to_string(i));

  ExDocument doc;
  doc.id = "gradcheck";
  doc.tokens = words;
  doc.gold.entities = {{{0, 0}, "Person"}, {{3, 4}, "Location"}};
  doc.gold.relations = {{{0, 0}, "live in", {3, 4}}};
  doc.gold.normalize();

  ModelConfig mc;
  mc.encoder.hidden = config.hidden;
  mc.encoder.layers = config.layers;
  mc.encoder.heads = config.heads;
  mc.encoder.ffn_hidden = config.ffn_hidden;
  mc.encoder.seed = config.seed;
  mc.encoder.init_std = config.init_std;
  mc.prompt.text_offset = 16;
  mc.encoder.max_position = mc.prompt.text_offset + config.text_length + 2;
  mc.head = config.head;
  mc.prompt.sam_enabled = config.sam_enabled;

  auto model = Model::create(build_vocab({doc}, schemas), schemas, mc);
  const auto input = model.prompt(doc.tokens);
  const auto target = build_target_tensor(doc.gold, schemas, input.text_length());
  const auto vars = model.params().vars();

  GradCheckReport report;
  report.parameters = model.params().scalar_count();
  report.result = nd::grad_check([&] { return masked_loss_logits(model.forward_logits(input), target); },
                                 std::span<const nd::Var>(vars), config.step);
  model.params().zero_grad();
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.passed = report.result.max_rel_error < config.tolerance;
  return report;
}

}  // namespace uniex
