#include "uniex/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "uniex/bench.hpp"
#include "uniex/data.hpp"
#include "uniex/eval.hpp"
#include "uniex/model.hpp"
#include "uniex/train.hpp"

#ifndef UNIEX_VERSION
#define UNIEX_VERSION "0.0.0"
#endif

namespace uniex {

namespace fs = std::filesystem;

nlohmann::json make_manifest(const std::string& command, const std::vector<std::string>& args,
                             const nlohmann::json& config, std::uint64_t seed) {
  return {{"command", command},
          {"arguments", args},
          {"config", config},
          {"seed", seed},
          {"versions",
           {{"uniex", UNIEX_VERSION},
            {"compiler", __VERSION__},
            {"cplusplus", __cplusplus},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"cli11", CLI11_VERSION},
            {"spdlog", std::to_string(SPDLOG_VER_MAJOR) + "." + std::to_string(SPDLOG_VER_MINOR) +
                           "." + std::to_string(SPDLOG_VER_PATCH)}}}};
}

namespace {

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << text;
    if (!os) throw std::runtime_error("short write on " + tmp.string());
  }
  fs::rename(tmp, path);
}

fs::path manifest_beside(const fs::path& output) { return fs::path(output.string() + ".manifest.json"); }

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw std::runtime_error(std::string(what) + " not found: " + p.string());
}

TaskKind infer_task_from_docs(const std::vector<ExDocument>& docs) {
  bool rel = false, ev = false, sent = false;
  for (const auto& d : docs) {
    rel = rel || !d.gold.relations.empty();
    ev = ev || !d.gold.events.empty();
    sent = sent || !d.gold.sentiments.empty();
  }
  if (ev) return TaskKind::event;
  if (sent) return TaskKind::sentiment;
  if (rel) return TaskKind::relation;
  return TaskKind::entity;
}

struct Context {
  std::vector<std::string> args;
  std::ostream& out;
};

// ---------------------------------------------------------------------------

struct ConvertArgs {
  std::string input, output, format = "conll", task = "Entity Extraction";
};

int cmd_convert(const ConvertArgs& a, Context& ctx) {
  require_file(a.input, "input");
  std::ifstream is(a.input);
  std::vector<ExDocument> docs;
  if (a.format == "conll") {
    auto conv = convert_column_ner(is, a.task);
    if (conv.dangling_inside_tags > 0) {
      spdlog::warn("{} I- tags without a preceding B- tag were read as span starts",
                   conv.dangling_inside_tags);
    }
    docs = std::move(conv.docs);
  } else if (a.format == "tuple") {
    docs = convert_generic_json(is);
  } else {
    docs = read_jsonl(is);
  }
  if (docs.empty()) spdlog::warn("{} holds no documents; writing an empty file", a.input);
  for (const auto& d : docs) d.validate();
  if (fs::path(a.output).has_parent_path()) fs::create_directories(fs::path(a.output).parent_path());
  write_jsonl(fs::path(a.output), docs);
  write_manifest(manifest_beside(a.output),
                 make_manifest("convert", ctx.args,
                               {{"input", a.input}, {"format", a.format}, {"task", a.task}}, 0));
  spdlog::info("wrote {} documents to {}", docs.size(), a.output);
  ctx.out << "documents=" << docs.size() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct FixtureArgs {
  std::string kind = "entity", output, schema_output;
  std::size_t size = 8;
  std::uint64_t seed = 1;
  std::vector<std::size_t> density;
  std::size_t text_length = 32;
};

int cmd_fixture(const FixtureArgs& a, Context& ctx) {
  std::vector<ExDocument> docs;
  SchemaSet schemas;
  if (!a.density.empty()) {
    docs = make_density_documents(a.density, a.text_length, a.seed);
    schemas = fixture_schema(FixtureKind::relation);
  } else {
    auto ds = make_fixture(fixture_kind_from_string(a.kind), a.size, a.seed);
    docs = std::move(ds.docs);
    schemas = std::move(ds.schemas);
  }
  if (fs::path(a.output).has_parent_path()) fs::create_directories(fs::path(a.output).parent_path());
  write_jsonl(fs::path(a.output), docs);
  if (!a.schema_output.empty()) write_text_atomic(a.schema_output, schemas.to_json().dump(2) + "\n");
  write_manifest(manifest_beside(a.output),
                 make_manifest("fixture", ctx.args,
                               {{"kind", a.kind}, {"size", a.size}, {"density", a.density},
                                {"text_length", a.text_length}},
                               a.seed));
  ctx.out << "documents=" << docs.size() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string train, schema, output;
  TrainConfig train_cfg;
  ModelConfig model_cfg;
  bool constant_lr = false;
};

int cmd_train(TrainArgs a, Context& ctx) {
  require_file(a.train, "training data");
  require_file(a.schema, "schema");
  const auto docs = read_jsonl(fs::path(a.train));
  if (docs.empty()) throw std::runtime_error(a.train + " holds no documents");
  const auto schemas = SchemaSet::load(a.schema);
  a.train_cfg.linear_decay = !a.constant_lr;
  a.model_cfg.encoder.seed = a.train_cfg.seed;
  auto model = Model::create(build_vocab(docs, schemas), schemas, a.model_cfg.with(a.train_cfg.ablations));
  spdlog::info("training on {} documents, {} parameters, {} epochs", docs.size(),
               model.params().scalar_count(), a.train_cfg.epochs);

  const fs::path out(a.output);
  fs::create_directories(out);
  TrainHooks hooks;
  hooks.trace_path = out / "trace.csv";
  hooks.on_epoch = [](const EpochStats& s) {
    spdlog::debug("epoch {} loss {:.6f} f1 {:.4f}", s.epoch, s.mean_loss, s.f1);
    return true;
  };
  const auto trace = train(model, docs, a.train_cfg, hooks);
  if (trace.empty()) write_trace(hooks.trace_path, trace);
  model.save(out);
  nlohmann::json cfg = {{"train", a.train_cfg.to_json()},
                        {"model", model.config().to_json()},
                        {"data", a.train},
                        {"schema", a.schema}};
  write_manifest(out / "manifest.json", make_manifest("train", ctx.args, cfg, a.train_cfg.seed));
  if (!trace.empty()) {
    ctx.out << "epochs=" << trace.size() << '\n'
            << "final_loss=" << trace.back().mean_loss << '\n'
            << "final_f1=" << trace.back().f1 << '\n';
  } else {
    ctx.out << "epochs=0\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint, input, output;
  double threshold = -1.0;
};

int cmd_predict(const PredictArgs& a, Context& ctx) {
  require_file(a.input, "input");
  auto model = Model::load(a.checkpoint);
  if (a.threshold >= 0.0) {
    model.mutable_config().threshold = a.threshold;
    model.mutable_config().validate();
  }
  const auto docs = read_jsonl(fs::path(a.input));
  std::vector<ExDocument> preds;
  AssemblyDiagnostics diag;
  for (const auto& d : docs) preds.push_back(model.predict_document(d, &diag));
  if (diag.dropped_triggers > 0) {
    spdlog::warn("{} event-typed spans had no Trigger label and were dropped", diag.dropped_triggers);
  }
  if (diag.multi_role_arguments > 0) {
    spdlog::info("{} arguments carry more than one role", diag.multi_role_arguments);
  }
  if (fs::path(a.output).has_parent_path()) fs::create_directories(fs::path(a.output).parent_path());
  write_jsonl(fs::path(a.output), preds);
  write_manifest(manifest_beside(a.output),
                 make_manifest("predict", ctx.args,
                               {{"checkpoint", a.checkpoint},
                                {"input", a.input},
                                {"threshold", model.config().threshold}},
                               model.config().encoder.seed));
  std::size_t targets = 0;
  for (const auto& p : preds) targets += p.gold.target_count();
  ctx.out << "documents=" << preds.size() << '\n' << "targets=" << targets << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred, gold, task, output;
};

int cmd_eval(const EvalArgs& a, Context& ctx) {
  require_file(a.pred, "predictions");
  require_file(a.gold, "gold");
  const auto pred = read_jsonl(fs::path(a.pred));
  const auto gold = read_jsonl(fs::path(a.gold));
  const auto kind = a.task.empty() ? infer_task_from_docs(gold) : task_kind_from_string(a.task);
  const auto reports = evaluate_task(kind, pred, gold);
  ctx.out << format_table(reports);
  if (!a.output.empty()) {
    write_text_atomic(a.output, format_key_values(reports));
    write_manifest(manifest_beside(a.output),
                   make_manifest("eval", ctx.args,
                                 {{"pred", a.pred}, {"gold", a.gold}, {"task", to_string(kind)}}, 0));
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  GradCheckConfig cfg;
  std::string head = "triaffine", fault = "none", output;
  bool no_sam = false;
};

int cmd_gradcheck(GradcheckArgs a, Context& ctx) {
  a.cfg.head = head_kind_from_string(a.head);
  a.cfg.sam_enabled = !a.no_sam;
  nd::testing::Fault fault = nd::testing::Fault::none;
  if (a.fault == "gelu") fault = nd::testing::Fault::gelu_backward;
  else if (a.fault == "matmul") fault = nd::testing::Fault::matmul_backward;
  nd::testing::set_fault(fault);
  GradCheckReport r;
  try {
    r = run_gradcheck(a.cfg);
  } catch (...) {
    nd::testing::set_fault(nd::testing::Fault::none);
    throw;
  }
  nd::testing::set_fault(nd::testing::Fault::none);

  std::ostringstream os;
  os.precision(6);
  os << "max_relative_error=" << r.result.max_rel_error << '\n'
     << "tolerance=" << a.cfg.tolerance << '\n'
     << "parameters=" << r.parameters << '\n'
     << "checked=" << r.result.checked << '\n'
     << "seconds=" << r.seconds << '\n'
     << "result=" << (r.passed ? "pass" : "fail") << '\n';
  ctx.out << os.str();
  if (!a.output.empty()) {
    write_text_atomic(a.output, os.str());
    auto cfg = a.cfg.to_json();
    cfg["fault"] = a.fault;
    write_manifest(manifest_beside(a.output), make_manifest("gradcheck", ctx.args, cfg, a.cfg.seed));
  }
  return r.passed ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string checkpoint, input, output;
  BenchOptions opts;
};

int cmd_bench(const BenchArgs& a, Context& ctx) {
  require_file(a.input, "input");
  const auto model = Model::load(a.checkpoint);
  const auto docs = read_jsonl(fs::path(a.input));
  const auto report = run_bench(model, docs, a.opts);
  ctx.out << report.to_key_values();
  if (!a.output.empty()) {
    write_text_atomic(a.output, report.to_key_values());
    write_manifest(manifest_beside(a.output),
                   make_manifest("bench", ctx.args,
                                 {{"checkpoint", a.checkpoint},
                                  {"input", a.input},
                                  {"batch", a.opts.batch},
                                  {"warmup", a.opts.warmup},
                                  {"repeats", a.opts.repeats},
                                  {"decode_gold", a.opts.decode_gold}},
                                 model.config().encoder.seed));
  }
  return 0;
}

class ScopedLogger {
 public:
  explicit ScopedLogger(std::ostream& err) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("uniex", sink);
    logger->set_pattern("[%l] %v");
    logger->set_level(previous_ ? previous_->level() : spdlog::level::info);
    spdlog::set_default_logger(logger);
  }
  ~ScopedLogger() {
    if (previous_) spdlog::set_default_logger(previous_);
  }

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

void write_manifest(const fs::path& path, const nlohmann::json& manifest) {
  write_text_atomic(path, manifest.dump(2) + "\n");
}

void configure_logging() {
  const char* env = std::getenv("UNIEX_LOG_LEVEL");
  auto level = spdlog::level::info;
  if (env != nullptr) {
    const auto parsed = spdlog::level::from_str(env);
    if (parsed != spdlog::level::off || std::string(env) == "off") level = parsed;
  }
  spdlog::set_level(level);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging();
  ScopedLogger scoped(err);
  Context ctx{args, out};

  CLI::App app{"Unified span extraction: convert, train, predict, eval, gradcheck, bench", "uniex"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file of option defaults; flags override it");

  ConvertArgs conv;
  auto* convert = app.add_subcommand("convert", "Convert raw annotations to EX-JSONL");
  convert->add_option("--input", conv.input, "Raw input file")->required();
  convert->add_option("--output", conv.output, "EX-JSONL output")->required();
  convert->add_option("--format", conv.format, "conll, tuple or exjsonl")
      ->check(CLI::IsMember({"conll", "tuple", "exjsonl"}));
  convert->add_option("--task", conv.task, "Task name for CoNLL input");

  FixtureArgs fx;
  auto* fixture = app.add_subcommand("fixture", "Write a synthetic fixture dataset");
  fixture->add_option("--kind", fx.kind, "entity, relation, event or sentiment")
      ->check(CLI::IsMember({"entity", "relation", "event", "sentiment"}));
  fixture->add_option("--size", fx.size, "Number of sentences")->check(CLI::PositiveNumber);
  fixture->add_option("--seed", fx.seed, "Random seed");
  fixture->add_option("--output", fx.output, "EX-JSONL output")->required();
  fixture->add_option("--schema-output", fx.schema_output, "Schema JSON output");
  fixture->add_option("--density", fx.density, "Target counts, one sentence each")->delimiter(',');
  fixture->add_option("--text-length", fx.text_length, "Sentence length for --density");

  TrainArgs tr;
  auto* trainc = app.add_subcommand("train", "Train a model and write a checkpoint");
  trainc->add_option("--train", tr.train, "EX-JSONL training data")->required();
  trainc->add_option("--schema", tr.schema, "Schema JSON")->required();
  trainc->add_option("--output", tr.output, "Checkpoint directory")->required();
  trainc->add_option("--epochs", tr.train_cfg.epochs, "Epochs")->capture_default_str();
  trainc->add_option("--learning-rate", tr.train_cfg.learning_rate, "Peak learning rate")
      ->capture_default_str();
  trainc->add_option("--batch-size", tr.train_cfg.batch_size, "Sentences per step")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  trainc->add_option("--warmup-rate", tr.train_cfg.warmup_rate, "Warmup fraction of all steps")
      ->capture_default_str();
  trainc->add_flag("--constant-lr", tr.constant_lr, "No linear decay after warmup");
  trainc->add_option("--seed", tr.train_cfg.seed, "Seed for initialization and shuffling")
      ->capture_default_str();
  trainc->add_option("--hidden", tr.model_cfg.encoder.hidden, "Hidden size")->capture_default_str();
  trainc->add_option("--layers", tr.model_cfg.encoder.layers, "Encoder layers")->capture_default_str();
  trainc->add_option("--heads", tr.model_cfg.encoder.heads, "Attention heads")->capture_default_str();
  trainc->add_option("--ffn-hidden", tr.model_cfg.encoder.ffn_hidden, "Feed-forward size")
      ->capture_default_str();
  trainc->add_option("--max-position", tr.model_cfg.encoder.max_position, "Position table size")
      ->capture_default_str();
  trainc->add_option("--init-std", tr.model_cfg.encoder.init_std, "Weight init std")
      ->capture_default_str();
  trainc->add_option("--threshold", tr.model_cfg.threshold, "Decoding threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  trainc->add_flag("--no-sam", tr.train_cfg.ablations.no_sam, "All-ones attention mask");
  trainc->add_flag("--no-triaffine", tr.train_cfg.ablations.no_triaffine,
                   "Multi-head selection scoring head");
  trainc->add_flag("--no-label-names", tr.train_cfg.ablations.no_label_names,
                   "Placeholder tokens instead of label words");

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Extract structures with a checkpoint");
  predict->add_option("--checkpoint", pr.checkpoint, "Checkpoint directory")->required();
  predict->add_option("--input", pr.input, "EX-JSONL input")->required();
  predict->add_option("--output", pr.output, "EX-JSONL predictions")->required();
  predict->add_option("--threshold", pr.threshold, "Override the checkpoint threshold")
      ->check(CLI::Range(0.0, 1.0));

  EvalArgs ev;
  auto* evalc = app.add_subcommand("eval", "Score predictions against gold");
  evalc->add_option("--pred", ev.pred, "EX-JSONL predictions")->required();
  evalc->add_option("--gold", ev.gold, "EX-JSONL gold")->required();
  evalc->add_option("--task", ev.task, "entity, relation, event or sentiment (default: from gold)")
      ->check(CLI::IsMember({"entity", "relation", "event", "sentiment"}));
  evalc->add_option("--output", ev.output, "Key-value report file");

  GradcheckArgs gc;
  auto* gradc = app.add_subcommand("gradcheck", "Finite-difference check of the full loss");
  gradc->add_option("--hidden", gc.cfg.hidden, "Hidden size")->capture_default_str();
  gradc->add_option("--layers", gc.cfg.layers, "Encoder layers")->capture_default_str();
  gradc->add_option("--heads", gc.cfg.heads, "Attention heads")->capture_default_str();
  gradc->add_option("--ffn-hidden", gc.cfg.ffn_hidden, "Feed-forward size")->capture_default_str();
  gradc->add_option("--text-length", gc.cfg.text_length, "Text tokens")->capture_default_str();
  gradc->add_option("--init-std", gc.cfg.init_std, "Weight init std")->capture_default_str();
  gradc->add_option("--step", gc.cfg.step, "Central difference step")->capture_default_str();
  gradc->add_option("--tolerance", gc.cfg.tolerance, "Pass threshold")->capture_default_str();
  gradc->add_option("--seed", gc.cfg.seed, "Seed")->capture_default_str();
  gradc->add_option("--head", gc.head, "triaffine or multihead_selection")
      ->check(CLI::IsMember({"triaffine", "multihead_selection"}));
  gradc->add_flag("--no-sam", gc.no_sam, "All-ones attention mask");
  gradc->add_option("--inject-fault", gc.fault, "none, gelu or matmul")
      ->check(CLI::IsMember({"none", "gelu", "matmul"}));
  gradc->add_option("--output", gc.output, "Key-value report file");

  BenchArgs be;
  auto* benchc = app.add_subcommand("bench", "Per-sentence inference timing");
  benchc->add_option("--checkpoint", be.checkpoint, "Checkpoint directory")->required();
  benchc->add_option("--input", be.input, "EX-JSONL input")->required();
  benchc->add_option("--batch", be.opts.batch, "Sentences per batch")->check(CLI::PositiveNumber);
  benchc->add_option("--warmup", be.opts.warmup, "Untimed passes")->capture_default_str();
  benchc->add_option("--repeats", be.opts.repeats, "Timed passes")->check(CLI::PositiveNumber);
  benchc->add_flag("--decode-gold", be.opts.decode_gold, "Decode the score-cast gold tables");
  benchc->add_option("--output", be.output, "Key-value report file");

  std::vector<const char*> argv{"uniex"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*convert) return cmd_convert(conv, ctx);
    if (*fixture) return cmd_fixture(fx, ctx);
    if (*trainc) return cmd_train(tr, ctx);
    if (*predict) return cmd_predict(pr, ctx);
    if (*evalc) return cmd_eval(ev, ctx);
    if (*gradc) return cmd_gradcheck(gc, ctx);
    if (*benchc) return cmd_bench(be, ctx);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}

}  // namespace uniex
