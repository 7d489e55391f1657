#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "uniex/data.hpp"
#include "uniex/eval.hpp"
#include "uniex/model.hpp"
#include "uniex/structures.hpp"
#include "uniex/train.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

std::vector<uniex::ExDocument> docs_from(const std::string& text) {
  std::vector<uniex::ExDocument> docs;
  for (const auto& j : json::parse(text)) docs.push_back(uniex::document_from_json(j));
  return docs;
}

std::string docs_to(const std::vector<uniex::ExDocument>& docs) {
  auto arr = json::array();
  for (const auto& d : docs) arr.push_back(uniex::to_json(d));
  return arr.dump();
}

py::array_t<double> to_numpy(const uniex::nd::Array& a) {
  std::vector<py::ssize_t> shape(a.shape().begin(), a.shape().end());
  py::array_t<double> out(shape);
  std::copy(a.raw().begin(), a.raw().end(), out.mutable_data());
  return out;
}

uniex::nd::Array from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  uniex::nd::Shape shape(a.shape(), a.shape() + a.ndim());
  return uniex::nd::Array(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

uniex::ExDocument with_record(const std::vector<std::string>& tokens, uniex::ExtractionRecord rec) {
  uniex::ExDocument d;
  d.tokens = tokens;
  for (std::size_t i = 0; i < tokens.size(); ++i) d.text += (i ? " " : "") + tokens[i];
  d.gold = std::move(rec);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the uniex extraction toolkit";
  m.def("version", [] { return std::string(UNIEX_VERSION); });

  m.def("convert_column",
        [](const std::string& text, const std::string& task) {
          std::istringstream is(text);
          auto c = uniex::convert_column_ner(is, task);
          return py::make_tuple(docs_to(c.docs), c.dangling_inside_tags);
        },
        py::arg("text"), py::arg("task") = "Entity Extraction");
  m.def("convert_tuples", [](const std::string& text) {
    std::istringstream is(text);
    return docs_to(uniex::convert_generic_json(is));
  });
  m.def("fixture", [](const std::string& kind, std::size_t size, std::uint64_t seed) {
    auto ds = uniex::make_fixture(uniex::fixture_kind_from_string(kind), size, seed);
    return py::make_tuple(ds.schemas.to_json().dump(), docs_to(ds.docs));
  });

  m.def("decode",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& scores,
           const std::string& schema, const std::vector<std::string>& tokens, double threshold) {
          const auto s = from_numpy(scores);
          if (s.rank() != 3 || s.dim(1) != tokens.size() || s.dim(2) != tokens.size()) {
            throw std::invalid_argument("scores must have shape (labels, tokens, tokens)");
          }
          auto schemas = uniex::SchemaSet::from_json(json::parse(schema));
          return uniex::to_json(with_record(tokens, uniex::decode(s, schemas, threshold))).dump();
        },
        py::arg("scores"), py::arg("schema"), py::arg("tokens"),
        py::arg("threshold") = uniex::kDefaultThreshold);

  m.def("target", [](const std::string& doc, const std::string& schema) {
    const auto d = uniex::document_from_json(json::parse(doc));
    auto schemas = uniex::SchemaSet::from_json(json::parse(schema));
    auto t = uniex::build_target_tensor(d.gold, schemas, d.tokens.size());
    return py::make_tuple(to_numpy(t.values), to_numpy(t.valid));
  });

  m.def("evaluate", [](const std::string& task, const std::string& pred, const std::string& gold) {
    py::dict out;
    for (const auto& r : uniex::evaluate_task(uniex::task_kind_from_string(task), docs_from(pred),
                                              docs_from(gold))) {
      py::dict d;
      d["precision"] = r.precision();
      d["recall"] = r.recall();
      d["f1"] = r.f1();
      d["tp"] = r.counts.tp;
      d["fp"] = r.counts.fp;
      d["fn"] = r.counts.fn;
      out[py::str(r.name)] = d;
    }
    return out;
  });

  m.def("gradcheck",
        [](std::size_t hidden, std::size_t text_length, const std::string& head, std::uint64_t seed,
           double tolerance) {
          uniex::GradCheckConfig c;
          c.hidden = hidden;
          c.text_length = text_length;
          c.head = uniex::head_kind_from_string(head);
          c.seed = seed;
          c.tolerance = tolerance;
          py::gil_scoped_release release;
          const auto r = uniex::run_gradcheck(c);
          py::gil_scoped_acquire acquire;
          py::dict d;
          d["passed"] = r.passed;
          d["max_rel_error"] = r.result.max_rel_error;
          d["checked"] = r.result.checked;
          d["parameters"] = r.parameters;
          d["seconds"] = r.seconds;
          return d;
        },
        py::arg("hidden") = 8, py::arg("text_length") = 6, py::arg("head") = "triaffine",
        py::arg("seed") = 7, py::arg("tolerance") = 1e-4);

  py::class_<uniex::Model>(m, "Model")
      .def_static(
          "create",
          [](const std::string& docs, const std::string& schema, std::size_t hidden,
             std::size_t layers, std::size_t heads, std::size_t ffn_hidden, double init_std,
             std::uint64_t seed, const std::string& head, double threshold, bool no_sam,
             bool no_triaffine, bool no_label_names) {
            auto schemas = uniex::SchemaSet::from_json(json::parse(schema));
            uniex::ModelConfig c;
            c.encoder.hidden = hidden;
            c.encoder.layers = layers;
            c.encoder.heads = heads;
            c.encoder.ffn_hidden = ffn_hidden;
            c.encoder.init_std = init_std;
            c.encoder.seed = seed;
            c.head = uniex::head_kind_from_string(head);
            c.threshold = threshold;
            c = c.with({no_sam, no_triaffine, no_label_names});
            auto vocab = uniex::build_vocab(docs_from(docs), schemas);
            return uniex::Model::create(std::move(vocab), std::move(schemas), c);
          },
          py::arg("docs"), py::arg("schema"), py::arg("hidden") = 32, py::arg("layers") = 2,
          py::arg("heads") = 4, py::arg("ffn_hidden") = 128, py::arg("init_std") = 0.1,
          py::arg("seed") = 13, py::arg("head") = "triaffine",
          py::arg("threshold") = uniex::kDefaultThreshold, py::arg("no_sam") = false,
          py::arg("no_triaffine") = false, py::arg("no_label_names") = false)
      .def_static("load", &uniex::Model::load)
      .def("save", &uniex::Model::save)
      .def(
          "train",
          [](uniex::Model& model, const std::string& docs, std::size_t epochs, double learning_rate,
             std::size_t batch_size, std::uint64_t seed) {
            uniex::TrainConfig c;
            c.epochs = epochs;
            c.learning_rate = learning_rate;
            c.batch_size = batch_size;
            c.seed = seed;
            const auto d = docs_from(docs);
            std::vector<uniex::EpochStats> trace;
            {
              py::gil_scoped_release release;
              trace = uniex::train(model, d, c);
            }
            py::list out;
            for (const auto& e : trace) out.append(py::make_tuple(e.epoch, e.mean_loss, e.f1));
            return out;
          },
          py::arg("docs"), py::arg("epochs") = 500, py::arg("learning_rate") = 1e-3,
          py::arg("batch_size") = 8, py::arg("seed") = 13)
      .def("scores",
           [](const uniex::Model& model, const std::vector<std::string>& tokens) {
             return to_numpy(model.scores(tokens));
           })
      .def("predict",
           [](const uniex::Model& model, const std::vector<std::string>& tokens) {
             return uniex::to_json(with_record(tokens, model.predict(tokens))).dump();
           })
      .def("schema", [](const uniex::Model& model) { return model.schemas().to_json().dump(); })
      .def_property_readonly("threshold",
                             [](const uniex::Model& model) { return model.config().threshold; });
}
