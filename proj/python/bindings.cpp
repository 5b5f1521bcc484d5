#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "contrabias/bias_scoring.hpp"
#include "contrabias/corpus.hpp"
#include "contrabias/embedder.hpp"
#include "contrabias/error.hpp"
#include "contrabias/llm_gateway.hpp"
#include "contrabias/losses.hpp"
#include "contrabias/reports.hpp"
#include "contrabias/repr_metrics.hpp"
#include "contrabias/stereo_classifier.hpp"

namespace py = pybind11;
using namespace contrabias;

namespace {

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

EncoderHandle encoder(const std::string& backend, int dimension, std::uint64_t seed,
                      const std::string& pooling) {
  EncoderSpec spec;
  spec.backend_id = backend;
  spec.dimension = dimension;
  spec.seed = seed;
  spec.pooling = parse_pooling(pooling);
  return make_encoder(spec);
}

Label label_of(const std::string& text) {
  auto l = parse_label(text);
  if (!l) throw Error(ErrorCode::kUnknownLabel, "unknown label '" + text + "'");
  return *l;
}

Category category_of(const std::string& text) {
  auto c = parse_category(text);
  if (!c) throw Error(ErrorCode::kUnknownCategory, "unknown category '" + text + "'");
  return *c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Contrastive bias representation and LLM bias scoring";

  // The module holds the reference; a static py::object would be destroyed
  // after the interpreter.
  static PyObject* error = py::exception<Error>(m, "ContrabiasError").ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      // The code name travels as an attribute so callers can branch on it.
      PyObject* instance = PyObject_CallOneArg(error, py::str(e.what()).ptr());
      if (!instance) return;
      PyObject_SetAttrString(instance, "code", py::str(std::string(error_code_name(e.code()))).ptr());
      PyErr_SetObject(error, instance);
      Py_DECREF(instance);
    }
  });

  m.def("bias_score", &bias_score, py::arg("p"));
  m.def("kl_bias_score", &kl_bias_score, py::arg("p"));
  m.def("stereotype_probability", &stereotype_probability, py::arg("n_stereotype"), py::arg("total"));
  m.def(
      "macro_f1",
      [](std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
        return macro_f1(Confusion{tp, fp, fn, tn});
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"));

  m.def(
      "corpus_stats",
      [](const std::string& path) {
        const CorpusStats stats = corpus_stats(load_indicasa(path));
        auto counts = [](const CategoryCounts& c) {
          py::dict d;
          d["contexts"] = c.contexts;
          d["stereotypes"] = c.stereotypes;
          d["anti_stereotypes"] = c.anti_stereotypes;
          d["total"] = c.total();
          return d;
        };
        py::dict out, per;
        for (const auto& [category, c] : stats.per_category) per[py::str(std::string(to_string(category)))] = counts(c);
        out["per_category"] = per;
        out["overall"] = counts(stats.overall);
        return out;
      },
      py::arg("path"), "Per-category context and sentence counts of a JSONL or CSV corpus.");

  m.def(
      "embed",
      [](const std::vector<std::string>& texts, const std::string& backend, int dimension, std::uint64_t seed,
         const std::string& pooling) { return embed_matrix(encoder(backend, dimension, seed, pooling), texts); },
      py::arg("texts"), py::arg("backend") = "hashed-token", py::arg("dimension") = kDefaultDimension,
      py::arg("seed") = 0, py::arg("pooling") = "mean");

  m.def(
      "delta_sim",
      [](const std::string& path, const std::string& backend, int dimension, std::uint64_t seed) {
        return to_python(to_json(delta_sim(load_indicasa(path), encoder(backend, dimension, seed, "mean"))));
      },
      py::arg("path"), py::arg("backend") = "hashed-token", py::arg("dimension") = kDefaultDimension,
      py::arg("seed") = 0);

  m.def(
      "compute_loss",
      [](const Eigen::MatrixXd& embeddings, const std::vector<std::string>& labels,
         const std::vector<std::string>& context_ids, const std::string& kind, double temperature, double margin) {
        PairBatch batch;
        batch.embeddings = embeddings;
        for (const auto& l : labels) batch.labels.push_back(label_of(l));
        batch.context_ids = context_ids;
        LossConfig cfg;
        cfg.kind = parse_loss_kind(kind);
        cfg.temperature = temperature;
        cfg.margin = margin;
        const LossOutput out = compute_loss(batch, cfg, true);
        return py::make_tuple(out.value, out.gradient);
      },
      py::arg("embeddings"), py::arg("labels"), py::arg("context_ids"), py::arg("kind") = "ntb_xent",
      py::arg("temperature") = 0.1, py::arg("margin") = 0.5, "Returns (loss, dLoss/dEmbeddings).");

  m.def(
      "render_prompt",
      [](const std::string& masked_sentence, const std::string& bias_type) {
        EvalItem item;
        item.masked_sentence = masked_sentence;
        item.bias_type_hint = bias_type;
        return render_prompt(item);
      },
      py::arg("masked_sentence"), py::arg("bias_type"));

  m.def(
      "parse_completion",
      [](const std::string& raw) -> py::object {
        const ParseOutcome r = parse_completion(raw);
        if (r.ok()) return py::str(*r.predicted_sentence);
        return py::none();
      },
      py::arg("raw"), "The predicted sentence, or None when the reply is unusable.");

  m.def(
      "classify",
      [](const std::string& completion, const std::string& stereotype, const std::string& anti_stereotype,
         const std::string& category) {
        EvalItem item;
        item.category = category_of(category);
        item.stereotype_sentence = stereotype;
        item.anti_stereotype_sentence = anti_stereotype;
        return std::string(to_string(classify(completion, item, encoder("hashed-token", kDefaultDimension, 0, "mean"))));
      },
      py::arg("completion"), py::arg("stereotype"), py::arg("anti_stereotype"), py::arg("category") = "caste");

  m.def(
      "tsne",
      [](const Eigen::MatrixXd& points, double perplexity, int iterations, std::uint64_t seed) {
        TsneConfig cfg;
        cfg.perplexity = perplexity;
        cfg.iterations = iterations;
        cfg.seed = seed;
        return tsne(points, cfg);
      },
      py::arg("points"), py::arg("perplexity") = 30.0, py::arg("iterations") = 1000, py::arg("seed") = 0);
}
