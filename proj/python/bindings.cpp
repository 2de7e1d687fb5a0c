#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "svdkd/checkpoint.hpp"
#include "svdkd/config.hpp"
#include "svdkd/errors.hpp"
#include "svdkd/eval.hpp"
#include "svdkd/io.hpp"
#include "svdkd/losses.hpp"
#include "svdkd/spectral.hpp"
#include "svdkd/synth.hpp"
#include "svdkd/train.hpp"

namespace py = pybind11;
using namespace svdkd;

namespace {

// Configs cross the boundary as JSON text in the CLI config schema.
CliConfig config_from(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.empty() ? "{}" : text);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

EmbeddingSet make_set(Matrix features, const std::vector<std::int64_t>& ids,
                      const std::vector<std::string>& modalities,
                      std::optional<std::vector<std::int64_t>> sample_ids,
                      std::optional<Matrix> raw_inputs, std::string source_tag) {
  const std::size_t n = static_cast<std::size_t>(features.rows());
  if (ids.size() != n || modalities.size() != n || (sample_ids && sample_ids->size() != n)) {
    throw DataError("metadata length differs from the feature row count");
  }
  std::vector<SampleMeta> meta(n);
  for (std::size_t i = 0; i < n; ++i) {
    meta[i] = {ids[i], parse_modality(modalities[i]),
               sample_ids ? (*sample_ids)[i] : static_cast<std::int64_t>(i)};
  }
  return EmbeddingSet(std::move(features), std::move(meta), std::move(raw_inputs),
                      std::move(source_tag));
}

py::tuple loss_tuple(const LossResult& r) {
  if (r.grad_aux) return py::make_tuple(r.value, r.grad_features, *r.grad_aux);
  return py::make_tuple(r.value, r.grad_features);
}

py::dict metrics_dict(const RankingMetrics& m) {
  py::dict d;
  d["rank1"] = m.rank1;
  d["rank5"] = m.rank5;
  d["rank10"] = m.rank10;
  d["map"] = m.map;
  d["minp"] = m.minp;
  d["n_queries"] = m.n_queries;
  return d;
}

py::dict log_dict(const TrainingLog& log) {
  py::list steps;
  for (const auto& s : log.steps) {
    py::dict d;
    d["step"] = s.step;
    d["lr"] = s.lr;
    d["task"] = s.task;
    d["cosine"] = s.cosine;
    d["pcm"] = s.pcm;
    d["fr"] = s.fr;
    d["total"] = s.total;
    d["shared"] = s.shared;
    steps.append(d);
  }
  py::list epochs;
  for (const auto& e : log.epochs) {
    py::dict d;
    d["epoch"] = e.epoch;
    d["mean_map"] = e.mean_map;
    py::dict per_task;
    for (const auto& row : e.metrics) per_task[py::str(row.task.name())] = metrics_dict(row.metrics);
    d["metrics"] = per_task;
    epochs.append(d);
  }
  py::dict out;
  out["steps"] = steps;
  out["epochs"] = epochs;
  return out;
}

}  // namespace

PYBIND11_MODULE(_svdkd, m) {
  m.doc() = "SVD-guided knowledge distillation for cross-modal re-identification";

  py::register_exception<Error>(m, "SvdkdError", PyExc_RuntimeError);

  py::class_<EmbeddingSet>(m, "EmbeddingSet")
      .def(py::init(&make_set), py::arg("features"), py::arg("identity_ids"),
           py::arg("modalities"), py::arg("sample_ids") = std::nullopt,
           py::arg("raw_inputs") = std::nullopt, py::arg("source_tag") = "")
      .def_property_readonly("features", &EmbeddingSet::features)
      .def_property_readonly("raw_inputs", &EmbeddingSet::raw_inputs)
      .def_property_readonly("source_tag", &EmbeddingSet::source_tag)
      .def_property_readonly("identity_ids",
                             [](const EmbeddingSet& s) {
                               std::vector<std::int64_t> v;
                               for (const auto& m : s.meta()) v.push_back(m.identity_id);
                               return v;
                             })
      .def_property_readonly("modalities",
                             [](const EmbeddingSet& s) {
                               std::vector<std::string> v;
                               for (const auto& m : s.meta()) v.emplace_back(to_string(m.modality));
                               return v;
                             })
      .def_property_readonly("sample_ids",
                             [](const EmbeddingSet& s) {
                               std::vector<std::int64_t> v;
                               for (const auto& m : s.meta()) v.push_back(m.sample_id);
                               return v;
                             })
      .def_property_readonly("identity_count", &EmbeddingSet::identity_count)
      .def_property_readonly("dim", &EmbeddingSet::dim)
      .def("__len__", &EmbeddingSet::size)
      .def("__eq__", [](const EmbeddingSet& a, const EmbeddingSet& b) { return a == b; });

  m.def("load_set", [](const std::filesystem::path& p) {
    return load_embedding_set(p, format_for_path(p));
  }, py::arg("path"));
  m.def(
      "save_set",
      [](const EmbeddingSet& s, const std::filesystem::path& p, const std::string& dtype) {
        if (dtype != "f32" && dtype != "f64") throw ArgumentError("dtype must be f32 or f64");
        save_embedding_set(s, p, format_for_path(p), dtype == "f32" ? Dtype::kF32 : Dtype::kF64);
      },
      py::arg("set"), py::arg("path"), py::arg("dtype") = "f64");

  m.def("generate_dataset", [](const std::string& cfg) {
    return generate_dataset(config_from(cfg).synth);
  }, py::arg("config_json") = "");
  m.def(
      "generate_split",
      [](const std::string& cfg, std::size_t heldout) {
        SynthSplit s = generate_split(config_from(cfg).synth, heldout);
        return py::make_tuple(std::move(s.train), std::move(s.heldout));
      },
      py::arg("config_json"), py::arg("heldout_identities"));

  m.def("thin_svd", [](const Matrix& f) {
    SvdFactors s = thin_svd(f);
    return py::make_tuple(s.u, s.singular_values, s.v);
  }, py::arg("features"));
  m.def("spectrum_report", [](const Matrix& f) {
    const SpectrumReport r = spectrum_report(thin_svd(f));
    py::dict d;
    d["weights"] = r.weights;
    d["cumulative"] = r.cumulative;
    d["importance"] = r.importance;
    d["effective_rank_90"] = r.effective_rank_90;
    d["effective_rank_99"] = r.effective_rank_99;
    return d;
  }, py::arg("features"));
  m.def("top_k_basis", [](const Matrix& f, std::size_t k) {
    return top_k_basis(thin_svd(f), k).vk;
  }, py::arg("features"), py::arg("k"));

  m.def("id_loss", [](const Matrix& logits, const std::vector<std::int64_t>& labels) {
    return loss_tuple(id_loss(logits, labels));
  }, py::arg("logits"), py::arg("labels"));
  m.def("triplet_loss", [](const Matrix& f, const std::vector<std::int64_t>& labels, double margin) {
    return loss_tuple(triplet_loss(f, labels, margin));
  }, py::arg("features"), py::arg("labels"), py::arg("margin") = 0.3);
  m.def(
      "sdm_total",
      [](const Matrix& f, const std::vector<std::int64_t>& labels,
         const std::vector<std::string>& modalities, double tau) {
        std::vector<Modality> mods;
        for (const auto& s : modalities) mods.push_back(parse_modality(s));
        TaskLossConfig cfg;
        cfg.tau = tau;
        const SdmTotalResult r = sdm_total(f, labels, mods, cfg);
        return py::make_tuple(r.loss.value, r.loss.grad_features, r.directional_terms);
      },
      py::arg("features"), py::arg("labels"), py::arg("modalities"), py::arg("tau") = 0.02);
  m.def("cosine_loss", [](const Matrix& t, const Matrix& s) {
    return loss_tuple(cosine_loss(t, s));
  }, py::arg("teacher"), py::arg("student"));
  m.def("pcm_loss", [](const Matrix& t, const Matrix& s, const Matrix& vk) {
    return loss_tuple(pcm_loss(t, s, ProjectionBasis{vk}));
  }, py::arg("teacher"), py::arg("student"), py::arg("basis"));
  m.def("fr_loss", [](const Matrix& t, const Matrix& s) {
    return loss_tuple(fr_loss(t, s));
  }, py::arg("teacher"), py::arg("student"));

  m.def(
      "evaluate_retrieval",
      [](const EmbeddingSet& q, const EmbeddingSet& g, const std::string& task,
         const std::string& mode) {
        return metrics_dict(evaluate_retrieval(q, g, EvalTask::parse(task), parse_eval_mode(mode)));
      },
      py::arg("query"), py::arg("gallery"), py::arg("task") = "sketch:rgb",
      py::arg("mode") = "e2c");

  py::class_<StudentModel>(m, "Student")
      .def_property_readonly("parameter_count",
                             [](const StudentModel& s) { return parameter_count(s); })
      .def("embed", &embed_with_student, py::arg("set"))
      .def("save", [](const StudentModel& s, const std::filesystem::path& p) { save_student(s, p); },
           py::arg("path"));
  m.def("load_student", [](const std::filesystem::path& p) { return load_student(p).model; },
        py::arg("path"));

  m.def(
      "train_distill",
      [](const EmbeddingSet& teacher, const std::string& cfg, const EmbeddingSet* heldout) {
        TrainResult r = train_distill(teacher, config_from(cfg).train, heldout);
        return py::make_tuple(std::move(r.model), log_dict(r.log));
      },
      py::arg("teacher"), py::arg("config_json") = "", py::arg("heldout") = nullptr);

  m.def("config_schema", &config_schema_text);
}
