#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ltr/config.hpp"
#include "ltr/errors.hpp"
#include "ltr/losses.hpp"
#include "ltr/metrics.hpp"
#include "ltr/model.hpp"
#include "ltr/pipeline.hpp"
#include "ltr/rng.hpp"
#include "ltr/synthetic.hpp"

namespace py = pybind11;

namespace {

using Doubles = std::vector<double>;

std::vector<uint8_t> ones_mask(size_t n) { return std::vector<uint8_t>(n, 1); }

Doubles resolve_weights(const std::optional<Doubles>& weights, size_t n) {
  if (!weights) return Doubles(n, 1.0);
  if (weights->size() != n) throw ltr::DimensionError("weights length mismatch");
  return *weights;
}

std::pair<double, Doubles> loss_entry(const std::string& key, const Doubles& labels,
                                      const Doubles& scores,
                                      const std::optional<Doubles>& weights, uint64_t seed) {
  if (labels.size() != scores.size()) throw ltr::DimensionError("labels/scores length mismatch");
  auto w = resolve_weights(weights, labels.size());
  auto mask = ones_mask(labels.size());
  ltr::LossOutput out;
  switch (ltr::loss_key_from_string(key)) {
    case ltr::LossKey::kSigmoidCrossEntropy:
      out = ltr::loss_sigmoid_ce(labels, scores, w, mask);
      break;
    case ltr::LossKey::kPairwiseLogistic:
      out = ltr::loss_pairwise_logistic(labels, scores, w, mask);
      break;
    case ltr::LossKey::kSoftmaxCrossEntropy:
      out = ltr::loss_softmax_ce(labels, scores, w, mask);
      break;
    case ltr::LossKey::kListMle:
      out = ltr::loss_listmle(labels, scores, w, mask, ltr::Rng(seed));
      break;
  }
  return {out.value, out.grad_scores};
}

double metric_entry(const std::string& key, const Doubles& labels, const Doubles& scores,
                    const std::optional<Doubles>& weights) {
  if (labels.size() != scores.size()) throw ltr::DimensionError("labels/scores length mismatch");
  auto w = resolve_weights(weights, labels.size());
  auto mask = ones_mask(labels.size());
  auto fn = ltr::make_metric_fn(ltr::metric_key_from_string(key));
  auto out = fn(labels, scores, w, mask);
  if (out.skipped) throw ltr::DomainError("metric '" + key + "' undefined for this list");
  return out.value;
}

ltr::RunConfig run_config_from_dict(const py::dict& config) {
  ltr::RunConfig run;
  std::vector<std::string> problems;
  auto obj = nlohmann::json::parse(static_cast<std::string>(
      py::str(py::module_::import("json").attr("dumps")(config))));
  ltr::apply_run_json(run, obj, problems);
  if (!problems.empty()) {
    std::string joined;
    for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
    throw ltr::ConfigError(joined);
  }
  return run;
}

py::dict report_to_dict(const ltr::EvalReport& report) {
  py::dict out;
  out["list_count"] = report.list_count;
  py::dict metrics;
  for (const auto& [name, mr] : report.metrics) {
    py::dict entry;
    entry["weighted"] = mr.weighted;
    entry["unweighted"] = mr.unweighted;
    entry["lists"] = mr.contributing_lists;
    entry["skipped"] = mr.skipped_lists;
    metrics[name.c_str()] = entry;
  }
  out["metrics"] = metrics;
  return out;
}

}  // namespace

PYBIND11_MODULE(_ltr, m) {
  m.doc() = "learning-to-rank toolkit: losses, metrics, training, prediction";

  py::register_exception<ltr::ConfigError>(m, "ConfigError");
  py::register_exception<ltr::ParseError>(m, "ParseError");
  py::register_exception<ltr::DomainError>(m, "DomainValueError");

  m.def("loss", &loss_entry, py::arg("key"), py::arg("labels"), py::arg("scores"),
        py::arg("weights") = std::nullopt, py::arg("seed") = 0,
        "Per-list loss value and gradient w.r.t. scores.");
  m.def("metric", &metric_entry, py::arg("key"), py::arg("labels"), py::arg("scores"),
        py::arg("weights") = std::nullopt,
        "Per-list ranking metric (mrr, arp, dcg[@k], ndcg[@k]).");
  m.def(
      "rank_from_scores",
      [](const Doubles& scores) {
        return ltr::rank_from_scores(scores, ones_mask(scores.size()));
      },
      py::arg("scores"), "1-based ranks in descending score order, index tie-break.");

  m.def(
      "generate_synthetic",
      [](const py::dict& spec_dict, const std::string& out_dir, const std::string& format) {
        ltr::RunConfig run;
        std::vector<std::string> problems;
        auto obj = nlohmann::json::parse(static_cast<std::string>(
            py::str(py::module_::import("json").attr("dumps")(spec_dict))));
        ltr::apply_synth_json(run.synth, obj, problems);
        if (!problems.empty()) throw ltr::ConfigError(problems.front());
        auto data = ltr::gen_synthetic(run.synth);
        ltr::write_synthetic(data, out_dir, format);
        return py::make_tuple(data.train.size(), data.eval.size());
      },
      py::arg("spec"), py::arg("out_dir"), py::arg("format") = "jsonl",
      "Generate a synthetic ranking dataset; returns (train_queries, eval_queries).");

  py::class_<ltr::Model>(m, "Model")
      .def_static(
          "train",
          [](const py::dict& config, const std::string& train_path) {
            auto run = run_config_from_dict(config);
            run.train_path = train_path;
            auto result = ltr::train_pipeline(std::move(run));
            return std::move(result.model);
          },
          py::arg("config"), py::arg("train_path"),
          "Train a model from a config dict and a LIBSVM/JSONL file.")
      .def_static("load", &ltr::Model::load_checkpoint, py::arg("path"))
      .def("save", &ltr::Model::save_checkpoint, py::arg("path"))
      .def("global_step", &ltr::Model::global_step)
      .def(
          "evaluate",
          [](const ltr::Model& model, const std::string& eval_path) {
            return report_to_dict(ltr::eval_pipeline(model, eval_path));
          },
          py::arg("eval_path"), "Weighted and unweighted metrics over an eval file.")
      .def(
          "predict",
          [](const ltr::Model& model, const std::string& data_path) {
            std::vector<std::tuple<std::string, size_t, double>> rows;
            for (const auto& row : ltr::predict_pipeline(model, data_path)) {
              rows.emplace_back(row.query_id, row.item_index, row.score);
            }
            return rows;
          },
          py::arg("data_path"), "Scores as (qid, item_index, score) rows in input order.");

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
