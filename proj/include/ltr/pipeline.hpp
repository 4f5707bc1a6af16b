#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ltr/config.hpp"
#include "ltr/model.hpp"

namespace ltr {

/// Vocabularies for every categorical spec: loaded from declared files when
/// given, otherwise built from the training data under the config thresholds.
std::map<std::string, Vocabulary> resolve_vocabs(const RunConfig& run,
                                                 const std::vector<ExampleList>& train_lists);

struct TrainPipelineResult {
  Model model;
  std::vector<std::pair<uint64_t, double>> loss_trace;
  double steps_per_sec = 0.0;
  uint64_t dropped_updates = 0;
  RunConfig resolved;  // with inferred feature specs filled in
};

/// Full training flow shared by the CLI and the python module: read the
/// training file, infer feature specs when none are declared, resolve
/// vocabularies, pad, and train (asynchronously when workers > 1).
TrainPipelineResult train_pipeline(RunConfig run);

/// Reads, pads and evaluates an evaluation file against a trained model.
EvalReport eval_pipeline(const Model& model, const std::string& eval_path);

/// Reads a prediction input file and scores it in input order.
std::vector<PredictRow> predict_pipeline(const Model& model, const std::string& data_path);

}  // namespace ltr
