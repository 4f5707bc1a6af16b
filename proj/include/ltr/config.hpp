#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ltr/model.hpp"
#include "ltr/synthetic.hpp"

namespace ltr {

/// Vocabulary declared in the config: loaded from a file when `file` is set,
/// otherwise built from the training data of the features that use it.
struct VocabSource {
  std::string id;
  std::string file;
  size_t oov_buckets = 1;
  size_t min_frequency = 1;
};

/// One CLI invocation, fully resolved. Configs and run manifests share this
/// schema, so a manifest can be replayed as a config file.
struct RunConfig {
  std::string command;
  std::string train_path;
  std::string eval_path;
  std::string data_path;   // predict input
  std::string checkpoint;  // model file read by eval/predict
  std::string out_dir = "ltr_out";
  std::string report_format = "both";  // text|json|both
  std::string synth_format = "jsonl";
  RankingConfig ranking;
  SyntheticSpec synth;
  std::vector<VocabSource> vocab_sources;
  bool metrics_explicit = false;  // metrics came from config/flags, not defaults

  /// Command-specific validation; every problem is reported, not just the
  /// first.
  void validate(std::vector<std::string>& problems) const;
};

nlohmann::json feature_spec_to_json(const FeatureSpec& spec);
FeatureSpec feature_spec_from_json(const nlohmann::json& obj,
                                   std::vector<std::string>& problems);

nlohmann::json ranking_config_to_json(const RankingConfig& config);

/// Merges the object's fields into `config`. Unknown keys and bad values are
/// collected into `problems`.
void apply_ranking_json(RankingConfig& config, const nlohmann::json& obj,
                        std::vector<std::string>& problems);

RankingConfig ranking_config_from_json_text(const std::string& text);

nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec);
void apply_synth_json(SyntheticSpec& spec, const nlohmann::json& obj,
                      std::vector<std::string>& problems);

nlohmann::json run_config_to_json(const RunConfig& run);
void apply_run_json(RunConfig& run, const nlohmann::json& obj,
                    std::vector<std::string>& problems);

/// Loads a JSON config file into `run`, collecting problems.
void apply_config_file(RunConfig& run, const std::string& path,
                       std::vector<std::string>& problems);

}  // namespace ltr
