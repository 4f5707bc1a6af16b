#include "ltr/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ltr/errors.hpp"

namespace ltr {

using nlohmann::json;

namespace {

// Typed field extraction with problem collection instead of exceptions.
template <typename T>
void read_field(const json& obj, const char* key, T& out, std::vector<std::string>& problems);

template <>
void read_field(const json& obj, const char* key, size_t& out,
                std::vector<std::string>& problems) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number_unsigned() && !obj[key].is_number_integer()) {
    problems.push_back(std::string(key) + ": expected a non-negative integer");
    return;
  }
  auto v = obj[key].get<int64_t>();
  if (v < 0) {
    problems.push_back(std::string(key) + ": expected a non-negative integer");
    return;
  }
  out = static_cast<size_t>(v);
}

template <>
void read_field(const json& obj, const char* key, double& out,
                std::vector<std::string>& problems) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_number()) {
    problems.push_back(std::string(key) + ": expected a number");
    return;
  }
  out = obj[key].get<double>();
}

template <>
void read_field(const json& obj, const char* key, bool& out,
                std::vector<std::string>& problems) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_boolean()) {
    problems.push_back(std::string(key) + ": expected a boolean");
    return;
  }
  out = obj[key].get<bool>();
}

template <>
void read_field(const json& obj, const char* key, std::string& out,
                std::vector<std::string>& problems) {
  if (!obj.contains(key)) return;
  if (!obj[key].is_string()) {
    problems.push_back(std::string(key) + ": expected a string");
    return;
  }
  out = obj[key].get<std::string>();
}

}  // namespace

json feature_spec_to_json(const FeatureSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["scope"] = spec.scope == FeatureScope::kContext ? "context" : "per_item";
  if (spec.categorical) {
    j["kind"] = "categorical";
    j["vocabulary"] = spec.vocabulary_id;
    j["embedding_dim"] = spec.embedding_dim;
  } else {
    j["kind"] = "dense";
    j["width"] = spec.width;
  }
  return j;
}

FeatureSpec feature_spec_from_json(const json& obj, std::vector<std::string>& problems) {
  FeatureSpec spec;
  if (!obj.is_object()) {
    problems.push_back("features: entries must be objects");
    return spec;
  }
  read_field(obj, "name", spec.name, problems);
  std::string scope = "per_item";
  read_field(obj, "scope", scope, problems);
  if (scope == "context") {
    spec.scope = FeatureScope::kContext;
  } else if (scope == "per_item") {
    spec.scope = FeatureScope::kPerItem;
  } else {
    problems.push_back("feature '" + spec.name + "': scope must be context|per_item");
  }
  std::string kind = "dense";
  read_field(obj, "kind", kind, problems);
  if (kind == "categorical") {
    spec.categorical = true;
    spec.vocabulary_id = spec.name;
    read_field(obj, "vocabulary", spec.vocabulary_id, problems);
    spec.embedding_dim = 20;
    read_field(obj, "embedding_dim", spec.embedding_dim, problems);
  } else if (kind == "dense") {
    read_field(obj, "width", spec.width, problems);
  } else {
    problems.push_back("feature '" + spec.name + "': kind must be dense|categorical");
  }
  return spec;
}

json ranking_config_to_json(const RankingConfig& config) {
  json j;
  j["list_size"] = config.list_size;
  j["group_size"] = config.group_size;
  j["hidden_dims"] = config.hidden_dims;
  j["dropout_rate"] = config.dropout_rate;
  j["learning_rate"] = config.learning_rate;
  j["adagrad_epsilon"] = config.adagrad_epsilon;
  j["adagrad_initial_accumulator"] = config.adagrad_initial_accumulator;
  j["batch_size"] = config.batch_size;
  j["num_steps"] = config.num_steps;
  j["loss"] = to_string(config.loss);
  json metrics = json::array();
  for (const auto& key : config.metric_keys) metrics.push_back(to_string(key));
  j["metrics"] = std::move(metrics);
  j["seed"] = config.seed;
  j["workers"] = config.worker_count;
  j["truncate_policy"] = config.truncate_policy == TruncatePolicy::kSample ? "sample" : "first";
  j["group_shuffle"] = config.group_shuffle;
  j["shuffle_each_epoch"] = config.shuffle_each_epoch;
  j["loss_trace_interval"] = config.loss_trace_interval;
  j["default_embedding_dim"] = config.default_embedding_dim;
  j["vocab_min_frequency"] = config.vocab_min_frequency;
  j["vocab_oov_buckets"] = config.vocab_oov_buckets;
  json features = json::array();
  for (const auto& spec : config.feature_specs) features.push_back(feature_spec_to_json(spec));
  j["features"] = std::move(features);
  return j;
}

void apply_ranking_json(RankingConfig& config, const json& obj,
                        std::vector<std::string>& problems) {
  read_field(obj, "list_size", config.list_size, problems);
  read_field(obj, "group_size", config.group_size, problems);
  if (obj.contains("hidden_dims")) {
    if (!obj["hidden_dims"].is_array()) {
      problems.push_back("hidden_dims: expected an array of integers");
    } else {
      config.hidden_dims.clear();
      for (const auto& e : obj["hidden_dims"]) {
        if (!e.is_number_integer() && !e.is_number_unsigned()) {
          problems.push_back("hidden_dims: expected an array of integers");
          break;
        }
        config.hidden_dims.push_back(e.get<size_t>());
      }
    }
  }
  read_field(obj, "dropout_rate", config.dropout_rate, problems);
  read_field(obj, "learning_rate", config.learning_rate, problems);
  read_field(obj, "adagrad_epsilon", config.adagrad_epsilon, problems);
  read_field(obj, "adagrad_initial_accumulator", config.adagrad_initial_accumulator, problems);
  read_field(obj, "batch_size", config.batch_size, problems);
  read_field(obj, "num_steps", config.num_steps, problems);
  if (obj.contains("loss")) {
    try {
      config.loss = loss_key_from_string(obj["loss"].get<std::string>());
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
  }
  if (obj.contains("metrics")) {
    if (!obj["metrics"].is_array()) {
      problems.push_back("metrics: expected an array of strings");
    } else {
      config.metric_keys.clear();
      for (const auto& e : obj["metrics"]) {
        try {
          config.metric_keys.push_back(metric_key_from_string(e.get<std::string>()));
        } catch (const std::exception& ex) {
          problems.push_back(ex.what());
        }
      }
    }
  }
  read_field(obj, "seed", config.seed, problems);
  read_field(obj, "workers", config.worker_count, problems);
  if (obj.contains("truncate_policy")) {
    try {
      config.truncate_policy =
          truncate_policy_from_string(obj["truncate_policy"].get<std::string>());
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
  }
  read_field(obj, "group_shuffle", config.group_shuffle, problems);
  read_field(obj, "shuffle_each_epoch", config.shuffle_each_epoch, problems);
  read_field(obj, "loss_trace_interval", config.loss_trace_interval, problems);
  read_field(obj, "default_embedding_dim", config.default_embedding_dim, problems);
  read_field(obj, "vocab_min_frequency", config.vocab_min_frequency, problems);
  read_field(obj, "vocab_oov_buckets", config.vocab_oov_buckets, problems);
  if (obj.contains("features")) {
    if (!obj["features"].is_array()) {
      problems.push_back("features: expected an array");
    } else {
      config.feature_specs.clear();
      for (const auto& e : obj["features"]) {
        config.feature_specs.push_back(feature_spec_from_json(e, problems));
      }
    }
  }
}

RankingConfig ranking_config_from_json_text(const std::string& text) {
  json obj = json::parse(text, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw ParseError("ranking config: invalid JSON object");
  }
  RankingConfig config;
  std::vector<std::string> problems;
  apply_ranking_json(config, obj, problems);
  if (!problems.empty()) {
    std::string joined;
    for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
    throw ConfigError("ranking config: " + joined);
  }
  return config;
}

json synthetic_spec_to_json(const SyntheticSpec& spec) {
  json j;
  j["queries"] = spec.query_count;
  j["items_min"] = spec.items_min;
  j["items_max"] = spec.items_max;
  j["dim"] = spec.dense_dim;
  j["weight_scheme"] = spec.weight_scheme;
  j["scheme"] = to_string(spec.scheme);
  j["levels"] = spec.levels;
  j["eta"] = spec.position_bias_eta;
  j["click_noise"] = spec.click_noise;
  j["token_vocab"] = spec.token_vocab;
  j["eval_fraction"] = spec.eval_fraction;
  j["seed"] = spec.seed;
  return j;
}

void apply_synth_json(SyntheticSpec& spec, const json& obj,
                      std::vector<std::string>& problems) {
  read_field(obj, "queries", spec.query_count, problems);
  read_field(obj, "items_min", spec.items_min, problems);
  read_field(obj, "items_max", spec.items_max, problems);
  if (obj.contains("items")) {  // shorthand for a fixed item count
    read_field(obj, "items", spec.items_min, problems);
    spec.items_max = spec.items_min;
  }
  read_field(obj, "dim", spec.dense_dim, problems);
  read_field(obj, "weight_scheme", spec.weight_scheme, problems);
  if (obj.contains("scheme")) {
    try {
      spec.scheme = label_scheme_from_string(obj["scheme"].get<std::string>());
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
  }
  read_field(obj, "levels", spec.levels, problems);
  read_field(obj, "eta", spec.position_bias_eta, problems);
  read_field(obj, "click_noise", spec.click_noise, problems);
  read_field(obj, "token_vocab", spec.token_vocab, problems);
  read_field(obj, "eval_fraction", spec.eval_fraction, problems);
  read_field(obj, "seed", spec.seed, problems);
}

void RunConfig::validate(std::vector<std::string>& problems) const {
  ranking.validate(problems);
  auto require_file = [&](const std::string& path, const char* what) {
    if (path.empty()) {
      problems.push_back(std::string(what) + " is required for command '" + command + "'");
    } else if (!std::filesystem::exists(path)) {
      problems.push_back(std::string(what) + " '" + path + "' does not exist");
    }
  };
  if (command == "train") {
    require_file(train_path, "train_path");
  } else if (command == "eval") {
    require_file(eval_path, "eval_path");
    require_file(checkpoint, "checkpoint");
  } else if (command == "predict") {
    require_file(data_path, "data_path");
    require_file(checkpoint, "checkpoint");
  } else if (command == "synth") {
    synth.validate(problems);
    if (synth_format != "jsonl" && synth_format != "libsvm") {
      problems.push_back("synth_format must be jsonl|libsvm");
    }
  } else {
    problems.push_back("unknown command '" + command + "'");
  }
  if (report_format != "text" && report_format != "json" && report_format != "both") {
    problems.push_back("report_format must be text|json|both");
  }
  if (out_dir.empty()) problems.push_back("out_dir must be non-empty");
}

json run_config_to_json(const RunConfig& run) {
  json j = ranking_config_to_json(run.ranking);
  j["command"] = run.command;
  if (!run.train_path.empty()) j["train_path"] = run.train_path;
  if (!run.eval_path.empty()) j["eval_path"] = run.eval_path;
  if (!run.data_path.empty()) j["data_path"] = run.data_path;
  if (!run.checkpoint.empty()) j["checkpoint"] = run.checkpoint;
  j["out_dir"] = run.out_dir;
  j["report_format"] = run.report_format;
  if (run.command == "synth") {
    j["synth"] = synthetic_spec_to_json(run.synth);
    j["synth_format"] = run.synth_format;
  }
  if (!run.vocab_sources.empty()) {
    json sources = json::array();
    for (const auto& v : run.vocab_sources) {
      json s;
      s["id"] = v.id;
      if (!v.file.empty()) s["file"] = v.file;
      s["oov_buckets"] = v.oov_buckets;
      s["min_frequency"] = v.min_frequency;
      sources.push_back(std::move(s));
    }
    j["vocabularies"] = std::move(sources);
  }
  return j;
}

void apply_run_json(RunConfig& run, const json& obj, std::vector<std::string>& problems) {
  static const std::set<std::string> known = {
      "command",       "train_path",   "eval_path",
      "data_path",     "checkpoint",   "out_dir",
      "report_format", "synth",        "synth_format",
      "vocabularies",  "list_size",    "group_size",
      "hidden_dims",   "dropout_rate", "learning_rate",
      "adagrad_epsilon", "adagrad_initial_accumulator", "batch_size",
      "num_steps",     "loss",         "metrics",
      "seed",          "workers",      "truncate_policy",
      "group_shuffle", "shuffle_each_epoch", "loss_trace_interval",
      "default_embedding_dim", "vocab_min_frequency", "vocab_oov_buckets",
      "features"};
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) problems.push_back("unknown config key '" + key + "'");
  }
  read_field(obj, "command", run.command, problems);
  read_field(obj, "train_path", run.train_path, problems);
  read_field(obj, "eval_path", run.eval_path, problems);
  read_field(obj, "data_path", run.data_path, problems);
  read_field(obj, "checkpoint", run.checkpoint, problems);
  read_field(obj, "out_dir", run.out_dir, problems);
  read_field(obj, "report_format", run.report_format, problems);
  read_field(obj, "synth_format", run.synth_format, problems);
  if (obj.contains("metrics")) run.metrics_explicit = true;
  apply_ranking_json(run.ranking, obj, problems);
  if (obj.contains("synth")) {
    if (!obj["synth"].is_object()) {
      problems.push_back("synth: expected an object");
    } else {
      apply_synth_json(run.synth, obj["synth"], problems);
    }
  }
  if (obj.contains("vocabularies")) {
    if (!obj["vocabularies"].is_array()) {
      problems.push_back("vocabularies: expected an array");
    } else {
      run.vocab_sources.clear();
      for (const auto& e : obj["vocabularies"]) {
        VocabSource src;
        if (!e.is_object()) {
          problems.push_back("vocabularies: entries must be objects");
          continue;
        }
        read_field(e, "id", src.id, problems);
        read_field(e, "file", src.file, problems);
        read_field(e, "oov_buckets", src.oov_buckets, problems);
        read_field(e, "min_frequency", src.min_frequency, problems);
        if (src.id.empty()) problems.push_back("vocabularies: entry without id");
        run.vocab_sources.push_back(std::move(src));
      }
    }
  }
}

void apply_config_file(RunConfig& run, const std::string& path,
                       std::vector<std::string>& problems) {
  std::ifstream in(path);
  if (!in) {
    problems.push_back("cannot open config file '" + path + "'");
    return;
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  json obj = json::parse(buffer.str(), nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    problems.push_back("config file '" + path + "' is not a JSON object");
    return;
  }
  apply_run_json(run, obj, problems);
}

}  // namespace ltr
