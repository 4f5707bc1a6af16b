#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltr/config.hpp"
#include "ltr/errors.hpp"
#include "ltr/model.hpp"
#include "ltr/pipeline.hpp"
#include "ltr/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

struct FlagOverrides {
  std::optional<std::string> config_path;
  std::optional<std::string> train_path;
  std::optional<std::string> eval_path;
  std::optional<std::string> data_path;
  std::optional<std::string> checkpoint;
  std::optional<std::string> out_dir;
  std::optional<size_t> list_size;
  std::optional<size_t> group_size;
  std::optional<std::string> loss;
  std::optional<std::string> metrics;  // comma-separated
  std::optional<double> learning_rate;
  std::optional<double> dropout_rate;
  std::optional<size_t> batch_size;
  std::optional<size_t> num_steps;
  std::optional<size_t> workers;
  std::optional<uint64_t> seed;
  std::optional<std::string> truncate_policy;
  // synth
  std::optional<size_t> queries;
  std::optional<size_t> items;
  std::optional<size_t> dim;
  std::optional<std::string> scheme;
  std::optional<size_t> levels;
  std::optional<double> eta;
  std::optional<size_t> token_vocab;
  std::optional<std::string> format;
};

void add_common_flags(CLI::App* cmd, FlagOverrides& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--train_path", flags.train_path, "training data (LIBSVM or JSONL)");
  cmd->add_option("--eval_path", flags.eval_path, "evaluation data");
  cmd->add_option("--checkpoint", flags.checkpoint, "checkpoint file to load");
  cmd->add_option("--list_size", flags.list_size, "fixed list size");
  cmd->add_option("--group_size", flags.group_size, "groupwise scoring group size");
  cmd->add_option("--loss", flags.loss, "loss key");
  cmd->add_option("--metrics", flags.metrics, "comma-separated metric keys");
  cmd->add_option("--learning_rate", flags.learning_rate, "Adagrad learning rate");
  cmd->add_option("--dropout_rate", flags.dropout_rate, "dropout rate");
  cmd->add_option("--batch_size", flags.batch_size, "lists per batch");
  cmd->add_option("--num_steps", flags.num_steps, "optimizer steps");
  cmd->add_option("--workers", flags.workers, "async worker count");
  cmd->add_option("--seed", flags.seed, "run seed");
  cmd->add_option("--truncate_policy", flags.truncate_policy, "sample|first");
  cmd->add_option("--out", flags.out_dir, "output directory");
}

std::vector<ltr::MetricKey> parse_metric_list(const std::string& csv) {
  std::vector<ltr::MetricKey> keys;
  std::string current;
  std::istringstream iss(csv);
  while (std::getline(iss, current, ',')) {
    if (!current.empty()) keys.push_back(ltr::metric_key_from_string(current));
  }
  if (keys.empty()) throw ltr::ConfigError("metrics list is empty");
  return keys;
}

// flag > config file > built-in default
ltr::RunConfig resolve(const std::string& command, const FlagOverrides& flags) {
  ltr::RunConfig run;
  run.command = command;
  std::vector<std::string> problems;
  if (flags.config_path) ltr::apply_config_file(run, *flags.config_path, problems);
  run.command = command;  // subcommand wins over config

  if (flags.train_path) run.train_path = *flags.train_path;
  if (flags.eval_path) run.eval_path = *flags.eval_path;
  if (flags.data_path) run.data_path = *flags.data_path;
  if (flags.checkpoint) run.checkpoint = *flags.checkpoint;
  if (flags.out_dir) run.out_dir = *flags.out_dir;
  if (flags.list_size) run.ranking.list_size = *flags.list_size;
  if (flags.group_size) run.ranking.group_size = *flags.group_size;
  if (flags.learning_rate) run.ranking.learning_rate = *flags.learning_rate;
  if (flags.dropout_rate) run.ranking.dropout_rate = *flags.dropout_rate;
  if (flags.batch_size) run.ranking.batch_size = *flags.batch_size;
  if (flags.num_steps) run.ranking.num_steps = *flags.num_steps;
  if (flags.workers) run.ranking.worker_count = *flags.workers;
  if (flags.seed) run.ranking.seed = *flags.seed;
  try {
    if (flags.loss) run.ranking.loss = ltr::loss_key_from_string(*flags.loss);
    if (flags.metrics) {
      run.ranking.metric_keys = parse_metric_list(*flags.metrics);
      run.metrics_explicit = true;
    }
    if (flags.truncate_policy) {
      run.ranking.truncate_policy = ltr::truncate_policy_from_string(*flags.truncate_policy);
    }
    if (flags.scheme) run.synth.scheme = ltr::label_scheme_from_string(*flags.scheme);
  } catch (const ltr::Error& e) {
    problems.push_back(e.what());
  }
  if (flags.queries) run.synth.query_count = *flags.queries;
  if (flags.items) {
    run.synth.items_min = *flags.items;
    run.synth.items_max = *flags.items;
  }
  if (flags.dim) run.synth.dense_dim = *flags.dim;
  if (flags.levels) run.synth.levels = *flags.levels;
  if (flags.eta) run.synth.position_bias_eta = *flags.eta;
  if (flags.token_vocab) run.synth.token_vocab = *flags.token_vocab;
  if (flags.format) run.synth_format = *flags.format;
  if (flags.seed) run.synth.seed = *flags.seed;

  if (!problems.empty()) {
    std::string joined;
    for (const auto& p : problems) joined += "\n  - " + p;
    throw ltr::ConfigError("invalid configuration:" + joined);
  }
  return run;
}

void validate_or_throw(const ltr::RunConfig& run) {
  std::vector<std::string> problems;
  run.validate(problems);
  if (!problems.empty()) {
    std::string joined;
    for (const auto& p : problems) joined += "\n  - " + p;
    throw ltr::ConfigError("invalid configuration:" + joined);
  }
}

void write_manifest(const ltr::RunConfig& run) {
  fs::create_directories(run.out_dir);
  std::ofstream out(run.out_dir + "/manifest.json");
  if (!out) throw ltr::IoError("cannot write manifest in '" + run.out_dir + "'");
  out << ltr::run_config_to_json(run).dump(2) << "\n";
}

void write_report(const ltr::EvalReport& report, const ltr::RunConfig& run,
                  const std::string& stem) {
  if (run.report_format == "text" || run.report_format == "both") {
    std::ofstream out(run.out_dir + "/" + stem + ".txt");
    out << report.to_table();
  }
  if (run.report_format == "json" || run.report_format == "both") {
    std::ofstream out(run.out_dir + "/" + stem + ".json");
    out << report.to_json() << "\n";
  }
}

int cmd_train(ltr::RunConfig run) {
  validate_or_throw(run);
  if (run.ranking.worker_count > 1) {
    std::cout << "training with " << run.ranking.worker_count << " async workers ("
              << run.ranking.num_steps << " steps, parallel trainer)\n";
  } else {
    std::cout << "training (" << run.ranking.num_steps << " steps)\n";
  }
  auto result = ltr::train_pipeline(run);
  write_manifest(result.resolved);
  if (run.ranking.worker_count > 1) {
    std::cout << "steps/sec: " << result.steps_per_sec
              << ", dropped updates: " << result.dropped_updates << "\n";
  }

  const std::string ckpt = run.out_dir + "/model.ckpt";
  result.model.save_checkpoint(ckpt);
  {
    std::ofstream out(run.out_dir + "/loss_trace.tsv");
    out << std::setprecision(17);
    for (const auto& [step, loss] : result.loss_trace) out << step << "\t" << loss << "\n";
  }
  std::cout << "checkpoint written to " << ckpt << "\n";

  if (!run.eval_path.empty()) {
    auto report = ltr::eval_pipeline(result.model, run.eval_path);
    write_report(report, run, "eval");
    std::cout << report.to_table();
  }
  return 0;
}

int cmd_eval(const ltr::RunConfig& run) {
  auto model = ltr::Model::load_checkpoint(run.checkpoint);
  if (run.metrics_explicit) model.set_metric_keys(run.ranking.metric_keys);
  auto report = ltr::eval_pipeline(model, run.eval_path);
  write_manifest(run);
  write_report(report, run, "eval");
  std::cout << report.to_table();
  return 0;
}

int cmd_predict(const ltr::RunConfig& run) {
  auto model = ltr::Model::load_checkpoint(run.checkpoint);
  auto rows = ltr::predict_pipeline(model, run.data_path);
  write_manifest(run);
  const std::string path = run.out_dir + "/predictions.tsv";
  std::ofstream out(path);
  if (!out) throw ltr::IoError("cannot write '" + path + "'");
  out << std::setprecision(17);
  for (const auto& row : rows) {
    out << row.query_id << "\t" << row.item_index << "\t" << row.score << "\n";
  }
  std::cout << "predictions written to " << path << " (" << rows.size() << " rows)\n";
  return 0;
}

int cmd_synth(const ltr::RunConfig& run) {
  write_manifest(run);
  auto data = ltr::gen_synthetic(run.synth);
  ltr::write_synthetic(data, run.out_dir, run.synth_format);
  std::cout << "wrote " << data.train.size() << " train and " << data.eval.size()
            << " eval queries to " << run.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learning-to-rank toolkit: score-and-sort training, evaluation, prediction"};
  app.require_subcommand(1);

  FlagOverrides flags;
  auto* train = app.add_subcommand("train", "train a ranking model");
  add_common_flags(train, flags);
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common_flags(eval, flags);
  auto* predict = app.add_subcommand("predict", "score items with a checkpoint");
  add_common_flags(predict, flags);
  predict->add_option("--data_path", flags.data_path, "items to score");
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common_flags(synth, flags);
  synth->add_option("--queries", flags.queries, "query count");
  synth->add_option("--items", flags.items, "items per query");
  synth->add_option("--dim", flags.dim, "dense feature dimension");
  synth->add_option("--scheme", flags.scheme, "graded|clicks");
  synth->add_option("--levels", flags.levels, "graded label levels");
  synth->add_option("--eta", flags.eta, "position bias strength");
  synth->add_option("--token_vocab", flags.token_vocab, "categorical vocabulary size");
  synth->add_option("--format", flags.format, "jsonl|libsvm");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      return cmd_train(resolve("train", flags));
    }
    if (eval->parsed()) {
      auto run = resolve("eval", flags);
      validate_or_throw(run);
      return cmd_eval(run);
    }
    if (predict->parsed()) {
      auto run = resolve("predict", flags);
      validate_or_throw(run);
      return cmd_predict(run);
    }
    auto run = resolve("synth", flags);
    validate_or_throw(run);
    return cmd_synth(run);
  } catch (const ltr::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ltr::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
