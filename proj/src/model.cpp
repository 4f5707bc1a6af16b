#include "ltr/model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ltr/errors.hpp"

namespace ltr {

void RankingConfig::validate(std::vector<std::string>& problems) const {
  if (list_size < 1) problems.push_back("list_size must be >= 1");
  if (group_size < 1) problems.push_back("group_size must be >= 1");
  if (group_size > list_size) problems.push_back("group_size must be <= list_size");
  if (hidden_dims.empty()) problems.push_back("hidden_dims must be non-empty");
  for (size_t h : hidden_dims) {
    if (h < 1) {
      problems.push_back("hidden_dims entries must be >= 1");
      break;
    }
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    problems.push_back("dropout_rate must be in [0, 1)");
  }
  if (learning_rate <= 0.0) problems.push_back("learning_rate must be > 0");
  if (adagrad_epsilon <= 0.0) problems.push_back("adagrad_epsilon must be > 0");
  if (adagrad_initial_accumulator < 0.0) {
    problems.push_back("adagrad_initial_accumulator must be >= 0");
  }
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (num_steps < 1) problems.push_back("num_steps must be >= 1");
  if (metric_keys.empty()) problems.push_back("metrics must be non-empty");
  if (worker_count < 1) problems.push_back("workers must be >= 1");
  if (default_embedding_dim < 1) problems.push_back("default_embedding_dim must be >= 1");
  if (vocab_min_frequency < 1) problems.push_back("vocab_min_frequency must be >= 1");
  if (vocab_oov_buckets < 1) problems.push_back("vocab_oov_buckets must be >= 1");
  for (const auto& spec : feature_specs) {
    if (spec.name.empty()) problems.push_back("feature spec with empty name");
    if (spec.categorical) {
      if (spec.embedding_dim < 1) {
        problems.push_back("feature '" + spec.name + "': embedding_dim must be >= 1");
      }
      if (spec.vocabulary_id.empty()) {
        problems.push_back("feature '" + spec.name + "': missing vocabulary id");
      }
    } else if (spec.width < 1) {
      problems.push_back("feature '" + spec.name + "': width must be >= 1");
    }
  }
  // Duplicate names within a scope.
  std::vector<std::string> seen;
  for (const auto& spec : feature_specs) {
    std::string key = (spec.scope == FeatureScope::kContext ? "c:" : "i:") + spec.name;
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      problems.push_back("duplicate feature spec '" + spec.name + "' in one scope");
    }
    seen.push_back(key);
  }
}

ScorerArchitecture RankingConfig::architecture() const {
  ScorerArchitecture arch;
  arch.hidden_dims = hidden_dims;
  arch.dropout_rate = dropout_rate;
  arch.group_size = group_size;
  arch.group_shuffle = group_shuffle;
  return arch;
}

AdagradOptions RankingConfig::adagrad_options() const {
  AdagradOptions opt;
  opt.learning_rate = learning_rate;
  opt.epsilon = adagrad_epsilon;
  opt.initial_accumulator = adagrad_initial_accumulator;
  return opt;
}

namespace {

// Embedding dim per vocabulary id; specs sharing a vocabulary must agree.
std::map<std::string, size_t> embedding_dims(const std::vector<FeatureSpec>& specs) {
  std::map<std::string, size_t> dims;
  for (const auto& spec : specs) {
    if (!spec.categorical) continue;
    auto [it, inserted] = dims.try_emplace(spec.vocabulary_id, spec.embedding_dim);
    if (!inserted && it->second != spec.embedding_dim) {
      throw ConfigError("vocabulary '" + spec.vocabulary_id +
                        "' is shared by specs with different embedding dims");
    }
  }
  return dims;
}

}  // namespace

ModelParams init_params(const RankingConfig& config,
                        const std::map<std::string, Vocabulary>& vocabs) {
  Rng root(config.seed);
  ModelParams params;
  params.layers =
      init_scorer_layers(config.architecture(), per_item_width(config.feature_specs),
                         context_width(config.feature_specs), root.fork("init_scorer"));
  for (const auto& [id, dim] : embedding_dims(config.feature_specs)) {
    auto vit = vocabs.find(id);
    if (vit == vocabs.end()) {
      throw ConfigError("feature specs reference unknown vocabulary '" + id + "'");
    }
    params.tables[id] =
        init_embedding_table(vit->second, dim, root.fork("init_embedding").fork(id));
  }
  return params;
}

ModelParams init_accumulators(const ModelParams& params, double initial_value) {
  ModelParams accum;
  for (const auto& layer : params.layers) {
    DenseLayerParams a;
    a.weight = Matrix(layer.weight.rows, layer.weight.cols, initial_value);
    a.bias.assign(layer.bias.size(), initial_value);
    accum.layers.push_back(std::move(a));
  }
  for (const auto& [id, table] : params.tables) {
    EmbeddingTable a;
    a.vocabulary_id = id;
    a.rows = Matrix(table.rows.rows, table.rows.cols, initial_value);
    accum.tables[id] = std::move(a);
  }
  return accum;
}

GradientResult compute_gradients(const ModelParams& params, const RankingConfig& config,
                                 const std::map<std::string, Vocabulary>& vocabs,
                                 const Batch& batch, uint64_t step) {
  const size_t B = batch.batch_size();
  const size_t L = batch.list_size;
  Rng step_rng = Rng(config.seed).fork("train_step", step);

  auto encoded = encode_listwise(batch, config.feature_specs, vocabs, params.tables);
  ScoreCache cache;
  auto scored = score_groupwise(encoded, params.layers, config.architecture(), Mode::kTrain,
                                step_rng, &cache);

  Matrix labels(B, L), weights(B, L);
  for (size_t b = 0; b < B; ++b) {
    const ExampleList& list = *batch.lists[b];
    for (size_t i = 0; i < L; ++i) {
      labels.at(b, i) = list.labels[i];
      weights.at(b, i) = list.weights[i];
    }
  }
  auto loss_fn = make_loss_fn(config.loss);
  BatchLoss batch_loss =
      loss_fn(labels, scored.scores, weights, encoded.mask, step_rng.fork("listmle"));

  auto scorer_grads = scorer_backward(cache, params.layers, batch_loss.grad_scores);

  GradientResult result;
  result.loss = batch_loss.value;
  result.contributing_lists = batch_loss.contributing_lists;
  result.grads.layers = std::move(scorer_grads.layers);

  // Route per-item and context gradient segments into embedding tables.
  size_t offset = 0;
  for (const auto& spec : config.feature_specs) {
    if (spec.scope != FeatureScope::kPerItem) continue;
    if (spec.categorical) {
      const Vocabulary& vocab = vocabs.at(spec.vocabulary_id);
      auto& row_grads = result.grads.tables[spec.vocabulary_id];
      static const std::vector<std::string> kNoTokens;
      for (size_t b = 0; b < B; ++b) {
        const ExampleList& list = *batch.lists[b];
        for (size_t i = 0; i < L; ++i) {
          if (!list.mask[i]) continue;
          auto found = list.items[i].tokens.find(spec.name);
          const auto& tokens = found != list.items[i].tokens.end() ? found->second : kNoTokens;
          embed_backward(tokens, vocab,
                         {scorer_grads.d_per_item.row(b * L + i) + offset, spec.embedding_dim},
                         spec.embedding_dim, row_grads);
        }
      }
    }
    offset += spec.encoded_width();
  }
  offset = 0;
  for (const auto& spec : config.feature_specs) {
    if (spec.scope != FeatureScope::kContext) continue;
    if (spec.categorical) {
      const Vocabulary& vocab = vocabs.at(spec.vocabulary_id);
      auto& row_grads = result.grads.tables[spec.vocabulary_id];
      static const std::vector<std::string> kNoTokens;
      for (size_t b = 0; b < B; ++b) {
        const ExampleList& list = *batch.lists[b];
        auto found = list.context_tokens.find(spec.name);
        const auto& tokens = found != list.context_tokens.end() ? found->second : kNoTokens;
        embed_backward(tokens, vocab, {scorer_grads.d_context.row(b) + offset, spec.embedding_dim},
                       spec.embedding_dim, row_grads);
      }
    }
    offset += spec.encoded_width();
  }
  return result;
}

bool grads_finite(const ModelGrads& grads) {
  for (const auto& layer : grads.layers) {
    if (!layer.weight.all_finite()) return false;
    for (double v : layer.bias) {
      if (!std::isfinite(v)) return false;
    }
  }
  for (const auto& [id, rows] : grads.tables) {
    for (const auto& [row, vec] : rows) {
      for (double v : vec) {
        if (!std::isfinite(v)) return false;
      }
    }
  }
  return true;
}

void apply_gradients(ModelParams& params, ModelParams& accum, const ModelGrads& grads,
                     const AdagradOptions& options) {
  if (grads.layers.size() != params.layers.size()) {
    throw DimensionError("apply_gradients: layer count mismatch");
  }
  for (size_t l = 0; l < params.layers.size(); ++l) {
    const std::string name = "layer" + std::to_string(l);
    adagrad_update(params.layers[l].weight.data, grads.layers[l].weight.data,
                   accum.layers[l].weight.data, options, name + "/weight");
    adagrad_update(params.layers[l].bias, grads.layers[l].bias, accum.layers[l].bias, options,
                   name + "/bias");
  }
  for (const auto& [id, rows] : grads.tables) {
    auto pit = params.tables.find(id);
    auto ait = accum.tables.find(id);
    if (pit == params.tables.end() || ait == accum.tables.end()) {
      throw DimensionError("apply_gradients: unknown embedding table '" + id + "'");
    }
    for (const auto& [row, vec] : rows) {
      adagrad_update({pit->second.rows.row(row), vec.size()}, vec,
                     {ait->second.rows.row(row), vec.size()}, options,
                     "embedding/" + id + "/row" + std::to_string(row));
    }
  }
}

Model Model::build(RankingConfig config, std::map<std::string, Vocabulary> vocabs) {
  std::vector<std::string> problems;
  config.validate(problems);
  if (config.feature_specs.empty()) {
    problems.push_back("feature specs must be resolved before build");
  }
  if (!problems.empty()) {
    std::string joined;
    for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
    throw ConfigError("invalid config: " + joined);
  }
  Model model;
  model.params_ = init_params(config, vocabs);  // also checks vocab references
  model.accum_ = init_accumulators(model.params_, config.adagrad_initial_accumulator);
  model.config_ = std::move(config);
  model.vocabs_ = std::move(vocabs);
  return model;
}

void Model::install(ModelParams params, ModelParams accum, uint64_t global_step) {
  params_ = std::move(params);
  accum_ = std::move(accum);
  global_step_ = global_step;
}

ScoredBatch Model::score_batch(const Batch& batch) const {
  auto encoded = encode_listwise(batch, config_.feature_specs, vocabs_, params_.tables);
  Rng unused(config_.seed);
  return score_groupwise(encoded, params_.layers, config_.architecture(), Mode::kEval, unused);
}

RunOutput Model::run(Mode mode, const Batch& batch) {
  RunOutput out;
  switch (mode) {
    case Mode::kTrain: {
      auto g = compute_gradients(params_, config_, vocabs_, batch, global_step_);
      if (!std::isfinite(g.loss)) {
        throw NumericError("train: non-finite loss at step " + std::to_string(global_step_));
      }
      apply_gradients(params_, accum_, g.grads, config_.adagrad_options());
      ++global_step_;
      out.loss = g.loss;
      return out;
    }
    case Mode::kEval: {
      std::vector<ExampleList> lists;
      for (const auto* l : batch.lists) lists.push_back(*l);
      out.eval = evaluate(lists);
      return out;
    }
    case Mode::kPredict: {
      out.scores = score_batch(batch);
      return out;
    }
  }
  throw ConfigError("invalid mode");
}

TrainResult Model::train(const std::vector<ExampleList>& padded_lists, size_t num_steps) {
  if (num_steps < 1) throw ConfigError("train: num_steps must be >= 1");
  Rng root(config_.seed);
  BatchIterator iter(padded_lists, config_.batch_size, config_.shuffle_each_epoch,
                     root.fork("data", 0), global_step_);
  TrainResult result;
  for (size_t t = 0; t < num_steps; ++t) {
    const uint64_t batch_ordinal = iter.cursor();
    Batch batch = iter.next();
    auto g = compute_gradients(params_, config_, vocabs_, batch, global_step_);
    if (!std::isfinite(g.loss)) {
      throw NumericError("train: non-finite loss at step " + std::to_string(global_step_) +
                         " on batch " + std::to_string(batch_ordinal) + " (first qid '" +
                         batch.lists.front()->query_id + "')");
    }
    apply_gradients(params_, accum_, g.grads, config_.adagrad_options());
    if (config_.loss_trace_interval > 0 &&
        global_step_ % config_.loss_trace_interval == 0) {
      result.loss_trace.emplace_back(global_step_, g.loss);
    }
    ++global_step_;
    ++result.steps_run;
  }
  return result;
}

EvalReport Model::evaluate(const std::vector<ExampleList>& padded_lists) const {
  if (padded_lists.empty()) throw DomainError("evaluate: empty evaluation set");
  EvalReport report;
  report.list_count = padded_lists.size();

  struct Accumulator {
    std::vector<double> values;
    std::vector<double> list_weights;
    size_t skipped = 0;
  };
  std::vector<Accumulator> acc(config_.metric_keys.size());
  std::vector<MetricFn> fns;
  for (const auto& key : config_.metric_keys) fns.push_back(make_metric_fn(key));

  Rng unused(config_.seed);
  BatchIterator iter(padded_lists, config_.batch_size, false, unused);
  const size_t L = padded_lists[0].size();
  for (size_t bi = 0; bi < iter.batches_per_epoch(); ++bi) {
    Batch batch = iter.next();
    auto encoded = encode_listwise(batch, config_.feature_specs, vocabs_, params_.tables);
    auto scored =
        score_groupwise(encoded, params_.layers, config_.architecture(), Mode::kEval, unused);
    for (size_t b = 0; b < batch.batch_size(); ++b) {
      const ExampleList& list = *batch.lists[b];
      std::span<const double> labels{list.labels.data(), L};
      std::span<const double> weights{list.weights.data(), L};
      std::span<const double> scores{scored.scores.row(b), L};
      std::span<const uint8_t> mask{encoded.mask.data() + b * L, L};
      for (size_t m = 0; m < fns.size(); ++m) {
        auto value = fns[m](labels, scores, weights, mask);
        if (value.skipped) {
          ++acc[m].skipped;
          continue;
        }
        acc[m].values.push_back(value.value);
        acc[m].list_weights.push_back(value.list_weight);
      }
    }
  }
  for (size_t m = 0; m < fns.size(); ++m) {
    MetricReport mr;
    mr.skipped_lists = acc[m].skipped;
    mr.contributing_lists = acc[m].values.size();
    if (!acc[m].values.empty()) {
      std::vector<double> ones(acc[m].values.size(), 1.0);
      mr.unweighted = aggregate(acc[m].values, ones);
      mr.weighted = aggregate(acc[m].values, acc[m].list_weights);
    }
    report.metrics[to_string(config_.metric_keys[m])] = mr;
  }
  return report;
}

std::vector<PredictRow> Model::predict(const std::vector<ExampleList>& lists) const {
  std::vector<PredictRow> rows;
  Rng unused(config_.seed);
  for (const auto& list : lists) {
    Batch batch;
    batch.lists = {&list};
    batch.list_size = list.size();
    auto encoded = encode_listwise(batch, config_.feature_specs, vocabs_, params_.tables);
    auto scored = score_groupwise(encoded, params_.layers, config_.architecture(),
                                  Mode::kPredict, unused);
    for (size_t i = 0; i < list.size(); ++i) {
      if (!list.mask[i]) continue;
      rows.push_back({list.query_id, i, scored.scores.at(0, i)});
    }
  }
  return rows;
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << std::left << std::setw(12) << "metric" << std::right << std::setw(14) << "weighted"
      << std::setw(14) << "unweighted" << std::setw(8) << "lists" << std::setw(9) << "skipped"
      << "\n";
  for (const auto& [name, mr] : metrics) {
    out << std::left << std::setw(12) << name << std::right << std::fixed
        << std::setprecision(6) << std::setw(14) << mr.weighted << std::setw(14)
        << mr.unweighted << std::setw(8) << mr.contributing_lists << std::setw(9)
        << mr.skipped_lists << "\n";
  }
  out << "lists evaluated: " << list_count << "\n";
  return out.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["list_count"] = list_count;
  for (const auto& [name, mr] : metrics) {
    j["metrics"][name] = {{"weighted", mr.weighted},
                          {"unweighted", mr.unweighted},
                          {"lists", mr.contributing_lists},
                          {"skipped", mr.skipped_lists}};
  }
  return j.dump(2);
}

}  // namespace ltr
