#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ltr/data.hpp"
#include "ltr/feature.hpp"
#include "ltr/losses.hpp"
#include "ltr/metrics.hpp"
#include "ltr/nn.hpp"
#include "ltr/scoring.hpp"

namespace ltr {

/// Everything one training run is parameterized by. Defaults follow the
/// reference setup: 3 hidden layers of 128 ReLU units, dropout 0.5, Adagrad
/// with learning rate 0.1.
struct RankingConfig {
  size_t list_size = 10;
  size_t group_size = 1;
  std::vector<size_t> hidden_dims{128, 128, 128};
  double dropout_rate = 0.5;
  double learning_rate = 0.1;
  double adagrad_epsilon = 1e-8;
  double adagrad_initial_accumulator = 0.1;
  size_t batch_size = 32;
  size_t num_steps = 100;
  LossKey loss = LossKey::kSoftmaxCrossEntropy;
  std::vector<MetricKey> metric_keys{metric_key_from_string("mrr"),
                                     metric_key_from_string("ndcg@5")};
  uint64_t seed = 17;
  size_t worker_count = 1;
  std::vector<FeatureSpec> feature_specs;  // empty: inferred from training data
  TruncatePolicy truncate_policy = TruncatePolicy::kSample;
  bool group_shuffle = false;
  bool shuffle_each_epoch = true;
  size_t loss_trace_interval = 10;
  size_t default_embedding_dim = 20;  // for inferred categorical specs
  size_t vocab_min_frequency = 1;
  size_t vocab_oov_buckets = 1;

  /// Appends one message per violated constraint (all problems reported at
  /// once, not first-only).
  void validate(std::vector<std::string>& problems) const;

  ScorerArchitecture architecture() const;
  AdagradOptions adagrad_options() const;
};

/// All trainable state: scorer layers plus one embedding table per
/// vocabulary. Also reused as the container for Adagrad accumulators, which
/// shadow every parameter element-wise.
struct ModelParams {
  std::vector<DenseLayerParams> layers;
  std::map<std::string, EmbeddingTable> tables;  // keyed by vocabulary id
};

/// Gradients aligned with ModelParams; embedding gradients are sparse rows.
struct ModelGrads {
  std::vector<DenseLayerGrads> layers;
  std::map<std::string, RowGrads> tables;
};

struct GradientResult {
  double loss = 0.0;
  size_t contributing_lists = 0;
  ModelGrads grads;
};

/// Pure function of (params, batch, step): snapshot-friendly for the
/// asynchronous trainer. All randomness (dropout, item shuffles, ListMLE
/// ties) is keyed by `step` under the config seed.
GradientResult compute_gradients(const ModelParams& params, const RankingConfig& config,
                                 const std::map<std::string, Vocabulary>& vocabs,
                                 const Batch& batch, uint64_t step);

/// acc += g^2; theta -= lr*g/(sqrt(acc)+eps) over every touched block.
/// Throws NumericError naming the block on non-finite gradients.
void apply_gradients(ModelParams& params, ModelParams& accum, const ModelGrads& grads,
                     const AdagradOptions& options);

bool grads_finite(const ModelGrads& grads);

struct TrainResult {
  std::vector<std::pair<uint64_t, double>> loss_trace;  // (step, batch loss)
  uint64_t steps_run = 0;
};

/// Per-metric aggregate over an evaluation set.
struct MetricReport {
  double unweighted = 0.0;
  double weighted = 0.0;
  size_t contributing_lists = 0;
  size_t skipped_lists = 0;
};

struct EvalReport {
  std::map<std::string, MetricReport> metrics;  // metric key string -> report
  size_t list_count = 0;

  std::string to_table() const;
  std::string to_json() const;
};

struct PredictRow {
  std::string query_id;
  size_t item_index = 0;  // position within the query's input order
  double score = 0.0;
};

struct RunOutput {
  double loss = 0.0;
  EvalReport eval;
  ScoredBatch scores;
};

/// The assembled ranking model: transform -> scorer -> head, driven by mode.
class Model {
 public:
  /// Wires the pieces together and initializes parameters under the seed.
  /// Feature specs must be resolved (non-empty) by build time.
  static Model build(RankingConfig config, std::map<std::string, Vocabulary> vocabs);

  const RankingConfig& config() const { return config_; }
  void set_metric_keys(std::vector<MetricKey> keys) { config_.metric_keys = std::move(keys); }
  const std::map<std::string, Vocabulary>& vocabs() const { return vocabs_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  ModelParams& accumulators() { return accum_; }
  const ModelParams& accumulators() const { return accum_; }
  uint64_t global_step() const { return global_step_; }

  /// TRAIN: one optimizer step on the batch (loss returned). EVAL: metric
  /// aggregates over the batch. PREDICT: per-item scores, labels never read.
  RunOutput run(Mode mode, const Batch& batch);

  /// Sequential training loop: exactly num_steps optimizer steps over the
  /// padded dataset, resuming from the current global step. Aborts with
  /// NumericError (step and batch named) on a non-finite loss.
  TrainResult train(const std::vector<ExampleList>& padded_lists, size_t num_steps);

  /// Weighted and unweighted aggregates for every configured metric.
  EvalReport evaluate(const std::vector<ExampleList>& padded_lists) const;

  /// Scores provided lists as-is (no padding; labels ignored); univariate
  /// models score each item independently, groupwise models reuse the
  /// training group enumeration over the provided items.
  std::vector<PredictRow> predict(const std::vector<ExampleList>& lists) const;

  /// Eval-mode scores for one padded batch.
  ScoredBatch score_batch(const Batch& batch) const;

  void save_checkpoint(const std::string& path) const;
  static Model load_checkpoint(const std::string& path);

  /// Used by the async trainer to install trained state.
  void install(ModelParams params, ModelParams accum, uint64_t global_step);

 private:
  Model() = default;

  RankingConfig config_;
  std::map<std::string, Vocabulary> vocabs_;
  ModelParams params_;
  ModelParams accum_;
  uint64_t global_step_ = 0;
};

/// Fresh parameters and matching accumulator container for a config.
ModelParams init_params(const RankingConfig& config,
                        const std::map<std::string, Vocabulary>& vocabs);
ModelParams init_accumulators(const ModelParams& params, double initial_value);

}  // namespace ltr
