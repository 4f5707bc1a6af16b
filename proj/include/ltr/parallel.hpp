#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "ltr/model.hpp"

namespace ltr {

/// Round-robin disjoint shards covering all lists; sizes differ by at most 1.
/// Workers past the list count receive empty shards.
std::vector<std::vector<size_t>> shard_data(size_t list_count, size_t worker_count);

/// Shared parameter state for asynchronous training. Updates are applied
/// hogwild-style: one mutex per parameter block (a layer matrix, a bias
/// vector, or an embedding table), so readers may see blocks from different
/// updates but never a torn block.
class ParameterStore {
 public:
  ParameterStore(ModelParams params, ModelParams accum);

  /// Block-consistent copy of the parameters plus the version it started at.
  std::pair<ModelParams, uint64_t> snapshot() const;

  /// Applies Adagrad with `grads` against the current store state. Returns
  /// the version observed at apply time, or nullopt when the update was
  /// dropped because a gradient was non-finite.
  std::optional<uint64_t> apply(const ModelGrads& grads, const AdagradOptions& options);

  uint64_t version() const { return version_.load(std::memory_order_acquire); }
  uint64_t dropped_updates() const { return dropped_.load(std::memory_order_relaxed); }

  /// Move the trained state out; callers must be done with concurrency.
  std::pair<ModelParams, ModelParams> take();

 private:
  ModelParams params_;
  ModelParams accum_;
  mutable std::vector<std::unique_ptr<std::mutex>> block_mutexes_;
  std::atomic<uint64_t> version_{0};
  std::atomic<uint64_t> dropped_{0};
};

struct WorkerReport {
  size_t worker_id = 0;
  size_t steps = 0;
  size_t dropped = 0;
  double wall_seconds = 0.0;
  double mean_staleness = 0.0;
};

struct AsyncResult {
  std::vector<WorkerReport> reports;
  uint64_t final_version = 0;
  uint64_t dropped_updates = 0;
  double wall_seconds = 0.0;
  double steps_per_sec = 0.0;
  std::vector<std::pair<uint64_t, double>> loss_trace;
};

/// Asynchronous data-parallel training: `worker_count` threads compute
/// gradients on disjoint shards against parameter snapshots and apply them to
/// a shared store without barriers. A global step counter stops everyone at
/// exactly `total_steps`. The trained state is installed back into `model`.
/// With one worker this reproduces Model::train bit-for-bit.
AsyncResult train_async(Model& model, const std::vector<ExampleList>& padded_lists,
                        size_t total_steps, size_t worker_count);

struct ThroughputRun {
  size_t workers = 1;
  double steps_per_sec = 0.0;
  double final_metric = 0.0;
};

struct ThroughputSummary {
  size_t workers = 0;
  size_t runs = 0;
  double steps_per_sec_mean = 0.0;   // normalized to the 1-worker mean
  double steps_per_sec_ci95 = 0.0;   // half-width, same normalization
  double raw_steps_per_sec_mean = 0.0;
  double final_metric = 0.0;
};

/// Groups runs by worker count and normalizes throughput by the 1-worker
/// mean. CI half-widths use the two-sided Student t at 95%.
std::vector<ThroughputSummary> summarize_throughput(const std::vector<ThroughputRun>& runs);

std::string throughput_report_json(const std::vector<ThroughputSummary>& summaries);

}  // namespace ltr
