#include "ltr/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "ltr/errors.hpp"

namespace ltr {

std::vector<std::vector<size_t>> shard_data(size_t list_count, size_t worker_count) {
  if (worker_count < 1) throw ConfigError("shard_data: worker_count must be >= 1");
  std::vector<std::vector<size_t>> shards(worker_count);
  for (size_t i = 0; i < list_count; ++i) shards[i % worker_count].push_back(i);
  return shards;
}

namespace {

size_t block_count_of(const ModelParams& params) {
  return params.layers.size() * 2 + params.tables.size();
}

size_t table_block_index(const ModelParams& params, const std::string& id) {
  size_t idx = params.layers.size() * 2;
  for (const auto& [key, table] : params.tables) {
    if (key == id) return idx;
    ++idx;
  }
  throw DimensionError("parameter store: unknown embedding table '" + id + "'");
}

}  // namespace

ParameterStore::ParameterStore(ModelParams params, ModelParams accum)
    : params_(std::move(params)), accum_(std::move(accum)) {
  const size_t blocks = block_count_of(params_);
  block_mutexes_.reserve(blocks);
  for (size_t i = 0; i < blocks; ++i) {
    block_mutexes_.push_back(std::make_unique<std::mutex>());
  }
}

std::pair<ModelParams, uint64_t> ParameterStore::snapshot() const {
  const uint64_t at = version();
  ModelParams copy;
  copy.layers.resize(params_.layers.size());
  size_t block = 0;
  for (size_t l = 0; l < params_.layers.size(); ++l) {
    {
      std::lock_guard<std::mutex> lock(*block_mutexes_[block++]);
      copy.layers[l].weight = params_.layers[l].weight;
    }
    {
      std::lock_guard<std::mutex> lock(*block_mutexes_[block++]);
      copy.layers[l].bias = params_.layers[l].bias;
    }
  }
  for (const auto& [id, table] : params_.tables) {
    std::lock_guard<std::mutex> lock(*block_mutexes_[block++]);
    copy.tables[id] = table;
  }
  return {std::move(copy), at};
}

std::optional<uint64_t> ParameterStore::apply(const ModelGrads& grads,
                                              const AdagradOptions& options) {
  if (!grads_finite(grads)) {
    dropped_.fetch_add(1, std::memory_order_relaxed);
    return std::nullopt;
  }
  const uint64_t at = version();
  for (size_t l = 0; l < params_.layers.size(); ++l) {
    const std::string name = "layer" + std::to_string(l);
    {
      std::lock_guard<std::mutex> lock(*block_mutexes_[l * 2]);
      adagrad_update(params_.layers[l].weight.data, grads.layers[l].weight.data,
                     accum_.layers[l].weight.data, options, name + "/weight");
    }
    {
      std::lock_guard<std::mutex> lock(*block_mutexes_[l * 2 + 1]);
      adagrad_update(params_.layers[l].bias, grads.layers[l].bias, accum_.layers[l].bias,
                     options, name + "/bias");
    }
  }
  for (const auto& [id, rows] : grads.tables) {
    const size_t block = table_block_index(params_, id);
    auto& table = params_.tables.at(id);
    auto& acc = accum_.tables.at(id);
    std::lock_guard<std::mutex> lock(*block_mutexes_[block]);
    for (const auto& [row, vec] : rows) {
      adagrad_update({table.rows.row(row), vec.size()}, vec, {acc.rows.row(row), vec.size()},
                     options, "embedding/" + id);
    }
  }
  version_.fetch_add(1, std::memory_order_acq_rel);
  return at;
}

std::pair<ModelParams, ModelParams> ParameterStore::take() {
  return {std::move(params_), std::move(accum_)};
}

AsyncResult train_async(Model& model, const std::vector<ExampleList>& padded_lists,
                        size_t total_steps, size_t worker_count) {
  if (total_steps < 1) throw ConfigError("train_async: total_steps must be >= 1");
  if (worker_count < 1) throw ConfigError("train_async: worker_count must be >= 1");
  const RankingConfig& config = model.config();
  const AdagradOptions options = config.adagrad_options();
  const uint64_t start_step = model.global_step();

  auto shards = shard_data(padded_lists.size(), worker_count);
  std::vector<std::vector<const ExampleList*>> shard_ptrs(worker_count);
  for (size_t w = 0; w < worker_count; ++w) {
    for (size_t i : shards[w]) shard_ptrs[w].push_back(&padded_lists[i]);
  }

  ParameterStore store(std::move(model.params()), std::move(model.accumulators()));
  std::atomic<uint64_t> next_step{start_step};
  const uint64_t end_step = start_step + total_steps;

  std::vector<WorkerReport> reports(worker_count);
  std::vector<std::vector<std::pair<uint64_t, double>>> traces(worker_count);
  Rng root(config.seed);

  // Workers build batches directly from their shard. A lone worker resumes
  // its batch cursor from the global step so the run is indistinguishable
  // from the sequential trainer.
  auto run_worker = [&](size_t w) {
    auto& report = reports[w];
    report.worker_id = w;
    const auto& shard = shard_ptrs[w];
    if (shard.empty()) return;  // fewer lists than workers
    const uint64_t local_start = worker_count == 1 ? start_step : 0;
    const size_t batches_per_epoch =
        (shard.size() + config.batch_size - 1) / config.batch_size;
    Rng data_key = root.fork("data", w);

    uint64_t local_cursor = local_start;
    uint64_t cached_epoch = ~0ULL;
    std::vector<size_t> order(shard.size());

    double staleness_sum = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    while (true) {
      const uint64_t step = next_step.fetch_add(1, std::memory_order_relaxed);
      if (step >= end_step) break;

      const uint64_t epoch = local_cursor / batches_per_epoch;
      const uint64_t index = local_cursor % batches_per_epoch;
      if (epoch != cached_epoch) {
        std::iota(order.begin(), order.end(), 0);
        if (config.shuffle_each_epoch) {
          Rng epoch_rng = data_key.fork("shuffle_epoch", epoch);
          epoch_rng.shuffle(order);
        }
        cached_epoch = epoch;
      }
      Batch batch;
      batch.list_size = shard[0]->size();
      const size_t begin = index * config.batch_size;
      const size_t end = std::min(begin + config.batch_size, shard.size());
      for (size_t i = begin; i < end; ++i) batch.lists.push_back(shard[order[i]]);
      ++local_cursor;

      auto [params, seen_version] = store.snapshot();
      auto grad = compute_gradients(params, config, model.vocabs(), batch, step);
      auto applied = store.apply(grad.grads, options);
      if (!applied) {
        ++report.dropped;
      } else {
        staleness_sum += static_cast<double>(*applied - seen_version);
      }
      ++report.steps;
      if (config.loss_trace_interval > 0 && step % config.loss_trace_interval == 0) {
        traces[w].emplace_back(step, grad.loss);
      }
    }
    const auto t1 = std::chrono::steady_clock::now();
    report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    if (report.steps > report.dropped && report.steps > 0) {
      report.mean_staleness = staleness_sum / static_cast<double>(report.steps - report.dropped);
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  if (worker_count == 1) {
    run_worker(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(worker_count);
    for (size_t w = 0; w < worker_count; ++w) threads.emplace_back(run_worker, w);
    for (auto& t : threads) t.join();
  }
  const auto t1 = std::chrono::steady_clock::now();

  AsyncResult result;
  result.reports = std::move(reports);
  result.final_version = store.version();
  result.dropped_updates = store.dropped_updates();
  result.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  if (result.wall_seconds <= 0.0) {
    throw NumericError("train_async: zero elapsed time, cannot measure throughput");
  }
  result.steps_per_sec = static_cast<double>(total_steps) / result.wall_seconds;
  for (auto& trace : traces) {
    result.loss_trace.insert(result.loss_trace.end(), trace.begin(), trace.end());
  }
  std::sort(result.loss_trace.begin(), result.loss_trace.end());

  auto [params, accum] = store.take();
  model.install(std::move(params), std::move(accum), start_step + total_steps);
  return result;
}

namespace {

// Two-sided 95% Student t critical values by degrees of freedom.
double t_critical_95(size_t df) {
  static const double table[] = {0.0,   12.706, 4.303, 3.182, 2.776, 2.571, 2.447,
                                 2.365, 2.306,  2.262, 2.228, 2.201, 2.179, 2.160,
                                 2.145, 2.131,  2.120, 2.110, 2.101, 2.093, 2.086};
  if (df == 0) return 0.0;
  if (df < std::size(table)) return table[df];
  return 1.96;
}

}  // namespace

std::vector<ThroughputSummary> summarize_throughput(const std::vector<ThroughputRun>& runs) {
  if (runs.empty()) throw DomainError("summarize_throughput: no runs");
  std::map<size_t, std::vector<ThroughputRun>> grouped;
  for (const auto& run : runs) {
    if (run.steps_per_sec <= 0.0) {
      throw NumericError("summarize_throughput: non-positive steps/sec measurement");
    }
    grouped[run.workers].push_back(run);
  }
  auto baseline_it = grouped.find(1);
  if (baseline_it == grouped.end()) {
    throw DomainError("summarize_throughput: no 1-worker baseline runs");
  }
  double baseline = 0.0;
  for (const auto& run : baseline_it->second) baseline += run.steps_per_sec;
  baseline /= static_cast<double>(baseline_it->second.size());

  std::vector<ThroughputSummary> summaries;
  for (const auto& [workers, group] : grouped) {
    ThroughputSummary s;
    s.workers = workers;
    s.runs = group.size();
    double mean = 0.0, metric = 0.0;
    for (const auto& run : group) {
      mean += run.steps_per_sec;
      metric += run.final_metric;
    }
    mean /= static_cast<double>(group.size());
    metric /= static_cast<double>(group.size());
    double var = 0.0;
    for (const auto& run : group) {
      const double d = run.steps_per_sec - mean;
      var += d * d;
    }
    const size_t n = group.size();
    const double stderr_raw =
        n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n))
              : 0.0;
    const double half_width = t_critical_95(n - 1) * stderr_raw;
    s.raw_steps_per_sec_mean = mean;
    s.steps_per_sec_mean = mean / baseline;
    s.steps_per_sec_ci95 = half_width / baseline;
    s.final_metric = metric;
    summaries.push_back(s);
  }
  return summaries;
}

std::string throughput_report_json(const std::vector<ThroughputSummary>& summaries) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : summaries) {
    j.push_back({{"workers", s.workers},
                 {"runs", s.runs},
                 {"steps_per_sec_mean", s.steps_per_sec_mean},
                 {"steps_per_sec_ci95", s.steps_per_sec_ci95},
                 {"raw_steps_per_sec_mean", s.raw_steps_per_sec_mean},
                 {"final_metric", s.final_metric}});
  }
  return j.dump(2);
}

}  // namespace ltr
