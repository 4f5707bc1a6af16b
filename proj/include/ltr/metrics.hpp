#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ltr {

/// Metric selector: kind plus an optional @k cutoff ("ndcg@5", "mrr", ...).
struct MetricKey {
  enum class Kind { kMrr, kArp, kDcg, kNdcg };
  Kind kind = Kind::kNdcg;
  std::optional<size_t> topn;
};

MetricKey metric_key_from_string(const std::string& name);
std::string to_string(const MetricKey& key);

/// Ranks per slot, 1-based over valid items in descending score order with
/// ties broken by lower original index. Padded slots get rank 0 (unranked).
std::vector<size_t> rank_from_scores(std::span<const double> scores,
                                     std::span<const uint8_t> mask);

/// 1 / rank of the first item with label > 0 within the cutoff; 0 when no
/// relevant item lands inside it.
double metric_rr(std::span<const double> labels, std::span<const size_t> ranks, size_t topn);

/// Relevance-weighted average rank position over items within the cutoff
/// (lower is better). Unset when no relevant item lands inside it.
std::optional<double> metric_arp(std::span<const double> labels,
                                 std::span<const size_t> ranks, size_t topn);

double metric_dcg(std::span<const double> labels, std::span<const size_t> ranks, size_t topn);

/// DCG normalized by the label-ideal DCG at the same cutoff; 0 when the ideal
/// is 0 (all-irrelevant list).
double metric_ndcg(std::span<const double> labels, std::span<const size_t> ranks, size_t topn);

/// Weighted mean of per-list metric values. Throws DomainError when empty.
double aggregate(std::span<const double> values, std::span<const double> weights);

/// One list's metric value plus the list weight used for the weighted
/// aggregate. `skipped` marks lists the metric is undefined for (ARP with no
/// relevant item in range).
struct PerListMetric {
  double value = 0.0;
  double list_weight = 1.0;
  bool skipped = false;
};

using MetricFn = std::function<PerListMetric(
    std::span<const double> labels, std::span<const double> scores,
    std::span<const double> weights, std::span<const uint8_t> mask)>;

/// Uniform per-list signature. The list weight for weighted aggregation is
/// the label-weighted mean of the item weights (the mean valid-item weight
/// when all labels are zero), so IPW weights follow the relevant items.
MetricFn make_metric_fn(const MetricKey& key);

}  // namespace ltr
