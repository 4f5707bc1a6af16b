#include "ltr/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "ltr/errors.hpp"

namespace ltr {

namespace {
constexpr size_t kNoCutoff = std::numeric_limits<size_t>::max();

size_t cutoff_of(const MetricKey& key) { return key.topn.value_or(kNoCutoff); }
}  // namespace

MetricKey metric_key_from_string(const std::string& name) {
  std::string base = name;
  std::optional<size_t> topn;
  if (auto at = name.find('@'); at != std::string::npos) {
    base = name.substr(0, at);
    const char* first = name.data() + at + 1;
    const char* last = name.data() + name.size();
    size_t k = 0;
    auto [p, ec] = std::from_chars(first, last, k);
    if (ec != std::errc() || p != last || k < 1) {
      throw ConfigError("bad metric cutoff in '" + name + "'");
    }
    topn = k;
  }
  MetricKey key;
  key.topn = topn;
  if (base == "mrr") key.kind = MetricKey::Kind::kMrr;
  else if (base == "arp") key.kind = MetricKey::Kind::kArp;
  else if (base == "dcg") key.kind = MetricKey::Kind::kDcg;
  else if (base == "ndcg") key.kind = MetricKey::Kind::kNdcg;
  else throw ConfigError("unknown metric key '" + name + "'");
  return key;
}

std::string to_string(const MetricKey& key) {
  std::string base;
  switch (key.kind) {
    case MetricKey::Kind::kMrr: base = "mrr"; break;
    case MetricKey::Kind::kArp: base = "arp"; break;
    case MetricKey::Kind::kDcg: base = "dcg"; break;
    case MetricKey::Kind::kNdcg: base = "ndcg"; break;
  }
  if (key.topn) base += "@" + std::to_string(*key.topn);
  return base;
}

std::vector<size_t> rank_from_scores(std::span<const double> scores,
                                     std::span<const uint8_t> mask) {
  std::vector<size_t> valid;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (mask[i]) valid.push_back(i);
  }
  if (valid.empty()) throw DomainError("rank_from_scores: no valid items");
  std::stable_sort(valid.begin(), valid.end(), [&](size_t a, size_t b) {
    return scores[a] > scores[b];  // stable: equal scores keep index order
  });
  std::vector<size_t> ranks(scores.size(), 0);
  for (size_t r = 0; r < valid.size(); ++r) ranks[valid[r]] = r + 1;
  return ranks;
}

double metric_rr(std::span<const double> labels, std::span<const size_t> ranks,
                 size_t topn) {
  size_t best = kNoCutoff;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (ranks[i] != 0 && labels[i] > 0.0) best = std::min(best, ranks[i]);
  }
  if (best == kNoCutoff || best > topn) return 0.0;
  return 1.0 / static_cast<double>(best);
}

std::optional<double> metric_arp(std::span<const double> labels,
                                 std::span<const size_t> ranks, size_t topn) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (ranks[i] == 0 || ranks[i] > topn) continue;
    num += labels[i] * static_cast<double>(ranks[i]);
    den += labels[i];
  }
  if (den <= 0.0) return std::nullopt;
  return num / den;
}

double metric_dcg(std::span<const double> labels, std::span<const size_t> ranks,
                  size_t topn) {
  double dcg = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (ranks[i] == 0 || ranks[i] > topn) continue;
    dcg += (std::exp2(labels[i]) - 1.0) / std::log2(1.0 + static_cast<double>(ranks[i]));
  }
  return dcg;
}

double metric_ndcg(std::span<const double> labels, std::span<const size_t> ranks,
                   size_t topn) {
  std::vector<uint8_t> mask(labels.size(), 0);
  for (size_t i = 0; i < labels.size(); ++i) mask[i] = ranks[i] != 0;
  // Ideal ranking: labels descending over the same valid items.
  auto ideal_ranks = rank_from_scores(labels, mask);
  const double ideal = metric_dcg(labels, ideal_ranks, topn);
  if (ideal <= 0.0) return 0.0;
  return metric_dcg(labels, ranks, topn) / ideal;
}

double aggregate(std::span<const double> values, std::span<const double> weights) {
  if (values.empty() || values.size() != weights.size()) {
    throw DomainError("aggregate: empty or mismatched contribution set");
  }
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    num += weights[i] * values[i];
    den += weights[i];
  }
  if (den == 0.0) throw DomainError("aggregate: zero total weight");
  return num / den;
}

namespace {

// Label-weighted mean of item weights; plain mean when all labels are zero.
double derive_list_weight(std::span<const double> labels, std::span<const double> weights,
                          std::span<const uint8_t> mask) {
  double num = 0.0, den = 0.0, sum = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (!mask[i]) continue;
    num += weights[i] * labels[i];
    den += labels[i];
    sum += weights[i];
    ++n;
  }
  if (den > 0.0) return num / den;
  return n > 0 ? sum / static_cast<double>(n) : 1.0;
}

}  // namespace

MetricFn make_metric_fn(const MetricKey& key) {
  const size_t topn = cutoff_of(key);
  const auto kind = key.kind;
  return [topn, kind](std::span<const double> labels, std::span<const double> scores,
                      std::span<const double> weights, std::span<const uint8_t> mask) {
    PerListMetric out;
    auto ranks = rank_from_scores(scores, mask);
    out.list_weight = derive_list_weight(labels, weights, mask);
    switch (kind) {
      case MetricKey::Kind::kMrr:
        out.value = metric_rr(labels, ranks, topn);
        break;
      case MetricKey::Kind::kArp: {
        auto arp = metric_arp(labels, ranks, topn);
        if (!arp) {
          out.skipped = true;
        } else {
          out.value = *arp;
        }
        break;
      }
      case MetricKey::Kind::kDcg:
        out.value = metric_dcg(labels, ranks, topn);
        break;
      case MetricKey::Kind::kNdcg:
        out.value = metric_ndcg(labels, ranks, topn);
        break;
    }
    return out;
  };
}

}  // namespace ltr
