#include "ltr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ltr/errors.hpp"

namespace ltr {

LossKey loss_key_from_string(const std::string& name) {
  if (name == "sigmoid_cross_entropy") return LossKey::kSigmoidCrossEntropy;
  if (name == "pairwise_logistic") return LossKey::kPairwiseLogistic;
  if (name == "softmax_cross_entropy") return LossKey::kSoftmaxCrossEntropy;
  if (name == "list_mle") return LossKey::kListMle;
  throw ConfigError("unknown loss key '" + name + "'");
}

std::string to_string(LossKey key) {
  switch (key) {
    case LossKey::kSigmoidCrossEntropy: return "sigmoid_cross_entropy";
    case LossKey::kPairwiseLogistic: return "pairwise_logistic";
    case LossKey::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case LossKey::kListMle: return "list_mle";
  }
  throw ConfigError("invalid loss key");
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + exp(x)) without overflow.
double log1p_exp(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

}  // namespace

LossOutput loss_sigmoid_ce(std::span<const double> labels, std::span<const double> scores,
                           std::span<const double> weights, std::span<const uint8_t> mask) {
  LossOutput out;
  out.grad_scores.assign(scores.size(), 0.0);
  for (size_t j = 0; j < scores.size(); ++j) {
    if (!mask[j]) continue;
    const double y = labels[j];
    if (y != 0.0 && y != 1.0) {
      throw DomainError("sigmoid_cross_entropy: label " + std::to_string(y) +
                        " outside {0,1} on a valid slot");
    }
    const double w = weights[j];
    const double s = scores[j];
    // -y log p - (1-y) log(1-p) = max(s,0) - s*y + log(1+exp(-|s|))
    out.value += w * (std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::fabs(s))));
    out.grad_scores[j] = w * (sigmoid(s) - y);
    if (w != 0.0) out.contributes = true;
  }
  return out;
}

LossOutput loss_pairwise_logistic(std::span<const double> labels,
                                  std::span<const double> scores,
                                  std::span<const double> weights,
                                  std::span<const uint8_t> mask) {
  LossOutput out;
  out.grad_scores.assign(scores.size(), 0.0);
  for (size_t j = 0; j < scores.size(); ++j) {
    if (!mask[j]) continue;
    for (size_t k = 0; k < scores.size(); ++k) {
      if (!mask[k] || labels[j] <= labels[k]) continue;
      const double w = weights[j];
      const double margin = scores[k] - scores[j];
      out.value += w * log1p_exp(margin);
      const double d = w * sigmoid(margin);
      out.grad_scores[k] += d;
      out.grad_scores[j] -= d;
      if (w != 0.0) out.contributes = true;
    }
  }
  return out;
}

LossOutput loss_softmax_ce(std::span<const double> labels, std::span<const double> scores,
                           std::span<const double> weights, std::span<const uint8_t> mask) {
  LossOutput out;
  out.grad_scores.assign(scores.size(), 0.0);

  double max_score = -std::numeric_limits<double>::infinity();
  double weighted_label_sum = 0.0;
  for (size_t j = 0; j < scores.size(); ++j) {
    if (!mask[j]) continue;
    if (labels[j] < 0.0) {
      throw DomainError("softmax_cross_entropy: negative label " + std::to_string(labels[j]) +
                        " on a valid slot");
    }
    max_score = std::max(max_score, scores[j]);
    weighted_label_sum += weights[j] * labels[j];
  }
  if (weighted_label_sum == 0.0) return out;  // Eq. vanishes on all-zero labels

  double denom = 0.0;
  for (size_t j = 0; j < scores.size(); ++j) {
    if (mask[j]) denom += std::exp(scores[j] - max_score);
  }
  const double log_denom = std::log(denom);
  for (size_t j = 0; j < scores.size(); ++j) {
    if (!mask[j]) continue;
    const double log_softmax = scores[j] - max_score - log_denom;
    out.value -= weights[j] * labels[j] * log_softmax;
    const double softmax = std::exp(log_softmax);
    out.grad_scores[j] = weighted_label_sum * softmax - weights[j] * labels[j];
  }
  out.contributes = true;
  return out;
}

LossOutput loss_listmle(std::span<const double> labels, std::span<const double> scores,
                        std::span<const double> weights, std::span<const uint8_t> mask,
                        Rng rng) {
  LossOutput out;
  out.grad_scores.assign(scores.size(), 0.0);

  std::vector<size_t> order;
  double weight_sum = 0.0;
  for (size_t j = 0; j < scores.size(); ++j) {
    if (!mask[j]) continue;
    order.push_back(j);
    weight_sum += weights[j];
  }
  const size_t n = order.size();
  if (n == 0) return out;
  const double list_weight = weight_sum / static_cast<double>(n);
  if (n < 2 || list_weight == 0.0) return out;  // degenerate permutation

  // Random shuffle then stable sort: ties end up in seeded random order.
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return labels[a] > labels[b]; });

  // Suffix log-sum-exp over the sorted scores.
  double max_score = -std::numeric_limits<double>::infinity();
  for (size_t j : order) max_score = std::max(max_score, scores[j]);
  std::vector<double> suffix_sum(n);  // sum_{t>=r} exp(s_t - max)
  double acc = 0.0;
  for (size_t r = n; r-- > 0;) {
    acc += std::exp(scores[order[r]] - max_score);
    suffix_sum[r] = acc;
  }
  for (size_t r = 0; r < n; ++r) {
    out.value -= list_weight * (scores[order[r]] - max_score - std::log(suffix_sum[r]));
    out.grad_scores[order[r]] -= list_weight;
    // d/ds_t of log suffix_sum[r] for every r <= position(t).
  }
  double inv_prefix = 0.0;  // sum_{r<=t} 1/suffix_sum[r]
  for (size_t t = 0; t < n; ++t) {
    inv_prefix += 1.0 / suffix_sum[t];
    out.grad_scores[order[t]] +=
        list_weight * std::exp(scores[order[t]] - max_score) * inv_prefix;
  }
  out.contributes = true;
  return out;
}

LossFn make_loss_fn(LossKey key) {
  auto per_list = [key](std::span<const double> labels, std::span<const double> scores,
                        std::span<const double> weights, std::span<const uint8_t> mask,
                        const Rng& rng, size_t list_index) {
    switch (key) {
      case LossKey::kSigmoidCrossEntropy:
        return loss_sigmoid_ce(labels, scores, weights, mask);
      case LossKey::kPairwiseLogistic:
        return loss_pairwise_logistic(labels, scores, weights, mask);
      case LossKey::kSoftmaxCrossEntropy:
        return loss_softmax_ce(labels, scores, weights, mask);
      case LossKey::kListMle:
        return loss_listmle(labels, scores, weights, mask, rng.fork("list", list_index));
    }
    throw ConfigError("invalid loss key");
  };

  return [per_list](const Matrix& labels, const Matrix& scores, const Matrix& weights,
                    const std::vector<uint8_t>& mask, const Rng& rng) {
    if (!labels.same_shape(scores) || !labels.same_shape(weights) ||
        mask.size() != labels.size()) {
      throw DimensionError("loss: labels " + labels.shape_str() + ", scores " +
                           scores.shape_str() + ", weights " + weights.shape_str() +
                           ", mask " + std::to_string(mask.size()));
    }
    BatchLoss batch;
    batch.grad_scores = Matrix(scores.rows, scores.cols);
    const size_t L = scores.cols;
    double total = 0.0;
    for (size_t b = 0; b < scores.rows; ++b) {
      auto list = per_list({labels.row(b), L}, {scores.row(b), L}, {weights.row(b), L},
                           {mask.data() + b * L, L}, rng, b);
      total += list.value;
      if (list.contributes) ++batch.contributing_lists;
      std::copy(list.grad_scores.begin(), list.grad_scores.end(), batch.grad_scores.row(b));
    }
    if (batch.contributing_lists == 0) {
      batch.value = 0.0;
      std::fill(batch.grad_scores.data.begin(), batch.grad_scores.data.end(), 0.0);
      return batch;
    }
    const double inv = 1.0 / static_cast<double>(batch.contributing_lists);
    batch.value = total * inv;
    for (double& g : batch.grad_scores.data) g *= inv;
    return batch;
  };
}

}  // namespace ltr
