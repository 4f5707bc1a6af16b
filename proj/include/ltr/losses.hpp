#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ltr/matrix.hpp"
#include "ltr/rng.hpp"

namespace ltr {

enum class LossKey {
  kSigmoidCrossEntropy,
  kPairwiseLogistic,
  kSoftmaxCrossEntropy,
  kListMle,
};

LossKey loss_key_from_string(const std::string& name);
std::string to_string(LossKey key);

/// Per-list loss value with its exact gradient w.r.t. the scores.
/// `contributes` marks lists that enter the batch-reduction denominator
/// (lists whose loss has at least one active term).
struct LossOutput {
  double value = 0.0;
  std::vector<double> grad_scores;  // zero on padded slots
  bool contributes = false;
};

/// Pointwise sigmoid cross-entropy; valid labels must be in {0, 1}.
LossOutput loss_sigmoid_ce(std::span<const double> labels, std::span<const double> scores,
                           std::span<const double> weights, std::span<const uint8_t> mask);

/// Pairwise logistic loss over ordered pairs (y_j > y_k), each pair weighted
/// by the higher-labeled item's weight w_j.
LossOutput loss_pairwise_logistic(std::span<const double> labels,
                                  std::span<const double> scores,
                                  std::span<const double> weights,
                                  std::span<const uint8_t> mask);

/// Listwise softmax cross-entropy; valid labels must be >= 0. All-zero-label
/// lists contribute 0 and are excluded from the batch denominator.
LossOutput loss_softmax_ce(std::span<const double> labels, std::span<const double> scores,
                           std::span<const double> weights, std::span<const uint8_t> mask);

/// Negative log Plackett-Luce likelihood of the label-sorted permutation,
/// ties broken by a seeded shuffle, weighted by the mean valid-item weight.
LossOutput loss_listmle(std::span<const double> labels, std::span<const double> scores,
                        std::span<const double> weights, std::span<const uint8_t> mask,
                        Rng rng);

/// Batch-level loss: sum of per-list values divided by the count of
/// contributing lists (0 when none contribute).
struct BatchLoss {
  double value = 0.0;
  Matrix grad_scores;  // same shape as the score matrix
  size_t contributing_lists = 0;
};

/// Uniform batch signature produced by the factory. Rows of the matrices are
/// lists; `mask` is row-major batch_size * list_size.
using LossFn =
    std::function<BatchLoss(const Matrix& labels, const Matrix& scores, const Matrix& weights,
                            const std::vector<uint8_t>& mask, const Rng& rng)>;

LossFn make_loss_fn(LossKey key);

}  // namespace ltr
