#pragma once

#include <limits>
#include <vector>

#include "ltr/feature.hpp"
#include "ltr/matrix.hpp"
#include "ltr/nn.hpp"
#include "ltr/rng.hpp"

namespace ltr {

enum class Mode { kTrain, kEval, kPredict };

/// Feedforward scorer shape. The network input is the concatenation of
/// group_size per-item feature blocks and the context block; the output layer
/// emits one logit per group member.
struct ScorerArchitecture {
  std::vector<size_t> hidden_dims{128, 128, 128};
  double dropout_rate = 0.5;
  size_t group_size = 1;
  bool group_shuffle = false;  // seeded reorder of valid items before windowing
};

/// Hidden layers plus the output layer. Weights uniform in
/// [-1/sqrt(in_dim), +1/sqrt(in_dim)], biases zero.
std::vector<DenseLayerParams> init_scorer_layers(const ScorerArchitecture& arch,
                                                 size_t per_item_width, size_t context_width,
                                                 Rng rng);

/// Circular sliding windows over the valid items: group g holds ordinals
/// (origin + g + j) mod valid_count for j in [0, group_size). Every valid
/// item lands in exactly group_size member slots; padded items in none.
std::vector<std::vector<size_t>> make_groups(size_t list_size, size_t group_size,
                                             size_t valid_count, size_t origin = 0);

/// Everything the backward pass needs from a train-mode forward.
struct ScoreCache {
  bool valid = false;
  Mode mode = Mode::kEval;
  size_t batch_size = 0;
  size_t list_size = 0;
  size_t group_size = 0;
  size_t per_item_width = 0;
  size_t context_width = 0;
  std::vector<std::vector<std::vector<size_t>>> groups;  // [list][group][pos] -> slot
  std::vector<size_t> row_offset;                        // first input row per list
  std::vector<Matrix> layer_inputs;                      // input to each dense layer
  std::vector<Matrix> preactivations;                    // hidden layers only
  std::vector<Matrix> dropout_masks;                     // hidden layers only
  std::vector<double> vote_counts;                       // logits received per slot
};

/// Per-slot scores with padded slots pinned to -inf so they always rank last.
struct ScoredBatch {
  Matrix scores;  // batch_size x list_size
  std::vector<uint8_t> mask;
};

constexpr double kPaddedScore = -std::numeric_limits<double>::infinity();

/// Groupwise scoring: slice circular windows, run the scorer on each group,
/// and average the logits every item received (the voting layer).
/// `rng` seeds dropout and the optional item shuffle; eval and predict modes
/// draw nothing and are bit-deterministic.
ScoredBatch score_groupwise(const EncodedBatch& encoded,
                            const std::vector<DenseLayerParams>& layers,
                            const ScorerArchitecture& arch, Mode mode, const Rng& rng,
                            ScoreCache* cache = nullptr, size_t group_origin = 0);

/// Univariate path (requires group_size == 1): each item is scored from its
/// own features and the context only.
ScoredBatch score_univariate(const EncodedBatch& encoded,
                             const std::vector<DenseLayerParams>& layers,
                             const ScorerArchitecture& arch, Mode mode, const Rng& rng,
                             ScoreCache* cache = nullptr);

/// Parameter and input gradients of the scorer.
struct ScorerGrads {
  std::vector<DenseLayerGrads> layers;
  Matrix d_per_item;  // (batch_size * list_size) x per_item_width
  Matrix d_context;   // batch_size x context_width
};

/// Exact gradients of the mean-voting forward; dropout masks are reused from
/// the cached forward. Throws StateError without a cached train forward.
ScorerGrads scorer_backward(const ScoreCache& cache,
                            const std::vector<DenseLayerParams>& layers,
                            const Matrix& upstream_score_grads);

}  // namespace ltr
