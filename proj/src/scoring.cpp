#include "ltr/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ltr/errors.hpp"

namespace ltr {

std::vector<DenseLayerParams> init_scorer_layers(const ScorerArchitecture& arch,
                                                 size_t per_item_width, size_t context_width,
                                                 Rng rng) {
  if (arch.hidden_dims.empty()) throw ConfigError("scorer: hidden_dims must be non-empty");
  if (arch.group_size < 1) throw ConfigError("scorer: group_size must be >= 1");
  std::vector<size_t> dims;
  dims.push_back(arch.group_size * per_item_width + context_width);
  for (size_t h : arch.hidden_dims) dims.push_back(h);
  dims.push_back(arch.group_size);

  std::vector<DenseLayerParams> layers;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    Rng layer_rng = rng.fork("layer", l);
    DenseLayerParams layer;
    layer.weight = random_matrix(dims[l], dims[l + 1], -bound, bound, layer_rng);
    layer.bias.assign(dims[l + 1], 0.0);
    layers.push_back(std::move(layer));
  }
  return layers;
}

std::vector<std::vector<size_t>> make_groups(size_t list_size, size_t group_size,
                                             size_t valid_count, size_t origin) {
  if (group_size < 1 || group_size > list_size) {
    throw ConfigError("make_groups: group_size " + std::to_string(group_size) +
                      " outside [1, list_size=" + std::to_string(list_size) + "]");
  }
  std::vector<std::vector<size_t>> groups;
  if (valid_count == 0) return groups;
  groups.reserve(valid_count);
  for (size_t g = 0; g < valid_count; ++g) {
    std::vector<size_t> members(group_size);
    for (size_t j = 0; j < group_size; ++j) {
      members[j] = (origin + g + j) % valid_count;
    }
    groups.push_back(std::move(members));
  }
  return groups;
}

ScoredBatch score_groupwise(const EncodedBatch& encoded,
                            const std::vector<DenseLayerParams>& layers,
                            const ScorerArchitecture& arch, Mode mode, const Rng& rng,
                            ScoreCache* cache, size_t group_origin) {
  const size_t B = encoded.batch_size;
  const size_t L = encoded.list_size;
  const size_t E = encoded.per_item.cols;
  const size_t C = encoded.context.cols;
  const size_t gs = arch.group_size;
  const size_t input_width = gs * E + C;
  const size_t hidden_count = arch.hidden_dims.size();
  if (layers.size() != hidden_count + 1) {
    throw DimensionError("scorer: expected " + std::to_string(hidden_count + 1) +
                         " layers, got " + std::to_string(layers.size()));
  }
  if (layers.front().in_dim() != input_width) {
    throw DimensionError("scorer: input width " + std::to_string(input_width) +
                         " vs first layer " + layers.front().weight.shape_str());
  }
  if (layers.back().out_dim() != gs) {
    throw DimensionError("scorer: output width " + std::to_string(layers.back().out_dim()) +
                         " vs group_size " + std::to_string(gs));
  }
  const bool training = mode == Mode::kTrain;

  // Slice circular windows per list, over valid slots only.
  std::vector<std::vector<std::vector<size_t>>> groups(B);
  std::vector<size_t> row_offset(B, 0);
  size_t total_rows = 0;
  for (size_t b = 0; b < B; ++b) {
    std::vector<size_t> valid_slots;
    for (size_t i = 0; i < L; ++i) {
      if (encoded.mask[b * L + i]) valid_slots.push_back(i);
    }
    if (training && arch.group_shuffle) {
      Rng shuffle_rng = rng.fork("group_shuffle", b);
      shuffle_rng.shuffle(valid_slots);
    }
    // Serving lists may be shorter than group_size; windows still wrap over
    // whatever valid items there are.
    auto ordinal_groups = make_groups(std::max(L, gs), gs, valid_slots.size(), group_origin);
    groups[b].reserve(ordinal_groups.size());
    for (const auto& g : ordinal_groups) {
      std::vector<size_t> slots(gs);
      for (size_t j = 0; j < gs; ++j) slots[j] = valid_slots[g[j]];
      groups[b].push_back(std::move(slots));
    }
    row_offset[b] = total_rows;
    total_rows += groups[b].size();
  }

  Matrix x0(total_rows, input_width);
  for (size_t b = 0; b < B; ++b) {
    for (size_t g = 0; g < groups[b].size(); ++g) {
      double* row = x0.row(row_offset[b] + g);
      for (size_t j = 0; j < gs; ++j) {
        const double* item = encoded.per_item.row(b * L + groups[b][g][j]);
        std::copy(item, item + E, row + j * E);
      }
      const double* ctx = encoded.context.row(b);
      std::copy(ctx, ctx + C, row + gs * E);
    }
  }

  // Forward through the MLP, caching what the backward pass reuses.
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> preactivations;
  std::vector<Matrix> dropout_masks;
  Rng dropout_rng = rng.fork("dropout");
  Matrix current = std::move(x0);
  for (size_t l = 0; l < hidden_count; ++l) {
    layer_inputs.push_back(current);
    Matrix pre = dense_forward(current, layers[l]);
    Matrix activated = relu(pre);
    auto [dropped, drop_mask] = dropout(activated, arch.dropout_rate, dropout_rng, training);
    preactivations.push_back(std::move(pre));
    dropout_masks.push_back(std::move(drop_mask));
    current = std::move(dropped);
  }
  layer_inputs.push_back(current);
  Matrix logits = dense_forward(layer_inputs.back(), layers.back());

  // Voting layer: each slot's score is the mean of the logits it received.
  ScoredBatch out;
  out.scores = Matrix(B, L, 0.0);
  out.mask = encoded.mask;
  std::vector<double> vote_counts(B * L, 0.0);
  for (size_t b = 0; b < B; ++b) {
    for (size_t g = 0; g < groups[b].size(); ++g) {
      const double* lrow = logits.row(row_offset[b] + g);
      for (size_t j = 0; j < gs; ++j) {
        const size_t slot = b * L + groups[b][g][j];
        out.scores.data[slot] += lrow[j];
        vote_counts[slot] += 1.0;
      }
    }
  }
  for (size_t s = 0; s < B * L; ++s) {
    if (!encoded.mask[s]) {
      out.scores.data[s] = kPaddedScore;
    } else if (vote_counts[s] > 0.0) {
      out.scores.data[s] /= vote_counts[s];
    }
  }

  if (cache) {
    cache->valid = true;
    cache->mode = mode;
    cache->batch_size = B;
    cache->list_size = L;
    cache->group_size = gs;
    cache->per_item_width = E;
    cache->context_width = C;
    cache->groups = std::move(groups);
    cache->row_offset = std::move(row_offset);
    cache->layer_inputs = std::move(layer_inputs);
    cache->preactivations = std::move(preactivations);
    cache->dropout_masks = std::move(dropout_masks);
    cache->vote_counts = std::move(vote_counts);
  }
  return out;
}

ScoredBatch score_univariate(const EncodedBatch& encoded,
                             const std::vector<DenseLayerParams>& layers,
                             const ScorerArchitecture& arch, Mode mode, const Rng& rng,
                             ScoreCache* cache) {
  if (arch.group_size != 1) {
    throw ConfigError("score_univariate requires group_size == 1, got " +
                      std::to_string(arch.group_size));
  }
  return score_groupwise(encoded, layers, arch, mode, rng, cache);
}

ScorerGrads scorer_backward(const ScoreCache& cache,
                            const std::vector<DenseLayerParams>& layers,
                            const Matrix& upstream_score_grads) {
  if (!cache.valid) throw StateError("scorer_backward: no cached forward pass");
  const size_t B = cache.batch_size;
  const size_t L = cache.list_size;
  const size_t gs = cache.group_size;
  const size_t E = cache.per_item_width;
  const size_t C = cache.context_width;
  if (upstream_score_grads.rows != B || upstream_score_grads.cols != L) {
    throw DimensionError("scorer_backward: upstream " + upstream_score_grads.shape_str() +
                         " vs scores " + std::to_string(B) + "x" + std::to_string(L));
  }

  // Undo the voting layer: each received logit gets upstream / vote_count.
  const size_t total_rows = cache.layer_inputs.front().rows;
  Matrix dlogits(total_rows, gs);
  for (size_t b = 0; b < B; ++b) {
    for (size_t g = 0; g < cache.groups[b].size(); ++g) {
      double* drow = dlogits.row(cache.row_offset[b] + g);
      for (size_t j = 0; j < gs; ++j) {
        const size_t slot = b * L + cache.groups[b][g][j];
        drow[j] += upstream_score_grads.data[slot] / cache.vote_counts[slot];
      }
    }
  }

  ScorerGrads grads;
  grads.layers.resize(layers.size());

  auto back = dense_backward(cache.layer_inputs.back(), layers.back(), dlogits);
  grads.layers.back().weight = std::move(back.grad_weight);
  grads.layers.back().bias = std::move(back.grad_bias);
  Matrix upstream = std::move(back.grad_input);

  for (size_t l = cache.preactivations.size(); l-- > 0;) {
    if (cache.mode == Mode::kTrain && !cache.dropout_masks[l].empty()) {
      for (size_t i = 0; i < upstream.data.size(); ++i) {
        upstream.data[i] *= cache.dropout_masks[l].data[i];
      }
    }
    upstream = relu_backward(cache.preactivations[l], upstream);
    auto b = dense_backward(cache.layer_inputs[l], layers[l], upstream);
    grads.layers[l].weight = std::move(b.grad_weight);
    grads.layers[l].bias = std::move(b.grad_bias);
    upstream = std::move(b.grad_input);
  }

  // Scatter input-row gradients back to per-item and context blocks.
  grads.d_per_item = Matrix(B * L, E);
  grads.d_context = Matrix(B, C);
  for (size_t b = 0; b < B; ++b) {
    double* dctx = grads.d_context.row(b);
    for (size_t g = 0; g < cache.groups[b].size(); ++g) {
      const double* drow = upstream.row(cache.row_offset[b] + g);
      for (size_t j = 0; j < gs; ++j) {
        double* ditem = grads.d_per_item.row(b * L + cache.groups[b][g][j]);
        for (size_t d = 0; d < E; ++d) ditem[d] += drow[j * E + d];
      }
      for (size_t d = 0; d < C; ++d) dctx[d] += drow[gs * E + d];
    }
  }
  return grads;
}

}  // namespace ltr
