#pragma once

#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "ltr/matrix.hpp"
#include "ltr/rng.hpp"

namespace ltr {

/// One fully connected layer: y = x W + b.
struct DenseLayerParams {
  Matrix weight;             // in_dim x out_dim
  std::vector<double> bias;  // out_dim

  size_t in_dim() const { return weight.rows; }
  size_t out_dim() const { return weight.cols; }
};

struct DenseLayerGrads {
  Matrix weight;
  std::vector<double> bias;
};

/// output[b][o] = sum_i input[b][i] * weight[i][o] + bias[o]
Matrix dense_forward(const Matrix& input, const DenseLayerParams& layer);

struct DenseBackwardResult {
  Matrix grad_input;
  Matrix grad_weight;
  std::vector<double> grad_bias;
};

DenseBackwardResult dense_backward(const Matrix& input, const DenseLayerParams& layer,
                                   const Matrix& upstream_grad);

/// max(0, x) element-wise.
Matrix relu(const Matrix& input);

/// Passes upstream where input > 0. Subgradient at exactly 0 is 0.
Matrix relu_backward(const Matrix& input, const Matrix& upstream_grad);

/// Inverted dropout. In training mode each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate); the returned mask holds the
/// applied factor per element so output = input (*) mask and the backward pass
/// is upstream (*) mask. In eval mode this is the identity (mask of ones).
std::pair<Matrix, Matrix> dropout(const Matrix& input, double rate, Rng& rng, bool training);

/// Adagrad hyperparameters. Defaults follow the framework conventions the
/// experiments were tuned with; all of them are config-overridable.
struct AdagradOptions {
  double learning_rate = 0.1;
  double epsilon = 1e-8;
  double initial_accumulator = 0.1;
};

/// acc += g^2; theta -= lr * g / (sqrt(acc) + eps), element-wise.
/// Throws NumericError naming `block_name` if a gradient entry is non-finite.
void adagrad_update(std::span<double> params, std::span<const double> grads,
                    std::span<double> accum, const AdagradOptions& options,
                    std::string_view block_name);

}  // namespace ltr
