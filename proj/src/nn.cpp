#include "ltr/nn.hpp"

#include <cmath>
#include <string>

#include "ltr/errors.hpp"

namespace ltr {

namespace {
void check_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(where) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
  }
}
}  // namespace

Matrix dense_forward(const Matrix& input, const DenseLayerParams& layer) {
  if (input.cols != layer.in_dim()) {
    throw DimensionError("dense_forward: input " + input.shape_str() + " vs weight " +
                         layer.weight.shape_str());
  }
  if (layer.bias.size() != layer.out_dim()) {
    throw DimensionError("dense_forward: bias size " + std::to_string(layer.bias.size()) +
                         " vs weight " + layer.weight.shape_str());
  }
  const size_t n = input.rows, in = layer.in_dim(), out = layer.out_dim();
  Matrix result(n, out);
  for (size_t b = 0; b < n; ++b) {
    double* out_row = result.row(b);
    for (size_t o = 0; o < out; ++o) out_row[o] = layer.bias[o];
    const double* in_row = input.row(b);
    for (size_t i = 0; i < in; ++i) {
      const double x = in_row[i];
      const double* w_row = layer.weight.row(i);
      for (size_t o = 0; o < out; ++o) out_row[o] += x * w_row[o];
    }
  }
  return result;
}

DenseBackwardResult dense_backward(const Matrix& input, const DenseLayerParams& layer,
                                   const Matrix& upstream_grad) {
  if (input.cols != layer.in_dim()) {
    throw DimensionError("dense_backward: input " + input.shape_str() + " vs weight " +
                         layer.weight.shape_str());
  }
  if (upstream_grad.rows != input.rows || upstream_grad.cols != layer.out_dim()) {
    throw DimensionError("dense_backward: upstream " + upstream_grad.shape_str() +
                         " vs expected " + std::to_string(input.rows) + "x" +
                         std::to_string(layer.out_dim()));
  }
  const size_t n = input.rows, in = layer.in_dim(), out = layer.out_dim();
  DenseBackwardResult r;
  r.grad_input = Matrix(n, in);
  r.grad_weight = Matrix(in, out);
  r.grad_bias.assign(out, 0.0);

  for (size_t b = 0; b < n; ++b) {
    const double* up = upstream_grad.row(b);
    const double* in_row = input.row(b);
    double* gin = r.grad_input.row(b);
    for (size_t o = 0; o < out; ++o) r.grad_bias[o] += up[o];
    for (size_t i = 0; i < in; ++i) {
      const double* w_row = layer.weight.row(i);
      double* gw_row = r.grad_weight.row(i);
      double acc = 0.0;
      const double x = in_row[i];
      for (size_t o = 0; o < out; ++o) {
        acc += up[o] * w_row[o];
        gw_row[o] += x * up[o];
      }
      gin[i] = acc;
    }
  }
  return r;
}

Matrix relu(const Matrix& input) {
  Matrix result = input;
  for (double& v : result.data) v = v > 0.0 ? v : 0.0;
  return result;
}

Matrix relu_backward(const Matrix& input, const Matrix& upstream_grad) {
  check_same_shape(input, upstream_grad, "relu_backward");
  Matrix result(input.rows, input.cols);
  for (size_t i = 0; i < input.data.size(); ++i) {
    result.data[i] = input.data[i] > 0.0 ? upstream_grad.data[i] : 0.0;
  }
  return result;
}

std::pair<Matrix, Matrix> dropout(const Matrix& input, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  Matrix mask(input.rows, input.cols, 1.0);
  if (!training || rate == 0.0) {
    return {input, mask};
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix output = input;
  for (size_t i = 0; i < output.data.size(); ++i) {
    if (rng.next_double() < rate) {
      mask.data[i] = 0.0;
      output.data[i] = 0.0;
    } else {
      mask.data[i] = keep_scale;
      output.data[i] *= keep_scale;
    }
  }
  return {output, mask};
}

void adagrad_update(std::span<double> params, std::span<const double> grads,
                    std::span<double> accum, const AdagradOptions& options,
                    std::string_view block_name) {
  if (params.size() != grads.size() || params.size() != accum.size()) {
    throw DimensionError("adagrad_update: size mismatch in block '" +
                         std::string(block_name) + "'");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) {
      throw NumericError("adagrad_update: non-finite gradient in block '" +
                         std::string(block_name) + "'");
    }
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    accum[i] += g * g;
    params[i] -= options.learning_rate * g / (std::sqrt(accum[i]) + options.epsilon);
  }
}

}  // namespace ltr
