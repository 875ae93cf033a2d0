#include "oretag/dualaware.hpp"

#include <cmath>
#include <string>

#include "oretag/errors.hpp"
#include "oretag/ops.hpp"

namespace oretag::dual {

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& v : t.mutable_values()) v = rng.uniform(-bound, bound);
  return t;
}

double glorot(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

AttentionParams AttentionParams::init(std::size_t state_dim, std::size_t pair_dim,
                                      std::size_t score_dim, Rng& rng) {
  AttentionParams p;
  p.state_weights = uniform_tensor({state_dim, score_dim}, glorot(state_dim, score_dim), rng);
  p.pair_weights = uniform_tensor({pair_dim, score_dim}, glorot(pair_dim, score_dim), rng);
  p.projection = uniform_tensor({score_dim}, glorot(score_dim, 1), rng);
  return p;
}

std::vector<Tensor> AttentionParams::leaves() const {
  return {state_weights, pair_weights, projection};
}

Attention attend(const Tensor& states, const Tensor& pair, const AttentionParams& params) {
  using namespace ops;
  if (states.rank() != 2) throw ShapeError("attend: states must be (T x dim), got " + shape_string(states.shape()));
  if (pair.rank() != 1) throw ShapeError("attend: pair embedding must be a vector");
  const Tensor pair_term = matmul(pair, params.pair_weights);
  const Tensor scores = matmul(tanh(add(matmul(states, params.state_weights), pair_term)),
                               params.projection);
  Tensor alpha = softmax(scores);
  Tensor features = scale_rows(states, alpha);
  return {alpha, features};
}

Tensor pair_embedding(const Tensor& embedded, const SpanSet& arg1, const SpanSet& arg2) {
  if (arg1.empty() || arg2.empty()) throw InputError("pair_embedding: empty argument span");
  return ops::concat(ops::mean_rows(ops::gather_rows(embedded, arg1.positions)),
                     ops::mean_rows(ops::gather_rows(embedded, arg2.positions)));
}

ConvStackParams ConvStackParams::init(std::size_t input, std::size_t filters, std::size_t depth,
                                      Rng& rng) {
  if (depth == 0) throw ConfigError("conv_stack: depth must be at least 1");
  if (input == 0 || filters == 0) throw ConfigError("conv_stack: sizes must be positive");
  ConvStackParams p;
  std::size_t channels = input;
  for (std::size_t i = 1; i <= depth; ++i) {
    ConvLayer layer;
    layer.width = 2 * i + 1;
    const std::size_t fan_in = layer.width * channels;
    layer.filters = uniform_tensor({fan_in, filters}, glorot(fan_in, filters), rng);
    layer.bias = Tensor::zeros({filters}, true);
    p.layers.push_back(std::move(layer));
    channels = filters;
  }
  return p;
}

std::vector<Tensor> ConvStackParams::leaves() const {
  std::vector<Tensor> out;
  for (const auto& layer : layers) {
    out.push_back(layer.filters);
    out.push_back(layer.bias);
  }
  return out;
}

Tensor conv_stack(const Tensor& x, const ConvStackParams& params, std::size_t length) {
  using namespace ops;
  if (params.layers.empty()) throw ConfigError("conv_stack: no layers configured");
  if (x.rank() != 2) throw ShapeError("conv_stack: input must be (T x channels), got " + shape_string(x.shape()));
  if (length > x.rows()) throw InputError("conv_stack: length exceeds the number of rows");
  const bool padded = length > 0 && length < x.rows();
  Tensor h = padded ? mask_rows(x, length) : x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const ConvLayer& layer = params.layers[i];
    if (layer.width != 2 * (i + 1) + 1) {
      throw ConfigError("conv_stack: layer " + std::to_string(i + 1) + " has width " +
                        std::to_string(layer.width) + ", expected " + std::to_string(2 * i + 3));
    }
    if (layer.filters.rows() != layer.width * h.cols()) {
      throw ShapeError("conv_stack: layer " + std::to_string(i + 1) + " filters " +
                       shape_string(layer.filters.shape()) + " do not fit " +
                       std::to_string(h.cols()) + " input channels");
    }
    h = relu(add(matmul(unfold(h, layer.width), layer.filters), layer.bias));
    if (padded) h = mask_rows(h, length);
  }
  return max_over_time(h, length);
}

Tensor fuse(const Tensor& local, const Tensor& global) {
  if (local.rank() != 2 || global.rank() != 1) {
    throw ShapeError("fuse: expected (T x n) and (m), got " + shape_string(local.shape()) + " and " +
                     shape_string(global.shape()));
  }
  return ops::concat(local, ops::repeat_rows(global, local.rows()));
}

}  // namespace oretag::dual
