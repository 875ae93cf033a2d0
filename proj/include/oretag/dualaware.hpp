#pragma once

#include <cstddef>
#include <vector>

#include "oretag/random.hpp"
#include "oretag/tagspace.hpp"
#include "oretag/tensor.hpp"

// Argument-conditioned attention over encoder states plus a stacked
// convolution that summarizes the whole sentence into one vector.
namespace oretag::dual {

// score_t = v . tanh(h_t W_s + a W_p)
struct AttentionParams {
  Tensor state_weights;  // (state_dim x score_dim)
  Tensor pair_weights;   // (pair_dim x score_dim)
  Tensor projection;     // (score_dim)

  static AttentionParams init(std::size_t state_dim, std::size_t pair_dim, std::size_t score_dim,
                              Rng& rng);
  std::vector<Tensor> leaves() const;
};

struct Attention {
  Tensor weights;   // (T), sums to 1
  Tensor features;  // (T x state_dim), row t scaled by weights[t]
};

Attention attend(const Tensor& states, const Tensor& pair, const AttentionParams& params);

// Mean of the rows of `embedded` (T x dim) at each argument's positions,
// concatenated: [mean(arg1) ; mean(arg2)].
Tensor pair_embedding(const Tensor& embedded, const SpanSet& arg1, const SpanSet& arg2);

struct ConvLayer {
  std::size_t width = 0;
  Tensor filters;  // (width * channels_in x channels_out)
  Tensor bias;     // (channels_out)
};

// Layer i (from 1) has window width 2i + 1: 3, 5, 7, ...
struct ConvStackParams {
  std::vector<ConvLayer> layers;

  static ConvStackParams init(std::size_t input, std::size_t filters, std::size_t depth, Rng& rng);
  std::vector<Tensor> leaves() const;
};

// Runs every layer as relu(window * W + b) with length-preserving zero
// padding, then takes the per-channel maximum over time. Only the first
// `length` rows are real when length > 0; the rest are zeroed before each
// layer and excluded from the maximum.
Tensor conv_stack(const Tensor& x, const ConvStackParams& params, std::size_t length = 0);

// Appends the sentence vector to every row: (T x n), (m) -> (T x n+m).
Tensor fuse(const Tensor& local, const Tensor& global);

}  // namespace oretag::dual
