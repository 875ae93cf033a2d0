#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "oretag/tensor.hpp"

// Linear-chain CRF over K labels.
//
// Emissions P are (T x K). Transitions A are (K+2 x K+2): rows/columns
// 0..K-1 are labels, K is the virtual start symbol and K+1 the end symbol.
// A path y scores
//   A[start, y_0] + sum_i A[y_i, y_{i+1}] + A[y_{T-1}, end] + sum_i P[i, y_i].
namespace oretag::crf {

inline std::size_t start_index(std::size_t labels) { return labels; }
inline std::size_t end_index(std::size_t labels) { return labels + 1; }

// Zero transitions for `labels` tags, optionally a trainable leaf.
Tensor make_transitions(std::size_t labels, bool requires_grad = false);

double score(const Tensor& emissions, const Tensor& transitions,
             std::span<const std::size_t> labels);

// log of the sum of exp(score) over all K^T paths (forward recursion).
double log_partition(const Tensor& emissions, const Tensor& transitions);

// Per-position label marginals, (T x K), from forward-backward.
std::vector<double> marginals(const Tensor& emissions, const Tensor& transitions);

// log Z - score(gold). Differentiable with respect to both operands.
Tensor nll_loss(const Tensor& emissions, const Tensor& transitions,
                std::span<const std::size_t> gold);

struct Decoding {
  std::vector<std::size_t> labels;
  double score = 0.0;
  // exp(score - log Z), the probability of the decoded path.
  double confidence = 0.0;
};

// Highest scoring path without any label constraints. Ties resolve to the
// lowest label index.
Decoding viterbi(const Tensor& emissions, const Tensor& transitions);

}  // namespace oretag::crf
