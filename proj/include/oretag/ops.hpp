#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oretag/tensor.hpp"

// Differentiable primitives. Every function records itself on the active
// tape when an operand requires a gradient. Shape violations raise
// ShapeError naming the op and the offending dimensions.
namespace oretag::ops {

// (m x k)(k x n) -> (m x n); (k)(k x n) -> (n); (m x k)(k) -> (m).
Tensor matmul(const Tensor& a, const Tensor& b);

// Same-shape sum, or (m x n) + (n) adding the vector to every row.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
// scale * x + shift, elementwise.
Tensor affine(const Tensor& x, double scale, double shift);

// Concatenates along the last axis. All parts share rank and, for rank 2,
// the number of rows.
Tensor concat(std::span<const Tensor> parts);
Tensor concat(const Tensor& a, const Tensor& b);
// Stacks equal-length vectors into the rows of a matrix.
Tensor stack_rows(std::span<const Tensor> rows);
Tensor row(const Tensor& m, std::size_t r);
// Contiguous slice [begin, begin + length) of the last axis.
Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t length);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

// Softmax / inclusive prefix sum / log-sum-exp over the last axis.
// logsumexp drops the last axis: (n) -> (1), (m x n) -> (m).
Tensor softmax(const Tensor& x);
Tensor cumsum(const Tensor& x);
Tensor logsumexp(const Tensor& x);
// Cumulative softmax: cumsum(softmax(x)). Monotone, ends at 1.
Tensor cumax(const Tensor& x);

// Per-column maximum over the first `length` rows of a (T x C) matrix
// (all rows when length is 0). Ties go to the earliest row.
Tensor max_over_time(const Tensor& x, std::size_t length = 0);

Tensor sum(const Tensor& x);
// Mean of the rows of a (T x n) matrix -> (n).
Tensor mean_rows(const Tensor& x);
// Row t of the (T x n) matrix multiplied by weights[t].
Tensor scale_rows(const Tensor& x, const Tensor& weights);
// (n) -> (count x n).
Tensor repeat_rows(const Tensor& v, std::size_t count);
// Rows of `table` picked by index; gradients scatter-add back.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);
// Sliding windows of `width` rows (odd), centered, zero-padded at both
// ends: (T x C) -> (T x width*C). Row t holds rows t-h..t+h, h = width/2.
Tensor unfold(const Tensor& x, std::size_t width);
// Zeroes rows at index >= length.
Tensor mask_rows(const Tensor& x, std::size_t length);

// Inverted dropout. Identity when !training or p == 0. The mask is a pure
// function of (seed, element index).
Tensor dropout(const Tensor& x, double p, std::uint64_t seed, bool training);

}  // namespace oretag::ops
