#pragma once

#include <functional>
#include <span>

#include "oretag/tensor.hpp"

namespace oretag {

// Compares reverse-mode gradients of a scalar function against central
// differences. Returns max over coordinates of
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
//
// `f` closes over `leaves`; their values are perturbed in place and
// restored. Raises ContractError when f is not scalar-valued.
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> leaves, double eps = 1e-4);

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps = 1e-4);

}  // namespace oretag
