#include "oretag/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "oretag/errors.hpp"

namespace oretag {

namespace {

double evaluate(const std::function<Tensor()>& f) {
  NoGradScope no_grad;
  Tensor y = f();
  if (y.size() != 1) throw ContractError("grad_check: function is not scalar-valued");
  return y.item();
}

}  // namespace

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> leaves, double eps) {
  std::vector<std::vector<double>> analytic;
  {
    for (auto& leaf : leaves) {
      leaf.set_requires_grad(true);
      leaf.zero_grad();
    }
    Tape tape;
    Tape::Scope scope(tape);
    Tensor y = f();
    if (y.size() != 1) throw ContractError("grad_check: function is not scalar-valued");
    tape.backward(y);
    for (auto& leaf : leaves) {
      auto g = leaf.mutable_grad();
      analytic.emplace_back(g.begin(), g.end());
    }
  }

  double worst = 0.0;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto values = leaves[l].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double plus = evaluate(f);
      values[i] = saved - eps;
      const double minus = evaluate(f);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[l][i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps) {
  Tensor leaves[] = {x};
  return grad_check([&] { return f(x); }, leaves, eps);
}

}  // namespace oretag
