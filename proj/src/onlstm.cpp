#include "oretag/onlstm.hpp"

#include <cmath>
#include <string>

#include "oretag/errors.hpp"
#include "oretag/ops.hpp"

namespace oretag::onlstm {

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& v : t.mutable_values()) v = rng.uniform(-bound, bound);
  return t;
}

void check_params(const Params& p) {
  const std::size_t width = kGates * p.hidden;
  if (p.hidden == 0 || p.input == 0 || p.input_weights.shape() != Shape{p.input, width} ||
      p.recurrent_weights.shape() != Shape{p.hidden, width} || p.bias.shape() != Shape{width}) {
    throw ShapeError("onlstm: parameter shapes inconsistent with input " +
                     std::to_string(p.input) + ", hidden " + std::to_string(p.hidden));
  }
}

struct Gates {
  Tensor forget, input, candidate, output, master_forget, master_input, overlap, cell, hidden;
};

// `projected` already holds W x + b for this step.
Gates step_from_projection(const Params& p, const Tensor& projected, const State& prev) {
  using namespace ops;
  const std::size_t d = p.hidden;
  const Tensor pre = add(projected, matmul(prev.h, p.recurrent_weights));
  const auto block = [&](Gate g) { return slice_last(pre, static_cast<std::size_t>(g) * d, d); };

  Gates g;
  g.forget = sigmoid(block(Gate::kForget));
  g.input = sigmoid(block(Gate::kInput));
  g.candidate = tanh(block(Gate::kCandidate));
  g.output = sigmoid(block(Gate::kOutput));
  g.master_forget = cumax(block(Gate::kMasterForget));
  g.master_input = cumax(block(Gate::kMasterInput));
  if (p.master_input_complement) g.master_input = affine(g.master_input, -1.0, 1.0);
  g.overlap = hadamard(g.master_forget, g.master_input);

  // c_t = w o (f o c_prev + i o c_hat) + (f_master - w) o c_prev + (i_master - w) o c_hat
  const Tensor inner = add(hadamard(g.forget, prev.c), hadamard(g.input, g.candidate));
  g.cell = add(add(hadamard(g.overlap, inner), hadamard(sub(g.master_forget, g.overlap), prev.c)),
               hadamard(sub(g.master_input, g.overlap), g.candidate));
  g.hidden = hadamard(g.output, tanh(g.cell));
  return g;
}

Tensor project(const Params& p, const Tensor& x) {
  check_params(p);
  if (x.cols() != p.input) {
    throw ShapeError("onlstm: input width " + std::to_string(x.cols()) + " != " +
                     std::to_string(p.input));
  }
  return ops::add(ops::matmul(x, p.input_weights), p.bias);
}

void check_state(const Params& p, const State& s) {
  if (s.h.shape() != Shape{p.hidden} || s.c.shape() != Shape{p.hidden}) {
    throw ShapeError("onlstm: state shape does not match hidden size " + std::to_string(p.hidden));
  }
}

std::vector<double> copy(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

Params Params::init(std::size_t input, std::size_t hidden, Rng& rng) {
  if (input == 0 || hidden == 0) throw ConfigError("onlstm: sizes must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  Params p;
  p.input = input;
  p.hidden = hidden;
  p.input_weights = uniform_tensor({input, kGates * hidden}, bound, rng);
  p.recurrent_weights = uniform_tensor({hidden, kGates * hidden}, bound, rng);
  p.bias = uniform_tensor({kGates * hidden}, bound, rng);
  return p;
}

std::vector<Tensor> Params::leaves() const { return {input_weights, recurrent_weights, bias}; }

State State::zero(std::size_t hidden) {
  return {Tensor::zeros({hidden}), Tensor::zeros({hidden})};
}

State cell_step(const Params& params, const Tensor& x, const State& prev) {
  if (x.rank() != 1) throw ShapeError("onlstm: cell input must be a vector, got " + shape_string(x.shape()));
  const Tensor projected = project(params, x);
  check_state(params, prev);
  Gates g = step_from_projection(params, projected, prev);
  return {g.hidden, g.cell};
}

StepTrace trace_step(const Params& params, const Tensor& x, const State& prev) {
  NoGradScope no_grad;
  const Tensor projected = project(params, x);
  check_state(params, prev);
  Gates g = step_from_projection(params, projected, prev);
  return {copy(g.forget),        copy(g.input),        copy(g.candidate),
          copy(g.output),        copy(g.master_forget), copy(g.master_input),
          copy(g.overlap),       copy(g.cell),          copy(g.hidden)};
}

Tensor encode_bidirectional(const Params& fw, const Params& bw, const Tensor& x) {
  if (x.rank() != 2) throw InputError("onlstm: encoder input must be a (T x input) matrix");
  if (fw.hidden != bw.hidden) throw ShapeError("onlstm: forward/backward hidden sizes differ");
  const std::size_t steps = x.rows();
  const Tensor fw_proj = project(fw, x);
  const Tensor bw_proj = project(bw, x);

  std::vector<Tensor> fw_rows(steps), bw_rows(steps);
  State state = State::zero(fw.hidden);
  for (std::size_t t = 0; t < steps; ++t) {
    Gates g = step_from_projection(fw, ops::row(fw_proj, t), state);
    state = {g.hidden, g.cell};
    fw_rows[t] = g.hidden;
  }
  state = State::zero(bw.hidden);
  for (std::size_t t = steps; t-- > 0;) {
    Gates g = step_from_projection(bw, ops::row(bw_proj, t), state);
    state = {g.hidden, g.cell};
    bw_rows[t] = g.hidden;
  }
  return ops::concat(ops::stack_rows(fw_rows), ops::stack_rows(bw_rows));
}

}  // namespace oretag::onlstm
