#include "oretag/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "oretag/errors.hpp"

namespace oretag {

namespace {

thread_local Tape* g_active_tape = nullptr;

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor: shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor: zero-sized dimension in " + shape_string(shape));
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  auto node = std::make_shared<Node>();
  node->values.assign(element_count(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (values.size() != element_count(shape)) {
    throw ShapeError("tensor: " + std::to_string(values.size()) +
                     " values do not fill shape " + shape_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return from(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return from({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

const Tensor::Node& Tensor::node() const {
  if (!node_) throw ContractError("tensor: use of an undefined tensor");
  return *node_;
}

Tensor::Node& Tensor::node() {
  if (!node_) throw ContractError("tensor: use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }
std::size_t Tensor::size() const { return node().values.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("tensor: rows() needs rank 2, got " + shape_string(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const { return shape().back(); }

std::span<const double> Tensor::values() const { return node().values; }
std::span<double> Tensor::mutable_values() { return node().values; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("tensor: item() on shape " + shape_string(shape()));
  return node().values[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node().values[r * cols() + c];
}

bool Tensor::requires_grad() const { return node().requires_grad; }
void Tensor::set_requires_grad(bool on) { node().requires_grad = on; }
bool Tensor::has_grad() const { return !node().grad.empty(); }
std::span<const double> Tensor::grad() const { return node().grad; }

std::span<double> Tensor::mutable_grad() const {
  if (!node_) throw ContractError("tensor: use of an undefined tensor");
  auto& n = *node_;
  if (n.grad.empty()) n.grad.assign(n.values.size(), 0.0);
  return n.grad;
}

void Tensor::zero_grad() const {
  if (!node_) throw ContractError("tensor: use of an undefined tensor");
  auto& g = node_->grad;
  std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::clone() const { return from(shape(), node().values, false); }

void Tape::record(std::string_view op, std::vector<Tensor> inputs, Tensor output,
                  Backward fn) {
  output.set_requires_grad(true);
  entries_.push_back(Entry{std::string(op), std::move(inputs), std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar tensor, got " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  const auto produced = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) {
    return e.output.same_storage(loss);
  });
  if (produced == entries_.end()) {
    throw ContractError("backward: loss was not produced on this tape");
  }
  // Every input that wants a gradient gets a buffer, even when unreachable
  // from the loss, so leaves are always populated after backward.
  for (auto& e : entries_) {
    for (auto& in : e.inputs) {
      if (in.requires_grad()) in.mutable_grad();
    }
    e.output.mutable_grad();
  }
  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0;
  const auto last = static_cast<std::size_t>(produced - entries_.begin());
  for (std::size_t k = last + 1; k-- > 0;) entries_[k].backward();
}

Tape* Tape::active() { return g_active_tape; }

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

}  // namespace oretag
