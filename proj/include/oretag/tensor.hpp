#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oretag {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major array of doubles with an optional gradient buffer.
//
// Tensor is a handle: copies share storage. Parameters are leaves created
// with requires_grad; every op output produced while a Tape is active and
// any operand requires_grad is itself marked requires_grad and recorded.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  // Leading dimension of a rank-2 tensor.
  std::size_t rows() const;
  // Last dimension.
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  // Empty span if no gradient has been allocated.
  std::span<const double> grad() const;
  // Allocates a zero gradient on first use. The gradient is an
  // accumulator attached to the shared storage, so it stays writable
  // through const handles held by recorded tape entries.
  std::span<double> mutable_grad() const;
  void zero_grad() const;

  // Deep copy of the values without gradient or tape history.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  const Node& node() const;
  Node& node();

  std::shared_ptr<Node> node_;
};

// Ordered record of primitive applications for reverse-mode differentiation.
//
// A tape is activated on the current thread with Tape::Scope. Ops consult
// Tape::active() and append an entry whenever one of their operands
// requires a gradient.
class Tape {
 public:
  using Backward = std::function<void()>;

  struct Entry {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    Backward backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Appends an entry. `fn` reads output.grad() and accumulates into the
  // gradients of `inputs`.
  void record(std::string_view op, std::vector<Tensor> inputs, Tensor output,
              Backward fn);

  // Seeds d(loss)/d(loss) = 1 and replays the entries in reverse order.
  // Gradients accumulate additively, so callers zero leaves between steps.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

  static Tape* active();

  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

 private:
  std::vector<Entry> entries_;
};

// Suspends recording on the current thread (e.g. for validation passes
// inside a training step).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace oretag
