#include "oretag/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "oretag/errors.hpp"

namespace oretag::ops {

namespace {

// Tape to record on, or nullptr when no operand needs a gradient.
Tape* tracking(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = Tape::active();
  if (tape == nullptr) return nullptr;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

Tape* tracking(std::span<const Tensor> inputs) {
  Tape* tape = Tape::active();
  if (tape == nullptr) return nullptr;
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) return tape;
  }
  return nullptr;
}

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    shape_fail(op, "operand shapes differ: " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    shape_fail(op, "expected rank " + std::to_string(rank) + ", got " + shape_string(x.shape()));
  }
}

// Rows/last-axis view shared by the last-axis ops.
struct RowView {
  std::size_t rows;
  std::size_t width;
};

RowView row_view(const Tensor& x) { return {x.size() / x.cols(), x.cols()}; }

template <typename F, typename D>
Tensor unary(const char* name, const Tensor& x, F forward, D derivative) {
  std::vector<double> out(x.size());
  auto in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
  Tensor y = Tensor::from(x.shape(), std::move(out));
  if (Tape* tape = tracking({&x})) {
    tape->record(name, {x}, y, [x, y, derivative]() mutable {
      if (!x.requires_grad()) return;
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      auto xv = x.values();
      auto yv = y.values();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * derivative(xv[i], yv[i]);
    });
  }
  return y;
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  // Normalize to (m x k)(k x n).
  std::size_t m = 0, k = 0, n = 0;
  Shape out_shape;
  if (a.rank() == 2 && b.rank() == 2) {
    m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) {
      shape_fail("matmul", "inner dimensions differ: " + shape_string(a.shape()) + " * " +
                               shape_string(b.shape()));
    }
    out_shape = {m, n};
  } else if (a.rank() == 1 && b.rank() == 2) {
    m = 1, k = a.shape()[0], n = b.shape()[1];
    if (b.shape()[0] != k) {
      shape_fail("matmul", "vector length " + std::to_string(k) + " does not match matrix " +
                               shape_string(b.shape()));
    }
    out_shape = {n};
  } else if (a.rank() == 2 && b.rank() == 1) {
    m = a.shape()[0], k = a.shape()[1], n = 1;
    if (b.shape()[0] != k) {
      shape_fail("matmul", "matrix " + shape_string(a.shape()) + " does not match vector length " +
                               std::to_string(b.shape()[0]));
    }
    out_shape = {m};
  } else {
    shape_fail("matmul", "unsupported operand ranks " + shape_string(a.shape()) + " * " +
                             shape_string(b.shape()));
  }

  std::vector<double> out(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  Tensor c = Tensor::from(std::move(out_shape), std::move(out));
  if (Tape* tape = tracking({&a, &b})) {
    tape->record("matmul", {a, b}, c, [a, b, c, m, k, n]() mutable {
      auto gc = c.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        auto bv = b.values();
        for (std::size_t i = 0; i < m; ++i) {
          const double* gcrow = gc.data() + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = bv.data() + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += gcrow[j] * brow[j];
            ga[i * k + p] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        auto av = a.values();
        for (std::size_t i = 0; i < m; ++i) {
          const double* gcrow = gc.data() + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            double* gbrow = gb.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * gcrow[j];
          }
        }
      }
    });
  }
  return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool broadcast = a.rank() == 2 && b.rank() == 1;
  if (broadcast) {
    if (b.size() != a.cols()) {
      shape_fail("add", "cannot broadcast " + shape_string(b.shape()) + " over rows of " +
                            shape_string(a.shape()));
    }
  } else {
    require_same_shape("add", a, b);
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  auto bv = b.values();
  const std::size_t width = b.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[broadcast ? i % width : i];
  Tensor c = Tensor::from(a.shape(), std::move(out));
  if (Tape* tape = tracking({&a, &b})) {
    tape->record("add", {a, b}, c, [a, b, c, broadcast, width]() mutable {
      auto gc = c.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < gc.size(); ++i) gb[broadcast ? i % width : i] += gc[i];
      }
    });
  }
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  Tensor c = Tensor::from(a.shape(), std::move(out));
  if (Tape* tape = tracking({&a, &b})) {
    tape->record("sub", {a, b}, c, [a, b, c]() mutable {
      auto gc = c.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < gc.size(); ++i) gb[i] -= gc[i];
      }
    });
  }
  return c;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape("hadamard", a, b);
  std::vector<double> out(a.size());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Tensor c = Tensor::from(a.shape(), std::move(out));
  if (Tape* tape = tracking({&a, &b})) {
    tape->record("hadamard", {a, b}, c, [a, b, c]() mutable {
      auto gc = c.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        auto bv = b.values();
        for (std::size_t i = 0; i < gc.size(); ++i) ga[i] += gc[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        auto av = a.values();
        for (std::size_t i = 0; i < gc.size(); ++i) gb[i] += gc[i] * av[i];
      }
    });
  }
  return c;
}

Tensor affine(const Tensor& x, double scale, double shift) {
  return unary(
      "affine", x, [scale, shift](double v) { return scale * v + shift; },
      [scale](double, double) { return scale; });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) shape_fail("concat", "no operands");
  const std::size_t rank = parts[0].rank();
  if (rank > 2) shape_fail("concat", "rank " + std::to_string(rank) + " unsupported");
  const std::size_t rows = rank == 2 ? parts[0].rows() : 1;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank || (rank == 2 && p.rows() != rows)) {
      shape_fail("concat", "operand " + shape_string(p.shape()) + " does not match " +
                               shape_string(parts[0].shape()));
    }
    total += p.cols();
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    auto pv = p.values();
    const std::size_t w = p.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * w, w, out.data() + r * total + offset);
    }
    offset += w;
  }
  Shape shape = rank == 2 ? Shape{rows, total} : Shape{total};
  Tensor c = Tensor::from(std::move(shape), std::move(out));
  if (Tape* tape = tracking(parts)) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    tape->record("concat", inputs, c, [inputs, c, rows, total]() mutable {
      auto gc = c.grad();
      std::size_t offset = 0;
      for (auto& p : inputs) {
        const std::size_t w = p.cols();
        if (p.requires_grad()) {
          auto gp = p.mutable_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < w; ++j) gp[r * w + j] += gc[r * total + offset + j];
          }
        }
        offset += w;
      }
    });
  }
  return c;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat(parts);
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) shape_fail("stack_rows", "no rows");
  const std::size_t width = rows[0].size();
  std::vector<double> out;
  out.reserve(rows.size() * width);
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.size() != width) {
      shape_fail("stack_rows", "row " + shape_string(r.shape()) + " is not a vector of length " +
                                   std::to_string(width));
    }
    out.insert(out.end(), r.values().begin(), r.values().end());
  }
  Tensor m = Tensor::matrix(rows.size(), width, std::move(out));
  if (Tape* tape = tracking(rows)) {
    std::vector<Tensor> inputs(rows.begin(), rows.end());
    tape->record("stack_rows", inputs, m, [inputs, m, width]() mutable {
      auto gm = m.grad();
      for (std::size_t t = 0; t < inputs.size(); ++t) {
        if (!inputs[t].requires_grad()) continue;
        auto gr = inputs[t].mutable_grad();
        for (std::size_t j = 0; j < width; ++j) gr[j] += gm[t * width + j];
      }
    });
  }
  return m;
}

Tensor row(const Tensor& m, std::size_t r) {
  require_rank("row", m, 2);
  if (r >= m.rows()) {
    shape_fail("row", "index " + std::to_string(r) + " out of range for " + shape_string(m.shape()));
  }
  const std::size_t w = m.cols();
  auto mv = m.values();
  Tensor v = Tensor::vector(std::vector<double>(mv.begin() + r * w, mv.begin() + (r + 1) * w));
  if (Tape* tape = tracking({&m})) {
    tape->record("row", {m}, v, [m, v, r, w]() mutable {
      auto gm = m.mutable_grad();
      auto gv = v.grad();
      for (std::size_t j = 0; j < w; ++j) gm[r * w + j] += gv[j];
    });
  }
  return v;
}

Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t length) {
  if (x.rank() > 2) shape_fail("slice_last", "rank > 2 unsupported");
  const std::size_t w = x.cols();
  if (length == 0 || begin + length > w) {
    shape_fail("slice_last", "slice [" + std::to_string(begin) + ", " +
                                 std::to_string(begin + length) + ") outside last axis of " +
                                 shape_string(x.shape()));
  }
  const std::size_t rows = x.size() / w;
  std::vector<double> out(rows * length);
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data() + r * w + begin, length, out.data() + r * length);
  }
  Shape shape = x.rank() == 2 ? Shape{rows, length} : Shape{length};
  Tensor y = Tensor::from(std::move(shape), std::move(out));
  if (Tape* tape = tracking({&x})) {
    tape->record("slice_last", {x}, y, [x, y, begin, length, rows, w]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < length; ++j) gx[r * w + begin + j] += gy[r * length + j];
      }
    });
  }
  return y;
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0 ? v : 0.0; },
      [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& x) {
  const auto [rows, w] = row_view(x);
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * w;
    double* o = out.data() + r * w;
    const double mx = *std::max_element(in, in + w);
    double total = 0.0;
    for (std::size_t j = 0; j < w; ++j) total += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < w; ++j) o[j] /= total;
  }
  Tensor y = Tensor::from(x.shape(), std::move(out));
  if (Tape* tape = tracking({&x})) {
    tape->record("softmax", {x}, y, [x, y, rows, w]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      auto yv = y.values();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < w; ++j) dot += gy[r * w + j] * yv[r * w + j];
        for (std::size_t j = 0; j < w; ++j) {
          gx[r * w + j] += yv[r * w + j] * (gy[r * w + j] - dot);
        }
      }
    });
  }
  return y;
}

Tensor cumsum(const Tensor& x) {
  const auto [rows, w] = row_view(x);
  std::vector<double> out(x.size());
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = (acc += xv[r * w + j]);
  }
  Tensor y = Tensor::from(x.shape(), std::move(out));
  if (Tape* tape = tracking({&x})) {
    tape->record("cumsum", {x}, y, [x, y, rows, w]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t j = w; j-- > 0;) gx[r * w + j] += (acc += gy[r * w + j]);
      }
    });
  }
  return y;
}

Tensor logsumexp(const Tensor& x) {
  const auto [rows, w] = row_view(x);
  std::vector<double> out(rows);
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * w;
    const double mx = *std::max_element(in, in + w);
    double total = 0.0;
    for (std::size_t j = 0; j < w; ++j) total += std::exp(in[j] - mx);
    out[r] = mx + std::log(total);
  }
  Tensor y = Tensor::vector(std::move(out));
  if (Tape* tape = tracking({&x})) {
    tape->record("logsumexp", {x}, y, [x, y, rows, w]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      auto xv = x.values();
      auto yv = y.values();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < w; ++j) {
          gx[r * w + j] += gy[r] * std::exp(xv[r * w + j] - yv[r]);
        }
      }
    });
  }
  return y;
}

Tensor cumax(const Tensor& x) {
  if (x.cols() == 0) shape_fail("cumax", "empty last axis");
  return cumsum(softmax(x));
}

Tensor max_over_time(const Tensor& x, std::size_t length) {
  require_rank("max_over_time", x, 2);
  const std::size_t steps = length == 0 ? x.rows() : length;
  if (steps > x.rows()) {
    shape_fail("max_over_time", "length " + std::to_string(steps) + " exceeds " +
                                    shape_string(x.shape()));
  }
  const std::size_t c = x.cols();
  auto xv = x.values();
  std::vector<double> out(c);
  std::vector<std::size_t> argmax(c, 0);
  for (std::size_t j = 0; j < c; ++j) {
    double best = xv[j];
    for (std::size_t t = 1; t < steps; ++t) {
      if (xv[t * c + j] > best) {
        best = xv[t * c + j];
        argmax[j] = t;
      }
    }
    out[j] = best;
  }
  Tensor y = Tensor::vector(std::move(out));
  if (Tape* tape = tracking({&x})) {
    tape->record("max_over_time", {x}, y, [x, y, argmax, c]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t j = 0; j < c; ++j) gx[argmax[j] * c + j] += gy[j];
    });
  }
  return y;
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor y = Tensor::scalar(total);
  if (Tape* tape = tracking({&x})) {
    tape->record("sum", {x}, y, [x, y]() mutable {
      auto gx = x.mutable_grad();
      const double g = y.grad()[0];
      for (double& v : gx) v += g;
    });
  }
  return y;
}

Tensor mean_rows(const Tensor& x) {
  require_rank("mean_rows", x, 2);
  const std::size_t rows = x.rows(), w = x.cols();
  std::vector<double> out(w, 0.0);
  auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < w; ++j) out[j] += xv[r * w + j];
  }
  for (double& v : out) v /= static_cast<double>(rows);
  Tensor y = Tensor::vector(std::move(out));
  if (Tape* tape = tracking({&x})) {
    tape->record("mean_rows", {x}, y, [x, y, rows, w]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      const double inv = 1.0 / static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < w; ++j) gx[r * w + j] += gy[j] * inv;
      }
    });
  }
  return y;
}

Tensor scale_rows(const Tensor& x, const Tensor& weights) {
  require_rank("scale_rows", x, 2);
  if (weights.rank() != 1 || weights.size() != x.rows()) {
    shape_fail("scale_rows", "weights " + shape_string(weights.shape()) + " do not match rows of " +
                                 shape_string(x.shape()));
  }
  const std::size_t rows = x.rows(), w = x.cols();
  auto xv = x.values();
  auto wv = weights.values();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = wv[r] * xv[r * w + j];
  }
  Tensor y = Tensor::from(x.shape(), std::move(out));
  if (Tape* tape = tracking({&x, &weights})) {
    tape->record("scale_rows", {x, weights}, y, [x, weights, y, rows, w]() mutable {
      auto gy = y.grad();
      if (x.requires_grad()) {
        auto gx = x.mutable_grad();
        auto wv = weights.values();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < w; ++j) gx[r * w + j] += wv[r] * gy[r * w + j];
        }
      }
      if (weights.requires_grad()) {
        auto gw = weights.mutable_grad();
        auto xv = x.values();
        for (std::size_t r = 0; r < rows; ++r) {
          double acc = 0.0;
          for (std::size_t j = 0; j < w; ++j) acc += xv[r * w + j] * gy[r * w + j];
          gw[r] += acc;
        }
      }
    });
  }
  return y;
}

Tensor repeat_rows(const Tensor& v, std::size_t count) {
  require_rank("repeat_rows", v, 1);
  if (count == 0) shape_fail("repeat_rows", "zero repetitions");
  const std::size_t w = v.size();
  std::vector<double> out;
  out.reserve(count * w);
  for (std::size_t r = 0; r < count; ++r) out.insert(out.end(), v.values().begin(), v.values().end());
  Tensor y = Tensor::matrix(count, w, std::move(out));
  if (Tape* tape = tracking({&v})) {
    tape->record("repeat_rows", {v}, y, [v, y, count, w]() mutable {
      auto gv = v.mutable_grad();
      auto gy = y.grad();
      for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t j = 0; j < w; ++j) gv[j] += gy[r * w + j];
      }
    });
  }
  return y;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank("gather_rows", table, 2);
  if (ids.empty()) shape_fail("gather_rows", "no indices");
  const std::size_t w = table.cols();
  auto tv = table.values();
  std::vector<double> out;
  out.reserve(ids.size() * w);
  for (std::size_t id : ids) {
    if (id >= table.rows()) {
      shape_fail("gather_rows", "index " + std::to_string(id) + " out of range for " +
                                    shape_string(table.shape()));
    }
    out.insert(out.end(), tv.begin() + id * w, tv.begin() + (id + 1) * w);
  }
  Tensor y = Tensor::matrix(ids.size(), w, std::move(out));
  if (Tape* tape = tracking({&table})) {
    std::vector<std::size_t> index(ids.begin(), ids.end());
    tape->record("gather_rows", {table}, y, [table, y, index, w]() mutable {
      auto gt = table.mutable_grad();
      auto gy = y.grad();
      for (std::size_t r = 0; r < index.size(); ++r) {
        for (std::size_t j = 0; j < w; ++j) gt[index[r] * w + j] += gy[r * w + j];
      }
    });
  }
  return y;
}

Tensor unfold(const Tensor& x, std::size_t width) {
  require_rank("unfold", x, 2);
  if (width % 2 == 0) shape_fail("unfold", "window width must be odd, got " + std::to_string(width));
  const std::size_t steps = x.rows(), c = x.cols(), half = width / 2;
  const std::size_t out_w = width * c;
  auto xv = x.values();
  std::vector<double> out(steps * out_w, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t k = 0; k < width; ++k) {
      // Source row t + k - half, skipped when it falls in the padding.
      if (t + k < half || t + k - half >= steps) continue;
      std::copy_n(xv.data() + (t + k - half) * c, c, out.data() + t * out_w + k * c);
    }
  }
  Tensor y = Tensor::matrix(steps, out_w, std::move(out));
  if (Tape* tape = tracking({&x})) {
    tape->record("unfold", {x}, y, [x, y, steps, c, width, half, out_w]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t k = 0; k < width; ++k) {
          if (t + k < half || t + k - half >= steps) continue;
          const std::size_t src = t + k - half;
          for (std::size_t j = 0; j < c; ++j) gx[src * c + j] += gy[t * out_w + k * c + j];
        }
      }
    });
  }
  return y;
}

Tensor mask_rows(const Tensor& x, std::size_t length) {
  require_rank("mask_rows", x, 2);
  if (length >= x.rows()) return x;
  const std::size_t w = x.cols();
  std::vector<double> out(x.values().begin(), x.values().end());
  std::fill(out.begin() + length * w, out.end(), 0.0);
  Tensor y = Tensor::from(x.shape(), std::move(out));
  if (Tape* tape = tracking({&x})) {
    tape->record("mask_rows", {x}, y, [x, y, length, w]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t i = 0; i < length * w; ++i) gx[i] += gy[i];
    });
  }
  return y;
}

Tensor dropout(const Tensor& x, double p, std::uint64_t seed, bool training) {
  if (!(p >= 0.0 && p < 1.0)) {
    std::ostringstream msg;
    msg << "dropout: probability must satisfy 0 <= p < 1, got " << p;
    throw ConfigError(msg.str());
  }
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>(splitmix64(seed ^ splitmix64(i)) >> 11) * 0x1.0p-53;
    mask[i] = u < p ? 0.0 : keep_scale;
  }
  auto xv = x.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  Tensor y = Tensor::from(x.shape(), std::move(out));
  if (Tape* tape = tracking({&x})) {
    tape->record("dropout", {x}, y, [x, y, mask]() mutable {
      auto gx = x.mutable_grad();
      auto gy = y.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * mask[i];
    });
  }
  return y;
}

}  // namespace oretag::ops
