#include "oretag/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "oretag/errors.hpp"

namespace oretag::crf {

namespace {

struct Dims {
  std::size_t steps;
  std::size_t labels;
  std::size_t stride;  // row length of the transition matrix
};

Dims check(const Tensor& emissions, const Tensor& transitions) {
  if (emissions.rank() != 2) {
    throw ShapeError("crf: emissions must be (T x K), got " + shape_string(emissions.shape()));
  }
  const std::size_t k = emissions.cols();
  if (transitions.shape() != Shape{k + 2, k + 2}) {
    throw ShapeError("crf: transitions " + shape_string(transitions.shape()) +
                     " do not match " + std::to_string(k) + " labels (need " +
                     shape_string({k + 2, k + 2}) + ")");
  }
  return {emissions.rows(), k, k + 2};
}

void check_labels(const Dims& d, std::span<const std::size_t> labels) {
  if (labels.size() != d.steps) {
    throw InputError("crf: label sequence length " + std::to_string(labels.size()) +
                     " differs from " + std::to_string(d.steps) + " positions");
  }
  for (std::size_t y : labels) {
    if (y >= d.labels) {
      throw InputError("crf: label " + std::to_string(y) + " outside " +
                       std::to_string(d.labels) + " labels");
    }
  }
}

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// Forward log-potentials alpha (T x K) and log Z.
double forward(const Dims& d, std::span<const double> p, std::span<const double> a,
               std::vector<double>& alpha) {
  const std::size_t k = d.labels, s = start_index(k), e = end_index(k);
  alpha.assign(d.steps * k, 0.0);
  for (std::size_t j = 0; j < k; ++j) alpha[j] = a[s * d.stride + j] + p[j];
  for (std::size_t t = 1; t < d.steps; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < k; ++i) {
        acc = log_add(acc, alpha[(t - 1) * k + i] + a[i * d.stride + j]);
      }
      alpha[t * k + j] = acc + p[t * k + j];
    }
  }
  double log_z = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    log_z = log_add(log_z, alpha[(d.steps - 1) * k + j] + a[j * d.stride + e]);
  }
  return log_z;
}

void backward(const Dims& d, std::span<const double> p, std::span<const double> a,
              std::vector<double>& beta) {
  const std::size_t k = d.labels, e = end_index(k);
  beta.assign(d.steps * k, 0.0);
  for (std::size_t j = 0; j < k; ++j) beta[(d.steps - 1) * k + j] = a[j * d.stride + e];
  for (std::size_t t = d.steps - 1; t-- > 0;) {
    for (std::size_t i = 0; i < k; ++i) {
      double acc = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        acc = log_add(acc, a[i * d.stride + j] + p[(t + 1) * k + j] + beta[(t + 1) * k + j]);
      }
      beta[t * k + i] = acc;
    }
  }
}

}  // namespace

Tensor make_transitions(std::size_t labels, bool requires_grad) {
  return Tensor::zeros({labels + 2, labels + 2}, requires_grad);
}

double score(const Tensor& emissions, const Tensor& transitions,
             std::span<const std::size_t> labels) {
  const Dims d = check(emissions, transitions);
  check_labels(d, labels);
  auto p = emissions.values();
  auto a = transitions.values();
  double total = a[start_index(d.labels) * d.stride + labels[0]];
  for (std::size_t t = 0; t < d.steps; ++t) {
    total += p[t * d.labels + labels[t]];
    if (t + 1 < d.steps) total += a[labels[t] * d.stride + labels[t + 1]];
  }
  total += a[labels[d.steps - 1] * d.stride + end_index(d.labels)];
  return total;
}

double log_partition(const Tensor& emissions, const Tensor& transitions) {
  const Dims d = check(emissions, transitions);
  std::vector<double> alpha;
  return forward(d, emissions.values(), transitions.values(), alpha);
}

std::vector<double> marginals(const Tensor& emissions, const Tensor& transitions) {
  const Dims d = check(emissions, transitions);
  std::vector<double> alpha, beta;
  const double log_z = forward(d, emissions.values(), transitions.values(), alpha);
  backward(d, emissions.values(), transitions.values(), beta);
  std::vector<double> out(alpha.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(alpha[i] + beta[i] - log_z);
  return out;
}

Tensor nll_loss(const Tensor& emissions, const Tensor& transitions,
                std::span<const std::size_t> gold) {
  const Dims d = check(emissions, transitions);
  check_labels(d, gold);
  std::vector<double> alpha;
  const double log_z = forward(d, emissions.values(), transitions.values(), alpha);
  Tensor loss = Tensor::scalar(log_z - score(emissions, transitions, gold));

  Tape* tape = Tape::active();
  if (tape == nullptr || !(emissions.requires_grad() || transitions.requires_grad())) return loss;
  std::vector<std::size_t> labels(gold.begin(), gold.end());
  tape->record(
      "crf_nll", {emissions, transitions}, loss,
      [emissions, transitions, loss, labels, alpha, log_z, d]() mutable {
        const double g = loss.grad()[0];
        const std::size_t k = d.labels, s = start_index(k), e = end_index(k);
        auto p = emissions.values();
        auto a = transitions.values();
        std::vector<double> beta;
        backward(d, p, a, beta);
        if (emissions.requires_grad()) {
          auto gp = emissions.mutable_grad();
          for (std::size_t i = 0; i < alpha.size(); ++i) {
            gp[i] += g * std::exp(alpha[i] + beta[i] - log_z);
          }
          for (std::size_t t = 0; t < d.steps; ++t) gp[t * k + labels[t]] -= g;
        }
        if (transitions.requires_grad()) {
          auto ga = transitions.mutable_grad();
          for (std::size_t j = 0; j < k; ++j) {
            ga[s * d.stride + j] += g * std::exp(alpha[j] + beta[j] - log_z);
            const std::size_t last = (d.steps - 1) * k + j;
            ga[j * d.stride + e] += g * std::exp(alpha[last] + beta[last] - log_z);
          }
          for (std::size_t t = 0; t + 1 < d.steps; ++t) {
            for (std::size_t i = 0; i < k; ++i) {
              for (std::size_t j = 0; j < k; ++j) {
                ga[i * d.stride + j] +=
                    g * std::exp(alpha[t * k + i] + a[i * d.stride + j] + p[(t + 1) * k + j] +
                                 beta[(t + 1) * k + j] - log_z);
              }
            }
          }
          ga[s * d.stride + labels[0]] -= g;
          for (std::size_t t = 0; t + 1 < d.steps; ++t) {
            ga[labels[t] * d.stride + labels[t + 1]] -= g;
          }
          ga[labels[d.steps - 1] * d.stride + e] -= g;
        }
      });
  return loss;
}

Decoding viterbi(const Tensor& emissions, const Tensor& transitions) {
  const Dims d = check(emissions, transitions);
  const std::size_t k = d.labels, s = start_index(k), e = end_index(k);
  auto p = emissions.values();
  auto a = transitions.values();
  std::vector<double> best(k), next(k);
  std::vector<std::size_t> back(d.steps * k, 0);
  for (std::size_t j = 0; j < k; ++j) best[j] = a[s * d.stride + j] + p[j];
  for (std::size_t t = 1; t < d.steps; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      double top = best[0] + a[j];
      std::size_t arg = 0;
      for (std::size_t i = 1; i < k; ++i) {
        const double v = best[i] + a[i * d.stride + j];
        if (v > top) top = v, arg = i;
      }
      next[j] = top + p[t * k + j];
      back[t * k + j] = arg;
    }
    best.swap(next);
  }
  double top = best[0] + a[e];
  std::size_t arg = 0;
  for (std::size_t j = 1; j < k; ++j) {
    const double v = best[j] + a[j * d.stride + e];
    if (v > top) top = v, arg = j;
  }
  Decoding out;
  out.labels.assign(d.steps, 0);
  out.labels[d.steps - 1] = arg;
  for (std::size_t t = d.steps - 1; t > 0; --t) out.labels[t - 1] = back[t * k + out.labels[t]];
  out.score = top;
  out.confidence = std::min(1.0, std::exp(top - log_partition(emissions, transitions)));
  return out;
}

}  // namespace oretag::crf
