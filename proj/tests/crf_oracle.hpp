#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "oretag/tensor.hpp"

// Brute-force enumeration over every label path; test-only.
namespace oretag::testing {

inline double path_score(const Tensor& p, const Tensor& a, const std::vector<std::size_t>& y) {
  const std::size_t k = p.cols();
  double s = a.at(k, y[0]) + a.at(y.back(), k + 1);
  for (std::size_t t = 0; t < y.size(); ++t) {
    s += p.at(t, y[t]);
    if (t + 1 < y.size()) s += a.at(y[t], y[t + 1]);
  }
  return s;
}

template <typename F>
void for_each_path(std::size_t steps, std::size_t labels, F visit) {
  std::vector<std::size_t> y(steps, 0);
  while (true) {
    visit(y);
    std::size_t t = steps;
    while (t > 0) {
      --t;
      if (++y[t] < labels) break;
      y[t] = 0;
      if (t == 0) return;
    }
  }
}

struct Enumeration {
  double log_z;
  std::vector<std::size_t> best;
  double best_score;
};

inline Enumeration enumerate(const Tensor& p, const Tensor& a) {
  std::vector<double> scores;
  Enumeration out{0.0, {}, -std::numeric_limits<double>::infinity()};
  for_each_path(p.rows(), p.cols(), [&](const std::vector<std::size_t>& y) {
    const double s = path_score(p, a, y);
    scores.push_back(s);
    // Paths come in lexicographic order; strict > keeps the lowest on ties.
    if (s > out.best_score) {
      out.best_score = s;
      out.best = y;
    }
  });
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double total = 0.0;
  for (double s : scores) total += std::exp(s - mx);
  out.log_z = mx + std::log(total);
  return out;
}

}  // namespace oretag::testing
