#pragma once

#include <cstddef>
#include <vector>

#include "oretag/random.hpp"
#include "oretag/tensor.hpp"

// Ordered-neurons LSTM cell and the bidirectional sentence encoder built
// from it.
namespace oretag::onlstm {

// Gate blocks inside the stacked weight matrices, in storage order.
enum class Gate : std::size_t {
  kForget,
  kInput,
  kCandidate,
  kOutput,
  kMasterForget,
  kMasterInput,
};
inline constexpr std::size_t kGates = 6;

// Weights for all six gates stacked along the output axis. Block g of
// width `hidden` holds gate g, so the input weights of the forget gate are
// columns [0, hidden) of `input_weights`.
struct Params {
  Tensor input_weights;      // (input x 6*hidden)
  Tensor recurrent_weights;  // (hidden x 6*hidden)
  Tensor bias;               // (6*hidden)
  std::size_t input = 0;
  std::size_t hidden = 0;
  // Use 1 - cumax(.) for the master input gate instead of cumax(.).
  bool master_input_complement = false;

  // Uniform in [-1/sqrt(hidden), 1/sqrt(hidden)].
  static Params init(std::size_t input, std::size_t hidden, Rng& rng);
  std::vector<Tensor> leaves() const;
};

struct State {
  Tensor h;
  Tensor c;
  static State zero(std::size_t hidden);
};

State cell_step(const Params& params, const Tensor& x, const State& prev);

// Gate activations of a single step, for inspection.
struct StepTrace {
  std::vector<double> forget, input, candidate, output;
  std::vector<double> master_forget, master_input, overlap;
  std::vector<double> cell, hidden;
};

StepTrace trace_step(const Params& params, const Tensor& x, const State& prev);

// (T x input) -> (T x 2*hidden). Row t is [forward h_t ; backward h_t],
// both directions starting from zero states.
Tensor encode_bidirectional(const Params& fw, const Params& bw, const Tensor& x);

}  // namespace oretag::onlstm
