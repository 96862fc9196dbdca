#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "json.hpp"
#include "lstm_cctc/grid.hpp"
#include "lstm_cctc/log_probs.hpp"

namespace lstm_cctc {

// Gate blocks are stacked in the order input, forget, cell, output.
struct LstmLayer {
  Eigen::MatrixXd w_input;      // 4H x in
  Eigen::MatrixXd w_recurrent;  // 4H x H
  Eigen::VectorXd bias;         // 4H

  int input_size() const { return static_cast<int>(w_input.cols()); }
  int hidden_size() const { return static_cast<int>(w_recurrent.cols()); }
};

// Two unidirectional LSTM layers; the upper one consumes the lower's hidden state.
struct LstmStack {
  LstmLayer lower;
  LstmLayer upper;

  int input_size() const { return lower.input_size(); }
  int hidden_size() const { return lower.hidden_size(); }
};

// hidden -> (blank, object) logits.
struct LinearHead {
  Eigen::MatrixXd weights;  // 2 x H
  Eigen::VectorXd bias;     // 2
};

// One recurrent stack with its head: the network for a single scan order.
struct LstmParams {
  LstmStack stack;
  LinearHead head;
};

// Four direction-specific stacks feeding one shared head.
struct Model {
  std::array<LstmStack, 4> stacks;
  LinearHead head;
  std::uint64_t seed = 0;

  int input_size() const { return stacks[0].input_size(); }
  int hidden_size() const { return stacks[0].hidden_size(); }
  const LstmStack& stack(ScanOrder order) const { return stacks[index_of(order)]; }
  LstmStack& stack(ScanOrder order) { return stacks[index_of(order)]; }
};

LstmStack make_stack(int input_size, int hidden_size);
LinearHead make_head(int hidden_size);
Model zeros_like(const Model& model);

inline constexpr double kInitStddev = 0.01;

// Weights ~ N(0, stddev^2) from a seeded generator, biases zero.
LstmParams init_params(int input_size, int hidden_size, std::uint64_t seed,
                       double stddev = kInitStddev);
Model init_model(int input_size, int hidden_size, std::uint64_t seed, double stddev = kInitStddev);

// Calls f(name, tensor...) once per parameter tensor, zipping any number of
// identically shaped stacks. Tensors are Eigen::MatrixXd or Eigen::VectorXd.
template <class F, class... Stacks>
void visit_stack(const std::string& prefix, F&& f, Stacks&... stacks) {
  f(prefix + "lower.w_input", stacks.lower.w_input...);
  f(prefix + "lower.w_recurrent", stacks.lower.w_recurrent...);
  f(prefix + "lower.bias", stacks.lower.bias...);
  f(prefix + "upper.w_input", stacks.upper.w_input...);
  f(prefix + "upper.w_recurrent", stacks.upper.w_recurrent...);
  f(prefix + "upper.bias", stacks.upper.bias...);
}

template <class F, class... Heads>
void visit_head(const std::string& prefix, F&& f, Heads&... heads) {
  f(prefix + "weights", heads.weights...);
  f(prefix + "bias", heads.bias...);
}

template <class F, class... Params>
void visit_tensors(F&& f, Params&... params) {
  if constexpr ((std::is_same_v<std::remove_const_t<Params>, Model> && ...)) {
    for (ScanOrder order : kAllScanOrders) {
      visit_stack("stack." + std::string(to_string(order)) + ".", f,
                  params.stacks[index_of(order)]...);
    }
    visit_head("head.", f, params.head...);
  } else {
    visit_stack("stack.", f, params.stack...);
    visit_head("head.", f, params.head...);
  }
}

// Activations cached by forward for backpropagation.
struct LayerTape {
  Eigen::MatrixXd input;   // in x T
  Eigen::MatrixXd gates;   // 4H x T, after nonlinearities
  Eigen::MatrixXd cells;   // H x T
  Eigen::MatrixXd hidden;  // H x T
};

struct NetTape {
  int steps = 0;
  LayerTape lower;
  LayerTape upper;
  Eigen::MatrixXd logits;  // 2 x T
};

struct ForwardResult {
  FrameLogProbs log_probs;
  NetTape tape;
};

ForwardResult forward(const LstmStack& stack, const LinearHead& head,
                      const SequenceSample& sample);
inline ForwardResult forward(const LstmParams& params, const SequenceSample& sample) {
  return forward(params.stack, params.head, sample);
}

// Log-probabilities implied by the logits stored on a tape.
FrameLogProbs replay(const NetTape& tape);

// Exact BPTT. Adds dLoss/dtheta into stack_grad and head_grad.
void backward(const LstmStack& stack, const LinearHead& head, const NetTape& tape,
              const LogitGrads& d_logits, LstmStack& stack_grad, LinearHead& head_grad);

LstmParams backward(const LstmParams& params, const NetTape& tape, const LogitGrads& d_logits);

// Checkpoint tensors: {"input_size", "hidden_size", "seed",
// "tensors": {name: {"shape": [rows, cols], "data": [...]}}}.
nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

}  // namespace lstm_cctc
