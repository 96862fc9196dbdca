#include "lstm_cctc/net.hpp"

#include <random>
#include <string>

#include "lstm_cctc/errors.hpp"

namespace lstm_cctc {
namespace {

LstmLayer make_layer(int input_size, int hidden_size) {
  LstmLayer layer;
  layer.w_input = Eigen::MatrixXd::Zero(4 * hidden_size, input_size);
  layer.w_recurrent = Eigen::MatrixXd::Zero(4 * hidden_size, hidden_size);
  layer.bias = Eigen::VectorXd::Zero(4 * hidden_size);
  return layer;
}

bool is_bias(const std::string& name) {
  return name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0;
}

template <class Params>
void fill_gaussian(Params& params, std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  visit_tensors(
      [&](const std::string& name, auto& tensor) {
        if (is_bias(name)) {
          tensor.setZero();
          return;
        }
        for (Eigen::Index i = 0; i < tensor.size(); ++i) tensor.data()[i] = normal(rng);
      },
      params);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void layer_forward(const LstmLayer& layer, const Eigen::MatrixXd& input, LayerTape& tape) {
  const int hidden = layer.hidden_size();
  const Eigen::Index steps = input.cols();
  tape.input = input;
  tape.gates.resize(4 * hidden, steps);
  tape.cells.resize(hidden, steps);
  tape.hidden.resize(hidden, steps);

  Eigen::MatrixXd pre = layer.w_input * input;
  pre.colwise() += layer.bias;

  Eigen::VectorXd h = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd a(4 * hidden);
  for (Eigen::Index t = 0; t < steps; ++t) {
    a.noalias() = layer.w_recurrent * h;
    a += pre.col(t);
    auto gates = tape.gates.col(t);
    for (int j = 0; j < hidden; ++j) {
      const double i_g = sigmoid(a[j]);
      const double f_g = sigmoid(a[hidden + j]);
      const double c_g = std::tanh(a[2 * hidden + j]);
      const double o_g = sigmoid(a[3 * hidden + j]);
      gates[j] = i_g;
      gates[hidden + j] = f_g;
      gates[2 * hidden + j] = c_g;
      gates[3 * hidden + j] = o_g;
      c[j] = f_g * c[j] + i_g * c_g;
      h[j] = o_g * std::tanh(c[j]);
    }
    tape.cells.col(t) = c;
    tape.hidden.col(t) = h;
  }
}

// Returns dLoss/dinput given dLoss/dhidden for every step.
Eigen::MatrixXd layer_backward(const LstmLayer& layer, const LayerTape& tape,
                               const Eigen::MatrixXd& d_hidden, LstmLayer& grad) {
  const int hidden = layer.hidden_size();
  const Eigen::Index steps = d_hidden.cols();
  Eigen::MatrixXd d_pre(4 * hidden, steps);
  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(hidden);

  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const auto gates = tape.gates.col(t);
    auto d_gates = d_pre.col(t);
    for (int j = 0; j < hidden; ++j) {
      const double i_g = gates[j];
      const double f_g = gates[hidden + j];
      const double c_g = gates[2 * hidden + j];
      const double o_g = gates[3 * hidden + j];
      const double tc = std::tanh(tape.cells(j, t));
      const double c_prev = t > 0 ? tape.cells(j, t - 1) : 0.0;

      const double dh = d_hidden(j, t) + dh_next[j];
      const double dc = dh * o_g * (1.0 - tc * tc) + dc_next[j];
      d_gates[j] = dc * c_g * i_g * (1.0 - i_g);
      d_gates[hidden + j] = dc * c_prev * f_g * (1.0 - f_g);
      d_gates[2 * hidden + j] = dc * i_g * (1.0 - c_g * c_g);
      d_gates[3 * hidden + j] = dh * tc * o_g * (1.0 - o_g);
      dc_next[j] = dc * f_g;
    }
    dh_next.noalias() = layer.w_recurrent.transpose() * d_gates;
  }

  grad.w_input.noalias() += d_pre * tape.input.transpose();
  if (steps > 1) {
    grad.w_recurrent.noalias() +=
        d_pre.rightCols(steps - 1) * tape.hidden.leftCols(steps - 1).transpose();
  }
  grad.bias += d_pre.rowwise().sum();
  return layer.w_input.transpose() * d_pre;
}

void check_shapes(const LstmStack& stack, const LinearHead& head) {
  const int hidden = stack.hidden_size();
  if (stack.upper.input_size() != hidden || stack.upper.hidden_size() != hidden ||
      head.weights.rows() != 2 || head.weights.cols() != hidden || head.bias.size() != 2) {
    throw DimensionMismatch("inconsistent LSTM/head shapes");
  }
}

}  // namespace

LstmStack make_stack(int input_size, int hidden_size) {
  if (input_size < 1 || hidden_size < 1) {
    throw ValidationError("hidden_size", "layer sizes must be at least 1");
  }
  return {make_layer(input_size, hidden_size), make_layer(hidden_size, hidden_size)};
}

LinearHead make_head(int hidden_size) {
  return {Eigen::MatrixXd::Zero(2, hidden_size), Eigen::VectorXd::Zero(2)};
}

Model zeros_like(const Model& model) {
  Model out = model;
  visit_tensors([](const std::string&, auto& t) { t.setZero(); }, out);
  return out;
}

LstmParams init_params(int input_size, int hidden_size, std::uint64_t seed, double stddev) {
  LstmParams params{make_stack(input_size, hidden_size), make_head(hidden_size)};
  fill_gaussian(params, seed, stddev);
  return params;
}

Model init_model(int input_size, int hidden_size, std::uint64_t seed, double stddev) {
  Model model;
  for (auto& stack : model.stacks) stack = make_stack(input_size, hidden_size);
  model.head = make_head(hidden_size);
  model.seed = seed;
  fill_gaussian(model, seed, stddev);
  return model;
}

ForwardResult forward(const LstmStack& stack, const LinearHead& head,
                      const SequenceSample& sample) {
  check_shapes(stack, head);
  if (sample.steps < 1) throw DimensionMismatch("empty sequence");
  if (sample.dims != stack.input_size()) {
    throw DimensionMismatch("frame dimension " + std::to_string(sample.dims) +
                            " does not match input size " +
                            std::to_string(stack.input_size()));
  }
  ForwardResult result;
  NetTape& tape = result.tape;
  tape.steps = sample.steps;
  const Eigen::Map<const Eigen::MatrixXd> input(sample.frames.data(), sample.dims, sample.steps);
  layer_forward(stack.lower, input, tape.lower);
  layer_forward(stack.upper, tape.lower.hidden, tape.upper);
  tape.logits = head.weights * tape.upper.hidden;
  tape.logits.colwise() += head.bias;
  result.log_probs = replay(tape);
  return result;
}

FrameLogProbs replay(const NetTape& tape) {
  std::vector<std::array<double, 2>> logits(static_cast<std::size_t>(tape.steps));
  for (int t = 0; t < tape.steps; ++t) logits[t] = {tape.logits(0, t), tape.logits(1, t)};
  return log_softmax(logits);
}

void backward(const LstmStack& stack, const LinearHead& head, const NetTape& tape,
              const LogitGrads& d_logits, LstmStack& stack_grad, LinearHead& head_grad) {
  check_shapes(stack, head);
  const int hidden = stack.hidden_size();
  if (tape.steps != static_cast<int>(d_logits.size()) || tape.logits.cols() != tape.steps ||
      tape.lower.input.rows() != stack.input_size() || tape.upper.hidden.rows() != hidden) {
    throw DimensionMismatch("tape does not match parameters or logit gradient");
  }
  Eigen::MatrixXd d_z(2, tape.steps);
  for (int t = 0; t < tape.steps; ++t) {
    d_z(0, t) = d_logits[t][kBlank];
    d_z(1, t) = d_logits[t][kObject];
  }
  head_grad.weights.noalias() += d_z * tape.upper.hidden.transpose();
  head_grad.bias += d_z.rowwise().sum();
  const Eigen::MatrixXd d_upper = head.weights.transpose() * d_z;
  const Eigen::MatrixXd d_lower = layer_backward(stack.upper, tape.upper, d_upper, stack_grad.upper);
  layer_backward(stack.lower, tape.lower, d_lower, stack_grad.lower);
}

LstmParams backward(const LstmParams& params, const NetTape& tape, const LogitGrads& d_logits) {
  LstmParams grads{make_stack(params.stack.input_size(), params.stack.hidden_size()),
                   make_head(params.stack.hidden_size())};
  backward(params.stack, params.head, tape, d_logits, grads.stack, grads.head);
  return grads;
}

nlohmann::json model_to_json(const Model& model) {
  nlohmann::json tensors = nlohmann::json::object();
  visit_tensors(
      [&](const std::string& name, const auto& t) {
        tensors[name] = {{"shape", {t.rows(), t.cols()}},
                         {"data", std::vector<double>(t.data(), t.data() + t.size())}};
      },
      model);
  return {{"input_size", model.input_size()},
          {"hidden_size", model.hidden_size()},
          {"seed", model.seed},
          {"tensors", std::move(tensors)}};
}

Model model_from_json(const nlohmann::json& j) {
  try {
    const int input_size = j.at("input_size").get<int>();
    const int hidden_size = j.at("hidden_size").get<int>();
    if (input_size < 1 || hidden_size < 1) throw CheckpointError("non-positive layer size");
    Model model;
    for (auto& stack : model.stacks) stack = make_stack(input_size, hidden_size);
    model.head = make_head(hidden_size);
    model.seed = j.at("seed").get<std::uint64_t>();
    const auto& tensors = j.at("tensors");
    visit_tensors(
        [&](const std::string& name, auto& t) {
          if (!tensors.contains(name)) throw CheckpointError("missing tensor " + name);
          const auto& entry = tensors.at(name);
          const auto shape = entry.at("shape").get<std::array<Eigen::Index, 2>>();
          const auto data = entry.at("data").get<std::vector<double>>();
          if (shape[0] != t.rows() || shape[1] != t.cols() ||
              static_cast<Eigen::Index>(data.size()) != t.size()) {
            throw CheckpointError("tensor " + name + " has wrong shape");
          }
          for (double v : data) {
            if (!std::isfinite(v)) throw CheckpointError("tensor " + name + " is not finite");
          }
          std::copy(data.begin(), data.end(), t.data());
        },
        model);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace lstm_cctc
