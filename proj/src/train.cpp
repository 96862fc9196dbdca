#include "lstm_cctc/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lstm_cctc/cctc.hpp"
#include "lstm_cctc/errors.hpp"

namespace lstm_cctc {
namespace {

constexpr const char* kCheckpointFormat = "lstm-cctc-checkpoint";
constexpr int kCheckpointVersion = 1;

double squared_norm(const Model& m) {
  double total = 0.0;
  visit_tensors([&](const std::string&, const auto& t) { total += t.squaredNorm(); }, m);
  return total;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate", "must be non-negative");
  if (!(dropped_rate >= 0.0)) throw ValidationError("dropped_rate", "must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum", "must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay", "must be non-negative");
  if (batch_size < 1) throw ValidationError("batch_size", "must be at least 1");
  if (epochs < 0) throw ValidationError("epochs", "must be non-negative");
  if (lr_drop_epoch < 0) throw ValidationError("lr_drop_epoch", "must be non-negative");
  if (pretrain_epochs < 0) throw ValidationError("pretrain_epochs", "must be non-negative");
  if (hidden_size < 1) throw ValidationError("hidden_size", "must be at least 1");
  if (!(init_stddev >= 0.0 && std::isfinite(init_stddev))) {
    throw ValidationError("init_stddev", "must be finite and non-negative");
  }
  if (!(clip_norm >= 0.0)) throw ValidationError("clip_norm", "must be non-negative");
  if (checkpoint_every < 0) throw ValidationError("checkpoint_every", "must be non-negative");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate},   {"lr_drop_epoch", c.lr_drop_epoch},
       {"dropped_rate", c.dropped_rate},     {"momentum", c.momentum},
       {"weight_decay", c.weight_decay},     {"batch_size", c.batch_size},
       {"epochs", c.epochs},                 {"pretrain_epochs", c.pretrain_epochs},
       {"seed", c.seed},                     {"hidden_size", c.hidden_size},
       {"init_stddev", c.init_stddev},       {"clip_norm", c.clip_norm},
       {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  auto field = [&](const char* name, auto& out) {
    if (!j.contains(name)) return;
    try {
      j.at(name).get_to(out);
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(name, "wrong type");
    }
  };
  field("learning_rate", c.learning_rate);
  field("lr_drop_epoch", c.lr_drop_epoch);
  field("dropped_rate", c.dropped_rate);
  field("momentum", c.momentum);
  field("weight_decay", c.weight_decay);
  field("batch_size", c.batch_size);
  field("epochs", c.epochs);
  field("pretrain_epochs", c.pretrain_epochs);
  field("seed", c.seed);
  field("hidden_size", c.hidden_size);
  field("init_stddev", c.init_stddev);
  field("clip_norm", c.clip_norm);
  field("checkpoint_every", c.checkpoint_every);
}

double learning_rate_for_epoch(const TrainConfig& cfg, int epoch) {
  return epoch < cfg.lr_drop_epoch ? cfg.learning_rate : cfg.dropped_rate;
}

StepResult accumulate_gradients(const Model& model, const Scene& scene, double weight, Model& grads) {
  StepResult result;
  for (ScanOrder order : kAllScanOrders) {
    const SequenceSample sample = serialize(scene.grid, order, scene.count, scene.id);
    const LstmStack& stack = model.stack(order);
    ForwardResult fwd = forward(stack, model.head, sample);
    LossResult loss = cctc_loss(fwd.log_probs, scene.count);
    if (!std::isfinite(loss.loss)) {
      throw Error("non-finite loss on sample " + scene.id + " (" + std::string(to_string(order)) + ")");
    }
    for (auto& row : loss.d_logits) {
      row[0] *= weight;
      row[1] *= weight;
    }
    backward(stack, model.head, fwd.tape, loss.d_logits, grads.stack(order), grads.head);
    result.order_loss[index_of(order)] = loss.loss;
    result.loss += loss.loss;
  }
  return result;
}

StepResult train_step(Model& model, Model& velocity, std::span<const Scene* const> batch,
                      const TrainConfig& cfg, double lr) {
  if (batch.empty()) throw ValidationError("batch", "empty batch");
  Model grads = zeros_like(model);
  StepResult step;
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (const Scene* scene : batch) {
    const StepResult r = accumulate_gradients(model, *scene, weight, grads);
    step.loss += r.loss * weight;
    for (std::size_t i = 0; i < 4; ++i) step.order_loss[i] += r.order_loss[i] * weight;
  }
  step.grad_norm = std::sqrt(squared_norm(grads));
  const double scale = (cfg.clip_norm > 0.0 && step.grad_norm > cfg.clip_norm)
                           ? cfg.clip_norm / step.grad_norm
                           : 1.0;
  visit_tensors(
      [&](const std::string&, auto& theta, auto& v, const auto& g) {
        v = cfg.momentum * v - lr * (scale * g + cfg.weight_decay * theta);
        theta += v;
      },
      model, velocity, grads);
  return step;
}

std::string train_log_csv(const TrainLog& log) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss,lr,gradNorm";
  for (ScanOrder order : kAllScanOrders) out << ",loss_" << to_string(order);
  out << '\n';
  for (const EpochRecord& r : log.epochs) {
    out << r.epoch << ',' << r.mean_loss << ',' << r.learning_rate << ',' << r.grad_norm;
    for (double l : r.order_loss) out << ',' << l;
    out << '\n';
  }
  return out.str();
}

TrainState init_state(int input_size, const TrainConfig& cfg) {
  TrainState state;
  state.model = init_model(input_size, cfg.hidden_size, cfg.seed, cfg.init_stddev);
  state.velocity = zeros_like(state.model);
  return state;
}

TrainLog train_loop(TrainState& state, std::span<const Scene> data, const TrainConfig& cfg,
                    const std::function<void(const TrainState&, const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (data.empty()) throw ValidationError("dataset", "no training scenes");
  TrainLog log;
  std::vector<std::size_t> order(data.size());
  for (int epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    const double lr = learning_rate_for_epoch(cfg, epoch);
    EpochRecord record;
    record.epoch = epoch;
    record.learning_rate = lr;
    std::size_t steps = 0;
    std::vector<const Scene*> batch;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&data[order[i]]);
      const StepResult r = train_step(state.model, state.velocity, batch, cfg, lr);
      const double share = static_cast<double>(batch.size());
      record.mean_loss += r.loss * share;
      for (std::size_t o = 0; o < 4; ++o) record.order_loss[o] += r.order_loss[o] * share;
      record.grad_norm += r.grad_norm;
      ++steps;
    }
    const double samples = static_cast<double>(data.size());
    record.mean_loss /= samples;
    for (double& l : record.order_loss) l /= samples;
    record.grad_norm /= static_cast<double>(steps);
    state.epoch = epoch + 1;
    log.epochs.push_back(record);
    if (on_epoch) on_epoch(state, record);
  }
  return log;
}

std::vector<Scene> filter_feasible(std::vector<Scene> scenes, int& dropped) {
  const auto before = scenes.size();
  std::erase_if(scenes, [](const Scene& s) {
    return !is_feasible(s.grid.n() * s.grid.n(), s.count);
  });
  dropped = static_cast<int>(before - scenes.size());
  return scenes;
}

nlohmann::json checkpoint_to_json(const TrainState& state, const TrainConfig& cfg) {
  nlohmann::json velocity = model_to_json(state.velocity);
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"epoch", state.epoch},
          {"config", cfg},
          {"model", model_to_json(state.model)},
          {"velocity", std::move(velocity["tensors"])}};
}

TrainState checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat ||
        j.at("version").get<int>() != kCheckpointVersion) {
      throw CheckpointError("unrecognised checkpoint format");
    }
    TrainState state;
    state.model = model_from_json(j.at("model"));
    nlohmann::json vel = j.at("model");
    vel["tensors"] = j.at("velocity");
    state.velocity = model_from_json(vel);
    state.epoch = j.at("epoch").get<int>();
    if (state.epoch < 0) throw CheckpointError("negative epoch");
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const TrainConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << checkpoint_to_json(state, cfg).dump() << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

namespace {
nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
}
}  // namespace

TrainState load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json_file(path));
}

nlohmann::json load_checkpoint_config(const std::filesystem::path& path) {
  const auto j = read_json_file(path);
  return j.value("config", nlohmann::json::object());
}

}  // namespace lstm_cctc
