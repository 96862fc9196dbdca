#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lstm_cctc/net.hpp"
#include "lstm_cctc/synth.hpp"

namespace lstm_cctc {

struct TrainConfig {
  double learning_rate = 0.001;
  int lr_drop_epoch = 200;
  double dropped_rate = 0.0001;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 2;
  int epochs = 1;
  int pretrain_epochs = 20;
  std::uint64_t seed = 42;
  int hidden_size = 256;
  double init_stddev = kInitStddev;
  double clip_norm = 0.0;  // 0 disables clipping
  int checkpoint_every = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

// Learning rate for a zero-based epoch index.
double learning_rate_for_epoch(const TrainConfig& cfg, int epoch);

struct StepResult {
  double loss = 0.0;  // mean over the batch of the summed four-order loss
  std::array<double, 4> order_loss{};
  double grad_norm = 0.0;
};

// Summed CCTC loss over all four scan orders of one scene; adds the gradient
// (scaled by `weight`) into `grads`.
StepResult accumulate_gradients(const Model& model, const Scene& scene, double weight, Model& grads);

// One SGD step with momentum and L2 weight decay:
//   v <- momentum * v - lr * (g + weight_decay * theta);  theta <- theta + v
StepResult train_step(Model& model, Model& velocity, std::span<const Scene* const> batch,
                      const TrainConfig& cfg, double lr);

struct EpochRecord {
  int epoch = 0;  // zero-based
  double mean_loss = 0.0;
  std::array<double, 4> order_loss{};
  double grad_norm = 0.0;
  double learning_rate = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

std::string train_log_csv(const TrainLog& log);

struct TrainState {
  Model model;
  Model velocity;
  int epoch = 0;  // completed epochs
};

TrainState init_state(int input_size, const TrainConfig& cfg);

// Runs epochs [state.epoch, cfg.epochs). Batches come from a per-epoch
// permutation seeded by (seed, epoch), so a resumed run matches an
// uninterrupted one.
TrainLog train_loop(TrainState& state, std::span<const Scene> data, const TrainConfig& cfg,
                    const std::function<void(const TrainState&, const EpochRecord&)>& on_epoch = {});

// Drops scenes whose count cannot be aligned to n^2 frames.
std::vector<Scene> filter_feasible(std::vector<Scene> scenes, int& dropped);

nlohmann::json checkpoint_to_json(const TrainState& state, const TrainConfig& cfg);
TrainState checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const TrainConfig& cfg);
TrainState load_checkpoint(const std::filesystem::path& path);
nlohmann::json load_checkpoint_config(const std::filesystem::path& path);

}  // namespace lstm_cctc
