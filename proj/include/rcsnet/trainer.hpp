#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcsnet/data.hpp"
#include "rcsnet/loss.hpp"
#include "rcsnet/model.hpp"

namespace rcsnet {

struct TrainConfig {
  double lr0 = 1e-3;
  double weight_decay = 1e-4;
  std::size_t batch = 8;
  std::size_t epochs = 50;
  double clip_norm = 1.0;
  std::uint64_t seed = 42;
  std::size_t stride = 6;
  ModelConfig model;
  LossWeights loss;

  void validate() const;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  std::size_t step = 0;
};

// m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2; bias-corrected update
// p <- p - lr m_hat / (sqrt(v_hat) + eps) - lr wd p, with the decay term
// taken on the pre-update value. Parameters without a gradient see g = 0.
template <typename T>
void adamw_step(std::span<BasicTensor<T>> params, AdamState<T>& state, double lr, double weight_decay,
                const AdamOptions& opt = {});

// lr0 * 0.5 * (1 + cos(pi * step / total)), floored at 0.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr0);

// Global L2 norm over every gradient; scales all gradients by max_norm / norm
// when the norm exceeds max_norm. Returns the factor applied (1 if none).
template <typename T>
double clip_gradients(std::span<BasicTensor<T>> params, double max_norm);

template <typename T>
double global_grad_norm(std::span<const BasicTensor<T>> params);

struct StepRecord {
  std::size_t step = 0, epoch = 0, batch = 0;
  double pred = 0, structure = 0, temp = 0, edge = 0, total = 0;
  double lr = 0, grad_norm = 0;

  std::string to_json() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  bool improved = false;
};

struct Checkpoint {
  TrainConfig config;
  NormStats stats;
  std::size_t epoch = 0;
  std::size_t step = 0;
  double val_loss = 0;
  std::vector<NamedTensor<float>> params;  // value copies
  AdamState<float> optimizer;
};

// Directory of GTC1 tensors plus manifest.json.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Builds a model from a checkpoint (configuration and parameter values).
Model<float> model_from_checkpoint(const Checkpoint& ckpt);

// Snapshot of the model's current parameters.
Checkpoint make_checkpoint(Model<float>& model, const AdamState<float>& opt, const TrainConfig& config,
                           const NormStats& stats, std::size_t epoch, std::size_t step, double val_loss);

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  // When set, the best checkpoint is written here whenever it improves.
  std::optional<std::filesystem::path> checkpoint_dir;
  // Written on a non-finite loss before aborting.
  std::optional<std::filesystem::path> diagnostics_dir;
  // Data worker threads; nullopt reads RCSNET_THREADS (default 1).
  std::optional<std::size_t> workers;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  Checkpoint best;
  std::size_t best_epoch = 0;
};

// Validation total loss, averaged per sample, under NoGradGuard.
double evaluate_loss(const Model<float>& model, const Dataset& data, const LossWeights& weights,
                     std::size_t batch_size);

// Runs config.epochs epochs; selects the epoch with the lowest validation
// total loss (earliest on ties). Falls back to the training loss when the
// validation set is empty.
TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& val_set,
                  const TrainHooks& hooks = {});

// Worker count from RCSNET_THREADS, default 1, 0 means synchronous loading.
std::size_t worker_threads_from_env();

}  // namespace rcsnet
