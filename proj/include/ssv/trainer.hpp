#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "ssv/dataset.hpp"
#include "ssv/eval.hpp"
#include "ssv/network.hpp"
#include "ssv/objective.hpp"
#include "ssv/sparsity.hpp"

namespace ssv {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;  // pairs per step
  // 0 means ceil(training utterances / batch_size).
  std::size_t steps_per_epoch = 0;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double genuine_ratio = 0.5;
  std::uint64_t seed = 1;
  Hyperparams hyperparams{0.0, 0.0, 1.0};
  double prune_tau = 1e-3;     // threshold behind the logged sparsity fraction
  std::size_t eval_every = 1;  // epochs between dev evaluations; 0 disables them

  // Throws ConfigError naming the offending field.
  void validate() const;
  std::size_t steps_for(const Dataset& data) const;
};

struct PairIndex {
  std::size_t a = 0;
  std::size_t b = 0;
  PairLabel label = PairLabel::Impostor;

  friend bool operator==(const PairIndex&, const PairIndex&) = default;
};
using PairBatch = std::vector<PairIndex>;

// round(genuine_ratio * batch_size) genuine pairs drawn uniformly from all
// same-speaker pairs, then impostor pairs drawn uniformly from all
// cross-speaker pairs. Throws CapacityError when a needed class is empty.
PairBatch sample_pair_batch(const Dataset& data, std::size_t batch_size, double genuine_ratio,
                            std::mt19937_64& rng);

// velocity = momentum * velocity - lr * grad; w += velocity.
void sgd_momentum_step(Tensor& w, const Tensor& grad, Tensor& velocity, double lr, double momentum);

struct EpochLog {
  std::size_t epoch = 0;      // 1-based
  double total_loss = 0.0;    // mean over the epoch's steps
  double data_loss = 0.0;     // mean over the epoch's steps
  double group_lasso = 0.0;   // unscaled penalty of the model at epoch end
  double sparsity_fraction = 0.0;
  std::optional<double> dev_eer;
};
using TrainLog = std::vector<EpochLog>;

// Held-out utterances and the trials scored after selected epochs.
struct DevSet {
  const Dataset* data = nullptr;
  TrialSet trials;
};

struct TrainResult {
  Model model;
  TrainLog log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Deterministic given (model, data, config). Throws DivergenceError on a
// non-finite loss.
TrainResult train(Model model, const Dataset& data, const TrainConfig& config,
                  const DevSet* dev = nullptr, const EpochCallback& on_epoch = {});

// As train, but the weights, biases and velocities of dropped groups are
// zeroed before the first step and after every step.
TrainResult fine_tune(Model model, const PruneMask& mask, const Dataset& data,
                      const TrainConfig& config, const DevSet* dev = nullptr,
                      const EpochCallback& on_epoch = {});

// epoch,total_loss,data_loss,group_lasso,sparsity_fraction,dev_eer
// (dev_eer is empty for epochs without a dev evaluation)
void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path);

}  // namespace ssv
