#include "ssv/trainer.hpp"

#include <cmath>
#include <string>

#include "ssv/csv.hpp"
#include "ssv/errors.hpp"

namespace ssv {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("train.learning_rate must be a finite value >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must be in [0, 1)");
  if (!(genuine_ratio > 0.0 && genuine_ratio < 1.0)) throw ConfigError("train.genuine_ratio must be in (0, 1)");
  if (!(prune_tau >= 0.0)) throw ConfigError("train.prune_tau must be >= 0");
  try {
    hyperparams.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("train.") + e.what());
  }
}

std::size_t TrainConfig::steps_for(const Dataset& data) const {
  if (steps_per_epoch) return steps_per_epoch;
  return std::max<std::size_t>(1, (data.size() + batch_size - 1) / batch_size);
}

PairBatch sample_pair_batch(const Dataset& data, std::size_t batch_size, double genuine_ratio,
                            std::mt19937_64& rng) {
  const std::size_t n_gen = static_cast<std::size_t>(std::llround(genuine_ratio * static_cast<double>(batch_size)));
  const std::size_t n_imp = batch_size - n_gen;

  // Cumulative same-speaker pair counts, for uniform choice over all pairs.
  std::vector<std::size_t> cumulative;
  std::size_t total = 0;
  for (const auto& s : data.speakers()) {
    total += s.size() * (s.size() - 1) / 2;
    cumulative.push_back(total);
  }
  if (n_gen > 0 && total == 0) throw CapacityError("no speaker has two utterances; cannot form genuine pairs");
  if (n_imp > 0 && data.speakers().size() < 2) throw CapacityError("impostor pairs need at least two speakers");

  PairBatch batch;
  batch.reserve(batch_size);
  for (std::size_t k = 0; k < n_gen; ++k) {
    std::size_t r = std::uniform_int_distribution<std::size_t>(0, total - 1)(rng);
    std::size_t s = 0;
    while (r >= cumulative[s]) ++s;
    if (s) r -= cumulative[s - 1];
    // r-th pair (i < j) of this speaker in row-major order.
    const std::vector<std::size_t>& utts = data.speakers()[s];
    std::size_t i = 0, row = utts.size() - 1;
    while (r >= row) {
      r -= row;
      ++i;
      --row;
    }
    batch.push_back({utts[i], utts[i + 1 + r], PairLabel::Genuine});
  }
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  while (batch.size() < batch_size) {
    const std::size_t a = pick(rng), b = pick(rng);
    if (data.speaker_of(a) == data.speaker_of(b)) continue;
    batch.push_back({a, b, PairLabel::Impostor});
  }
  return batch;
}

void sgd_momentum_step(Tensor& w, const Tensor& grad, Tensor& velocity, double lr, double momentum) {
  if (w.shape() != grad.shape() || w.shape() != velocity.shape())
    throw ShapeError("sgd step: weight " + shape_string(w.shape()) + ", gradient " + shape_string(grad.shape()) +
                     ", velocity " + shape_string(velocity.shape()));
  for (std::size_t i = 0; i < w.size(); ++i) {
    velocity[i] = momentum * velocity[i] - lr * grad[i];
    w[i] += velocity[i];
  }
}

namespace {

void zero_dropped(Model& model, ParamGrads& velocity, const PruneMask& mask) {
  for (const LayerMask& lm : mask.layers) {
    const std::size_t size = model.layer(lm.layer).group_size();
    for (std::size_t g = 0; g < lm.keep.size(); ++g) {
      if (lm.keep[g]) continue;
      for (std::size_t k = 0; k < size; ++k) {
        model.weights(lm.layer)[g * size + k] = 0.0;
        velocity[lm.layer].weights[g * size + k] = 0.0;
      }
      model.bias(lm.layer)[g] = 0.0;
      velocity[lm.layer].bias[g] = 0.0;
    }
  }
}

TrainResult run(Model model, const Dataset& data, const TrainConfig& config, const DevSet* dev,
                const EpochCallback& on_epoch, const PruneMask* mask) {
  config.validate();
  if (data.empty()) throw CapacityError("training set is empty");
  if (dev && !dev->data) throw ContractError("dev set without data");

  std::mt19937_64 rng(config.seed);
  ParamGrads velocity = zero_grads(model);
  if (mask) {
    model = apply_mask(model, *mask);
    zero_dropped(model, velocity, *mask);
  }
  const std::size_t steps = config.steps_for(data);

  TrainLog log;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    double total = 0.0, data_loss = 0.0;
    for (std::size_t step = 1; step <= steps; ++step) {
      const PairBatch batch = sample_pair_batch(data, config.batch_size, config.genuine_ratio, rng);
      std::vector<PairInput> inputs;
      inputs.reserve(batch.size());
      for (const PairIndex& p : batch)
        inputs.push_back({&data[p.a].features.tensor(), &data[p.b].features.tensor(), p.label});
      const std::string where = "epoch " + std::to_string(epoch) + ", step " + std::to_string(step);
      std::pair<LossBreakdown, ParamGrads> result;
      try {
        result = total_loss(model, inputs, config.hyperparams);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at " + where);
      }
      const auto& [loss, grads] = result;
      if (!std::isfinite(loss.total)) throw DivergenceError("non-finite loss at " + where);
      total += loss.total;
      data_loss += loss.data;
      for (std::size_t i : model.weighted_layers()) {
        sgd_momentum_step(model.weights(i), grads[i].weights, velocity[i].weights, config.learning_rate,
                          config.momentum);
        sgd_momentum_step(model.bias(i), grads[i].bias, velocity[i].bias, config.learning_rate, config.momentum);
      }
      if (mask) zero_dropped(model, velocity, *mask);
    }
    if (!model.all_finite())
      throw DivergenceError("non-finite parameters after epoch " + std::to_string(epoch));

    EpochLog entry;
    entry.epoch = epoch;
    entry.total_loss = total / static_cast<double>(steps);
    entry.data_loss = data_loss / static_cast<double>(steps);
    entry.group_lasso = scaled_group_lasso(model);
    entry.sparsity_fraction = sparsity_stats(model, config.prune_tau).fraction();
    const bool evaluate_now =
        dev && config.eval_every > 0 && (epoch % config.eval_every == 0 || epoch == config.epochs);
    if (evaluate_now) entry.dev_eer = evaluate(model, *dev->data, dev->trials).eer;
    log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return {std::move(model), std::move(log)};
}

}  // namespace

TrainResult train(Model model, const Dataset& data, const TrainConfig& config, const DevSet* dev,
                  const EpochCallback& on_epoch) {
  return run(std::move(model), data, config, dev, on_epoch, nullptr);
}

TrainResult fine_tune(Model model, const PruneMask& mask, const Dataset& data, const TrainConfig& config,
                      const DevSet* dev, const EpochCallback& on_epoch) {
  return run(std::move(model), data, config, dev, on_epoch, &mask);
}

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path) {
  CsvWriter csv(path, {"epoch", "total_loss", "data_loss", "group_lasso", "sparsity_fraction", "dev_eer"});
  for (const EpochLog& e : log)
    csv.row({e.epoch, e.total_loss, e.data_loss, e.group_lasso, e.sparsity_fraction,
             e.dev_eer ? CsvField(*e.dev_eer) : CsvField("")});
  csv.close();
}

}  // namespace ssv
