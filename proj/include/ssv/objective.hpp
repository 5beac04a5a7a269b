#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ssv/network.hpp"

namespace ssv {

struct Hyperparams {
  double lambda_r = 0.0;   // weight decay on 1/2 * sum of squared weights
  double lambda_gs = 0.0;  // group-sparsity strength
  double eta = 1.0;        // contrastive margin

  void validate() const;
};

enum class PairLabel : int { Impostor = 0, Genuine = 1 };

// Genuine: D^2 / 2. Impostor: max(0, eta - D)^2 / 2.
double contrastive_pair_loss(double d, PairLabel label, double eta);
double contrastive_grad_d(double d, PairLabel label, double eta);

struct ScoredPair {
  double distance;
  PairLabel label;
};

// Mean of the per-pair losses.
double contrastive_batch_loss(std::span<const ScoredPair> pairs, double eta);

// Sum of the groups' Euclidean norms.
double group_lasso(std::span<const std::span<const double>> groups);

inline constexpr double kGroupNormEps = 1e-12;

// w / ||w||, or zero when ||w|| <= eps.
std::vector<double> group_lasso_subgrad(std::span<const double> group, double eps = kGroupNormEps);

// One group of a weighted layer: every weight feeding output channel / neuron
// `group`. Biases are not part of any group.
struct GroupView {
  std::size_t layer = 0;
  std::size_t group = 0;
  std::size_t group_count = 0;
  std::span<const double> weights;
};

std::vector<GroupView> layer_groups(const Model& model, std::size_t layer);

// sum over weighted layers m of (1 / sqrt(|G_m|)) * group_lasso(groups of m)
double scaled_group_lasso(const Model& model);
// 1/2 * sum of all squared weights (biases excluded)
double weight_decay_term(const Model& model);

struct PairInput {
  const Tensor* x1 = nullptr;
  const Tensor* x2 = nullptr;
  PairLabel label = PairLabel::Impostor;
};

struct LossBreakdown {
  double total = 0.0;
  double data = 0.0;         // mean contrastive loss
  double weight_decay = 0.0; // unscaled, see weight_decay_term
  double group_lasso = 0.0;  // unscaled, see scaled_group_lasso
};

// total = data + lambda_r * weight_decay + lambda_gs * group_lasso, with the
// gradient of that scalar. Pairs are processed in order.
std::pair<LossBreakdown, ParamGrads> total_loss(const Model& model,
                                                std::span<const PairInput> batch,
                                                const Hyperparams& hp);

// Value only; no backward pass.
LossBreakdown evaluate_loss(const Model& model, std::span<const PairInput> batch,
                            const Hyperparams& hp);

}  // namespace ssv
