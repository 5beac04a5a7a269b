#include "ssv/objective.hpp"

#include <cmath>

#include "ssv/errors.hpp"

namespace ssv {

void Hyperparams::validate() const {
  if (!(lambda_r >= 0.0)) throw ConfigError("lambda_r must be >= 0");
  if (!(lambda_gs >= 0.0)) throw ConfigError("lambda_gs must be >= 0");
  if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
}

double contrastive_pair_loss(double d, PairLabel label, double eta) {
  if (!(d >= 0.0)) throw DomainError("contrastive loss needs a distance >= 0");
  if (label == PairLabel::Genuine) return 0.5 * d * d;
  const double gap = std::max(0.0, eta - d);
  return 0.5 * gap * gap;
}

double contrastive_grad_d(double d, PairLabel label, double eta) {
  if (!(d >= 0.0)) throw DomainError("contrastive loss needs a distance >= 0");
  if (label == PairLabel::Genuine) return d;
  return -std::max(0.0, eta - d);
}

double contrastive_batch_loss(std::span<const ScoredPair> pairs, double eta) {
  if (pairs.empty()) throw DomainError("contrastive loss over an empty batch");
  double s = 0.0;
  for (const ScoredPair& p : pairs) s += contrastive_pair_loss(p.distance, p.label, eta);
  return s / static_cast<double>(pairs.size());
}

namespace {

double norm2(std::span<const double> w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return std::sqrt(s);
}

}  // namespace

double group_lasso(std::span<const std::span<const double>> groups) {
  double s = 0.0;
  for (auto g : groups) s += norm2(g);
  return s;
}

std::vector<double> group_lasso_subgrad(std::span<const double> group, double eps) {
  std::vector<double> out(group.size(), 0.0);
  const double n = norm2(group);
  if (n <= eps) return out;
  for (std::size_t i = 0; i < group.size(); ++i) out[i] = group[i] / n;
  return out;
}

std::vector<GroupView> layer_groups(const Model& model, std::size_t layer) {
  const Layer& l = model.layer(layer);
  if (!l.weighted()) throw ContractError("layer " + std::to_string(layer) + " has no weight groups");
  const std::size_t count = l.groups(), size = l.group_size();
  std::vector<GroupView> views;
  views.reserve(count);
  for (std::size_t g = 0; g < count; ++g)
    views.push_back({layer, g, count, l.weights.data().subspan(g * size, size)});
  return views;
}

double scaled_group_lasso(const Model& model) {
  double total = 0.0;
  for (std::size_t i : model.weighted_layers()) {
    const std::vector<GroupView> views = layer_groups(model, i);
    double s = 0.0;
    for (const GroupView& v : views) s += norm2(v.weights);
    total += s / std::sqrt(static_cast<double>(views.size()));
  }
  return total;
}

double weight_decay_term(const Model& model) {
  double s = 0.0;
  for (std::size_t i : model.weighted_layers())
    for (double w : model.layer(i).weights.data()) s += w * w;
  return 0.5 * s;
}

namespace {

LossBreakdown regularised(double data, const Model& model, const Hyperparams& hp) {
  LossBreakdown out;
  out.data = data;
  out.weight_decay = weight_decay_term(model);
  out.group_lasso = scaled_group_lasso(model);
  out.total = data + hp.lambda_r * out.weight_decay + hp.lambda_gs * out.group_lasso;
  return out;
}

void check_pair(const PairInput& p) {
  if (!p.x1 || !p.x2) throw DomainError("pair input is missing a feature tensor");
}

double checked_distance(const Embedding& e1, const Embedding& e2) {
  const double d = distance(e1, e2);
  if (!std::isfinite(d)) throw DivergenceError("non-finite embedding distance");
  return d;
}

}  // namespace

std::pair<LossBreakdown, ParamGrads> total_loss(const Model& model,
                                                std::span<const PairInput> batch,
                                                const Hyperparams& hp) {
  hp.validate();
  if (batch.empty()) throw DomainError("total_loss over an empty batch");
  ParamGrads grads = zero_grads(model);
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  double data = 0.0;
  ForwardCache c1, c2;
  for (const PairInput& p : batch) {
    check_pair(p);
    const auto [e1, e2] = forward_pair(model, *p.x1, *p.x2, &c1, &c2);
    const double d = checked_distance(e1, e2);
    data += contrastive_pair_loss(d, p.label, hp.eta);
    const double dc = contrastive_grad_d(d, p.label, hp.eta);
    // dD/de1 = (e1 - e2) / D; at D == 0 the zero vector is used.
    Tensor g1(e1.shape());
    if (d > 0.0 && dc != 0.0) {
      const double scale = inv_n * dc / d;
      for (std::size_t k = 0; k < g1.size(); ++k) g1[k] = scale * (e1[k] - e2[k]);
    }
    Tensor g2 = g1;
    for (double& v : g2.data()) v = -v;
    backward(model, c1, g1, grads);
    backward(model, c2, g2, grads);
  }
  data *= inv_n;

  for (std::size_t i : model.weighted_layers()) {
    const Tensor& w = model.layer(i).weights;
    Tensor& gw = grads[i].weights;
    if (hp.lambda_r != 0.0)
      for (std::size_t k = 0; k < w.size(); ++k) gw[k] += hp.lambda_r * w[k];
    if (hp.lambda_gs != 0.0) {
      const std::vector<GroupView> views = layer_groups(model, i);
      const double scale = hp.lambda_gs / std::sqrt(static_cast<double>(views.size()));
      for (const GroupView& v : views) {
        const std::vector<double> sub = group_lasso_subgrad(v.weights);
        const std::size_t offset = v.group * sub.size();
        for (std::size_t k = 0; k < sub.size(); ++k) gw[offset + k] += scale * sub[k];
      }
    }
  }
  return {regularised(data, model, hp), std::move(grads)};
}

LossBreakdown evaluate_loss(const Model& model, std::span<const PairInput> batch,
                            const Hyperparams& hp) {
  hp.validate();
  if (batch.empty()) throw DomainError("loss over an empty batch");
  double data = 0.0;
  for (const PairInput& p : batch) {
    check_pair(p);
    const auto [e1, e2] = forward_pair(model, *p.x1, *p.x2);
    data += contrastive_pair_loss(checked_distance(e1, e2), p.label, hp.eta);
  }
  return regularised(data / static_cast<double>(batch.size()), model, hp);
}

}  // namespace ssv
