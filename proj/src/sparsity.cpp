#include "ssv/sparsity.hpp"

#include <cmath>
#include <string>

#include "ssv/csv.hpp"
#include "ssv/errors.hpp"

namespace ssv {

GroupNormReport group_norms(const Model& model) {
  GroupNormReport report;
  for (std::size_t i : model.weighted_layers()) {
    const Layer& l = model.layer(i);
    const std::size_t size = l.group_size();
    LayerNorms ln{i, std::vector<double>(l.groups())};
    for (std::size_t g = 0; g < ln.norms.size(); ++g) {
      double s = 0.0;
      for (std::size_t k = 0; k < size; ++k) {
        const double w = l.weights[g * size + k];
        s += w * w;
      }
      ln.norms[g] = std::sqrt(s);
    }
    report.push_back(std::move(ln));
  }
  return report;
}

std::size_t LayerMask::kept() const {
  std::size_t n = 0;
  for (bool k : keep) n += k;
  return n;
}

PruneMask prune_mask(const GroupNormReport& report, double tau, PruneScope scope) {
  if (!(tau >= 0.0)) throw DomainError("prune threshold tau must be >= 0");
  PruneMask mask{tau, {}};
  for (std::size_t r = 0; r < report.size(); ++r) {
    const std::vector<double>& norms = report[r].norms;
    if (norms.empty()) throw ContractError("layer " + std::to_string(report[r].layer) + " has no groups");
    LayerMask lm{report[r].layer, std::vector<bool>(norms.size())};
    const bool exempt = scope == PruneScope::KeepEmbedding && r + 1 == report.size();
    std::size_t best = 0;
    for (std::size_t g = 0; g < norms.size(); ++g) {
      lm.keep[g] = exempt || norms[g] >= tau;
      if (norms[g] > norms[best]) best = g;
    }
    if (lm.kept() == 0) lm.keep[best] = true;
    mask.layers.push_back(std::move(lm));
  }
  return mask;
}

PruneMask full_mask(const Model& model) { return prune_mask(group_norms(model), 0.0); }

namespace {

void check_mask(const Model& model, const PruneMask& mask) {
  const std::vector<std::size_t> weighted = model.weighted_layers();
  if (mask.layers.size() != weighted.size())
    throw ContractError("mask covers " + std::to_string(mask.layers.size()) + " layers, model has " +
                        std::to_string(weighted.size()) + " weighted layers");
  for (std::size_t r = 0; r < weighted.size(); ++r) {
    const LayerMask& lm = mask.layers[r];
    if (lm.layer != weighted[r] || lm.keep.size() != model.layer(weighted[r]).groups())
      throw ContractError("mask entry " + std::to_string(r) + " does not match layer " +
                          std::to_string(weighted[r]));
    if (lm.kept() == 0) throw ContractError("mask drops every group of layer " + std::to_string(lm.layer));
  }
}

std::vector<std::size_t> kept_indices(const std::vector<bool>& keep) {
  std::vector<std::size_t> idx;
  for (std::size_t g = 0; g < keep.size(); ++g)
    if (keep[g]) idx.push_back(g);
  return idx;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

Model apply_mask(const Model& model, const PruneMask& mask) {
  check_mask(model, mask);
  Model out = model;
  for (const LayerMask& lm : mask.layers) {
    Tensor& w = out.weights(lm.layer);
    Tensor& b = out.bias(lm.layer);
    const std::size_t size = out.layer(lm.layer).group_size();
    for (std::size_t g = 0; g < lm.keep.size(); ++g) {
      if (lm.keep[g]) continue;
      for (std::size_t k = 0; k < size; ++k) w[g * size + k] = 0.0;
      b[g] = 0.0;
    }
  }
  return out;
}

std::pair<Model, CompactionMap> compact(const Model& model, const PruneMask& mask) {
  check_mask(model, mask);
  const LayerMask& last = mask.layers.back();
  if (last.kept() != last.keep.size())
    throw ContractError("the embedding layer cannot be pruned; " +
                        std::to_string(last.keep.size() - last.kept()) + " of its groups are dropped");

  CompactionMap map;
  std::vector<Layer> layers = model.layers();
  std::vector<std::size_t> inputs = all_indices(model.in_channels());
  std::size_t r = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Layer& l = layers[i];
    if (!l.weighted()) continue;
    const std::vector<std::size_t> outputs = kept_indices(mask.layers[r++].keep);
    const Shape& ws = l.weights.shape();
    const std::size_t in_dim = ws[1];
    const std::size_t taps = l.weights.size() / (ws[0] * in_dim);  // 9 for conv, 1 for fc

    Shape shape = ws;
    shape[0] = outputs.size();
    shape[1] = inputs.size();
    Tensor w(shape), b({outputs.size()});
    for (std::size_t o = 0; o < outputs.size(); ++o) {
      b[o] = l.bias[outputs[o]];
      for (std::size_t c = 0; c < inputs.size(); ++c)
        for (std::size_t t = 0; t < taps; ++t)
          w[(o * inputs.size() + c) * taps + t] = l.weights[(outputs[o] * in_dim + inputs[c]) * taps + t];
    }
    map.push_back({i, outputs, inputs});
    l.weights = std::move(w);
    l.bias = std::move(b);
    // relu and both pools act per channel, so the kept outputs are exactly
    // the next weighted layer's inputs.
    inputs = outputs;
  }
  return {Model(std::move(layers)), std::move(map)};
}

SparsityStats sparsity_stats(const GroupNormReport& report, double tau) {
  if (!(tau >= 0.0)) throw DomainError("sparsity threshold tau must be >= 0");
  SparsityStats stats;
  for (const LayerNorms& ln : report) {
    LayerSparsity ls{ln.layer, ln.norms.size(), 0};
    for (double n : ln.norms) ls.below += n < tau;
    stats.groups += ls.groups;
    stats.below += ls.below;
    stats.layers.push_back(ls);
  }
  return stats;
}

SparsityStats sparsity_stats(const Model& model, double tau) {
  return sparsity_stats(group_norms(model), tau);
}

void write_group_norms_csv(const GroupNormReport& report, const std::filesystem::path& path) {
  CsvWriter csv(path, {"layer", "group", "norm"});
  for (const LayerNorms& ln : report)
    for (std::size_t g = 0; g < ln.norms.size(); ++g) csv.row({ln.layer, g, ln.norms[g]});
  csv.close();
}

}  // namespace ssv
