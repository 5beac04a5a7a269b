#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "ssv/network.hpp"

namespace ssv {

// Norms of every group of one weighted layer, indexed by group.
struct LayerNorms {
  std::size_t layer = 0;
  std::vector<double> norms;
};
// One entry per weighted layer, in model order.
using GroupNormReport = std::vector<LayerNorms>;

GroupNormReport group_norms(const Model& model);

struct LayerMask {
  std::size_t layer = 0;
  std::vector<bool> keep;

  std::size_t kept() const;
};

struct PruneMask {
  double tau = 0.0;
  std::vector<LayerMask> layers;
};

enum class PruneScope {
  AllLayers,
  KeepEmbedding,  // the last layer keeps all groups regardless of tau
};

// Keeps a group iff its norm >= tau. A layer that would lose every group keeps
// its largest-norm group (lowest index on ties).
PruneMask prune_mask(const GroupNormReport& report, double tau, PruneScope scope = PruneScope::AllLayers);

// Every group kept.
PruneMask full_mask(const Model& model);

// Zeroes the weights and bias of dropped groups. Shapes are unchanged.
Model apply_mask(const Model& model, const PruneMask& mask);

struct LayerCompaction {
  std::size_t layer = 0;
  std::vector<std::size_t> kept_outputs;  // ascending original group indices
  std::vector<std::size_t> kept_inputs;   // ascending original input indices
};
using CompactionMap = std::vector<LayerCompaction>;

// Physically removes dropped groups and the matching inputs of the next
// weighted layer. Throws ContractError if the mask drops any embedding group,
// does not match the model, or leaves a layer empty.
std::pair<Model, CompactionMap> compact(const Model& model, const PruneMask& mask);

struct LayerSparsity {
  std::size_t layer = 0;
  std::size_t groups = 0;
  std::size_t below = 0;  // groups with norm < tau

  double fraction() const { return groups ? static_cast<double>(below) / groups : 0.0; }
};

struct SparsityStats {
  std::vector<LayerSparsity> layers;
  std::size_t groups = 0;
  std::size_t below = 0;

  double fraction() const { return groups ? static_cast<double>(below) / groups : 0.0; }
};

SparsityStats sparsity_stats(const GroupNormReport& report, double tau);
SparsityStats sparsity_stats(const Model& model, double tau);

void write_group_norms_csv(const GroupNormReport& report, const std::filesystem::path& path);

// --- benchmarking -----------------------------------------------------------

inline constexpr std::size_t kMinBenchRepeats = 20;
inline constexpr std::size_t kBenchWarmups = 5;

// Median wall-clock nanoseconds of one forward pass of `layer` over an input
// of `input_shape`, drawn once from `seed`. Needs repeats >= kMinBenchRepeats.
double time_layer(const Layer& layer, const Shape& input_shape, std::size_t repeats,
                  std::uint64_t seed = 7);

struct BenchEntry {
  std::size_t layer = 0;
  double dense_ns = 0.0;
  double compact_ns = 0.0;
  double speedup = 0.0;  // dense_ns / compact_ns
};

BenchEntry bench_layer(std::size_t index, const Layer& dense, const Shape& dense_input,
                       const Layer& compacted, const Shape& compact_input, std::size_t repeats);

// Benches every weighted layer of two models that share a topology, using the
// per-layer input shapes produced by an input of `input_shape`.
std::vector<BenchEntry> bench_models(const Model& dense, const Model& compacted,
                                     const Shape& input_shape, std::size_t repeats);

void write_bench_csv(const std::vector<BenchEntry>& entries, const std::filesystem::path& path);

}  // namespace ssv
