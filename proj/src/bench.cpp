#include <algorithm>
#include <chrono>
#include <random>
#include <string>

#include "ssv/csv.hpp"
#include "ssv/errors.hpp"
#include "ssv/sparsity.hpp"

namespace ssv {

namespace {

Tensor run_layer(const Layer& layer, const Tensor& x) {
  switch (layer.kind) {
    case LayerKind::Conv: return conv2d_forward(x, layer.weights, layer.bias, kConvStride, kConvPad);
    case LayerKind::Fc: return fc_forward(x, layer.weights, layer.bias);
    default: throw ContractError(std::string("cannot bench a ") + layer_kind_name(layer.kind) + " layer");
  }
}

}  // namespace

double time_layer(const Layer& layer, const Shape& input_shape, std::size_t repeats, std::uint64_t seed) {
  if (repeats < kMinBenchRepeats)
    throw DomainError("benchmark needs at least " + std::to_string(kMinBenchRepeats) + " repeats");
  Tensor x(input_shape);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (double& v : x.data()) v = dist(rng);

  volatile double sink = 0.0;
  for (std::size_t i = 0; i < kBenchWarmups; ++i) sink = sink + run_layer(layer, x)[0];

  using Clock = std::chrono::steady_clock;
  std::vector<double> ns(repeats);
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = Clock::now();
    const Tensor y = run_layer(layer, x);
    const auto t1 = Clock::now();
    sink = sink + y[0];
    ns[i] = std::chrono::duration<double, std::nano>(t1 - t0).count();
  }
  std::nth_element(ns.begin(), ns.begin() + ns.size() / 2, ns.end());
  double median = ns[ns.size() / 2];
  if (ns.size() % 2 == 0) median = 0.5 * (median + *std::max_element(ns.begin(), ns.begin() + ns.size() / 2));
  if (!(median > 0.0))
    throw BenchError("timer resolution too coarse: median forward time " + format_number(median) + " ns");
  return median;
}

BenchEntry bench_layer(std::size_t index, const Layer& dense, const Shape& dense_input,
                       const Layer& compacted, const Shape& compact_input, std::size_t repeats) {
  BenchEntry e;
  e.layer = index;
  e.dense_ns = time_layer(dense, dense_input, repeats);
  e.compact_ns = time_layer(compacted, compact_input, repeats);
  e.speedup = e.dense_ns / e.compact_ns;
  return e;
}

std::vector<BenchEntry> bench_models(const Model& dense, const Model& compacted,
                                     const Shape& input_shape, std::size_t repeats) {
  if (dense.layers().size() != compacted.layers().size())
    throw ContractError("bench: models have different layer counts");
  for (std::size_t i = 0; i < dense.layers().size(); ++i)
    if (dense.layer(i).kind != compacted.layer(i).kind)
      throw ContractError("bench: models differ at layer " + std::to_string(i));

  Shape compact_input = input_shape;
  compact_input[0] = compacted.in_channels();
  ForwardCache dc, cc;
  forward(dense, Tensor(input_shape), &dc);
  forward(compacted, Tensor(compact_input), &cc);

  std::vector<BenchEntry> out;
  for (std::size_t i : dense.weighted_layers())
    out.push_back(bench_layer(i, dense.layer(i), dc.inputs[i].shape(), compacted.layer(i),
                              cc.inputs[i].shape(), repeats));
  return out;
}

void write_bench_csv(const std::vector<BenchEntry>& entries, const std::filesystem::path& path) {
  CsvWriter csv(path, {"layer", "dense_ns", "compact_ns", "speedup"});
  for (const BenchEntry& e : entries) csv.row({e.layer, e.dense_ns, e.compact_ns, e.speedup});
  csv.close();
}

}  // namespace ssv
