#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "ssv/audio.hpp"
#include "ssv/tensor.hpp"

namespace ssv {

inline constexpr std::size_t kEmbeddingDim = 64;
inline constexpr std::size_t kConvKernel = 3;
inline constexpr std::size_t kConvStride = 1;
inline constexpr std::size_t kConvPad = 1;

enum class LayerKind { Conv, Relu, AvgPool2, GlobalAvgPool, Fc };

const char* layer_kind_name(LayerKind kind);

// Structural description of one layer. `in`/`out` are channel counts for conv
// layers and dimensions for fc layers; unused for the parameter-free kinds.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::size_t in = 0;
  std::size_t out = 0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Layer {
  LayerKind kind = LayerKind::Relu;
  Tensor weights;  // conv [F,C,3,3], fc [n,d]; empty otherwise
  Tensor bias;     // [F] or [n]; empty otherwise

  bool weighted() const { return kind == LayerKind::Conv || kind == LayerKind::Fc; }
  // Number of output groups: filters for conv, neurons for fc.
  std::size_t groups() const { return weighted() ? weights.dim(0) : 0; }
  std::size_t group_size() const { return weighted() ? weights.size() / weights.dim(0) : 0; }

  friend bool operator==(const Layer&, const Layer&) = default;
};

struct ModelConfig {
  std::size_t in_channels = kCubeChannels;
  std::vector<std::size_t> conv_widths{16, 32, 64};
  std::size_t embedding_dim = kEmbeddingDim;
  std::uint64_t seed = 1;
};

// conv/relu/avgpool2 blocks, the last one closed by global average pooling
// instead, then fc layers separated by relu. This is the only family the
// checkpoint format can describe.
std::vector<LayerSpec> canonical_topology(std::size_t in_channels,
                                          const std::vector<std::size_t>& conv_widths,
                                          const std::vector<std::size_t>& fc_widths);

// Throws ConfigError unless consecutive layers compose, starting from
// `in_channels` feature maps and ending in an fc layer of kEmbeddingDim outputs.
void validate_topology(const std::vector<LayerSpec>& specs, std::size_t in_channels);

// A single shared parameter set; both Siamese towers read the same tensors.
class Model {
 public:
  Model() = default;
  // Validates shapes against each other; throws ConfigError on mismatch.
  explicit Model(std::vector<Layer> layers);

  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  // Parameter values may be edited in place; shapes must stay as they are.
  Tensor& weights(std::size_t i) { return layers_.at(i).weights; }
  Tensor& bias(std::size_t i) { return layers_.at(i).bias; }

  std::size_t in_channels() const;
  std::size_t embedding_dim() const;
  std::vector<std::size_t> weighted_layers() const;
  std::vector<LayerSpec> specs() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  std::vector<Layer> layers_;
};

Model build_model(const ModelConfig& config);
Model build_model(const std::vector<LayerSpec>& specs, std::size_t in_channels, std::uint64_t seed);

using Embedding = Tensor;

// Inputs to every layer of one forward pass, kept for backward.
struct ForwardCache {
  std::vector<Tensor> inputs;
};

// `input` is [C,H,W]; any spatial extent the layers accept is allowed.
Embedding forward(const Model& model, const Tensor& input, ForwardCache* cache = nullptr);
Embedding forward(const Model& model, const FeatureCube& cube, ForwardCache* cache = nullptr);

std::pair<Embedding, Embedding> forward_pair(const Model& model, const Tensor& x1,
                                             const Tensor& x2, ForwardCache* cache1 = nullptr,
                                             ForwardCache* cache2 = nullptr);

double distance(const Embedding& e1, const Embedding& e2);

// Parameter gradients aligned with Model::layers(); empty for parameter-free layers.
struct LayerGrads {
  Tensor weights;
  Tensor bias;
};
using ParamGrads = std::vector<LayerGrads>;

ParamGrads zero_grads(const Model& model);
void add_scaled(ParamGrads& into, const ParamGrads& from, double scale = 1.0);

// Back-propagates grad_embedding through one tower and adds into `grads`.
void backward(const Model& model, const ForwardCache& cache, const Tensor& grad_embedding,
              ParamGrads& grads);

// Sum of both towers' contributions to the shared parameters.
ParamGrads backward_pair(const Model& model, const ForwardCache& cache1,
                         const ForwardCache& cache2, const Tensor& grad_e1,
                         const Tensor& grad_e2);

// SSVW checkpoint: "SSVW", u32 version, u32 weighted-layer count, then per
// weighted layer u32 rank, u32 shape[rank], weights, biases (little-endian
// doubles). Parameter-free layers are implied by canonical_topology.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace ssv
