#include "ssv/network.hpp"

#include <cmath>
#include <string>

#include "ssv/errors.hpp"
#include "ssv/rng.hpp"

namespace ssv {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::AvgPool2: return "avgpool2";
    case LayerKind::GlobalAvgPool: return "global_avgpool";
    case LayerKind::Fc: return "fc";
  }
  return "?";
}

std::vector<LayerSpec> canonical_topology(std::size_t in_channels,
                                          const std::vector<std::size_t>& conv_widths,
                                          const std::vector<std::size_t>& fc_widths) {
  std::vector<LayerSpec> specs;
  std::size_t channels = in_channels;
  for (std::size_t i = 0; i < conv_widths.size(); ++i) {
    specs.push_back({LayerKind::Conv, channels, conv_widths[i]});
    specs.push_back({LayerKind::Relu});
    const bool last = i + 1 == conv_widths.size();
    specs.push_back({last ? LayerKind::GlobalAvgPool : LayerKind::AvgPool2});
    channels = conv_widths[i];
  }
  for (std::size_t i = 0; i < fc_widths.size(); ++i) {
    if (i > 0) specs.push_back({LayerKind::Relu});
    specs.push_back({LayerKind::Fc, channels, fc_widths[i]});
    channels = fc_widths[i];
  }
  return specs;
}

void validate_topology(const std::vector<LayerSpec>& specs, std::size_t in_channels) {
  if (specs.empty()) throw ConfigError("model has no layers");
  bool is_map = true;
  std::size_t width = in_channels;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    const std::string where = "layer " + std::to_string(i) + " (" + layer_kind_name(s.kind) + ")";
    switch (s.kind) {
      case LayerKind::Conv:
        if (!is_map) throw ConfigError(where + ": conv needs feature maps, got a vector");
        if (s.in != width || s.out == 0)
          throw ConfigError(where + ": expects " + std::to_string(s.in) + " input channels, gets " +
                            std::to_string(width));
        width = s.out;
        break;
      case LayerKind::Fc:
        if (is_map) throw ConfigError(where + ": fc needs a vector; add global_avgpool first");
        if (s.in != width || s.out == 0)
          throw ConfigError(where + ": expects input dim " + std::to_string(s.in) + ", gets " +
                            std::to_string(width));
        width = s.out;
        break;
      case LayerKind::AvgPool2:
        if (!is_map) throw ConfigError(where + ": pooling needs feature maps");
        break;
      case LayerKind::GlobalAvgPool:
        if (!is_map) throw ConfigError(where + ": pooling needs feature maps");
        is_map = false;
        break;
      case LayerKind::Relu:
        break;
    }
  }
  if (specs.back().kind != LayerKind::Fc)
    throw ConfigError("the last layer must be the fc embedding layer");
  if (width != kEmbeddingDim)
    throw ConfigError("embedding dimension must be " + std::to_string(kEmbeddingDim) + ", got " +
                      std::to_string(width));
}

namespace {

LayerSpec spec_of(const Layer& layer, std::size_t index) {
  const std::string where = "layer " + std::to_string(index);
  switch (layer.kind) {
    case LayerKind::Conv: {
      const Shape& w = layer.weights.shape();
      if (w.size() != 4 || w[2] != kConvKernel || w[3] != kConvKernel)
        throw ConfigError(where + ": conv weights must be [F,C,3,3], got " + shape_string(w));
      if (layer.bias.shape() != Shape{w[0]})
        throw ConfigError(where + ": conv bias must be [" + std::to_string(w[0]) + "]");
      return {LayerKind::Conv, w[1], w[0]};
    }
    case LayerKind::Fc: {
      const Shape& w = layer.weights.shape();
      if (w.size() != 2) throw ConfigError(where + ": fc weights must be [n,d], got " + shape_string(w));
      if (layer.bias.shape() != Shape{w[0]})
        throw ConfigError(where + ": fc bias must be [" + std::to_string(w[0]) + "]");
      return {LayerKind::Fc, w[1], w[0]};
    }
    default:
      if (!layer.weights.empty() || !layer.bias.empty())
        throw ConfigError(where + ": " + layer_kind_name(layer.kind) + " has no parameters");
      return {layer.kind};
  }
}

}  // namespace

Model::Model(std::vector<Layer> layers) : layers_(std::move(layers)) {
  const std::vector<LayerSpec> s = specs();
  validate_topology(s, in_channels());
}

std::size_t Model::in_channels() const {
  for (const Layer& l : layers_)
    if (l.kind == LayerKind::Conv) return l.weights.dim(1);
  return kCubeChannels;
}

std::size_t Model::embedding_dim() const {
  return layers_.empty() ? 0 : layers_.back().weights.dim(0);
}

std::vector<std::size_t> Model::weighted_layers() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i].weighted()) idx.push_back(i);
  return idx;
}

std::vector<LayerSpec> Model::specs() const {
  std::vector<LayerSpec> s;
  for (std::size_t i = 0; i < layers_.size(); ++i) s.push_back(spec_of(layers_[i], i));
  return s;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

bool Model::all_finite() const {
  for (const Layer& l : layers_)
    if (!l.weights.all_finite() || !l.bias.all_finite()) return false;
  return true;
}

Model build_model(const std::vector<LayerSpec>& specs, std::size_t in_channels, std::uint64_t seed) {
  validate_topology(specs, in_channels);
  std::vector<Layer> layers;
  std::uint64_t weighted = 0;
  for (const LayerSpec& s : specs) {
    Layer layer{s.kind, {}, {}};
    if (s.kind == LayerKind::Conv) {
      layer.weights = he_init({s.out, s.in, kConvKernel, kConvKernel}, s.in * kConvKernel * kConvKernel,
                              derive_seed(seed, weighted++));
      layer.bias = Tensor({s.out});
    } else if (s.kind == LayerKind::Fc) {
      layer.weights = he_init({s.out, s.in}, s.in, derive_seed(seed, weighted++));
      layer.bias = Tensor({s.out});
    }
    layers.push_back(std::move(layer));
  }
  return Model(std::move(layers));
}

Model build_model(const ModelConfig& config) {
  if (config.conv_widths.empty()) throw ConfigError("model.conv_widths must not be empty");
  for (std::size_t w : config.conv_widths)
    if (w == 0) throw ConfigError("model.conv_widths entries must be positive");
  if (config.embedding_dim != kEmbeddingDim)
    throw ConfigError("model.embedding_dim must be " + std::to_string(kEmbeddingDim) + ", got " +
                      std::to_string(config.embedding_dim));
  return build_model(canonical_topology(config.in_channels, config.conv_widths, {config.embedding_dim}),
                     config.in_channels, config.seed);
}

// ---------------------------------------------------------------------------

Embedding forward(const Model& model, const Tensor& input, ForwardCache* cache) {
  if (cache) cache->inputs.clear();
  Tensor x = input;
  for (const Layer& layer : model.layers()) {
    Tensor y;
    switch (layer.kind) {
      case LayerKind::Conv: y = conv2d_forward(x, layer.weights, layer.bias, kConvStride, kConvPad); break;
      case LayerKind::Relu: y = relu_forward(x); break;
      case LayerKind::AvgPool2: y = avg_pool2_forward(x); break;
      case LayerKind::GlobalAvgPool: y = global_avg_pool_forward(x); break;
      case LayerKind::Fc: y = fc_forward(x, layer.weights, layer.bias); break;
    }
    if (cache) cache->inputs.push_back(std::move(x));
    x = std::move(y);
  }
  return x;
}

Embedding forward(const Model& model, const FeatureCube& cube, ForwardCache* cache) {
  return forward(model, cube.tensor(), cache);
}

std::pair<Embedding, Embedding> forward_pair(const Model& model, const Tensor& x1,
                                             const Tensor& x2, ForwardCache* cache1,
                                             ForwardCache* cache2) {
  Embedding e1 = forward(model, x1, cache1);
  Embedding e2 = forward(model, x2, cache2);
  return {std::move(e1), std::move(e2)};
}

double distance(const Embedding& e1, const Embedding& e2) {
  if (e1.shape() != e2.shape())
    throw ShapeError("distance between embeddings of shapes " + shape_string(e1.shape()) + " and " +
                     shape_string(e2.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    const double d = e1[i] - e2[i];
    s += d * d;
  }
  return std::sqrt(s);
}

ParamGrads zero_grads(const Model& model) {
  ParamGrads grads(model.layers().size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const Layer& l = model.layer(i);
    if (!l.weighted()) continue;
    grads[i].weights = Tensor(l.weights.shape());
    grads[i].bias = Tensor(l.bias.shape());
  }
  return grads;
}

void add_scaled(ParamGrads& into, const ParamGrads& from, double scale) {
  if (into.size() != from.size()) throw ShapeError("add_scaled: gradient sets differ in length");
  for (std::size_t i = 0; i < into.size(); ++i) {
    for (auto [dst, src] : {std::pair{&into[i].weights, &from[i].weights},
                            std::pair{&into[i].bias, &from[i].bias}}) {
      if (dst->size() != src->size()) throw ShapeError("add_scaled: gradient shapes differ");
      for (std::size_t k = 0; k < dst->size(); ++k) (*dst)[k] += scale * (*src)[k];
    }
  }
}

void backward(const Model& model, const ForwardCache& cache, const Tensor& grad_embedding,
              ParamGrads& grads) {
  const auto& layers = model.layers();
  if (cache.inputs.size() != layers.size()) throw ShapeError("backward: cache does not match model");
  if (grads.size() != layers.size()) throw ShapeError("backward: gradient set does not match model");
  Tensor g = grad_embedding;
  for (std::size_t i = layers.size(); i-- > 0;) {
    const Layer& layer = layers[i];
    const Tensor& x = cache.inputs[i];
    const bool need_input = i > 0;
    switch (layer.kind) {
      case LayerKind::Conv: {
        Conv2dGrads cg = conv2d_backward(g, x, layer.weights, kConvStride, kConvPad, need_input);
        for (std::size_t k = 0; k < cg.weights.size(); ++k) grads[i].weights[k] += cg.weights[k];
        for (std::size_t k = 0; k < cg.bias.size(); ++k) grads[i].bias[k] += cg.bias[k];
        g = std::move(cg.input);
        break;
      }
      case LayerKind::Fc: {
        FcGrads fg = fc_backward(g, x, layer.weights);
        for (std::size_t k = 0; k < fg.weights.size(); ++k) grads[i].weights[k] += fg.weights[k];
        for (std::size_t k = 0; k < fg.bias.size(); ++k) grads[i].bias[k] += fg.bias[k];
        g = std::move(fg.input);
        break;
      }
      case LayerKind::Relu: g = relu_backward(g, x); break;
      case LayerKind::AvgPool2: g = avg_pool2_backward(g, x.shape()); break;
      case LayerKind::GlobalAvgPool: g = global_avg_pool_backward(g, x.shape()); break;
    }
  }
}

ParamGrads backward_pair(const Model& model, const ForwardCache& cache1,
                         const ForwardCache& cache2, const Tensor& grad_e1,
                         const Tensor& grad_e2) {
  ParamGrads grads = zero_grads(model);
  backward(model, cache1, grad_e1, grads);
  backward(model, cache2, grad_e2, grads);
  return grads;
}

}  // namespace ssv
