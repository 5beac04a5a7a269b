#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "ssv/errors.hpp"
#include "ssv/network.hpp"

namespace ssv {

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  const std::vector<std::size_t> weighted = model.weighted_layers();
  out.write("SSVW", 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(weighted.size()));
  for (std::size_t i : weighted) {
    const Layer& layer = model.layer(i);
    detail::put_u32(out, static_cast<std::uint32_t>(layer.weights.rank()));
    for (std::size_t d : layer.weights.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
    detail::put_f64s(out, layer.weights.data());
    detail::put_f64s(out, layer.bias.data());
  }
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  const std::string where = path.string() + ": ";
  char magic[4];
  if (!detail::read_exact(in, magic, 4) || std::string(magic, 4) != "SSVW")
    throw CheckpointError(where + "bad magic, not an SSVW checkpoint");
  std::uint32_t version = 0, count = 0;
  if (!detail::read_u32(in, version)) throw CheckpointError(where + "truncated header");
  if (version != kCheckpointVersion)
    throw VersionError(where + "checkpoint version " + std::to_string(version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  if (!detail::read_u32(in, count) || count == 0 || count > 4096)
    throw CheckpointError(where + "bad layer count");

  std::vector<Tensor> weights, biases;
  for (std::uint32_t l = 0; l < count; ++l) {
    std::uint32_t rank = 0;
    if (!detail::read_u32(in, rank)) throw CheckpointError(where + "truncated layer header");
    if (rank != 2 && rank != 4)
      throw CheckpointError(where + "layer " + std::to_string(l) + " has unsupported rank " +
                            std::to_string(rank));
    Shape shape(rank);
    std::size_t elements = 1;
    for (auto& d : shape) {
      std::uint32_t v = 0;
      if (!detail::read_u32(in, v)) throw CheckpointError(where + "truncated layer header");
      if (v == 0 || v > (1u << 24)) throw CheckpointError(where + "implausible extent " + std::to_string(v));
      d = v;
      elements *= v;
    }
    if (elements > (std::size_t{1} << 28)) throw CheckpointError(where + "layer too large");
    Tensor w(shape), b({shape[0]});
    if (!detail::read_f64s(in, w.data()) || !detail::read_f64s(in, b.data()))
      throw CheckpointError(where + "truncated parameters in layer " + std::to_string(l));
    weights.push_back(std::move(w));
    biases.push_back(std::move(b));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError(where + "trailing bytes");

  std::vector<std::size_t> convs, fcs;
  std::size_t in_channels = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rank() == 4) {
      if (!fcs.empty()) throw CheckpointError(where + "conv layer after fc layer");
      if (convs.empty()) in_channels = weights[l].dim(1);
      convs.push_back(weights[l].dim(0));
    } else {
      if (convs.empty() && fcs.empty()) throw CheckpointError(where + "first layer must be conv");
      fcs.push_back(weights[l].dim(0));
    }
  }
  const std::vector<LayerSpec> specs = canonical_topology(in_channels, convs, fcs);

  std::vector<Layer> layers;
  std::size_t next = 0;
  for (const LayerSpec& s : specs) {
    Layer layer{s.kind, {}, {}};
    if (s.kind == LayerKind::Conv || s.kind == LayerKind::Fc) {
      layer.weights = std::move(weights[next]);
      layer.bias = std::move(biases[next]);
      ++next;
    }
    layers.push_back(std::move(layer));
  }
  try {
    return Model(std::move(layers));
  } catch (const ConfigError& e) {
    throw CheckpointError(where + "inconsistent layer shapes: " + e.what());
  }
}

}  // namespace ssv
