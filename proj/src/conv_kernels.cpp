#include "conv_kernels.hpp"

#include <array>
#include <cstring>

namespace ssv::detail {
namespace {

constexpr std::size_t kLanes = 8;
constexpr std::size_t kVecs = kTile / kLanes;

using vec8 = double __attribute__((vector_size(kLanes * sizeof(double))));

inline vec8 load(const double* p) {
  vec8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store(double* p, vec8 v) { std::memcpy(p, &v, sizeof v); }

inline double hsum(vec8 v) {
  double s = 0.0;
  for (std::size_t l = 0; l < kLanes; ++l) s += v[l];
  return s;
}

// Weights for one filter block, interleaved so the kFBlock taps of one
// (c, a, b) position sit next to each other: packed[tap * kFBlock + k].
std::vector<double> pack_block(const double* weights, std::size_t filters, std::size_t f0,
                               std::size_t taps) {
  std::vector<double> packed(taps * kFBlock, 0.0);
  for (std::size_t k = 0; k < kFBlock; ++k) {
    const std::size_t f = f0 + k;
    if (f >= filters) break;
    for (std::size_t t = 0; t < taps; ++t) packed[t * kFBlock + k] = weights[f * taps + t];
  }
  return packed;
}

template <std::size_t KW>
void weight_grad_block(const double* in, std::size_t plane, std::size_t cols,
                       const double* g0, std::size_t grad_stride, std::size_t c, std::size_t a,
                       std::size_t b0, std::size_t span, double out[kFBlock][KW]) {
  vec8 acc[kFBlock][KW];
  for (auto& row : acc)
    for (auto& v : row) v = vec8{};
  const double* src = in + c * plane + a * cols + b0;
  for (std::size_t i = 0; i < span; i += kLanes) {
    vec8 x[KW];
    for (std::size_t b = 0; b < KW; ++b) x[b] = load(src + i + b);
    for (std::size_t k = 0; k < kFBlock; ++k) {
      const vec8 g = load(g0 + k * grad_stride + i);
      for (std::size_t b = 0; b < KW; ++b) acc[k][b] = acc[k][b] + g * x[b];
    }
  }
  for (std::size_t k = 0; k < kFBlock; ++k)
    for (std::size_t b = 0; b < KW; ++b) out[k][b] = hsum(acc[k][b]);
}

}  // namespace

void correlate_flat(const double* in, std::size_t channels, std::size_t plane, std::size_t cols,
                    const double* weights, std::size_t filters, std::size_t kh, std::size_t kw,
                    const double* init, double* out, std::size_t n, std::size_t out_stride) {
  const std::size_t taps = channels * kh * kw;
  const std::size_t span = round_up(n, kTile);
  for (std::size_t f0 = 0; f0 < filters; f0 += kFBlock) {
    const std::vector<double> packed = pack_block(weights, filters, f0, taps);
    std::array<double, kFBlock> start{};
    for (std::size_t k = 0; k < kFBlock && f0 + k < filters; ++k)
      start[k] = init ? init[f0 + k] : 0.0;

    for (std::size_t t0 = 0; t0 < span; t0 += kTile) {
      vec8 acc[kFBlock][kVecs];
      for (std::size_t k = 0; k < kFBlock; ++k)
        for (std::size_t v = 0; v < kVecs; ++v) acc[k][v] = vec8{} + start[k];

      const double* wp = packed.data();
      for (std::size_t c = 0; c < channels; ++c) {
        const double* base = in + c * plane + t0;
        for (std::size_t a = 0; a < kh; ++a) {
          const double* row = base + a * cols;
          for (std::size_t b = 0; b < kw; ++b, wp += kFBlock) {
            vec8 x[kVecs];
            for (std::size_t v = 0; v < kVecs; ++v) x[v] = load(row + b + v * kLanes);
            for (std::size_t k = 0; k < kFBlock; ++k) {
              const double w = wp[k];
              for (std::size_t v = 0; v < kVecs; ++v) acc[k][v] = acc[k][v] + x[v] * w;
            }
          }
        }
      }
      for (std::size_t k = 0; k < kFBlock; ++k)
        for (std::size_t v = 0; v < kVecs; ++v)
          store(out + (f0 + k) * out_stride + t0 + v * kLanes, acc[k][v]);
    }
  }
}

void correlate_weight_grad(const double* in, std::size_t channels, std::size_t plane,
                           std::size_t cols, const double* grad, std::size_t filters,
                           std::size_t grad_stride, std::size_t kh, std::size_t kw,
                           std::size_t n, double* grad_w) {
  const std::size_t span = round_up(n, kTile);
  const std::size_t taps = channels * kh * kw;
  for (std::size_t f0 = 0; f0 < filters; f0 += kFBlock) {
    const double* g0 = grad + f0 * grad_stride;
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t a = 0; a < kh; ++a) {
        std::size_t b0 = 0;
        auto emit = [&](std::size_t width, const auto& vals) {
          for (std::size_t k = 0; k < kFBlock && f0 + k < filters; ++k)
            for (std::size_t b = 0; b < width; ++b)
              grad_w[(f0 + k) * taps + (c * kh + a) * kw + b0 + b] = vals[k][b];
        };
        for (; b0 + 3 <= kw; b0 += 3) {
          double vals[kFBlock][3];
          weight_grad_block<3>(in, plane, cols, g0, grad_stride, c, a, b0, span, vals);
          emit(3, vals);
        }
        for (; b0 < kw; ++b0) {
          double vals[kFBlock][1];
          weight_grad_block<1>(in, plane, cols, g0, grad_stride, c, a, b0, span, vals);
          emit(1, vals);
        }
      }
    }
  }
}

}  // namespace ssv::detail
