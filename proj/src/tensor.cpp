#include "ssv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "conv_kernels.hpp"
#include "ssv/errors.hpp"

namespace ssv {

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  for (std::size_t d : shape)
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (data_.size() != shape_size(shape_))
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
}

void Tensor::reshape(Shape shape) {
  check_extents(shape);
  if (shape_size(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  shape_ = std::move(shape);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a.at(i, p) * b.at(p, j);
      out.at(i, j) = s;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvGeometry {
  std::size_t channels, height, width;  // input
  std::size_t filters, kh, kw;
  std::size_t stride, pad;
  std::size_t padded_h, padded_w;  // input after zero padding
  std::size_t full_h, full_w;      // stride-1 output extent
  std::size_t out_h, out_w;
  std::size_t flat_n;              // full_h * padded_w
};

ConvGeometry conv_geometry(const Shape& input, const Shape& weights, std::size_t stride,
                           std::size_t pad) {
  if (input.size() != 3) throw ShapeError("conv2d input must be [C,H,W], got " + shape_string(input));
  if (weights.size() != 4)
    throw ShapeError("conv2d weights must be [F,C,kh,kw], got " + shape_string(weights));
  if (weights[1] != input[0])
    throw ShapeError("conv2d: weight channels " + std::to_string(weights[1]) +
                     " do not match input channels " + std::to_string(input[0]));
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  ConvGeometry g{};
  g.channels = input[0];
  g.height = input[1];
  g.width = input[2];
  g.filters = weights[0];
  g.kh = weights[2];
  g.kw = weights[3];
  g.stride = stride;
  g.pad = pad;
  g.padded_h = g.height + 2 * pad;
  g.padded_w = g.width + 2 * pad;
  if (g.kh > g.padded_h || g.kw > g.padded_w)
    throw ShapeError("conv2d: kernel " + shape_string({g.kh, g.kw}) + " larger than padded input " +
                     shape_string({g.padded_h, g.padded_w}));
  g.full_h = g.padded_h - g.kh + 1;
  g.full_w = g.padded_w - g.kw + 1;
  g.out_h = (g.padded_h - g.kh) / stride + 1;
  g.out_w = (g.padded_w - g.kw) / stride + 1;
  g.flat_n = g.full_h * g.padded_w;
  return g;
}

// Copies [C,H,W] into zero-bordered planes of (H+2*pad_h) x (W+2*pad_w) with
// trailing slack for the flat kernels.
std::vector<double> pad_planes(const double* src, std::size_t channels, std::size_t h,
                               std::size_t w, std::size_t pad_h, std::size_t pad_w,
                               std::size_t slack) {
  const std::size_t ph = h + 2 * pad_h, pw = w + 2 * pad_w;
  std::vector<double> out(channels * ph * pw + slack, 0.0);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      std::memcpy(&out[(c * ph + y + pad_h) * pw + pad_w], src + (c * h + y) * w,
                  w * sizeof(double));
  return out;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      std::size_t stride, std::size_t pad) {
  const ConvGeometry g = conv_geometry(input.shape(), weights.shape(), stride, pad);
  if (bias.rank() != 1 || bias.dim(0) != g.filters)
    throw ShapeError("conv2d: bias must be [" + std::to_string(g.filters) + "], got " +
                     shape_string(bias.shape()));

  const std::size_t span = detail::round_up(g.flat_n, detail::kTile);
  const std::vector<double> padded = pad_planes(input.raw(), g.channels, g.height, g.width, pad,
                                                pad, span - g.flat_n + detail::flat_slack(g.kw));
  std::vector<double> flat(detail::round_up(g.filters, detail::kFBlock) * span);
  detail::correlate_flat(padded.data(), g.channels, g.padded_h * g.padded_w, g.padded_w,
                         weights.raw(), g.filters, g.kh, g.kw, bias.raw(), flat.data(), g.flat_n,
                         span);

  Tensor out({g.filters, g.out_h, g.out_w});
  double* dst = out.raw();
  for (std::size_t f = 0; f < g.filters; ++f)
    for (std::size_t y = 0; y < g.out_h; ++y) {
      const double* row = &flat[f * span + y * stride * g.padded_w];
      if (stride == 1) {
        std::memcpy(dst, row, g.out_w * sizeof(double));
        dst += g.out_w;
      } else {
        for (std::size_t x = 0; x < g.out_w; ++x) *dst++ = row[x * stride];
      }
    }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights,
                            std::size_t stride, std::size_t pad, bool want_input_grad) {
  const ConvGeometry g = conv_geometry(input.shape(), weights.shape(), stride, pad);
  if (grad_out.shape() != Shape{g.filters, g.out_h, g.out_w})
    throw ShapeError("conv2d_backward: grad_out " + shape_string(grad_out.shape()) +
                     " does not match forward output " +
                     shape_string({g.filters, g.out_h, g.out_w}));

  Conv2dGrads grads;
  grads.bias = Tensor({g.filters});
  for (std::size_t f = 0; f < g.filters; ++f) {
    double s = 0.0;
    const double* src = grad_out.raw() + f * g.out_h * g.out_w;
    for (std::size_t i = 0; i < g.out_h * g.out_w; ++i) s += src[i];
    grads.bias[f] = s;
  }

  // Output gradient scattered onto the stride-1 flat grid (zero elsewhere).
  const std::size_t span = detail::round_up(g.flat_n, detail::kTile);
  const std::size_t fpad = detail::round_up(g.filters, detail::kFBlock);
  std::vector<double> gflat(fpad * span, 0.0);
  for (std::size_t f = 0; f < g.filters; ++f)
    for (std::size_t y = 0; y < g.out_h; ++y)
      for (std::size_t x = 0; x < g.out_w; ++x)
        gflat[f * span + y * stride * g.padded_w + x * stride] = grad_out.at(f, y, x);

  const std::vector<double> padded = pad_planes(input.raw(), g.channels, g.height, g.width, pad,
                                                pad, span - g.flat_n + detail::flat_slack(g.kw));
  grads.weights = Tensor(weights.shape());
  detail::correlate_weight_grad(padded.data(), g.channels, g.padded_h * g.padded_w, g.padded_w,
                                gflat.data(), g.filters, span, g.kh, g.kw, g.flat_n,
                                grads.weights.raw());

  if (!want_input_grad) return grads;

  // grad_in_padded[c,u,v] = sum_{f,a,b} w[f,c,a,b] * g[f,u-a,v-b]: a correlation
  // of the (kh-1, kw-1)-bordered output grid with the flipped, transposed kernel.
  const std::size_t border_h = g.kh - 1, border_w = g.kw - 1;
  const std::size_t gh = g.full_h + 2 * border_h, gw = g.full_w + 2 * border_w;
  const std::size_t n2 = g.padded_h * gw;
  const std::size_t span2 = detail::round_up(n2, detail::kTile);
  std::vector<double> bordered(g.filters * gh * gw + span2 - n2 + detail::flat_slack(g.kw), 0.0);
  for (std::size_t f = 0; f < g.filters; ++f)
    for (std::size_t y = 0; y < g.full_h; ++y)
      std::memcpy(&bordered[(f * gh + y + border_h) * gw + border_w], &gflat[f * span + y * g.padded_w],
                  g.full_w * sizeof(double));

  const std::size_t taps = g.kh * g.kw;
  std::vector<double> flipped(g.channels * g.filters * taps);
  for (std::size_t f = 0; f < g.filters; ++f)
    for (std::size_t c = 0; c < g.channels; ++c)
      for (std::size_t t = 0; t < taps; ++t)
        flipped[(c * g.filters + f) * taps + (taps - 1 - t)] = weights[(f * g.channels + c) * taps + t];

  std::vector<double> gin(detail::round_up(g.channels, detail::kFBlock) * span2);
  detail::correlate_flat(bordered.data(), g.filters, gh * gw, gw, flipped.data(), g.channels, g.kh,
                         g.kw, nullptr, gin.data(), n2, span2);

  grads.input = Tensor(input.shape());
  double* dst = grads.input.raw();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t y = 0; y < g.height; ++y) {
      std::memcpy(dst, &gin[c * span2 + (y + pad) * gw + pad], g.width * sizeof(double));
      dst += g.width;
    }
  return grads;
}

// ---------------------------------------------------------------------------
// Fully connected

namespace {

using vec8 = double __attribute__((vector_size(8 * sizeof(double))));

double dot(const double* a, const double* b, std::size_t n) {
  vec8 acc{};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    vec8 x, y;
    std::memcpy(&x, a + i, sizeof x);
    std::memcpy(&y, b + i, sizeof y);
    acc = acc + x * y;
  }
  double s = 0.0;
  for (std::size_t l = 0; l < 8; ++l) s += acc[l];
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Tensor fc_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  require_rank(input, 1, "fc input");
  require_rank(weights, 2, "fc weights");
  const std::size_t n = weights.dim(0), d = weights.dim(1);
  if (input.dim(0) != d)
    throw ShapeError("fc: input " + shape_string(input.shape()) + " does not match weights " +
                     shape_string(weights.shape()));
  if (bias.shape() != Shape{n})
    throw ShapeError("fc: bias must be [" + std::to_string(n) + "], got " + shape_string(bias.shape()));
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) out[i] = bias[i] + dot(weights.raw() + i * d, input.raw(), d);
  return out;
}

FcGrads fc_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights) {
  require_rank(weights, 2, "fc weights");
  const std::size_t n = weights.dim(0), d = weights.dim(1);
  if (grad_out.shape() != Shape{n} || input.shape() != Shape{d})
    throw ShapeError("fc_backward: shapes " + shape_string(grad_out.shape()) + ", " +
                     shape_string(input.shape()) + " inconsistent with weights " +
                     shape_string(weights.shape()));
  FcGrads grads{Tensor({d}), Tensor({n, d}), grad_out};
  double* gin = grads.input.raw();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad_out[i];
    const double* w = weights.raw() + i * d;
    double* gw = grads.weights.raw() + i * d;
    for (std::size_t j = 0; j < d; ++j) {
      gin[j] += g * w[j];
      gw[j] = g * input[j];
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Activation and pooling

Tensor relu_forward(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& x) {
  if (grad_out.shape() != x.shape())
    throw ShapeError("relu_backward: grad " + shape_string(grad_out.shape()) + " vs input " +
                     shape_string(x.shape()));
  Tensor out = grad_out;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(x[i] > 0.0)) out[i] = 0.0;
  return out;
}

Tensor avg_pool2_forward(const Tensor& input) {
  require_rank(input, 3, "avg_pool2 input");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
  Tensor out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y) {
      const std::size_t y0 = 2 * y, y1 = std::min(2 * y + 1, h - 1);
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t x0 = 2 * x, x1 = std::min(2 * x + 1, w - 1);
        out.at(ch, y, x) = 0.25 * (input.at(ch, y0, x0) + input.at(ch, y0, x1) +
                                   input.at(ch, y1, x0) + input.at(ch, y1, x1));
      }
    }
  return out;
}

Tensor avg_pool2_backward(const Tensor& grad_out, const Shape& input_shape) {
  if (input_shape.size() != 3) throw ShapeError("avg_pool2_backward: input shape must be rank 3");
  const std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  if (grad_out.shape() != Shape{c, (h + 1) / 2, (w + 1) / 2})
    throw ShapeError("avg_pool2_backward: grad " + shape_string(grad_out.shape()) +
                     " does not match input " + shape_string(input_shape));
  Tensor grad(input_shape);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < grad_out.dim(1); ++y) {
      const std::size_t y0 = 2 * y, y1 = std::min(2 * y + 1, h - 1);
      for (std::size_t x = 0; x < grad_out.dim(2); ++x) {
        const std::size_t x0 = 2 * x, x1 = std::min(2 * x + 1, w - 1);
        const double g = 0.25 * grad_out.at(ch, y, x);
        // Replicated edges route their share back onto the last row/column.
        grad.at(ch, y0, x0) += g;
        grad.at(ch, y0, x1) += g;
        grad.at(ch, y1, x0) += g;
        grad.at(ch, y1, x1) += g;
      }
    }
  return grad;
}

Tensor global_avg_pool_forward(const Tensor& input) {
  require_rank(input, 3, "global_avg_pool input");
  const std::size_t c = input.dim(0), hw = input.dim(1) * input.dim(2);
  Tensor out({c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    const double* src = input.raw() + ch * hw;
    for (std::size_t i = 0; i < hw; ++i) s += src[i];
    out[ch] = s / static_cast<double>(hw);
  }
  return out;
}

Tensor global_avg_pool_backward(const Tensor& grad_out, const Shape& input_shape) {
  if (input_shape.size() != 3 || grad_out.shape() != Shape{input_shape[0]})
    throw ShapeError("global_avg_pool_backward: grad " + shape_string(grad_out.shape()) +
                     " does not match input " + shape_string(input_shape));
  const std::size_t hw = input_shape[1] * input_shape[2];
  Tensor grad(input_shape);
  for (std::size_t ch = 0; ch < input_shape[0]; ++ch) {
    const double g = grad_out[ch] / static_cast<double>(hw);
    std::fill_n(grad.raw() + ch * hw, hw, g);
  }
  return grad;
}

Tensor he_init(const Shape& shape, std::size_t fan_in, std::uint64_t seed) {
  if (fan_in == 0) throw ShapeError("he_init: fan_in must be positive");
  Tensor t(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace ssv
