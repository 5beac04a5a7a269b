#pragma once

// Test-only reference implementations. Nothing in here shares code with the
// library paths it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "ssv/network.hpp"
#include "ssv/tensor.hpp"

namespace ssv::oracle {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      out[i * n + j] = s;
    }
  return out;
}

// Six nested loops, bias first, then taps in (c, a, b) order; padded taps
// contribute w * 0.
inline Tensor conv2d_nested(const Tensor& in, const Tensor& w, const Tensor& bias,
                            std::size_t stride, std::size_t pad) {
  const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
  const std::size_t F = w.dim(0), KH = w.dim(2), KW = w.dim(3);
  const std::size_t OH = (H + 2 * pad - KH) / stride + 1;
  const std::size_t OW = (W + 2 * pad - KW) / stride + 1;
  Tensor out({F, OH, OW});
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t y = 0; y < OH; ++y)
      for (std::size_t x = 0; x < OW; ++x) {
        double s = bias[f];
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t a = 0; a < KH; ++a)
            for (std::size_t b = 0; b < KW; ++b) {
              const long iy = static_cast<long>(y * stride + a) - static_cast<long>(pad);
              const long ix = static_cast<long>(x * stride + b) - static_cast<long>(pad);
              double v = 0.0;
              if (iy >= 0 && ix >= 0 && iy < static_cast<long>(H) && ix < static_cast<long>(W))
                v = in[(c * H + iy) * W + ix];
              s += w[((f * C + c) * KH + a) * KW + b] * v;
            }
        out[(f * OH + y) * OW + x] = s;
      }
  return out;
}

inline double rel_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

// Central difference of f() with respect to x[i]; x[i] is restored.
template <class F>
double central_diff(std::span<double> x, std::size_t i, F&& f, double h = 1e-5) {
  const double saved = x[i];
  x[i] = saved + h;
  const double up = f();
  x[i] = saved - h;
  const double down = f();
  x[i] = saved;
  return (up - down) / (2.0 * h);
}

// Largest relative error over `count` random coordinates of x.
template <class F>
double max_fd_error(std::span<double> x, std::span<const double> analytic, F&& f,
                    std::mt19937_64& rng, std::size_t count = 20, double h = 1e-5) {
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  double worst = 0.0;
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t i = pick(rng);
    worst = std::max(worst, rel_error(analytic[i], central_diff(x, i, f, h)));
  }
  return worst;
}

// Signs of every ReLU input over the forward passes of `inputs`.
inline std::vector<bool> relu_pattern(const Model& m, const std::vector<const Tensor*>& inputs) {
  std::vector<bool> out;
  for (const Tensor* x : inputs) {
    ForwardCache cache;
    forward(m, *x, &cache);
    for (std::size_t i = 0; i < m.layers().size(); ++i)
      if (m.layer(i).kind == LayerKind::Relu)
        for (double v : cache.inputs[i].data()) out.push_back(v > 0.0);
  }
  return out;
}

struct SmoothFdResult {
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t redrawn = 0;
};

// max_fd_error over parameters `x` of `m`, redrawing any coordinate whose
// +-h stencil flips a ReLU: the loss has a kink inside such a stencil and the
// central difference is no reference there.
template <class F>
SmoothFdResult max_fd_error_smooth(const Model& m, const std::vector<const Tensor*>& inputs,
                                   std::span<double> x, std::span<const double> analytic, F&& f,
                                   std::mt19937_64& rng, std::size_t count = 20, double h = 1e-5) {
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  SmoothFdResult r;
  for (std::size_t tries = 0; r.checked < count && tries < 50 * count; ++tries) {
    const std::size_t i = pick(rng);
    const double saved = x[i];
    x[i] = saved + h;
    const std::vector<bool> up = relu_pattern(m, inputs);
    x[i] = saved - h;
    const std::vector<bool> down = relu_pattern(m, inputs);
    x[i] = saved;
    if (up != down) {
      ++r.redrawn;
      continue;
    }
    r.worst = std::max(r.worst, rel_error(analytic[i], central_diff(x, i, f, h)));
    ++r.checked;
  }
  return r;
}

inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Brute-force EER: direct counting at every candidate threshold, then the
// first sign change of FAR - FRR, linearly interpolated.
struct SweepResult {
  double eer;
  double threshold;
};

inline SweepResult eer_sweep(const std::vector<double>& genuine,
                             const std::vector<double>& impostor) {
  std::vector<double> all = genuine;
  all.insert(all.end(), impostor.begin(), impostor.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> cand{all.front() - 1.0};
  for (std::size_t i = 0; i + 1 < all.size(); ++i) cand.push_back(0.5 * (all[i] + all[i + 1]));
  cand.push_back(all.back() + 1.0);

  auto far = [&](double t) {
    std::size_t n = 0;
    for (double s : impostor) n += s <= t;
    return static_cast<double>(n) / static_cast<double>(impostor.size());
  };
  auto frr = [&](double t) {
    std::size_t n = 0;
    for (double s : genuine) n += s > t;
    return static_cast<double>(n) / static_cast<double>(genuine.size());
  };
  double prev_d = far(cand[0]) - frr(cand[0]);
  for (std::size_t k = 1; k < cand.size(); ++k) {
    const double fa = far(cand[k]), fr = frr(cand[k]);
    const double d = fa - fr;
    if (d == 0.0) return {fa, cand[k]};
    if (d > 0.0) {
      const double fa0 = far(cand[k - 1]);
      const double alpha = -prev_d / (d - prev_d);
      return {fa0 + alpha * (fa - fa0), cand[k - 1] + alpha * (cand[k] - cand[k - 1])};
    }
    prev_d = d;
  }
  return {0.5, cand.back()};
}

}  // namespace ssv::oracle
