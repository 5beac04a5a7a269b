#pragma once

// Flat-plane correlation kernels shared by the conv forward and backward
// passes. Images are stored zero-padded and row-major; an output position i
// on the flat plane reads input i + a*cols + b for kernel tap (a, b). Output
// positions whose column lands in the padding ("wrap-around" columns) are
// computed but discarded by the caller.

#include <cstddef>
#include <vector>

namespace ssv::detail {

inline constexpr std::size_t kTile = 32;    // flat positions per register tile
inline constexpr std::size_t kFBlock = 4;   // filters per register tile

constexpr std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

// Extra doubles a caller must allocate after the last input plane so that the
// kernels may run past the end on rounded-up tiles.
constexpr std::size_t flat_slack(std::size_t kw) { return kTile + kw + 8; }

// out[f * out_stride + i] = init[f] + sum_{c,a,b} w[f,c,a,b] * in[c*plane + i + a*cols + b]
// for f < filters and i < round_up(n, kTile). Per output element the terms are
// accumulated in (c, a, b) order starting from init[f]. `out` must hold
// round_up(filters, kFBlock) rows of out_stride >= round_up(n, kTile).
void correlate_flat(const double* in, std::size_t channels, std::size_t plane, std::size_t cols,
                    const double* weights, std::size_t filters, std::size_t kh, std::size_t kw,
                    const double* init, double* out, std::size_t n, std::size_t out_stride);

// grad_w[f,c,a,b] = sum_i grad[f * grad_stride + i] * in[c*plane + i + a*cols + b]
// over i < round_up(n, kTile). `grad` must be zero on every discarded
// position and hold round_up(filters, kFBlock) rows.
void correlate_weight_grad(const double* in, std::size_t channels, std::size_t plane,
                           std::size_t cols, const double* grad, std::size_t filters,
                           std::size_t grad_stride, std::size_t kh, std::size_t kw,
                           std::size_t n, double* grad_w);

}  // namespace ssv::detail
