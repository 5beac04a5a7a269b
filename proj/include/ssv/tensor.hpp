#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ssv {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor of doubles. A default-constructed tensor is empty
// (rank 0, no elements) and marks "no parameter" slots, e.g. the weights of a
// ReLU layer. Every other tensor has strictly positive extents.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  double at(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }

  // Same data, new shape; the element count must not change.
  void reshape(Shape shape);
  void fill(double value);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Throws ShapeError naming `what` unless t has exactly the given rank.
void require_rank(const Tensor& t, std::size_t rank, const char* what);

Tensor matmul(const Tensor& a, const Tensor& b);

// ---------------------------------------------------------------------------
// Layer primitives. Each forward has a hand-written backward; nothing here
// keeps state between calls.

// Cross-correlation (no kernel flip). input [C,H,W], weights [F,C,kh,kw],
// bias [F] -> [F, (H+2p-kh)/s+1, (W+2p-kw)/s+1].
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      std::size_t stride, std::size_t pad);

struct Conv2dGrads {
  Tensor input;  // empty when not requested
  Tensor weights;
  Tensor bias;
};

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights,
                            std::size_t stride, std::size_t pad, bool want_input_grad = true);

// input [d], weights [n,d], bias [n] -> [n]
Tensor fc_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct FcGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

FcGrads fc_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& grad_out, const Tensor& x);

// 2x2 non-overlapping mean over [C,H,W]. Odd H or W is first made even by
// replicating the last row/column.
Tensor avg_pool2_forward(const Tensor& input);
Tensor avg_pool2_backward(const Tensor& grad_out, const Shape& input_shape);

// [C,H,W] -> [C]
Tensor global_avg_pool_forward(const Tensor& input);
Tensor global_avg_pool_backward(const Tensor& grad_out, const Shape& input_shape);

// Zero-mean Gaussian entries with variance 2 / fan_in.
Tensor he_init(const Shape& shape, std::size_t fan_in, std::uint64_t seed);

}  // namespace ssv
