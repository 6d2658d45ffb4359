#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "msdeaot/rng.hpp"

namespace msd {

// Dense row-major float32 array. Immutable by convention once built: all
// free functions below return new tensors and never alias their inputs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, float value);
  // Identity matrix, n x n.
  static Tensor identity(int n);
  // Seeded gaussian init, every entry scale * N(0,1).
  static Tensor gaussian(std::vector<int> shape, Rng& rng, float scale);

  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  float& at(int i) { return data_[static_cast<std::size_t>(i)]; }
  float at(int i) const { return data_[static_cast<std::size_t>(i)]; }
  float& at(int i, int j);
  float at(int i, int j) const;
  float& at(int i, int j, int k);
  float at(int i, int j, int k) const;
  float& at(int i, int j, int k, int l);
  float at(int i, int j, int k, int l) const;

  // Same data, new shape; element counts must match.
  Tensor reshape(std::vector<int> new_shape) const;

  std::string shape_string() const;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

// a[m x k] * b[k x n] -> [m x n]; fixed accumulation order (ascending k).
Tensor matmul(const Tensor& a, const Tensor& b);

// Softmax along `axis`, max-subtracted per slice.
Tensor softmax(const Tensor& x, int axis);

// Mean-0 / variance-1 normalization of each slice along `axis` (no affine).
Tensor layer_norm(const Tensor& x, int axis, float eps);

// Bilinear resize of an h x w x c tensor, half-pixel-center convention.
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

// 2D convolution: x[h x w x cin], kernel[kh x kw x cin x cout], zero padding.
// Odd kernel sizes only.
Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int padding);

// Elementwise ops used throughout the pipeline.
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor relu(const Tensor& x);
Tensor transpose2d(const Tensor& a);

// Horizontal flip of an h x w x c image.
Tensor flip_horizontal(const Tensor& x);

// Edge-replicate pad of an h x w x c image so both spatial dims become
// multiples of `multiple` (padding added at bottom/right).
Tensor pad_to_multiple(const Tensor& x, int multiple);

// Average-pool an h x w x c image with window == stride (tail cells clipped).
Tensor avg_pool(const Tensor& x, int stride);

}  // namespace msd
