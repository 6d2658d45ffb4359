#include "msdeaot/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include "msdeaot/errors.hpp"

namespace msd {
namespace {

std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("non-positive dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(element_count(shape_), 0.0f) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size())
    throw DimensionError("data length does not match shape " + shape_string());
}

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::identity(int n) {
  Tensor t({n, n});
  for (int i = 0; i < n; ++i) t.at(i, i) = 1.0f;
  return t;
}

Tensor Tensor::gaussian(std::vector<int> shape, Rng& rng, float scale) {
  Tensor t(std::move(shape));
  for (float& v : t.data_) v = scale * rng.gaussian();
  return t;
}

float& Tensor::at(int i, int j) {
  return data_[static_cast<std::size_t>(i) * shape_[1] + j];
}
float Tensor::at(int i, int j) const {
  return data_[static_cast<std::size_t>(i) * shape_[1] + j];
}
float& Tensor::at(int i, int j, int k) {
  return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
}
float Tensor::at(int i, int j, int k) const {
  return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
}
float& Tensor::at(int i, int j, int k, int l) {
  return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) *
                   shape_[3] +
               l];
}
float Tensor::at(int i, int j, int k, int l) const {
  return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) *
                   shape_[3] +
               l];
}

Tensor Tensor::reshape(std::vector<int> new_shape) const {
  if (element_count(new_shape) != data_.size())
    throw DimensionError("reshape element count mismatch");
  return Tensor(std::move(new_shape), data_);
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << "x";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul expects rank-2 tensors, got " +
                         a.shape_string() + " and " + b.shape_string());
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul inner dimension mismatch: " +
                         a.shape_string() + " vs " + b.shape_string());
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (int p = 0; p < k; ++p) acc += a.at(i, p) * b.at(p, j);
      out.at(i, j) = acc;
    }
  }
  return out;
}

namespace {

// Iterates the slices of `x` along `axis` and calls fn(base, stride, len).
template <typename Fn>
void for_each_slice(const Tensor& x, int axis, Fn fn) {
  const auto& shape = x.shape();
  const int rank = x.rank();
  if (axis < 0 || axis >= rank)
    throw DimensionError("axis " + std::to_string(axis) +
                         " invalid for tensor " + x.shape_string());
  std::size_t stride = 1;
  for (int d = axis + 1; d < rank; ++d) stride *= static_cast<std::size_t>(shape[d]);
  const std::size_t len = static_cast<std::size_t>(shape[axis]);
  std::size_t outer = 1;
  for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(shape[d]);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t inner = 0; inner < stride; ++inner) {
      fn(o * len * stride + inner, stride, len);
    }
  }
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  Tensor out = x;
  auto& v = out.data();
  const auto& in = x.data();
  for_each_slice(x, axis, [&](std::size_t base, std::size_t stride, std::size_t len) {
    float mx = in[base];
    for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, in[base + i * stride]);
    float sum = 0.0f;
    for (std::size_t i = 0; i < len; ++i) {
      const float e = std::exp(in[base + i * stride] - mx);
      v[base + i * stride] = e;
      sum += e;
    }
    for (std::size_t i = 0; i < len; ++i) v[base + i * stride] /= sum;
  });
  return out;
}

Tensor layer_norm(const Tensor& x, int axis, float eps) {
  Tensor out = x;
  auto& v = out.data();
  const auto& in = x.data();
  for_each_slice(x, axis, [&](std::size_t base, std::size_t stride, std::size_t len) {
    float mean = 0.0f;
    for (std::size_t i = 0; i < len; ++i) mean += in[base + i * stride];
    mean /= static_cast<float>(len);
    float var = 0.0f;
    for (std::size_t i = 0; i < len; ++i) {
      const float d = in[base + i * stride] - mean;
      var += d * d;
    }
    var /= static_cast<float>(len);
    const float inv = 1.0f / std::sqrt(var + eps);
    for (std::size_t i = 0; i < len; ++i)
      v[base + i * stride] = (in[base + i * stride] - mean) * inv;
  });
  return out;
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  if (x.rank() != 3)
    throw DimensionError("resize_bilinear expects h x w x c, got " + x.shape_string());
  if (out_h < 1 || out_w < 1)
    throw DimensionError("resize_bilinear target size must be >= 1");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor out({out_h, out_w, c});
  for (int oy = 0; oy < out_h; ++oy) {
    // Half-pixel centers: exact for constant inputs, no corner alignment.
    float sy = (static_cast<float>(oy) + 0.5f) * static_cast<float>(h) /
                   static_cast<float>(out_h) -
               0.5f;
    sy = std::min(std::max(sy, 0.0f), static_cast<float>(h - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, h - 1);
    const float fy = sy - static_cast<float>(y0);
    for (int ox = 0; ox < out_w; ++ox) {
      float sx = (static_cast<float>(ox) + 0.5f) * static_cast<float>(w) /
                     static_cast<float>(out_w) -
                 0.5f;
      sx = std::min(std::max(sx, 0.0f), static_cast<float>(w - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, w - 1);
      const float fx = sx - static_cast<float>(x0);
      for (int ch = 0; ch < c; ++ch) {
        const float top = x.at(y0, x0, ch) * (1.0f - fx) + x.at(y0, x1, ch) * fx;
        const float bot = x.at(y1, x0, ch) * (1.0f - fx) + x.at(y1, x1, ch) * fx;
        out.at(oy, ox, ch) = top * (1.0f - fy) + bot * fy;
      }
    }
  }
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int padding) {
  if (x.rank() != 3 || kernel.rank() != 4)
    throw DimensionError("conv2d expects x[h x w x cin], kernel[kh x kw x cin x cout]");
  const int h = x.dim(0), w = x.dim(1), cin = x.dim(2);
  const int kh = kernel.dim(0), kw = kernel.dim(1);
  if (kh % 2 == 0 || kw % 2 == 0)
    throw ConfigError("conv2d kernel sizes must be odd, got " + kernel.shape_string());
  if (kernel.dim(2) != cin)
    throw DimensionError("conv2d channel mismatch: input " + x.shape_string() +
                         ", kernel " + kernel.shape_string());
  const int cout = kernel.dim(3);
  const int oh = (h + 2 * padding - kh) / stride + 1;
  const int ow = (w + 2 * padding - kw) / stride + 1;
  if (oh < 1 || ow < 1) throw DimensionError("conv2d output would be empty");
  Tensor out({oh, ow, cout});
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int co = 0; co < cout; ++co) {
        float acc = 0.0f;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride + ky - padding;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * stride + kx - padding;
            if (ix < 0 || ix >= w) continue;
            for (int ci = 0; ci < cin; ++ci)
              acc += x.at(iy, ix, ci) * kernel.at(ky, kx, ci, co);
          }
        }
        out.at(oy, ox, co) = acc;
      }
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw DimensionError("add shape mismatch: " + a.shape_string() + " vs " +
                         b.shape_string());
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

Tensor scale(const Tensor& a, float s) {
  Tensor out = a;
  for (float& v : out.data()) v *= s;
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (float& v : out.data()) v = std::max(v, 0.0f);
  return out;
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose2d expects rank 2");
  Tensor out({a.dim(1), a.dim(0)});
  for (int i = 0; i < a.dim(0); ++i)
    for (int j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor flip_horizontal(const Tensor& x) {
  if (x.rank() != 3) throw DimensionError("flip_horizontal expects h x w x c");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor out({h, w, c});
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx)
      for (int ch = 0; ch < c; ++ch) out.at(y, xx, ch) = x.at(y, w - 1 - xx, ch);
  return out;
}

Tensor pad_to_multiple(const Tensor& x, int multiple) {
  if (x.rank() != 3) throw DimensionError("pad_to_multiple expects h x w x c");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const int ph = (h + multiple - 1) / multiple * multiple;
  const int pw = (w + multiple - 1) / multiple * multiple;
  if (ph == h && pw == w) return x;
  Tensor out({ph, pw, c});
  for (int y = 0; y < ph; ++y) {
    const int sy = std::min(y, h - 1);
    for (int xx = 0; xx < pw; ++xx) {
      const int sx = std::min(xx, w - 1);
      for (int ch = 0; ch < c; ++ch) out.at(y, xx, ch) = x.at(sy, sx, ch);
    }
  }
  return out;
}

Tensor avg_pool(const Tensor& x, int stride) {
  if (x.rank() != 3) throw DimensionError("avg_pool expects h x w x c");
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const int oh = h / stride, ow = w / stride;
  if (oh < 1 || ow < 1) throw DimensionError("avg_pool output would be empty");
  Tensor out({oh, ow, c});
  const float inv = 1.0f / static_cast<float>(stride * stride);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int ch = 0; ch < c; ++ch) {
        float acc = 0.0f;
        for (int dy = 0; dy < stride; ++dy)
          for (int dx = 0; dx < stride; ++dx)
            acc += x.at(oy * stride + dy, ox * stride + dx, ch);
        out.at(oy, ox, ch) = acc * inv;
      }
  return out;
}

}  // namespace msd
