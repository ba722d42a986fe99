#pragma once

#include <vector>

#include "mid/model/tensor.hpp"

namespace mid::nn {

/// Square convolution with zero padding k/2 and stride 1 or 2.
/// Lowered to im2col + GEMM per sample.
template <typename T>
class Conv2d {
 public:
  struct Cache {
    Buffer<T> columns;  // per-sample im2col matrices, concatenated
    int in_h = 0;
    int in_w = 0;
  };

  Conv2d(int in_channels, int out_channels, int kernel, int stride);

  Tensor4<T> forward(const Tensor4<T>& x, Cache* cache) const;
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  Tensor4<T> backward(const Tensor4<T>& grad_out, const Cache& cache);

  [[nodiscard]] int in_channels() const { return in_; }
  [[nodiscard]] int out_channels() const { return out_; }
  [[nodiscard]] int kernel() const { return k_; }
  [[nodiscard]] int fan_in() const { return in_ * k_ * k_; }

  Buffer<T> weight, bias, grad_weight, grad_bias;

 private:
  int in_, out_, k_, stride_, pad_;
};

/// 2x2 transposed convolution with stride 2 (exact 2x upsampling).
template <typename T>
class ConvTranspose2x2 {
 public:
  struct Cache {
    Tensor4<T> input;
  };

  ConvTranspose2x2(int in_channels, int out_channels);

  Tensor4<T> forward(const Tensor4<T>& x, Cache* cache) const;
  Tensor4<T> backward(const Tensor4<T>& grad_out, const Cache& cache);

  [[nodiscard]] int fan_in() const { return in_; }

  // weight is (out * 4) x in, row index = (o * 2 + dy) * 2 + dx.
  Buffer<T> weight, bias, grad_weight, grad_bias;

 private:
  int in_, out_;
};

inline constexpr double kLeakySlope = 0.1;

template <typename T>
void leaky_relu_inplace(Tensor4<T>& x);

/// grad *= d(leaky)/d(input), using the activation *output* (same sign as input).
template <typename T>
void leaky_relu_backward_inplace(Tensor4<T>& grad, const Tensor4<T>& activated);

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b);

/// Inverse of concat_channels for gradients: splits off the first `channels_a`.
template <typename T>
void split_channels(const Tensor4<T>& g, int channels_a, Tensor4<T>& ga, Tensor4<T>& gb);

template <typename T>
void add_inplace(Tensor4<T>& dst, const Tensor4<T>& src);

}  // namespace mid::nn
