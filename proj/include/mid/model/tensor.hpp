#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mid/core/image.hpp"

namespace mid::nn {

/// Storage aligned to Eigen's vector width. Vectorized kernels pick their
/// peeling from the address, so unaligned buffers would make sums depend on
/// where malloc placed them.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense N x C x H x W batch used inside the network.
template <typename T>
struct Tensor4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  Buffer<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  [[nodiscard]] std::size_t sample_size() const { return plane() * c; }
  [[nodiscard]] std::size_t size() const { return data.size(); }

  T* sample(int i) { return data.data() + sample_size() * i; }
  const T* sample(int i) const { return data.data() + sample_size() * i; }

  T& at(int i, int ch, int y, int x) {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }
  T at(int i, int ch, int y, int x) const {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }

  [[nodiscard]] bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

/// Pack channel-last images (all the same shape) into a channel-first batch.
template <typename T>
Tensor4<T> to_batch(std::span<const ImageTensor> images);

/// Unpack sample `i` of a batch into a channel-last image.
template <typename T>
ImageTensor from_batch(const Tensor4<T>& batch, int i);

}  // namespace mid::nn
