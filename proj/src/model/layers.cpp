#include "mid/model/layers.hpp"

#include <Eigen/Core>
#include <algorithm>

#include "mid/core/error.hpp"

namespace mid::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
void im2col(const T* x, int c, int h, int w, int k, int stride, int pad, int ho, int wo, T* col) {
  const std::size_t cols = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < c; ++ci) {
    const T* plane = x + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * cols;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int c, int h, int w, int k, int stride, int pad, int ho, int wo, T* x) {
  const std::size_t cols = static_cast<std::size_t>(ho) * wo;
  for (int ci = 0; ci < c; ++ci) {
    T* plane = x + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * cols;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * w;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, int stride)
    : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(kernel / 2) {
  if (in_ <= 0 || out_ <= 0 || k_ <= 0 || k_ % 2 == 0 || (stride_ != 1 && stride_ != 2)) {
    throw InvalidArgument("Conv2d: unsupported configuration");
  }
  weight.assign(static_cast<std::size_t>(out_) * in_ * k_ * k_, T(0));
  bias.assign(out_, T(0));
  grad_weight.assign(weight.size(), T(0));
  grad_bias.assign(bias.size(), T(0));
}

template <typename T>
Tensor4<T> Conv2d<T>::forward(const Tensor4<T>& x, Cache* cache) const {
  if (x.c != in_) throw InternalError("Conv2d: channel mismatch");
  const int ho = (x.h + 2 * pad_ - k_) / stride_ + 1;
  const int wo = (x.w + 2 * pad_ - k_) / stride_ + 1;
  const int rows = in_ * k_ * k_;
  const std::size_t cols = static_cast<std::size_t>(ho) * wo;
  const std::size_t col_size = static_cast<std::size_t>(rows) * cols;

  Tensor4<T> y(x.n, out_, ho, wo);
  Buffer<T> local;
  if (cache) {
    cache->columns.resize(col_size * x.n);
    cache->in_h = x.h;
    cache->in_w = x.w;
  } else {
    local.resize(col_size);
  }
  ConstMapMat<T> wmat(weight.data(), out_, rows);
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(bias.data(), out_);
  for (int i = 0; i < x.n; ++i) {
    T* col = cache ? cache->columns.data() + col_size * i : local.data();
    im2col(x.sample(i), in_, x.h, x.w, k_, stride_, pad_, ho, wo, col);
    MapMat<T> out(y.sample(i), out_, static_cast<Eigen::Index>(cols));
    out.noalias() = wmat * ConstMapMat<T>(col, rows, static_cast<Eigen::Index>(cols));
    out.colwise() += bvec;
  }
  return y;
}

template <typename T>
Tensor4<T> Conv2d<T>::backward(const Tensor4<T>& grad_out, const Cache& cache) {
  const int ho = grad_out.h;
  const int wo = grad_out.w;
  const int rows = in_ * k_ * k_;
  const std::size_t cols = static_cast<std::size_t>(ho) * wo;
  const std::size_t col_size = static_cast<std::size_t>(rows) * cols;
  if (cache.columns.size() != col_size * grad_out.n) throw InternalError("Conv2d: stale cache");

  Tensor4<T> grad_in(grad_out.n, in_, cache.in_h, cache.in_w);
  ConstMapMat<T> wmat(weight.data(), out_, rows);
  MapMat<T> gw(grad_weight.data(), out_, rows);
  Buffer<T> dcol(col_size);
  for (int i = 0; i < grad_out.n; ++i) {
    ConstMapMat<T> g(grad_out.sample(i), out_, static_cast<Eigen::Index>(cols));
    ConstMapMat<T> col(cache.columns.data() + col_size * i, rows, static_cast<Eigen::Index>(cols));
    gw.noalias() += g * col.transpose();
    for (int o = 0; o < out_; ++o) grad_bias[o] += g.row(o).sum();
    MapMat<T> dc(dcol.data(), rows, static_cast<Eigen::Index>(cols));
    dc.noalias() = wmat.transpose() * g;
    col2im(dcol.data(), in_, cache.in_h, cache.in_w, k_, stride_, pad_, ho, wo, grad_in.sample(i));
  }
  return grad_in;
}

template <typename T>
ConvTranspose2x2<T>::ConvTranspose2x2(int in_channels, int out_channels)
    : in_(in_channels), out_(out_channels) {
  weight.assign(static_cast<std::size_t>(out_) * 4 * in_, T(0));
  bias.assign(out_, T(0));
  grad_weight.assign(weight.size(), T(0));
  grad_bias.assign(bias.size(), T(0));
}

template <typename T>
Tensor4<T> ConvTranspose2x2<T>::forward(const Tensor4<T>& x, Cache* cache) const {
  if (x.c != in_) throw InternalError("ConvTranspose2x2: channel mismatch");
  const std::size_t hw = x.plane();
  Tensor4<T> y(x.n, out_, x.h * 2, x.w * 2);
  ConstMapMat<T> wmat(weight.data(), out_ * 4, in_);
  RowMat<T> z(out_ * 4, static_cast<Eigen::Index>(hw));
  for (int i = 0; i < x.n; ++i) {
    z.noalias() = wmat * ConstMapMat<T>(x.sample(i), in_, static_cast<Eigen::Index>(hw));
    for (int o = 0; o < out_; ++o) {
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const T* zr = z.data() + static_cast<std::size_t>((o * 2 + dy) * 2 + dx) * hw;
          for (int yy = 0; yy < x.h; ++yy)
            for (int xx = 0; xx < x.w; ++xx)
              y.at(i, o, 2 * yy + dy, 2 * xx + dx) = zr[yy * x.w + xx] + bias[o];
        }
      }
    }
  }
  if (cache) cache->input = x;
  return y;
}

template <typename T>
Tensor4<T> ConvTranspose2x2<T>::backward(const Tensor4<T>& grad_out, const Cache& cache) {
  const Tensor4<T>& x = cache.input;
  const std::size_t hw = x.plane();
  Tensor4<T> grad_in(x.n, in_, x.h, x.w);
  ConstMapMat<T> wmat(weight.data(), out_ * 4, in_);
  MapMat<T> gw(grad_weight.data(), out_ * 4, in_);
  RowMat<T> dz(out_ * 4, static_cast<Eigen::Index>(hw));
  for (int i = 0; i < x.n; ++i) {
    for (int o = 0; o < out_; ++o) {
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          T* zr = dz.data() + static_cast<std::size_t>((o * 2 + dy) * 2 + dx) * hw;
          for (int yy = 0; yy < x.h; ++yy)
            for (int xx = 0; xx < x.w; ++xx) {
              const T g = grad_out.at(i, o, 2 * yy + dy, 2 * xx + dx);
              zr[yy * x.w + xx] = g;
              grad_bias[o] += g;
            }
        }
      }
    }
    ConstMapMat<T> xin(x.sample(i), in_, static_cast<Eigen::Index>(hw));
    gw.noalias() += dz * xin.transpose();
    MapMat<T>(grad_in.sample(i), in_, static_cast<Eigen::Index>(hw)).noalias() = wmat.transpose() * dz;
  }
  return grad_in;
}

template <typename T>
void leaky_relu_inplace(Tensor4<T>& x) {
  const T slope = static_cast<T>(kLeakySlope);
  for (T& v : x.data)
    if (v < T(0)) v *= slope;
}

template <typename T>
void leaky_relu_backward_inplace(Tensor4<T>& grad, const Tensor4<T>& activated) {
  const T slope = static_cast<T>(kLeakySlope);
  for (std::size_t i = 0; i < grad.data.size(); ++i)
    if (activated.data[i] < T(0)) grad.data[i] *= slope;
}

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) throw InternalError("concat_channels: shape mismatch");
  Tensor4<T> out(a.n, a.c + b.c, a.h, a.w);
  for (int i = 0; i < a.n; ++i) {
    std::copy(a.sample(i), a.sample(i) + a.sample_size(), out.sample(i));
    std::copy(b.sample(i), b.sample(i) + b.sample_size(), out.sample(i) + a.sample_size());
  }
  return out;
}

template <typename T>
void split_channels(const Tensor4<T>& g, int channels_a, Tensor4<T>& ga, Tensor4<T>& gb) {
  ga = Tensor4<T>(g.n, channels_a, g.h, g.w);
  gb = Tensor4<T>(g.n, g.c - channels_a, g.h, g.w);
  for (int i = 0; i < g.n; ++i) {
    const T* src = g.sample(i);
    std::copy(src, src + ga.sample_size(), ga.sample(i));
    std::copy(src + ga.sample_size(), src + g.sample_size(), gb.sample(i));
  }
}

template <typename T>
void add_inplace(Tensor4<T>& dst, const Tensor4<T>& src) {
  if (!dst.same_shape(src)) throw InternalError("add_inplace: shape mismatch");
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

template <typename T>
Tensor4<T> to_batch(std::span<const ImageTensor> images) {
  if (images.empty()) throw InvalidArgument("to_batch: empty batch");
  const ImageTensor& first = images.front();
  Tensor4<T> out(static_cast<int>(images.size()), first.channels(), first.height(), first.width());
  for (int i = 0; i < out.n; ++i) {
    const ImageTensor& img = images[i];
    if (!img.same_shape(first)) throw InvalidArgument("to_batch: images differ in shape");
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x)
        for (int c = 0; c < out.c; ++c) out.at(i, c, y, x) = static_cast<T>(img.at(y, x, c));
  }
  return out;
}

template <typename T>
ImageTensor from_batch(const Tensor4<T>& batch, int i) {
  ImageTensor img(batch.h, batch.w, batch.c);
  for (int y = 0; y < batch.h; ++y)
    for (int x = 0; x < batch.w; ++x)
      for (int c = 0; c < batch.c; ++c) img.at(y, x, c) = static_cast<float>(batch.at(i, c, y, x));
  return img;
}

#define MID_INSTANTIATE_LAYERS(T)                                                       \
  template class Conv2d<T>;                                                             \
  template class ConvTranspose2x2<T>;                                                   \
  template void leaky_relu_inplace<T>(Tensor4<T>&);                                     \
  template void leaky_relu_backward_inplace<T>(Tensor4<T>&, const Tensor4<T>&);        \
  template Tensor4<T> concat_channels<T>(const Tensor4<T>&, const Tensor4<T>&);         \
  template void split_channels<T>(const Tensor4<T>&, int, Tensor4<T>&, Tensor4<T>&);    \
  template void add_inplace<T>(Tensor4<T>&, const Tensor4<T>&);                         \
  template Tensor4<T> to_batch<T>(std::span<const ImageTensor>);                        \
  template ImageTensor from_batch<T>(const Tensor4<T>&, int);

MID_INSTANTIATE_LAYERS(float)
MID_INSTANTIATE_LAYERS(double)

#undef MID_INSTANTIATE_LAYERS

}  // namespace mid::nn
