#include "mid/core/image.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mid/core/error.hpp"

namespace mid {

namespace {

void require_positive(int h, int w, int c) {
  if (h <= 0 || w <= 0 || c <= 0) {
    throw InvalidArgument("image dimensions must be positive, got " + std::to_string(h) + "x" +
                          std::to_string(w) + "x" + std::to_string(c));
  }
}

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* op) {
  if (!a.same_shape(b)) throw InvalidArgument(std::string(op) + ": shape mismatch");
}

}  // namespace

ImageTensor::ImageTensor(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  require_positive(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

ImageTensor::ImageTensor(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  require_positive(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw InvalidArgument("ImageTensor: data size does not match dimensions");
  }
}

BinaryMask::BinaryMask(int height, int width, double alpha, std::vector<unsigned char> bits)
    : height_(height), width_(width), alpha_(alpha), bits_(std::move(bits)) {
  if (height <= 0 || width <= 0) throw InvalidArgument("BinaryMask: dimensions must be positive");
  if (bits_.size() != static_cast<std::size_t>(height) * width) {
    throw InvalidArgument("BinaryMask: bit count does not match dimensions");
  }
  if (std::any_of(bits_.begin(), bits_.end(), [](unsigned char b) { return b > 1; })) {
    throw InvalidArgument("BinaryMask: bits must be 0 or 1");
  }
}

std::size_t BinaryMask::masked_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 0));
}

double BinaryMask::masked_fraction() const {
  return static_cast<double>(masked_count()) / static_cast<double>(bits_.size());
}

ImageTensor add(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "add");
  ImageTensor out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

ImageTensor subtract(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "subtract");
  ImageTensor out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

ImageTensor scale(const ImageTensor& a, float factor) {
  ImageTensor out = a;
  for (float& v : out.data()) v *= factor;
  return out;
}

ImageTensor clip01(const ImageTensor& a) {
  ImageTensor out = a;
  for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

ImageTensor crop(const ImageTensor& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h <= 0 || w <= 0 || y0 + h > img.height() || x0 + w > img.width()) {
    throw InvalidArgument("crop: window outside image");
  }
  const int c = img.channels();
  ImageTensor out(h, w, c);
  for (int y = 0; y < h; ++y) {
    const float* src = &img.data()[(static_cast<std::size_t>(y0 + y) * img.width() + x0) * c];
    std::copy(src, src + static_cast<std::size_t>(w) * c, &out.at(y, 0, 0));
  }
  return out;
}

ImageTensor flip_horizontal(const ImageTensor& img) {
  ImageTensor out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(y, img.width() - 1 - x, c);
  return out;
}

ImageTensor flip_vertical(const ImageTensor& img) {
  ImageTensor out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(img.height() - 1 - y, x, c);
  return out;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

ImageTensor pad_reflect(const ImageTensor& img, int min_h, int min_w, int multiple) {
  if (multiple <= 0) throw InvalidArgument("pad_reflect: multiple must be positive");
  auto round_up = [multiple](int v) { return (v + multiple - 1) / multiple * multiple; };
  const int h = round_up(std::max(img.height(), min_h));
  const int w = round_up(std::max(img.width(), min_w));
  if (h == img.height() && w == img.width()) return img;
  ImageTensor out(h, w, img.channels());
  for (int y = 0; y < h; ++y) {
    const int sy = reflect_index(y, img.height());
    for (int x = 0; x < w; ++x) {
      const int sx = reflect_index(x, img.width());
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

}  // namespace mid
