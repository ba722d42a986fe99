#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mid {

/// H x W x C image of 32-bit floats, row-major and channel-last.
///
/// Images nominally hold values in [0, 1]. Noise residuals and intermediate
/// noisy images are allowed outside that range; only final outputs are
/// clipped.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int height, int width, int channels, float fill = 0.0f);
  ImageTensor(int height, int width, int channels, std::vector<float> data);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int channels() const { return channels_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  [[nodiscard]] float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  [[nodiscard]] std::span<float> data() { return data_; }
  [[nodiscard]] std::span<const float> data() const { return data_; }
  [[nodiscard]] const std::vector<float>& values() const { return data_; }

  [[nodiscard]] bool same_shape(const ImageTensor& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  [[nodiscard]] std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Per-pixel visibility mask: 1 = visible, 0 = masked. One plane is shared by
/// every channel of the image it is applied to.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, double alpha, std::vector<unsigned char> bits);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  /// Masking ratio the mask was drawn with.
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] unsigned char at(int y, int x) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x];
  }
  [[nodiscard]] std::span<const unsigned char> bits() const { return bits_; }
  [[nodiscard]] std::size_t masked_count() const;
  [[nodiscard]] double masked_fraction() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  double alpha_ = 0.0;
  std::vector<unsigned char> bits_;
};

// Elementwise helpers. All throw InvalidArgument on shape mismatch.
ImageTensor add(const ImageTensor& a, const ImageTensor& b);
ImageTensor subtract(const ImageTensor& a, const ImageTensor& b);
ImageTensor scale(const ImageTensor& a, float factor);
ImageTensor clip01(const ImageTensor& a);

/// Spatial crop [y0, y0+h) x [x0, x0+w).
ImageTensor crop(const ImageTensor& img, int y0, int x0, int h, int w);
ImageTensor flip_horizontal(const ImageTensor& img);
ImageTensor flip_vertical(const ImageTensor& img);

/// Reflect-pad (mirror without repeating the edge pixel) on the bottom and
/// right so that both spatial dims become at least `min_h`/`min_w` and
/// multiples of `multiple`. Works for pads larger than the image.
ImageTensor pad_reflect(const ImageTensor& img, int min_h, int min_w, int multiple);

/// Mirror index into [0, n) without edge repetition.
int reflect_index(int i, int n);

}  // namespace mid
