#pragma once

#include "mid/core/image.hpp"
#include "mid/core/rng.hpp"

#include <string>

namespace mid {

/// Masking ratio: either a fixed value or a closed interval sampled
/// uniformly per draw.
class MaskRatioSpec {
 public:
  MaskRatioSpec() = default;
  static MaskRatioSpec fixed(double ratio);
  static MaskRatioSpec interval(double lo, double hi);

  [[nodiscard]] bool is_fixed() const { return fixed_; }
  [[nodiscard]] double lo() const { return lo_; }
  [[nodiscard]] double hi() const { return hi_; }
  [[nodiscard]] double mean() const { return 0.5 * (lo_ + hi_); }
  [[nodiscard]] std::string to_string() const;

  friend bool operator==(const MaskRatioSpec&, const MaskRatioSpec&) = default;

 private:
  MaskRatioSpec(double lo, double hi, bool fixed) : lo_(lo), hi_(hi), fixed_(fixed) {}
  double lo_ = 0.0;
  double hi_ = 0.0;
  bool fixed_ = true;
};

/// Draw a ratio from `spec`. Fixed specs consume no randomness.
double sample_mask_ratio(const MaskRatioSpec& spec, RngStream& rng);

/// Per-pixel Bernoulli mask: each pixel is 0 with probability alpha.
BinaryMask sample_mask(int height, int width, double alpha, RngStream& rng);

/// output[i,j,c] = mask[i,j] * img[i,j,c].
ImageTensor apply_mask(const ImageTensor& img, const BinaryMask& mask);

}  // namespace mid
