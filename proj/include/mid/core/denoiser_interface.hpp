#pragma once

#include <string>

#include "mid/core/image.hpp"

namespace mid {

/// A named image, e.g. one scene of a corpus.
struct Scene {
  std::string id;
  ImageTensor image;
};

/// Anything that maps a (pre-masked) image to an image of identical shape.
/// Implementations must be safe for concurrent const calls.
class ImageDenoiser {
 public:
  virtual ~ImageDenoiser() = default;
  [[nodiscard]] virtual ImageTensor denoise(const ImageTensor& masked) const = 0;
  /// Spatial dims passed to denoise() must be multiples of this.
  [[nodiscard]] virtual int downsample_factor() const { return 1; }
};

/// Reflect-pads `input` to the denoiser's size multiple, denoises, and crops
/// back. Throws InternalError if the denoiser changes the shape.
ImageTensor denoise_padded(const ImageDenoiser& denoiser, const ImageTensor& input);

}  // namespace mid
