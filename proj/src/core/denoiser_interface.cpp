#include "mid/core/denoiser_interface.hpp"

#include "mid/core/error.hpp"

namespace mid {

ImageTensor denoise_padded(const ImageDenoiser& denoiser, const ImageTensor& input) {
  const int factor = denoiser.downsample_factor();
  const ImageTensor padded = pad_reflect(input, input.height(), input.width(), factor);
  ImageTensor out = denoiser.denoise(padded);
  if (!out.same_shape(padded)) throw InternalError("denoiser output shape differs from its input");
  if (padded.height() == input.height() && padded.width() == input.width()) return out;
  return crop(out, 0, 0, input.height(), input.width());
}

}  // namespace mid
