#pragma once

#include <filesystem>

#include "mid/core/image.hpp"

namespace mid {

/// Reads an 8- or 16-bit grayscale or RGB PNG (palette is expanded, alpha is
/// dropped) and normalizes to [0, 1]: 8-bit v/255, 16-bit v/65535.
ImageTensor read_png(const std::filesystem::path& path, int* bit_depth = nullptr);

/// Clips to [0, 1], scales to the bit depth (8 or 16) and rounds half away
/// from zero. 1- and 3-channel images only.
void write_png(const std::filesystem::path& path, const ImageTensor& image, int bit_depth = 8);

/// The values write_png followed by read_png would produce.
ImageTensor quantize(const ImageTensor& image, int bit_depth = 8);

/// Clip to [0, 1] and round half away from zero to an integer code.
unsigned quantize_sample(float value, int bit_depth);

}  // namespace mid
