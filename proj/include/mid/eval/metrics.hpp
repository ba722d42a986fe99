#pragma once

#include "mid/core/image.hpp"

namespace mid {

/// Value returned by psnr() when the images are identical.
inline constexpr double kPsnrCap = 100.0;

double mean_squared_error(const ImageTensor& a, const ImageTensor& b);

/// 10 log10(peak^2 / MSE); kPsnrCap when MSE is zero.
double psnr(const ImageTensor& a, const ImageTensor& b, double peak = 1.0);

/// Mean local SSIM over the fully-covered window positions, using an 11x11
/// Gaussian window (sigma 1.5) and stabilizers (0.01 L)^2, (0.03 L)^2 where
/// L is `data_range`. Channels are evaluated separately and averaged.
double ssim(const ImageTensor& a, const ImageTensor& b, double data_range = 1.0);

}  // namespace mid
