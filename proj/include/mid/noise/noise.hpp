#pragma once

#include <vector>

#include "mid/core/denoiser_interface.hpp"
#include "mid/core/image.hpp"
#include "mid/core/mask.hpp"
#include "mid/core/rng.hpp"
#include "mid/noise/noise_bank.hpp"

namespace mid {

/// Default AWGN standard deviation for the round-0 bank (intensity units).
inline constexpr double kDefaultAwgnSigma = 25.0 / 255.0;

/// i.i.d. zero-mean Gaussian field with standard deviation `sigma`.
ImageTensor sample_awgn(int height, int width, int channels, double sigma, RngStream& rng);

/// Round-0 bank of `count` independent AWGN patches, drawn once.
NoiseBank build_awgn_bank(int count, int patch_size, int channels, double sigma, RngStream& rng);

struct NoiseAugment {
  bool flips = true;
};

/// Uniformly pick a bank entry large enough for the target, random-crop it,
/// and optionally flip it horizontally and/or vertically.
ImageTensor draw_noise(const NoiseBank& bank, int target_h, int target_w, RngStream& rng,
                       NoiseAugment augment = {});

struct ExtractOptions {
  int passes_per_image = 1;
  /// 1 = literal single masked pass per residual. >1 averages that many masked
  /// predictions into the pseudo-clean image before subtracting.
  int ensemble_k = 1;
  /// round index written into the produced bank (k for residuals of D_{k-1}).
  int round_index = 1;
  /// Extra fields merged into the bank's config (e.g. checkpoint lineage).
  nlohmann::json lineage = nlohmann::json::object();
};

/// Pseudo-real noise: for each noisy image and pass, draw a mask M and store
/// y - D(M * y). Residuals are not clipped. Images are processed in input
/// order and every (image, pass) uses its own derived stream, so the result
/// does not depend on scheduling.
NoiseBank extract_pseudo_noise(const ImageDenoiser& denoiser, const std::vector<Scene>& noisy_set,
                               const MaskRatioSpec& alpha_spec, RngStream& rng,
                               const ExtractOptions& options = {});

/// The streams extract_pseudo_noise uses for (image, pass). Exposed so a
/// stored residual can be recomputed from its provenance.
RngStream extraction_stream(const RngStream& rng, std::size_t image_index, int pass);

/// Desk-scale stand-in for real sensor noise: white Gaussian noise convolved
/// with a small kernel, then rescaled so the per-pixel standard deviation is
/// base_sigma * sqrt(1 + signal_gain * clean).
struct CorrelatedNoiseModel {
  double base_sigma = 25.0 / 255.0;
  int kernel_size = 3;
  std::vector<double> kernel = std::vector<double>(9, 1.0 / 9.0);
  double signal_gain = 0.0;

  static CorrelatedNoiseModel box(int size, double base_sigma, double signal_gain = 0.0);
  static CorrelatedNoiseModel white(double base_sigma, double signal_gain = 0.0);
  /// Throws InvalidArgument unless the kernel is odd-square, sums to 1 and
  /// both sigma and gain are non-negative.
  void validate() const;
  /// Target standard deviation at a pixel of intensity `clean`.
  [[nodiscard]] double target_std(double clean) const;
};

ImageTensor sample_correlated_noise(const CorrelatedNoiseModel& model, const ImageTensor& clean,
                                    RngStream& rng);

}  // namespace mid
