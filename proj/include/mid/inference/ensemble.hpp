#pragma once

#include <cstdint>
#include <vector>

#include "mid/core/denoiser_interface.hpp"
#include "mid/core/mask.hpp"

namespace mid {

class Denoiser;

struct EnsembleConfig {
  int k = 10;
  MaskRatioSpec alpha_spec = MaskRatioSpec::fixed(0.8);
  std::uint64_t seed = 0;
  int tile = 256;
  int overlap = 32;

  /// Throws InvalidArgument unless k >= 1 and 0 <= overlap < tile.
  void validate() const;
};

/// Sub-seeds and ratios used by one ensemble call, in member order.
struct EnsembleTrace {
  std::vector<std::uint64_t> mask_seeds;
  std::vector<double> ratios;
};

/// Average of k forward passes, each on an independently masked copy of y.
/// Not clipped. Members are summed in index order.
ImageTensor ensemble_mean(const ImageDenoiser& model, const ImageTensor& y, const EnsembleConfig& cfg,
                          EnsembleTrace* trace = nullptr);

/// clip01(ensemble_mean(...)): clipping happens after averaging.
ImageTensor ensemble_denoise(const ImageDenoiser& model, const ImageTensor& y, const EnsembleConfig& cfg,
                             EnsembleTrace* trace = nullptr);

/// Overlapping tiles, each through ensemble_mean, blended with separable
/// linear ramps in the overlaps and clipped at the end. Images no larger
/// than one tile take the whole-image path.
ImageTensor tiled_denoise(const ImageDenoiser& model, const ImageTensor& y, const EnsembleConfig& cfg);

/// Tile origins along an axis of `length` (first at 0, last flush with the end).
std::vector<int> tile_origins(int length, int tile, int overlap);

/// Sum of normalized blend weights at every pixel of an h x w canvas; 1.0
/// everywhere when the tiling is a partition of unity.
std::vector<double> blend_weight_sums(int height, int width, int tile, int overlap);

/// Masking ratio a checkpoint was trained with (fixed 0.8 if unrecorded).
MaskRatioSpec training_alpha(const Denoiser& model);

}  // namespace mid
