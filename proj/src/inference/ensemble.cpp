#include "mid/inference/ensemble.hpp"

#include <algorithm>

#include "mid/core/error.hpp"
#include "mid/core/json_io.hpp"
#include "mid/model/denoiser.hpp"

namespace mid {

void EnsembleConfig::validate() const {
  if (k < 1) throw InvalidArgument("ensemble: K must be >= 1");
  if (tile < 1 || overlap < 0 || overlap >= tile) {
    throw InvalidArgument("ensemble: tile overlap must satisfy 0 <= overlap < tile");
  }
}

ImageTensor ensemble_mean(const ImageDenoiser& model, const ImageTensor& y, const EnsembleConfig& cfg,
                          EnsembleTrace* trace) {
  cfg.validate();
  const RngStream root(cfg.seed, "ensemble");
  ImageTensor acc(y.height(), y.width(), y.channels());
  for (int i = 0; i < cfg.k; ++i) {
    const RngStream member = root.derive("member", static_cast<std::uint64_t>(i));
    RngStream ratio_rng = member.derive("ratio");
    RngStream mask_rng = member.derive("mask");
    const double alpha = sample_mask_ratio(cfg.alpha_spec, ratio_rng);
    const BinaryMask mask = sample_mask(y.height(), y.width(), alpha, mask_rng);
    const ImageTensor pred = denoise_padded(model, apply_mask(y, mask));
    auto a = acc.data();
    auto p = pred.data();
    for (std::size_t j = 0; j < a.size(); ++j) a[j] += p[j];
    if (trace) {
      trace->mask_seeds.push_back(mask_rng.key());
      trace->ratios.push_back(alpha);
    }
  }
  return cfg.k == 1 ? acc : scale(acc, 1.0f / static_cast<float>(cfg.k));
}

ImageTensor ensemble_denoise(const ImageDenoiser& model, const ImageTensor& y, const EnsembleConfig& cfg,
                             EnsembleTrace* trace) {
  return clip01(ensemble_mean(model, y, cfg, trace));
}

std::vector<int> tile_origins(int length, int tile, int overlap) {
  if (length <= tile) return {0};
  const int stride = tile - overlap;
  std::vector<int> out;
  for (int s = 0;; s += stride) {
    if (s + tile >= length) {
      out.push_back(length - tile);
      break;
    }
    out.push_back(s);
  }
  return out;
}

namespace {

// Ramp weights of one tile along one axis; neighbors overlap on either side.
std::vector<double> axis_weights(const std::vector<int>& origins, std::size_t idx, int tile) {
  std::vector<double> w(static_cast<std::size_t>(tile), 1.0);
  const int start = origins[idx];
  if (idx > 0) {
    const int ov = origins[idx - 1] + tile - start;
    for (int i = 0; i < ov && i < tile; ++i) w[i] = std::min(w[i], (i + 0.5) / ov);
  }
  if (idx + 1 < origins.size()) {
    const int ov = start + tile - origins[idx + 1];
    for (int i = 0; i < ov && i < tile; ++i) {
      w[tile - 1 - i] = std::min(w[tile - 1 - i], (i + 0.5) / ov);
    }
  }
  return w;
}

template <typename TileFn>
void for_each_tile(int height, int width, int tile, int overlap, TileFn&& fn) {
  const auto ys = tile_origins(height, tile, overlap);
  const auto xs = tile_origins(width, tile, overlap);
  std::size_t index = 0;
  for (std::size_t iy = 0; iy < ys.size(); ++iy) {
    const auto wy = axis_weights(ys, iy, tile);
    for (std::size_t ix = 0; ix < xs.size(); ++ix, ++index) {
      fn(index, ys[iy], xs[ix], wy, axis_weights(xs, ix, tile));
    }
  }
}

}  // namespace

std::vector<double> blend_weight_sums(int height, int width, int tile, int overlap) {
  if (height < tile || width < tile) throw InvalidArgument("blend_weight_sums: canvas smaller than tile");
  std::vector<double> total(static_cast<std::size_t>(height) * width, 0.0);
  for_each_tile(height, width, tile, overlap,
                [&](std::size_t, int y0, int x0, const std::vector<double>& wy, const std::vector<double>& wx) {
                  for (int y = 0; y < tile; ++y)
                    for (int x = 0; x < tile; ++x)
                      total[static_cast<std::size_t>(y0 + y) * width + x0 + x] += wy[y] * wx[x];
                });
  // Normalized contribution of every tile, summed again.
  std::vector<double> sums(total.size(), 0.0);
  for_each_tile(height, width, tile, overlap,
                [&](std::size_t, int y0, int x0, const std::vector<double>& wy, const std::vector<double>& wx) {
                  for (int y = 0; y < tile; ++y)
                    for (int x = 0; x < tile; ++x) {
                      const std::size_t p = static_cast<std::size_t>(y0 + y) * width + x0 + x;
                      sums[p] += wy[y] * wx[x] / total[p];
                    }
                });
  return sums;
}

ImageTensor tiled_denoise(const ImageDenoiser& model, const ImageTensor& y, const EnsembleConfig& cfg) {
  cfg.validate();
  if (cfg.tile % model.downsample_factor() != 0) {
    throw InvalidArgument("tiled_denoise: tile size must be a multiple of the model's downsampling factor");
  }
  if (y.height() <= cfg.tile && y.width() <= cfg.tile) return ensemble_denoise(model, y, cfg);

  const ImageTensor padded = pad_reflect(y, cfg.tile, cfg.tile, 1);
  const int h = padded.height();
  const int w = padded.width();
  const int c = padded.channels();
  std::vector<double> acc(padded.size(), 0.0);
  std::vector<double> weight(static_cast<std::size_t>(h) * w, 0.0);
  for_each_tile(h, w, cfg.tile, cfg.overlap,
                [&](std::size_t index, int y0, int x0, const std::vector<double>& wy, const std::vector<double>& wx) {
                  EnsembleConfig tile_cfg = cfg;
                  tile_cfg.seed = RngStream(cfg.seed, "tile", index).key();
                  const ImageTensor out =
                      ensemble_mean(model, crop(padded, y0, x0, cfg.tile, cfg.tile), tile_cfg);
                  for (int ty = 0; ty < cfg.tile; ++ty)
                    for (int tx = 0; tx < cfg.tile; ++tx) {
                      const double wt = wy[ty] * wx[tx];
                      const std::size_t p = static_cast<std::size_t>(y0 + ty) * w + x0 + tx;
                      weight[p] += wt;
                      for (int ch = 0; ch < c; ++ch) acc[p * c + ch] += wt * out.at(ty, tx, ch);
                    }
                });
  ImageTensor blended(h, w, c);
  auto data = blended.data();
  for (std::size_t p = 0; p < weight.size(); ++p)
    for (int ch = 0; ch < c; ++ch) data[p * c + ch] = static_cast<float>(acc[p * c + ch] / weight[p]);
  return clip01(crop(blended, 0, 0, y.height(), y.width()));
}

MaskRatioSpec training_alpha(const Denoiser& model) {
  const auto& tc = model.train_config();
  if (tc.is_object() && tc.contains("alpha")) return mask_ratio_from_json(tc.at("alpha"));
  return MaskRatioSpec::fixed(0.8);
}

}  // namespace mid
