#include "mid/noise/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mid/core/error.hpp"

namespace mid {

ImageTensor sample_awgn(int height, int width, int channels, double sigma, RngStream& rng) {
  if (!(sigma >= 0.0)) throw InvalidArgument("sample_awgn: sigma must be non-negative");
  ImageTensor out(height, width, channels);
  for (float& v : out.data()) v = static_cast<float>(sigma * rng.normal());
  return out;
}

NoiseBank build_awgn_bank(int count, int patch_size, int channels, double sigma, RngStream& rng) {
  if (count < 1) throw InvalidArgument("build_awgn_bank: count must be >= 1");
  if (patch_size < 1) throw InvalidArgument("build_awgn_bank: patch_size must be >= 1");
  std::vector<ImageTensor> patches;
  std::vector<PatchProvenance> manifest;
  patches.reserve(count);
  for (int i = 0; i < count; ++i) {
    RngStream draw = rng.derive("awgn-patch", static_cast<std::uint64_t>(i));
    patches.push_back(sample_awgn(patch_size, patch_size, channels, sigma, draw));
    manifest.push_back({"awgn-" + std::to_string(i), "awgn", draw.key(), 0.0, 0});
  }
  const nlohmann::json config = {{"kind", "awgn"}, {"sigma", sigma}, {"count", count},
                                 {"patch_size", patch_size}, {"channels", channels}};
  return {0, patch_size, std::move(patches), std::move(manifest), config};
}

ImageTensor draw_noise(const NoiseBank& bank, int target_h, int target_w, RngStream& rng,
                       NoiseAugment augment) {
  if (target_h <= 0 || target_w <= 0) throw InvalidArgument("draw_noise: target must be positive");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& p = bank.patch(i);
    if (p.height() >= target_h && p.width() >= target_w) eligible.push_back(i);
  }
  if (eligible.empty()) throw InvalidArgument("draw_noise: target larger than every bank patch");
  const ImageTensor& src = bank.patch(eligible[rng.below(eligible.size())]);
  const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(src.height() - target_h + 1)));
  const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(src.width() - target_w + 1)));
  ImageTensor out = crop(src, y0, x0, target_h, target_w);
  if (augment.flips) {
    if (rng.bernoulli(0.5)) out = flip_horizontal(out);
    if (rng.bernoulli(0.5)) out = flip_vertical(out);
  }
  return out;
}

RngStream extraction_stream(const RngStream& rng, std::size_t image_index, int pass) {
  return rng.derive("image", image_index).derive("pass", static_cast<std::uint64_t>(pass));
}

NoiseBank extract_pseudo_noise(const ImageDenoiser& denoiser, const std::vector<Scene>& noisy_set,
                               const MaskRatioSpec& alpha_spec, RngStream& rng,
                               const ExtractOptions& options) {
  if (noisy_set.empty()) throw InvalidArgument("extract_pseudo_noise: noisy set is empty");
  if (options.passes_per_image < 1) throw InvalidArgument("extract_pseudo_noise: passes_per_image must be >= 1");
  if (options.ensemble_k < 1) throw InvalidArgument("extract_pseudo_noise: ensemble_k must be >= 1");

  std::vector<ImageTensor> residuals;
  std::vector<PatchProvenance> manifest;
  int min_side = noisy_set.front().image.height();
  for (std::size_t i = 0; i < noisy_set.size(); ++i) {
    const ImageTensor& y = noisy_set[i].image;
    min_side = std::min({min_side, y.height(), y.width()});
    for (int pass = 0; pass < options.passes_per_image; ++pass) {
      RngStream stream = extraction_stream(rng, i, pass);
      ImageTensor pseudo_clean(y.height(), y.width(), y.channels());
      std::uint64_t first_mask_seed = 0;
      double first_ratio = 0.0;
      for (int m = 0; m < options.ensemble_k; ++m) {
        RngStream member = options.ensemble_k == 1 ? stream : stream.derive("member", m);
        RngStream ratio_rng = member.derive("ratio");
        RngStream mask_rng = member.derive("mask");
        const double alpha = sample_mask_ratio(alpha_spec, ratio_rng);
        const BinaryMask mask = sample_mask(y.height(), y.width(), alpha, mask_rng);
        if (m == 0) {
          first_mask_seed = mask_rng.key();
          first_ratio = alpha;
        }
        ImageTensor pred = denoise_padded(denoiser, apply_mask(y, mask));
        if (!pred.same_shape(y)) throw InternalError("extract_pseudo_noise: denoiser output shape mismatch");
        if (options.ensemble_k == 1) {
          pseudo_clean = std::move(pred);
        } else {
          auto acc = pseudo_clean.data();
          auto p = pred.data();
          for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += p[j];
        }
      }
      if (options.ensemble_k > 1) pseudo_clean = scale(pseudo_clean, 1.0f / static_cast<float>(options.ensemble_k));
      residuals.push_back(subtract(y, pseudo_clean));
      manifest.push_back({noisy_set[i].id + "#" + std::to_string(pass), noisy_set[i].id, first_mask_seed,
                          first_ratio, options.round_index});
    }
  }
  nlohmann::json config = {{"kind", "residual"},
                           {"alpha_spec", alpha_spec.to_string()},
                           {"passes_per_image", options.passes_per_image},
                           {"ensemble_k", options.ensemble_k}};
  for (const auto& [k, v] : options.lineage.items()) config[k] = v;
  return {options.round_index, min_side, std::move(residuals), std::move(manifest), config};
}

CorrelatedNoiseModel CorrelatedNoiseModel::box(int size, double base_sigma, double signal_gain) {
  CorrelatedNoiseModel m;
  m.base_sigma = base_sigma;
  m.signal_gain = signal_gain;
  m.kernel_size = size;
  m.kernel.assign(static_cast<std::size_t>(size) * size, 1.0 / (static_cast<double>(size) * size));
  m.validate();
  return m;
}

CorrelatedNoiseModel CorrelatedNoiseModel::white(double base_sigma, double signal_gain) {
  return box(1, base_sigma, signal_gain);
}

void CorrelatedNoiseModel::validate() const {
  if (!(base_sigma >= 0.0)) throw InvalidArgument("noise model: base_sigma must be >= 0");
  if (!(signal_gain >= 0.0)) throw InvalidArgument("noise model: signal_gain must be >= 0");
  if (kernel_size < 1 || kernel_size % 2 == 0 ||
      kernel.size() != static_cast<std::size_t>(kernel_size) * kernel_size) {
    throw InvalidArgument("noise model: kernel must be an odd square");
  }
  const double sum = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("noise model: kernel must sum to 1");
}

double CorrelatedNoiseModel::target_std(double clean) const {
  return base_sigma * std::sqrt(1.0 + signal_gain * std::max(clean, 0.0));
}

ImageTensor sample_correlated_noise(const CorrelatedNoiseModel& model, const ImageTensor& clean,
                                    RngStream& rng) {
  model.validate();
  const int h = clean.height();
  const int w = clean.width();
  const int r = model.kernel_size / 2;
  const int ph = h + 2 * r;
  const int pw = w + 2 * r;
  double energy = 0.0;
  for (double k : model.kernel) energy += k * k;
  const double norm = 1.0 / std::sqrt(energy);

  ImageTensor out(h, w, clean.channels());
  std::vector<double> field(static_cast<std::size_t>(ph) * pw);
  for (int c = 0; c < clean.channels(); ++c) {
    // The white field covers the kernel support around the image, so the
    // filtered noise is stationary up to the border.
    for (double& v : field) v = rng.normal();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int ky = 0; ky < model.kernel_size; ++ky) {
          const double* row = &field[static_cast<std::size_t>(y + ky) * pw + x];
          const double* krow = &model.kernel[static_cast<std::size_t>(ky) * model.kernel_size];
          for (int kx = 0; kx < model.kernel_size; ++kx) acc += krow[kx] * row[kx];
        }
        out.at(y, x, c) = static_cast<float>(acc * norm * model.target_std(clean.at(y, x, c)));
      }
    }
  }
  return out;
}

}  // namespace mid
