#include "doctest.h"
#include "helpers.hpp"
#include "mid/core/error.hpp"
#include "mid/core/mask.hpp"
#include "mid/inference/ensemble.hpp"
#include "mid/model/denoiser.hpp"

using namespace mid;

namespace {

/// out = 2 * in - 0.25: affine, so the ensemble mean equals the model applied
/// to the mean masked input.
class AffineDenoiser final : public ImageDenoiser {
 public:
  [[nodiscard]] ImageTensor denoise(const ImageTensor& masked) const override {
    ImageTensor out = masked;
    for (float& v : out.data()) v = 2.0f * v - 0.25f;
    return out;
  }
};

}  // namespace

TEST_CASE("tile origins cover the axis") {
  CHECK(tile_origins(100, 256, 32) == std::vector<int>{0});
  CHECK(tile_origins(256, 256, 32) == std::vector<int>{0});
  CHECK(tile_origins(300, 128, 32) == std::vector<int>{0, 96, 172});
  CHECK(tile_origins(224, 128, 32) == std::vector<int>{0, 96});
}

TEST_CASE("tile blend weights form a partition of unity") {
  for (const auto& [h, w, tile, overlap] : std::vector<std::array<int, 4>>{
           {300, 200, 128, 32}, {64, 64, 64, 8}, {129, 257, 64, 16}, {90, 90, 40, 0}}) {
    const auto sums = blend_weight_sums(h, w, tile, overlap);
    REQUIRE(sums.size() == static_cast<std::size_t>(h) * w);
    for (double s : sums) REQUIRE(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("K=1 ensemble is one masked forward pass") {
  RngStream rng(1, "init");
  const Denoiser model = Denoiser::create({"unet", 1, 2, 3}, rng);
  const ImageTensor y = test::uniform_image(12, 12, 1, 2);
  EnsembleConfig cfg;
  cfg.k = 1;
  cfg.seed = 77;
  EnsembleTrace trace;
  const ImageTensor out = ensemble_mean(model, y, cfg, &trace);
  REQUIRE(trace.mask_seeds.size() == 1);
  RngStream replay = RngStream::from_key(trace.mask_seeds[0]);
  const BinaryMask m = sample_mask(12, 12, trace.ratios[0], replay);
  CHECK(out == denoise_padded(model, apply_mask(y, m)));
}

TEST_CASE("ensemble of an affine model is the model of the mean masked input") {
  const AffineDenoiser model;
  const ImageTensor y = test::uniform_image(10, 10, 3, 3);
  EnsembleConfig cfg;
  cfg.k = 7;
  cfg.alpha_spec = MaskRatioSpec::interval(0.5, 0.7);
  cfg.seed = 5;
  EnsembleTrace trace;
  const ImageTensor out = ensemble_mean(model, y, cfg, &trace);
  REQUIRE(trace.mask_seeds.size() == 7);
  ImageTensor mean_input(10, 10, 3);
  for (int i = 0; i < 7; ++i) {
    CHECK(trace.ratios[i] >= 0.5);
    CHECK(trace.ratios[i] <= 0.7);
    RngStream replay = RngStream::from_key(trace.mask_seeds[i]);
    mean_input = add(mean_input, apply_mask(y, sample_mask(10, 10, trace.ratios[i], replay)));
  }
  const ImageTensor expected = model.denoise(scale(mean_input, 1.0f / 7.0f));
  for (std::size_t j = 0; j < out.size(); ++j) CHECK(out.values()[j] == doctest::Approx(expected.values()[j]).epsilon(1e-5));
}

TEST_CASE("clipping happens after averaging") {
  const AffineDenoiser model;
  const ImageTensor y = test::uniform_image(8, 8, 1, 4);
  EnsembleConfig cfg;
  cfg.k = 4;
  const ImageTensor raw = ensemble_mean(model, y, cfg);
  const ImageTensor clipped = ensemble_denoise(model, y, cfg);
  CHECK(clipped == clip01(raw));
  bool out_of_range = false;
  for (float v : raw.values()) out_of_range = out_of_range || v < 0.0f || v > 1.0f;
  CHECK(out_of_range);
}

TEST_CASE("tiled inference of a small image takes the whole-image path") {
  const AffineDenoiser model;
  const ImageTensor y = test::uniform_image(20, 24, 1, 5);
  EnsembleConfig cfg;
  cfg.k = 3;
  cfg.tile = 32;
  cfg.overlap = 8;
  CHECK(tiled_denoise(model, y, cfg) == ensemble_denoise(model, y, cfg));
}

TEST_CASE("tiled inference of a large image keeps shape and range") {
  RngStream rng(6, "init");
  const Denoiser model = Denoiser::create({"unet", 3, 2, 3}, rng);
  const ImageTensor y = test::uniform_image(70, 50, 3, 6);
  EnsembleConfig cfg;
  cfg.k = 2;
  cfg.tile = 32;
  cfg.overlap = 8;
  const ImageTensor out = tiled_denoise(model, y, cfg);
  CHECK(out.same_shape(y));
  for (float v : out.values()) REQUIRE((v >= 0.0f && v <= 1.0f));
  CHECK(out == tiled_denoise(model, y, cfg));
}

TEST_CASE("ensemble config validation") {
  EnsembleConfig cfg;
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.k = 1;
  cfg.overlap = cfg.tile;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("training alpha is read from the checkpoint") {
  RngStream rng(7, "init");
  Denoiser model = Denoiser::create({"convstack", 1, 2, 1}, rng);
  CHECK(training_alpha(model) == MaskRatioSpec::fixed(0.8));
  model.set_metadata(0, {{"alpha", nlohmann::json::array({0.5, 0.7})}}, 0);
  CHECK(training_alpha(model) == MaskRatioSpec::interval(0.5, 0.7));
}
