#include <cmath>
#include <cstring>

#include "doctest.h"
#include "helpers.hpp"
#include "mid/core/error.hpp"
#include "mid/core/mask.hpp"
#include "mid/model/denoiser.hpp"
#include "mid/noise/noise.hpp"
#include "mid/noise/noise_bank.hpp"

using namespace mid;

namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

Moments moments(const ImageTensor& img) {
  double s = 0.0, s2 = 0.0;
  for (float v : img.values()) {
    s += v;
    s2 += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(img.size());
  return {s / n, std::sqrt(s2 / n - (s / n) * (s / n))};
}

double lag1_correlation(const ImageTensor& img) {
  const Moments m = moments(img);
  double cov = 0.0;
  long n = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x + 1 < img.width(); ++x) {
      cov += (img.at(y, x, 0) - m.mean) * (img.at(y, x + 1, 0) - m.mean);
      ++n;
    }
  }
  return cov / n / (m.std * m.std);
}

class IdentityDenoiser final : public ImageDenoiser {
 public:
  [[nodiscard]] ImageTensor denoise(const ImageTensor& masked) const override { return masked; }
};

}  // namespace

TEST_CASE("AWGN moments") {
  RngStream rng(1, "awgn");
  const ImageTensor n = sample_awgn(256, 256, 1, 25.0 / 255.0, rng);
  const Moments m = moments(n);
  CHECK(std::abs(m.mean) < 0.002);
  CHECK(m.std == doctest::Approx(25.0 / 255.0).epsilon(0.02));
  CHECK(std::abs(lag1_correlation(n)) < 0.02);
}

TEST_CASE("AWGN bank has independent patches and provenance") {
  RngStream rng(2, "bank");
  const NoiseBank bank = build_awgn_bank(6, 16, 3, 0.1, rng);
  CHECK(bank.size() == 6);
  CHECK(bank.round_index() == 0);
  CHECK(bank.channels() == 3);
  CHECK(bank.patch(0) != bank.patch(1));
  CHECK(bank.provenance(0).source_id == "awgn");
  CHECK(bank.provenance(0).mask_seed != bank.provenance(1).mask_seed);
}

TEST_CASE("box-kernel noise is spatially correlated at the target std") {
  const CorrelatedNoiseModel model = CorrelatedNoiseModel::box(3, 50.0 / 255.0);
  const ImageTensor clean(256, 256, 1, 0.5f);
  RngStream rng(3, "box");
  const ImageTensor n = sample_correlated_noise(model, clean, rng);
  const double r = lag1_correlation(n);
  // two of three columns shared between horizontal neighbours
  CHECK(r > 0.55);
  CHECK(r < 0.75);
  CHECK(moments(n).std == doctest::Approx(50.0 / 255.0).epsilon(0.03));
}

TEST_CASE("signal-dependent gain raises the std on bright pixels") {
  const CorrelatedNoiseModel model = CorrelatedNoiseModel::white(0.05, 2.0);
  RngStream rng(4, "gain");
  const ImageTensor dark = sample_correlated_noise(model, ImageTensor(128, 128, 1, 0.0f), rng);
  const ImageTensor bright = sample_correlated_noise(model, ImageTensor(128, 128, 1, 1.0f), rng);
  CHECK(moments(dark).std == doctest::Approx(model.target_std(0.0)).epsilon(0.03));
  CHECK(moments(bright).std == doctest::Approx(model.target_std(1.0)).epsilon(0.03));
  CHECK(model.target_std(1.0) == doctest::Approx(0.05 * std::sqrt(3.0)));
}

TEST_CASE("noise model validation") {
  CorrelatedNoiseModel m = CorrelatedNoiseModel::box(3, 0.1);
  CHECK_NOTHROW(m.validate());
  m.kernel[0] += 0.5;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  CHECK_THROWS_AS(CorrelatedNoiseModel::box(4, 0.1).validate(), InvalidArgument);
}

TEST_CASE("draw_noise picks bank entries uniformly") {
  std::vector<ImageTensor> patches;
  std::vector<PatchProvenance> prov;
  for (int i = 0; i < 4; ++i) {
    patches.emplace_back(8, 8, 1, static_cast<float>(i));
    prov.push_back({"p" + std::to_string(i), "test", 0, 0.0, 0});
  }
  const NoiseBank bank(0, 8, patches, prov);
  RngStream rng(5, "draw");
  std::array<int, 4> counts{};
  const int draws = 8000;
  for (int i = 0; i < draws; ++i) {
    const ImageTensor n = draw_noise(bank, 4, 4, rng);
    REQUIRE(n.height() == 4);
    ++counts[static_cast<int>(n.at(0, 0, 0))];
  }
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - draws / 4.0) * (c - draws / 4.0) / (draws / 4.0);
  // 3 degrees of freedom; 16.27 is the 0.999 quantile
  CHECK(chi2 < 16.27);
}

TEST_CASE("draw_noise rejects targets larger than every patch") {
  const NoiseBank bank(0, 8, {ImageTensor(8, 8, 1)}, {{"p", "t", 0, 0.0, 0}});
  RngStream rng(6, "draw");
  CHECK_THROWS_AS((void)draw_noise(bank, 16, 16, rng), InvalidArgument);
}

TEST_CASE("identity denoiser residual equals (1 - M) * y exactly") {
  const std::vector<Scene> scenes = {{"a", test::uniform_image(12, 10, 3, 7)}, {"b", test::uniform_image(9, 14, 3, 8)}};
  const IdentityDenoiser identity;
  RngStream rng(9, "extract");
  const NoiseBank bank = extract_pseudo_noise(identity, scenes, MaskRatioSpec::fixed(0.6), rng);
  REQUIRE(bank.size() == 2);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const ImageTensor& y = scenes[i].image;
    RngStream replay = RngStream::from_key(bank.provenance(i).mask_seed);
    const BinaryMask m = sample_mask(y.height(), y.width(), 0.6, replay);
    for (int yy = 0; yy < y.height(); ++yy) {
      for (int xx = 0; xx < y.width(); ++xx) {
        for (int c = 0; c < 3; ++c) {
          CHECK(bank.patch(i).at(yy, xx, c) == (m.at(yy, xx) ? 0.0f : y.at(yy, xx, c)));
        }
      }
    }
  }
}

TEST_CASE("stored residual is recomputable from its provenance") {
  nn::ArchitectureSpec arch;
  arch.channels = 1;
  arch.width = 2;
  RngStream init(1, "init");
  const Denoiser model = Denoiser::create(arch, init);
  const std::vector<Scene> scenes = {{"a", test::uniform_image(20, 20, 1, 3)}};
  RngStream rng(10, "extract");
  const NoiseBank bank = extract_pseudo_noise(model, scenes, MaskRatioSpec::fixed(0.8), rng);
  const ImageTensor& y = scenes[0].image;
  RngStream replay = RngStream::from_key(bank.provenance(0).mask_seed);
  const BinaryMask m = sample_mask(20, 20, bank.provenance(0).mask_ratio, replay);
  const ImageTensor d = denoise_padded(model, apply_mask(y, m));
  const ImageTensor r = subtract(y, d);
  CHECK(std::memcmp(r.values().data(), bank.patch(0).values().data(), r.size() * sizeof(float)) == 0);
  for (std::size_t j = 0; j < r.size(); ++j) {
    CHECK(std::abs(r.values()[j] + d.values()[j] - y.values()[j]) <= 4e-7f);
  }
}

TEST_CASE("extraction with several passes draws distinct masks") {
  const IdentityDenoiser identity;
  const std::vector<Scene> scenes = {{"a", test::uniform_image(16, 16, 1, 4)}};
  RngStream rng(11, "extract");
  ExtractOptions opt;
  opt.passes_per_image = 3;
  opt.round_index = 2;
  const NoiseBank bank = extract_pseudo_noise(identity, scenes, MaskRatioSpec::interval(0.5, 0.7), rng, opt);
  CHECK(bank.size() == 3);
  CHECK(bank.round_index() == 2);
  CHECK(bank.provenance(0).id == "a#0");
  CHECK(bank.patch(0) != bank.patch(1));
  CHECK(bank.provenance(1).mask_ratio >= 0.5);
  CHECK(bank.provenance(1).mask_ratio <= 0.7);
}

TEST_CASE("bank save and load are byte-stable") {
  test::TempDir dir("bank");
  RngStream rng(12, "bank");
  const NoiseBank bank = build_awgn_bank(3, 8, 1, 0.1, rng);
  bank.save(dir / "a");
  const NoiseBank back = NoiseBank::load(dir / "a");
  back.save(dir / "b");
  CHECK(back.manifest() == bank.manifest());
  CHECK(back.patches() == bank.patches());
  CHECK(test::slurp(dir / "a" / "manifest.json") == test::slurp(dir / "b" / "manifest.json"));
  CHECK_THROWS_AS((void)NoiseBank::load(dir / "missing"), IoError);
}
