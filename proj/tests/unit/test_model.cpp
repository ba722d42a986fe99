#include "doctest.h"
#include "helpers.hpp"
#include "mid/core/error.hpp"
#include "mid/model/denoiser.hpp"
#include "mid/model/gradcheck.hpp"
#include "mid/model/train.hpp"
#include "mid/noise/noise.hpp"

using namespace mid;

TEST_CASE("backprop matches central differences") {
  SUBCASE("convstack") {
    const GradCheckResult r = gradient_check({"convstack", 2, 4, 3}, 1, 2, 6);
    CHECK(r.checked > 100);
    CHECK(r.max_rel_error < 1e-3);
  }
  SUBCASE("unet") {
    const GradCheckResult r = gradient_check({"unet", 1, 2, 3}, 2, 2, 8);
    CHECK(r.max_rel_error < 1e-3);
  }
  SUBCASE("single linear convolution") {
    const GradCheckResult r = gradient_check({"convstack", 3, 3, 1}, 3, 1, 5);
    CHECK(r.checked == 3 * 3 * 9 + 3);
    CHECK(r.max_rel_error < 1e-3);
  }
}

TEST_CASE("networks keep the spatial shape") {
  RngStream rng(1, "init");
  const Denoiser unet = Denoiser::create({"unet", 3, 4, 3}, rng);
  CHECK(unet.downsample_factor() == 4);
  const ImageTensor out = unet.denoise(test::uniform_image(8, 12, 3, 1));
  CHECK(out.height() == 8);
  CHECK(out.width() == 12);
  CHECK(out.channels() == 3);
  CHECK_THROWS_AS((void)unet.denoise(test::uniform_image(6, 8, 3, 1)), InvalidArgument);
  CHECK(denoise_padded(unet, test::uniform_image(6, 7, 3, 1)).width() == 7);
}

TEST_CASE("checkpoint round trip is exact") {
  test::TempDir dir("ckpt");
  RngStream rng(2, "init");
  Denoiser model = Denoiser::create({"unet", 1, 4, 3}, rng, 1);
  model.set_metadata(2, {{"note", "x"}}, 1234);
  model.save(dir / "a.mid");
  const Denoiser back = Denoiser::load(dir / "a.mid");
  back.save(dir / "b.mid");
  CHECK(test::slurp(dir / "a.mid") == test::slurp(dir / "b.mid"));
  CHECK(back.round_index() == 2);
  CHECK(back.init_hash() == 1234);
  CHECK(back.train_config() == nlohmann::json{{"note", "x"}});
  const ImageTensor probe = test::uniform_image(8, 8, 1, 5);
  CHECK(back.denoise(probe) == model.denoise(probe));
}

TEST_CASE("corrupt checkpoints are rejected") {
  test::TempDir dir("badckpt");
  RngStream rng(3, "init");
  Denoiser::create({"convstack", 1, 2, 1}, rng).save(dir / "a.mid");
  std::string bytes = test::slurp(dir / "a.mid");
  bytes[bytes.size() - 3] ^= 0x55;
  std::ofstream(dir / "b.mid", std::ios::binary) << bytes;
  CHECK_THROWS_AS((void)Denoiser::load(dir / "b.mid"), IoError);
  std::ofstream(dir / "c.mid", std::ios::binary) << bytes.substr(0, 10);
  CHECK_THROWS_AS((void)Denoiser::load(dir / "c.mid"), IoError);
}

TEST_CASE("cosine schedule endpoints") {
  OptimizerConfig opt;
  opt.lr_initial = 1e-3;
  opt.lr_floor = 1e-5;
  CHECK(cosine_lr(opt, 0, 100) == doctest::Approx(1e-3));
  CHECK(cosine_lr(opt, 99, 100) == doctest::Approx(1e-5));
  CHECK(cosine_lr(opt, 50, 101) == doctest::Approx(0.5 * (1e-3 + 1e-5)));
}

TEST_CASE("train config validation lists problems") {
  TrainConfig c;
  c.iterations = 0;
  c.batch_size = -1;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("iterations") != std::string::npos);
    CHECK(msg.find("batch_size") != std::string::npos);
  }
  CHECK(TrainConfig::from_json(TrainConfig{}.to_json()).to_json() == TrainConfig{}.to_json());
}

TEST_CASE("a short training round reduces the loss and is reproducible") {
  std::vector<ImageTensor> clean;
  for (int i = 0; i < 4; ++i) clean.push_back(test::uniform_image(16, 16, 1, 20 + i));
  RngStream br(4, "bank");
  const NoiseBank bank = build_awgn_bank(8, 16, 1, 0.1, br);
  TrainConfig cfg;
  cfg.iterations = 60;
  cfg.batch_size = 4;
  cfg.patch_size = 8;
  cfg.log_every = 10;
  cfg.optimizer.lr_initial = 3e-3;
  cfg.architecture = {"unet", 1, 4, 3};
  cfg.seed = 9;
  const TrainResult a = train_round(clean, bank, cfg);
  const TrainResult b = train_round(clean, bank, cfg);
  const auto& rows = a.log.rows;
  REQUIRE(rows.size() >= 2);
  CHECK(rows.back().loss < rows.front().loss);
  CHECK(a.log.step_loss == b.log.step_loss);
  CHECK(a.log.mask_seeds == b.log.mask_seeds);
  CHECK(a.log.init_hash == a.model.init_hash());
  CHECK(a.log.to_csv().rfind("step,loss,lr,val_psnr\n", 0) == 0);
}

TEST_CASE("validation PSNR is repeatable for a fixed seed") {
  RngStream rng(5, "init");
  const Denoiser model = Denoiser::create({"unet", 1, 2, 3}, rng);
  const std::vector<ValidationPair> pairs = {{test::uniform_image(8, 8, 1, 1), test::uniform_image(8, 8, 1, 2)}};
  CHECK(validation_psnr(model, pairs, MaskRatioSpec::fixed(0.8), 3) ==
        validation_psnr(model, pairs, MaskRatioSpec::fixed(0.8), 3));
}
