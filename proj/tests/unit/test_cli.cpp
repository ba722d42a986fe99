#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "mid/cli/app.hpp"
#include "mid/cli/run_config.hpp"
#include "mid/core/error.hpp"
#include "mid/data/corpus.hpp"
#include "mid/data/png_io.hpp"
#include "mid/eval/acceptance.hpp"
#include "mid/inference/ensemble.hpp"
#include "mid/model/denoiser.hpp"

using namespace mid;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mid");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(2); }

}  // namespace

TEST_CASE("every config key is documented and every documented key exists") {
  std::vector<std::string> documented;
  for (const auto& [path, doc] : config_key_docs()) {
    documented.push_back(path);
    CHECK_MESSAGE(!doc.empty(), path);
  }
  std::vector<std::string> actual = leaf_paths(RunConfig::defaults().to_json());
  std::sort(documented.begin(), documented.end());
  std::sort(actual.begin(), actual.end());
  CHECK(documented == actual);
  CHECK(config_help_text().find("pipeline.eval_k") != std::string::npos);
}

TEST_CASE("run config rejects unknown keys and bad values together") {
  nlohmann::json j = {{"pipeline", {{"rounds", 3}, {"bogus", 1}}}, {"extra", true}, {"inference", {{"k", 0}}}};
  try {
    (void)RunConfig::from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("pipeline.bogus") != std::string::npos);
    CHECK(msg.find("extra") != std::string::npos);
  }
}

TEST_CASE("run config JSON round trip and hash") {
  const RunConfig c = tiny_run_config();
  const RunConfig back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());
  RunConfig d = c;
  d.set_seed(c.seed() + 1);
  CHECK(d.hash() != c.hash());
  d.set_rounds(5);
  CHECK(d.study.pipeline.alpha_schedule.size() == 6);
  CHECK(d.study.pipeline.alpha_schedule.back() == c.study.pipeline.alpha_schedule.back());
}

TEST_CASE("run lock is exclusive") {
  test::TempDir dir("lock");
  {
    RunLock lock(dir.path());
    CHECK_THROWS_AS(RunLock(dir.path()), IoError);
  }
  CHECK_NOTHROW(RunLock(dir.path()));
}

TEST_CASE("infer with K=1 matches a single masked pass byte for byte") {
  test::TempDir dir("infer");
  RngStream rng(1, "init");
  Denoiser model = Denoiser::create({"unet", 3, 2, 3}, rng);
  model.set_metadata(0, {{"alpha", 0.7}}, model.init_hash());
  model.save(dir / "model.mid");
  std::filesystem::create_directories(dir / "in");
  const ImageTensor noisy = quantize(test::uniform_image(20, 28, 3, 2));
  write_png(dir / "in" / "img.png", noisy);
  CHECK(cli({"infer", "--checkpoint", (dir / "model.mid").string(), "--input", (dir / "in").string(), "--out",
             (dir / "out").string(), "--k", "1", "--seed", "5"}) == 0);

  EnsembleConfig ec;
  ec.k = 1;
  ec.alpha_spec = MaskRatioSpec::fixed(0.7);
  ec.seed = RngStream(5, "infer", 0).key();
  write_png(dir / "expected.png", ensemble_denoise(model, noisy, ec));
  CHECK(test::slurp(dir / "out" / "img.png") == test::slurp(dir / "expected.png"));
}

TEST_CASE("eval of a directory against itself gives the PSNR cap and SSIM 1") {
  test::TempDir dir("eval");
  std::filesystem::create_directories(dir / "a");
  write_png(dir / "a" / "x.png", test::uniform_image(16, 16, 1, 3));
  write_png(dir / "a" / "y.png", test::uniform_image(16, 16, 1, 4));
  CHECK(cli({"eval", "--pred", (dir / "a").string(), "--gt", (dir / "a").string(), "--out",
             (dir / "m.csv").string()}) == 0);
  const std::string csv = test::slurp(dir / "m.csv");
  CHECK(csv.rfind("scene_id,psnr,ssim\n", 0) == 0);
  CHECK(csv.find("mean,100,1\n") != std::string::npos);
}

TEST_CASE("eval reports predictions without ground truth") {
  test::TempDir dir("eval-missing");
  std::filesystem::create_directories(dir / "p");
  std::filesystem::create_directories(dir / "g");
  write_png(dir / "p" / "x.png", ImageTensor(16, 16, 1));
  write_png(dir / "g" / "z.png", ImageTensor(16, 16, 1));
  CHECK(cli({"eval", "--pred", (dir / "p").string(), "--gt", (dir / "g").string()}) == 2);
}

TEST_CASE("exit codes") {
  test::TempDir dir("exit");
  write_json(dir / "bad.json", {{"nonsense", 1}});
  CHECK(cli({"config", "--config", (dir / "bad.json").string()}) == 2);
  CHECK(cli({"infer", "--checkpoint", (dir / "none.mid").string(), "--input", dir.path().string(), "--out",
             (dir / "o").string()}) == 4);
  CHECK(cli({"frobnicate"}) == 1);
  CHECK(cli({"klgap", "--trials", "500", "--seed", "3"}) == 0);
}

TEST_CASE("train then infer from the command line") {
  test::TempDir dir("train");
  write_json(dir / "tiny.json", tiny_run_config().to_json());
  CHECK(cli({"train", "--config", (dir / "tiny.json").string(), "--out", (dir / "run").string()}) == 0);
  CHECK(std::filesystem::exists(dir / "run" / "round-3" / "checkpoint.mid"));
  CHECK(std::filesystem::exists(dir / "run" / "config.json"));
  CHECK_FALSE(std::filesystem::exists(dir / "run" / ".lock"));
  // already finished: resuming is a no-op
  CHECK(cli({"train", "--resume", (dir / "run").string()}) == 0);
  CHECK(cli({"train", "--resume", (dir / "run").string(), "--seed", "4"}) == 2);
}
