#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "mid/core/error.hpp"
#include "mid/data/corpus.hpp"
#include "mid/data/png_io.hpp"
#include "mid/data/procedural.hpp"
#include "mid/data/toy_benchmark.hpp"
#include "mid/eval/ablation.hpp"
#include "mid/noise/noise.hpp"

using namespace mid;

TEST_CASE("sample quantization rounds half away from zero and clips") {
  CHECK(quantize_sample(0.5f / 255.0f, 8) == 1);
  CHECK(quantize_sample(0.49f / 255.0f, 8) == 0);
  CHECK(quantize_sample(-0.2f, 8) == 0);
  CHECK(quantize_sample(1.7f, 8) == 255);
  CHECK(quantize_sample(1.0f, 16) == 65535);
}

TEST_CASE("PNG round trip at 8 and 16 bits") {
  test::TempDir dir("png");
  for (int channels : {1, 3}) {
    const ImageTensor img = test::uniform_image(9, 7, channels, 3);
    for (int bits : {8, 16}) {
      const auto path = dir / ("img" + std::to_string(channels) + "-" + std::to_string(bits) + ".png");
      write_png(path, img, bits);
      int depth = 0;
      const ImageTensor back = read_png(path, &depth);
      CHECK(depth == bits);
      CHECK(back == quantize(img, bits));
    }
  }
  CHECK_THROWS_AS((void)read_png(dir / "missing.png"), IoError);
  std::ofstream(dir / "junk.png") << "not a png";
  CHECK_THROWS_AS((void)read_png(dir / "junk.png"), IoError);
  CHECK_THROWS_AS(write_png(dir / "x.png", ImageTensor(2, 2, 2), 8), InvalidArgument);
}

TEST_CASE("corpus save and load") {
  test::TempDir dir("corpus");
  RngStream rng(4, "corpus");
  ImageCorpus c = procedural_corpus(3, 16, 3, rng);
  save_corpus(c, dir.path());
  const ImageCorpus back = load_corpus(dir.path(), CorpusRole::Clean);
  CHECK(back.ids() == std::vector<std::string>{"scene-0000", "scene-0001", "scene-0002"});
  CHECK(back.scenes[1].image == quantize(c.scenes[1].image));
  const auto manifest = nlohmann::json::parse(test::slurp(dir / "manifest.json"));
  CHECK(manifest.dump().find(pixel_sha256(back.scenes[0].image)) != std::string::npos);
  CHECK(pixel_sha256(back.scenes[0].image).size() == 64);
}

TEST_CASE("corpus loading reports every unreadable file") {
  test::TempDir dir("badcorpus");
  write_png(dir / "a.png", ImageTensor(4, 4, 1), 8);
  std::ofstream(dir / "b.png") << "junk";
  std::ofstream(dir / "c.png") << "more junk";
  try {
    (void)load_corpus(dir.path(), CorpusRole::Noisy);
    FAIL("expected CorpusLoadError");
  } catch (const CorpusLoadError& e) {
    CHECK(e.errors.size() == 2);
  }
}

TEST_CASE("corpus loading rejects mixed channel counts") {
  test::TempDir dir("mixedcorpus");
  write_png(dir / "a.png", ImageTensor(4, 4, 1), 8);
  write_png(dir / "b.png", ImageTensor(4, 4, 3), 8);
  CHECK_THROWS_AS((void)load_corpus(dir.path(), CorpusRole::Clean), IoError);
}

TEST_CASE("duplicate ids are rejected") {
  ImageCorpus c;
  c.scenes = {{"a", ImageTensor(2, 2, 1)}, {"a", ImageTensor(2, 2, 1)}};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("procedural scenes are deterministic and in range") {
  RngStream a(5, "scene");
  RngStream b(5, "scene");
  const ImageTensor x = procedural_scene(32, 40, 3, a);
  CHECK(x == procedural_scene(32, 40, 3, b));
  for (float v : x.values()) REQUIRE((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("toy benchmark splits are scene-disjoint with calibrated noise") {
  ToyBenchmarkConfig cfg;
  cfg.scene_count = 40;
  cfg.scene_size = 32;
  const ToyBenchmark b = make_toy_benchmark(cfg);
  CHECK(b.clean_train.size() + b.noisy_train.size() + b.paired_test.size() == 40);
  CHECK(b.paired_test.size() == 8);
  std::set<std::string> ids;
  for (const auto& id : b.clean_train.ids()) ids.insert(id);
  for (const auto& id : b.noisy_train.ids()) ids.insert(id);
  for (const auto& p : b.paired_test) ids.insert(p.id);
  CHECK(ids.size() == 40);
  CHECK(b.noisy_train.role == CorpusRole::Noisy);
  CHECK(b.measured_noise_std == doctest::Approx(b.target_noise_std).epsilon(0.03));
  const ToyBenchmark again = make_toy_benchmark(cfg);
  CHECK(again.noisy_train.scenes[0].image == b.noisy_train.scenes[0].image);
}

TEST_CASE("toy benchmark needs enough scenes") {
  RngStream rng(6, "toy");
  const ImageCorpus small = procedural_corpus(10, 16, 1, rng);
  CHECK_THROWS_AS((void)build_toy_benchmark(small, CorrelatedNoiseModel::white(0.1), {}, rng), InvalidArgument);
}
