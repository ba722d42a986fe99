#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "mid/cli/run_config.hpp"
#include "mid/core/error.hpp"
#include "mid/eval/acceptance.hpp"
#include "mid/noise/noise.hpp"
#include "mid/pipeline/pipeline.hpp"

using namespace mid;

namespace {

struct TinyRun {
  RunConfig cfg = tiny_run_config();
  ToyBenchmark bench = make_toy_benchmark(cfg.study.benchmark);
};

std::map<std::string, std::string> files_under(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = test::slurp(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("pipeline config validation collects every problem") {
  PipelineConfig c;
  c.rounds = 2;
  c.eval_k = 0;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("alpha_schedule") != std::string::npos);
    CHECK(msg.find("eval_k") != std::string::npos);
  }
  CHECK(PipelineConfig::from_json(PipelineConfig{}.to_json()).to_json() == PipelineConfig{}.to_json());
}

TEST_CASE("round seeds are distinct and stable") {
  PipelineConfig c;
  c.seed = 3;
  std::set<std::uint64_t> seeds;
  for (int k = 0; k <= 3; ++k) seeds.insert(c.round_seed(k));
  CHECK(seeds.size() == 4);
  CHECK(c.round_seed(2) == PipelineConfig{c}.round_seed(2));
  CHECK(c.round_config(3).alpha_spec == MaskRatioSpec::interval(0.5, 0.7));
  CHECK(c.extraction_alpha(0) == MaskRatioSpec::fixed(0.8));
  CHECK(c.extraction_alpha(1) == MaskRatioSpec::fixed(0.7));
}

TEST_CASE("unpaired split is disjoint and gives the odd scene to the clean half") {
  std::vector<PairedScene> pairs;
  for (int i = 0; i < 7; ++i) pairs.push_back({"s" + std::to_string(i), ImageTensor(4, 4, 1), ImageTensor(4, 4, 1)});
  RngStream rng(2, "split");
  const auto [clean, noisy] = make_unpaired_split(pairs, rng);
  CHECK(clean.size() == 4);
  CHECK(noisy.size() == 3);
  std::set<std::string> ids;
  for (const auto& id : clean.ids()) ids.insert(id);
  for (const auto& id : noisy.ids()) ids.insert(id);
  CHECK(ids.size() == 7);
}

TEST_CASE("pipeline rejects overlapping clean and noisy sets") {
  TinyRun t;
  ImageCorpus noisy = t.bench.noisy_train;
  noisy.scenes[0].id = t.bench.clean_train.scenes[0].id;
  CHECK_THROWS_AS(run_pipeline(t.bench.clean_train, noisy, t.cfg.study.pipeline), InvalidArgument);
}

TEST_CASE("pipeline writes every artifact and records lineage") {
  TinyRun t;
  test::TempDir dir("pipeline");
  PipelineOptions o;
  o.run_dir = dir.path();
  o.validation = &t.bench.paired_test;
  std::vector<int> seen;
  o.on_round = [&](int k, const Denoiser& m) {
    seen.push_back(k);
    CHECK(m.round_index() == k);
  };
  const PipelineResult r = run_pipeline(t.bench.clean_train, t.bench.noisy_train, t.cfg.study.pipeline, o);
  CHECK(seen == std::vector<int>{0, 1, 2, 3});
  CHECK(r.state.finished());
  for (const char* f : {"state.json", "metrics.csv", "banks/bank-0/manifest.json", "banks/bank-3/manifest.json",
                        "round-3/checkpoint.mid", "round-0/train_log.csv"}) {
    CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
  }
  CHECK_FALSE(std::filesystem::exists(dir / "banks/bank-4"));
  const NoiseBank b2 = NoiseBank::load(dir / "banks/bank-2");
  CHECK(b2.round_index() == 2);
  CHECK(b2.config().at("source_round") == 1);
  CHECK(b2.config().at("source_init_hash") == r.state.rounds[1].init_hash);
  CHECK(b2.size() == t.bench.noisy_train.size());
  CHECK(r.state.rounds[0].val_psnr.has_value());
  CHECK(r.state.metrics_csv().rfind("round,train_seed,init_hash,final_loss,val_psnr,val_psnr_ensemble\n", 0) == 0);
}

TEST_CASE("resuming after a stop reproduces the uninterrupted run") {
  TinyRun t;
  test::TempDir a("resume-a");
  test::TempDir b("resume-b");
  PipelineOptions oa;
  oa.run_dir = a.path();
  run_pipeline(t.bench.clean_train, t.bench.noisy_train, t.cfg.study.pipeline, oa);
  PipelineOptions ob;
  ob.run_dir = b.path();
  ob.stop_after_round = 0;
  const PipelineResult partial = run_pipeline(t.bench.clean_train, t.bench.noisy_train, t.cfg.study.pipeline, ob);
  CHECK(partial.state.completed_rounds() == 1);
  ob.stop_after_round.reset();
  run_pipeline(t.bench.clean_train, t.bench.noisy_train, t.cfg.study.pipeline, ob);
  CHECK(files_under(a.path()) == files_under(b.path()));
}

TEST_CASE("resume refuses a different config") {
  TinyRun t;
  test::TempDir dir("resume-mismatch");
  PipelineOptions o;
  o.run_dir = dir.path();
  o.stop_after_round = 0;
  run_pipeline(t.bench.clean_train, t.bench.noisy_train, t.cfg.study.pipeline, o);
  PipelineConfig other = t.cfg.study.pipeline;
  other.train.iterations += 1;
  CHECK_THROWS_AS(run_pipeline(t.bench.clean_train, t.bench.noisy_train, other, o), ConfigError);
}

namespace {

/// Fills masked pixels with the mean of the visible pixels in a 5x5 window.
class NeighborMeanInpainter final : public ImageDenoiser {
 public:
  [[nodiscard]] ImageTensor denoise(const ImageTensor& m) const override {
    ImageTensor out = m;
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        if (m.at(y, x, 0) != 0.0f) continue;
        double s = 0.0;
        int n = 0;
        for (int dy = -2; dy <= 2; ++dy) {
          for (int dx = -2; dx <= 2; ++dx) {
            const int yy = reflect_index(y + dy, m.height());
            const int xx = reflect_index(x + dx, m.width());
            if (m.at(yy, xx, 0) != 0.0f) {
              s += m.at(yy, xx, 0);
              ++n;
            }
          }
        }
        out.at(y, x, 0) = n > 0 ? static_cast<float>(s / n) : 0.0f;
      }
    }
    return out;
  }
};

}  // namespace

TEST_CASE("pseudo-noise residuals of a mean-preserving inpainter are roughly zero-mean") {
  ToyBenchmarkConfig cfg;
  cfg.scene_count = 30;
  cfg.scene_size = 48;
  const ToyBenchmark bench = make_toy_benchmark(cfg);
  RngStream rng(3, "extract");
  const NoiseBank bank =
      extract_pseudo_noise(NeighborMeanInpainter{}, bench.noisy_train.scenes, MaskRatioSpec::fixed(0.5), rng);
  double sum = 0.0;
  double sq = 0.0;
  std::size_t n = 0;
  for (const auto& p : bank.patches()) {
    for (float v : p.values()) {
      sum += v;
      sq += static_cast<double>(v) * v;
    }
    n += p.size();
  }
  CHECK(std::abs(sum / n) < bench.measured_noise_std / 4.0);
  CHECK(std::sqrt(sq / n) > bench.measured_noise_std / 4.0);
}
