#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mid/data/toy_benchmark.hpp"
#include "mid/model/denoiser.hpp"
#include "mid/pipeline/pipeline.hpp"

namespace mid {

/// Procedural clean source plus the correlated noise that plays the part of
/// real camera noise.
struct ToyBenchmarkConfig {
  int scene_count = 200;
  int scene_size = 64;
  int channels = 1;
  CorrelatedNoiseModel noise = CorrelatedNoiseModel::box(3, 50.0 / 255.0);
  SplitFractions split;
  std::uint64_t seed = 1;

  void validate() const;
  [[nodiscard]] nlohmann::json to_json() const;
  static ToyBenchmarkConfig from_json(const nlohmann::json& j);
};

ToyBenchmark make_toy_benchmark(const ToyBenchmarkConfig& cfg);

struct AblationConfig {
  ToyBenchmarkConfig benchmark;
  /// Rounds, schedule, AWGN bank and per-round training.
  PipelineConfig pipeline;
  std::vector<double> masking_ratios = {0.0, 0.4, 0.6, 0.8, 0.9};
  std::vector<int> ensemble_sizes = {1, 5, 10, 20};
  std::vector<double> inpainter_ratios = {0.2, 0.4, 0.6, 0.8, 0.9};
  /// Training iterations for the noise-free inpainters.
  int inpainter_iterations = 1500;
  /// Seed of the held-out evaluation masks (shared by every model).
  std::uint64_t eval_seed = 99;

  void validate() const;
  [[nodiscard]] nlohmann::json to_json() const;
  static AblationConfig from_json(const nlohmann::json& j);
};

struct AblationRow {
  std::string suite;
  std::string cell;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
  double runtime_s = 0.0;
  std::optional<double> reference_value;
  std::string error;  // non-empty when the cell failed
};

struct AblationTable {
  std::string suite;
  std::vector<AblationRow> rows;

  /// suite,cell,metric,value,seed,runtime_s
  [[nodiscard]] std::string to_csv(bool include_runtime = true) const;
  /// Human-readable table with a published-reference column when known.
  [[nodiscard]] std::string to_text() const;
  /// Line chart of `metric` against the cell order.
  [[nodiscard]] std::string to_svg(const std::string& metric = "psnr") const;
  [[nodiscard]] std::optional<double> value(const std::string& cell, const std::string& metric) const;
};

/// Held-out scores of one model on the paired test split.
struct HeldOutScore {
  double psnr = 0.0;
  double ssim = 0.0;
};

/// Memoized models on one toy benchmark; suites that need the same model
/// (e.g. the masking-ratio sweep and round 0 of the pipeline) train it once.
class ToyStudy {
 public:
  explicit ToyStudy(AblationConfig cfg, std::function<void(const std::string&)> log = {});

  [[nodiscard]] const AblationConfig& config() const { return cfg_; }
  const ToyBenchmark& benchmark();

  /// Single AWGN round at a fixed masking ratio (same bank and seed as the
  /// pipeline's round 0).
  const Denoiser& awgn_model(double alpha);
  /// Models of rounds 0..pipeline.rounds.
  const std::vector<Denoiser>& pipeline_models();
  /// Noise-free inpainter trained at `alpha`.
  const Denoiser& inpainter(double alpha);

  /// Mean PSNR/SSIM of ensemble_denoise over the paired test split; member
  /// masks are common to every model and nested across k.
  HeldOutScore heldout(const Denoiser& model, const MaskRatioSpec& alpha, int k);
  /// Inpainting PSNR of a noise-free model on masked clean test images and
  /// of the masked input itself.
  std::pair<double, double> inpainting_psnr(const Denoiser& model, double alpha);

  /// Wall time spent building models for a cache key (0 if not built).
  [[nodiscard]] double build_seconds(const std::string& key) const;

 private:
  void say(const std::string& msg) const;

  AblationConfig cfg_;
  std::function<void(const std::string&)> log_;
  std::optional<ToyBenchmark> bench_;
  std::optional<NoiseBank> awgn_bank_;
  std::map<std::string, std::unique_ptr<Denoiser>> models_;
  std::optional<std::vector<Denoiser>> rounds_;
  std::map<std::string, double> build_seconds_;
};

/// Suite ids accepted by run_ablation.
const std::vector<std::string>& ablation_suites();

/// Runs one suite. Cell failures become rows with a non-empty error; the
/// sweep continues.
AblationTable run_ablation(const std::string& suite, ToyStudy& study);

}  // namespace mid
