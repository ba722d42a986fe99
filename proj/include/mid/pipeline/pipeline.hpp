#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mid/data/corpus.hpp"
#include "mid/data/toy_benchmark.hpp"
#include "mid/model/train.hpp"

namespace mid {

/// Iterative noise-sampler boosting: rounds k = 0..rounds. Round 0 trains on
/// an AWGN bank; round k >= 1 trains on residuals extracted with the round
/// k-1 denoiser. Every round trains from scratch with its own seed.
struct PipelineConfig {
  int rounds = 3;
  /// One masking-ratio spec per round (rounds + 1 entries).
  std::vector<MaskRatioSpec> alpha_schedule = {MaskRatioSpec::fixed(0.8), MaskRatioSpec::fixed(0.7),
                                               MaskRatioSpec::fixed(0.7), MaskRatioSpec::interval(0.5, 0.7)};
  /// Base training settings; alpha and seed are overridden per round.
  TrainConfig train;
  double awgn_sigma = 25.0 / 255.0;
  int awgn_bank_size = 1000;
  int passes_per_image = 1;
  /// 1 = literal single-mask residual; >1 ensembles the pseudo-clean image.
  int extract_ensemble_k = 1;
  /// Extraction ratio; defaults to the alpha of the round whose model extracts.
  std::optional<MaskRatioSpec> extract_alpha;
  /// K used for the ensemble PSNR reported on the validation slice.
  int eval_k = 10;
  std::uint64_t seed = 0;

  /// Four rounds with the 80% -> 70% -> [50%, 70%] schedule and 2e5-step,
  /// 4e-4 -> 1e-6 training.
  static PipelineConfig full_scale_defaults();

  void validate() const;
  [[nodiscard]] TrainConfig round_config(int k) const;
  [[nodiscard]] MaskRatioSpec extraction_alpha(int k) const;
  [[nodiscard]] std::uint64_t round_seed(int k) const;
  [[nodiscard]] nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
};

struct RoundRecord {
  int round = 0;
  std::string bank;        // path of the bank used for training, relative to the run dir
  std::string checkpoint;  // relative path of this round's checkpoint
  std::string log;
  std::string next_bank;   // bank extracted with this round's model ("" for the last round)
  std::uint64_t init_hash = 0;
  std::uint64_t train_seed = 0;
  double final_loss = 0.0;                  // loss at the last training step
  std::optional<double> val_psnr;           // single masked pass
  std::optional<double> val_psnr_ensemble;  // eval_k masked passes

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

/// Append-only history of completed rounds.
struct PipelineState {
  std::uint64_t seed = 0;
  std::string config_hash;
  int total_rounds = 0;
  std::vector<RoundRecord> rounds;
  std::vector<std::string> clean_ids;
  std::vector<std::string> noisy_ids;

  [[nodiscard]] int completed_rounds() const { return static_cast<int>(rounds.size()); }
  [[nodiscard]] bool finished() const { return completed_rounds() == total_rounds + 1; }
  [[nodiscard]] nlohmann::json to_json() const;
  static PipelineState from_json(const nlohmann::json& j);
  /// One row per completed round: round, train_seed, init_hash, final_loss,
  /// val_psnr, val_psnr_ensemble. Doubles are written with 17 significant
  /// digits so identical runs give identical files.
  [[nodiscard]] std::string metrics_csv() const;
  void save(const std::filesystem::path& path) const;
  static PipelineState load(const std::filesystem::path& path);
};

struct PipelineOptions {
  /// Persist checkpoints, banks, logs and state.json here; resume if a state
  /// file already exists. Without a run dir everything stays in memory.
  std::optional<std::filesystem::path> run_dir;
  /// Held-out pairs for reported validation metrics (never used to select).
  const std::vector<PairedScene>* validation = nullptr;
  /// Stop after this round completes (for tests of resumption).
  std::optional<int> stop_after_round;
  std::function<void(int round, const Denoiser& model)> on_round;
  std::function<void(const std::string& message)> log;
  std::function<void(int step, double loss, double lr)> train_progress;
};

struct PipelineResult {
  Denoiser model;
  PipelineState state;
};

/// Rounds are resumed from `options.run_dir` when it holds a state file.
/// Throws InvalidArgument if the clean and noisy sets share a scene id.
PipelineResult run_pipeline(const ImageCorpus& clean_set, const ImageCorpus& noisy_set,
                            const PipelineConfig& cfg, const PipelineOptions& options = {});

/// Scene-disjoint halves of a paired corpus: clean images from one half, noisy
/// images from the other. With an odd count the clean half gets the extra scene.
std::pair<ImageCorpus, ImageCorpus> make_unpaired_split(const std::vector<PairedScene>& pairs, RngStream& rng);

/// Stable 16-hex-digit hash of a JSON document's compact dump.
std::string config_hash(const nlohmann::json& j);

}  // namespace mid
