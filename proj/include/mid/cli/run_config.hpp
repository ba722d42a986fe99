#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mid/eval/ablation.hpp"
#include "mid/inference/ensemble.hpp"

namespace mid {

/// Inference defaults; `alpha` unset means "the checkpoint's training ratio".
struct InferenceConfig {
  int k = 10;
  std::optional<MaskRatioSpec> alpha;
  int tile = 256;
  int overlap = 32;
};

/// Everything a run needs. Serialized as JSON; unknown keys are rejected.
struct RunConfig {
  /// Empty paths select the procedural toy benchmark.
  std::string clean_dir;
  std::string noisy_dir;
  AblationConfig study;
  InferenceConfig inference;

  /// Desk-scale defaults used by the acceptance suite and `mid train` with
  /// no config file.
  static RunConfig defaults();

  [[nodiscard]] nlohmann::json to_json() const;
  /// Overlays `j` on the defaults. Collects every unknown key, type error
  /// and constraint violation into one ConfigError.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);

  [[nodiscard]] std::uint64_t seed() const { return study.pipeline.seed; }
  void set_seed(std::uint64_t seed);
  void set_rounds(int rounds);
  [[nodiscard]] std::string hash() const;
};

/// Documentation for every leaf key (dotted path, description).
const std::vector<std::pair<std::string, std::string>>& config_key_docs();

/// Dotted paths of every non-object value in `j`.
std::vector<std::string> leaf_paths(const nlohmann::json& j);

/// Text block listing every key with its default, for --help.
std::string config_help_text();

/// `${MID_RUN_ROOT:-runs}/<prefix>-<seed>-<hash>`.
std::filesystem::path default_run_dir(const RunConfig& cfg, const std::string& prefix = "run");

/// Exclusive ownership of a run directory through a lock file created with
/// O_EXCL; released on destruction.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace mid
