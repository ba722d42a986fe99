#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mid/cli/run_config.hpp"

namespace mid {

struct CriterionResult {
  int number = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  /// Criterion numbers to run (all when empty).
  std::set<int> only;
  /// Scratch space for runs written to disk (a temp dir when unset).
  std::optional<std::filesystem::path> work_dir;
  std::function<void(const std::string&)> log;
  /// Ablation tables are written here when set.
  std::optional<std::filesystem::path> report_dir;
};

/// Runs acceptance criteria 1-8. The trend criteria (2-6) share one ToyStudy
/// built from `cfg`; criteria 7 and 8 use tiny models of their own.
std::vector<CriterionResult> run_acceptance(const RunConfig& cfg, const AcceptanceOptions& options = {});

/// "[PASS] 3 iterative boosting: ... (12.3 s)"
std::string format_result(const CriterionResult& r);

/// Small config for the determinism and resume checks: every stage of the
/// pipeline runs, but on a few tiny scenes for a few steps.
RunConfig tiny_run_config();

/// `cfg` with training capped at 300 iterations per round: the complete toy
/// pipeline, short enough to run twice.
RunConfig determinism_run_config(const RunConfig& cfg);

}  // namespace mid
