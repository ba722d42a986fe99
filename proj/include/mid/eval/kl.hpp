#pragma once

#include <cstdint>
#include <vector>

#include "mid/core/rng.hpp"

namespace mid {

/// Explicit probability table over every configuration of a tiny patch with
/// `positions` sites and `levels` values per site. Configuration index is
/// base-`levels` with position i as digit i.
class PatchDistribution {
 public:
  PatchDistribution(int positions, int levels, std::vector<double> probs);

  /// Normalizes non-negative weights to a distribution.
  static PatchDistribution from_weights(int positions, int levels, const std::vector<double>& weights);

  [[nodiscard]] int positions() const { return positions_; }
  [[nodiscard]] int levels() const { return levels_; }
  [[nodiscard]] std::size_t size() const { return probs_.size(); }
  [[nodiscard]] const std::vector<double>& probs() const { return probs_; }
  [[nodiscard]] double operator[](std::size_t i) const { return probs_[i]; }
  /// Value of `position` in configuration `index`.
  [[nodiscard]] int digit(std::size_t index, int position) const;

 private:
  int positions_;
  int levels_;
  std::vector<double> probs_;
};

/// visible[i] is true when position i is observed (a); the rest are hidden (b).
struct VisibleHiddenSplit {
  std::vector<bool> visible;

  [[nodiscard]] int visible_count() const;
  [[nodiscard]] static VisibleHiddenSplit from_bits(int positions, std::uint64_t bits);
};

struct KlResult {
  double value = 0.0;            // nats; +infinity when support is violated
  bool support_violated = false;
};

/// Sum of p log(p / q) over all configurations (0 log 0 = 0).
KlResult kl_exact(const PatchDistribution& p, const PatchDistribution& q);

/// Distribution over the visible positions, in increasing position order.
/// With no visible position the result is the one-point distribution.
PatchDistribution marginalize(const PatchDistribution& p, const VisibleHiddenSplit& split);

struct KlGapReport {
  std::int64_t trials = 0;
  std::int64_t violations = 0;
  double tolerance = 1e-9;
  double min_slack = 0.0;        // min over trials of KL(joint) - KL(marginal)
  double max_joint_kl = 0.0;
};

/// Random (p, q, split) triples with q > 0 wherever p > 0; counts trials with
/// KL(joint) < KL(visible marginal) - tolerance.
KlGapReport verify_kl_gap(std::int64_t trials, int patch_h, int patch_w, int levels, RngStream& rng,
                          double tolerance = 1e-9);

}  // namespace mid
