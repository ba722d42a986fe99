#include "mid/eval/kl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mid/core/error.hpp"

namespace mid {

namespace {

std::size_t config_count(int positions, int levels) {
  std::size_t n = 1;
  for (int i = 0; i < positions; ++i) n *= static_cast<std::size_t>(levels);
  return n;
}

}  // namespace

PatchDistribution::PatchDistribution(int positions, int levels, std::vector<double> probs)
    : positions_(positions), levels_(levels), probs_(std::move(probs)) {
  if (positions < 0 || positions > 16) throw InvalidArgument("PatchDistribution: positions must be in [0, 16]");
  if (levels < 2) throw InvalidArgument("PatchDistribution: levels must be >= 2");
  if (probs_.size() != config_count(positions, levels)) {
    throw InvalidArgument("PatchDistribution: table has " + std::to_string(probs_.size()) + " entries, expected " +
                          std::to_string(config_count(positions, levels)));
  }
  double total = 0.0;
  for (double v : probs_) {
    if (!(v >= 0.0)) throw InvalidArgument("PatchDistribution: negative or NaN probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidArgument("PatchDistribution: probabilities sum to " + std::to_string(total));
  }
}

PatchDistribution PatchDistribution::from_weights(int positions, int levels, const std::vector<double>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw InvalidArgument("PatchDistribution::from_weights: weights sum to zero");
  std::vector<double> probs(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) probs[i] = weights[i] / total;
  // absorb the rounding residue in the largest entry
  const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  auto largest = std::max_element(probs.begin(), probs.end());
  *largest += 1.0 - sum;
  return PatchDistribution(positions, levels, std::move(probs));
}

int PatchDistribution::digit(std::size_t index, int position) const {
  for (int i = 0; i < position; ++i) index /= static_cast<std::size_t>(levels_);
  return static_cast<int>(index % static_cast<std::size_t>(levels_));
}

int VisibleHiddenSplit::visible_count() const {
  return static_cast<int>(std::count(visible.begin(), visible.end(), true));
}

VisibleHiddenSplit VisibleHiddenSplit::from_bits(int positions, std::uint64_t bits) {
  VisibleHiddenSplit s;
  s.visible.resize(static_cast<std::size_t>(positions));
  for (int i = 0; i < positions; ++i) s.visible[static_cast<std::size_t>(i)] = ((bits >> i) & 1U) != 0;
  return s;
}

KlResult kl_exact(const PatchDistribution& p, const PatchDistribution& q) {
  if (p.positions() != q.positions() || p.levels() != q.levels()) {
    throw InvalidArgument("kl_exact: distributions over different patch shapes");
  }
  KlResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      r.support_violated = true;
      r.value = std::numeric_limits<double>::infinity();
      return r;
    }
    sum += p[i] * std::log(p[i] / q[i]);
  }
  r.value = sum;
  return r;
}

PatchDistribution marginalize(const PatchDistribution& p, const VisibleHiddenSplit& split) {
  if (static_cast<int>(split.visible.size()) != p.positions()) {
    throw InvalidArgument("marginalize: split covers " + std::to_string(split.visible.size()) +
                          " positions, distribution has " + std::to_string(p.positions()));
  }
  const int nv = split.visible_count();
  std::vector<double> out(config_count(nv, p.levels()), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::size_t j = 0;
    std::size_t stride = 1;
    for (int pos = 0; pos < p.positions(); ++pos) {
      if (!split.visible[static_cast<std::size_t>(pos)]) continue;
      j += static_cast<std::size_t>(p.digit(i, pos)) * stride;
      stride *= static_cast<std::size_t>(p.levels());
    }
    out[j] += p[i];
  }
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& v : out) v /= total;
  return PatchDistribution(nv, p.levels(), std::move(out));
}

KlGapReport verify_kl_gap(std::int64_t trials, int patch_h, int patch_w, int levels, RngStream& rng,
                          double tolerance) {
  const int positions = patch_h * patch_w;
  if (patch_h < 1 || patch_w < 1) throw InvalidArgument("verify_kl_gap: empty patch shape");
  if (levels < 2) throw InvalidArgument("verify_kl_gap: levels must be >= 2");
  if (config_count(positions, levels) > (std::size_t{1} << 16) || positions > 16) {
    throw InvalidArgument("verify_kl_gap: patch too large for full enumeration");
  }
  const std::size_t n = config_count(positions, levels);
  KlGapReport report;
  report.trials = trials;
  report.tolerance = tolerance;
  report.min_slack = std::numeric_limits<double>::infinity();
  std::vector<double> wp(n);
  std::vector<double> wq(n);
  for (std::int64_t t = 0; t < trials; ++t) {
    RngStream trial = rng.derive("trial", static_cast<std::uint64_t>(t));
    // q has full support; p may drop configurations
    for (std::size_t i = 0; i < n; ++i) {
      wq[i] = -std::log(1.0 - trial.uniform()) + 1e-12;
      wp[i] = trial.bernoulli(0.2) ? 0.0 : -std::log(1.0 - trial.uniform());
    }
    if (std::all_of(wp.begin(), wp.end(), [](double v) { return v == 0.0; })) wp[trial.below(n)] = 1.0;
    const PatchDistribution p = PatchDistribution::from_weights(positions, levels, wp);
    const PatchDistribution q = PatchDistribution::from_weights(positions, levels, wq);
    const VisibleHiddenSplit split =
        VisibleHiddenSplit::from_bits(positions, trial.below(std::uint64_t{1} << positions));
    const double joint = kl_exact(p, q).value;
    const double marginal = kl_exact(marginalize(p, split), marginalize(q, split)).value;
    const double slack = joint - marginal;
    if (slack < -tolerance) ++report.violations;
    report.min_slack = std::min(report.min_slack, slack);
    report.max_joint_kl = std::max(report.max_joint_kl, joint);
  }
  if (trials == 0) report.min_slack = 0.0;
  return report;
}

}  // namespace mid
