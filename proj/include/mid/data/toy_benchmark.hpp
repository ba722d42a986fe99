#pragma once

#include <string>
#include <vector>

#include "mid/core/rng.hpp"
#include "mid/data/corpus.hpp"
#include "mid/noise/noise.hpp"

namespace mid {

struct SplitFractions {
  double clean = 0.5;
  double noisy = 0.3;
  double test = 0.2;
};

struct PairedScene {
  std::string id;
  ImageTensor clean;
  ImageTensor noisy;
};

/// Scene-disjoint three-way split of a clean source. The noisy training set
/// has its ground truth discarded; the test set keeps it.
struct ToyBenchmark {
  ImageCorpus clean_train;
  ImageCorpus noisy_train;
  std::vector<PairedScene> paired_test;
  /// RMS of the injected noise on noisy_train, measured before the ground
  /// truth was dropped, and the RMS of the model's per-pixel target std.
  double measured_noise_std = 0.0;
  double target_noise_std = 0.0;
};

ToyBenchmark build_toy_benchmark(const ImageCorpus& clean_source, const CorrelatedNoiseModel& noise_model,
                                 const SplitFractions& fractions, RngStream& rng);

}  // namespace mid
