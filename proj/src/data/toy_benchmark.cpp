#include "mid/data/toy_benchmark.hpp"

#include <cmath>
#include <numeric>

#include "mid/core/error.hpp"

namespace mid {

ToyBenchmark build_toy_benchmark(const ImageCorpus& clean_source, const CorrelatedNoiseModel& noise_model,
                                 const SplitFractions& f, RngStream& rng) {
  noise_model.validate();
  clean_source.validate();
  if (clean_source.size() < 30) throw InvalidArgument("build_toy_benchmark: need at least 30 scenes");
  if (f.clean < 0 || f.noisy < 0 || f.test < 0 || std::abs(f.clean + f.noisy + f.test - 1.0) > 1e-9) {
    throw InvalidArgument("build_toy_benchmark: split fractions must be non-negative and sum to 1");
  }
  const std::size_t n = clean_source.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream shuffle_rng = rng.derive("split");
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng.below(i + 1)]);

  const auto n_clean = static_cast<std::size_t>(std::llround(f.clean * static_cast<double>(n)));
  const auto n_noisy = std::min(n - n_clean, static_cast<std::size_t>(std::llround(f.noisy * static_cast<double>(n))));

  ToyBenchmark out;
  out.clean_train.role = CorpusRole::Clean;
  out.noisy_train.role = CorpusRole::Noisy;
  double noise_sq = 0.0;
  double target_sq = 0.0;
  std::size_t noise_count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const Scene& scene = clean_source.scenes[order[k]];
    if (k < n_clean) {
      out.clean_train.scenes.push_back(scene);
      continue;
    }
    RngStream noise_rng = rng.derive("noise", k);
    const ImageTensor noise = sample_correlated_noise(noise_model, scene.image, noise_rng);
    ImageTensor noisy = add(scene.image, noise);
    if (k < n_clean + n_noisy) {
      for (std::size_t i = 0; i < noise.size(); ++i) {
        const double v = noise.data()[i];
        const double t = noise_model.target_std(scene.image.data()[i]);
        noise_sq += v * v;
        target_sq += t * t;
      }
      noise_count += noise.size();
      out.noisy_train.scenes.push_back({scene.id, std::move(noisy)});
    } else {
      out.paired_test.push_back({scene.id, scene.image, std::move(noisy)});
    }
  }
  if (noise_count > 0) {
    out.measured_noise_std = std::sqrt(noise_sq / static_cast<double>(noise_count));
    out.target_noise_std = std::sqrt(target_sq / static_cast<double>(noise_count));
  }
  const nlohmann::json prov = {{"source", clean_source.provenance},
                               {"fractions", {f.clean, f.noisy, f.test}},
                               {"noise_base_sigma", noise_model.base_sigma},
                               {"noise_kernel_size", noise_model.kernel_size},
                               {"noise_signal_gain", noise_model.signal_gain}};
  out.clean_train.provenance = prov;
  out.noisy_train.provenance = prov;
  return out;
}

}  // namespace mid
