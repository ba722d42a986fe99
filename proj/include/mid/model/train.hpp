#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mid/core/mask.hpp"
#include "mid/model/denoiser.hpp"
#include "mid/noise/noise_bank.hpp"

namespace mid {

/// Adam with cosine annealing from lr_initial down to lr_floor.
struct OptimizerConfig {
  double lr_initial = 4e-4;
  double lr_floor = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct TrainConfig {
  int iterations = 20000;
  int batch_size = 16;
  int patch_size = 64;
  OptimizerConfig optimizer;
  MaskRatioSpec alpha_spec = MaskRatioSpec::fixed(0.8);
  std::uint64_t seed = 0;
  nn::ArchitectureSpec architecture;
  bool augment_flips = true;
  /// Loss/lr rows are emitted every log_every steps (and at the last step).
  int log_every = 100;
  /// Validation PSNR every validate_every steps; 0 = only at the last step.
  int validate_every = 0;

  /// Values reported for full-scale training: 2e5 iterations, 4e-4 -> 1e-6.
  static TrainConfig full_scale_defaults();

  /// Throws ConfigError listing every violated constraint.
  void validate() const;
  [[nodiscard]] nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Learning rate at `step` (0-based) of `total` steps.
double cosine_lr(const OptimizerConfig& opt, int step, int total);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int step, double lr);
  int step;
  double lr;
};

struct TrainingLog {
  struct Row {
    int step = 0;
    double loss = 0.0;  // mean loss since the previous row
    double lr = 0.0;
    std::optional<double> val_psnr;
  };
  std::vector<Row> rows;
  std::vector<double> step_loss;
  /// Key of the mask stream of the first sample of every step.
  std::vector<std::uint64_t> mask_seeds;
  std::uint64_t init_hash = 0;

  /// "step,loss,lr,val_psnr" with one row per logged step.
  [[nodiscard]] std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Held-out pair: `input` is unmasked; masks are drawn with the training
/// alpha_spec at validation time.
struct ValidationPair {
  ImageTensor input;
  ImageTensor target;
};

struct TrainOptions {
  int round_index = 0;
  const std::vector<ValidationPair>* validation = nullptr;
  std::function<void(int step, double loss, double lr)> progress;
};

struct TrainResult {
  Denoiser model;
  TrainingLog log;
};

/// Masked supervised training from scratch: every sample is a random clean
/// crop x, a noise draw n from the bank, a ratio alpha and a fresh mask M;
/// the loss is the mean over all pixels of (D(M * (x + n)) - x)^2.
TrainResult train_round(const std::vector<ImageTensor>& clean_set, const NoiseBank& bank,
                        const TrainConfig& cfg, const TrainOptions& options = {});

/// Same loop with zero noise at a fixed masking ratio: learns M * x -> x.
TrainResult train_inpainter(const std::vector<ImageTensor>& clean_set, double alpha,
                            const TrainConfig& cfg, const TrainOptions& options = {});

/// Mean squared error over every element of the batch. When `backprop` is
/// set, accumulates parameter gradients (call zero_grad first).
template <typename T>
double mse_loss(nn::Network<T>& net, const nn::Tensor4<T>& input, const nn::Tensor4<T>& target,
                bool backprop);

/// PSNR of masked single-pass predictions on validation pairs; masks come
/// from a stream fixed by `seed`, so repeated calls are comparable.
double validation_psnr(const Denoiser& model, const std::vector<ValidationPair>& pairs,
                       const MaskRatioSpec& alpha_spec, std::uint64_t seed);

}  // namespace mid
