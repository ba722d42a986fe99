#include "mid/model/train.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mid/core/error.hpp"
#include "mid/core/json_io.hpp"
#include "mid/eval/metrics.hpp"
#include "mid/noise/noise.hpp"

namespace mid {

TrainConfig TrainConfig::full_scale_defaults() {
  TrainConfig cfg;
  cfg.iterations = 200000;
  cfg.optimizer.lr_initial = 4e-4;
  cfg.optimizer.lr_floor = 1e-6;
  return cfg;
}

void TrainConfig::validate() const {
  std::vector<std::string> errors;
  if (iterations < 1) errors.emplace_back("iterations must be >= 1");
  if (batch_size < 1) errors.emplace_back("batch_size must be >= 1");
  if (patch_size < 1) errors.emplace_back("patch_size must be >= 1");
  if (!(optimizer.lr_initial > 0.0)) errors.emplace_back("optimizer.lr_initial must be > 0");
  if (!(optimizer.lr_floor >= 0.0) || optimizer.lr_floor > optimizer.lr_initial) {
    errors.emplace_back("optimizer.lr_floor must lie in [0, lr_initial]");
  }
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) errors.emplace_back("optimizer.beta1 must lie in [0, 1)");
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) errors.emplace_back("optimizer.beta2 must lie in [0, 1)");
  if (!(optimizer.epsilon > 0.0)) errors.emplace_back("optimizer.epsilon must be > 0");
  if (log_every < 1) errors.emplace_back("log_every must be >= 1");
  if (validate_every < 0) errors.emplace_back("validate_every must be >= 0");
  if (architecture.id == "unet" && patch_size % 4 != 0) {
    errors.emplace_back("patch_size must be a multiple of 4 for the unet architecture");
  }
  if (!errors.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"iterations", iterations},
          {"batch_size", batch_size},
          {"patch_size", patch_size},
          {"optimizer",
           {{"lr_initial", optimizer.lr_initial},
            {"lr_floor", optimizer.lr_floor},
            {"beta1", optimizer.beta1},
            {"beta2", optimizer.beta2},
            {"epsilon", optimizer.epsilon}}},
          {"alpha", mask_ratio_to_json(alpha_spec)},
          {"seed", seed},
          {"architecture", architecture.to_json()},
          {"augment_flips", augment_flips},
          {"log_every", log_every},
          {"validate_every", validate_every}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.iterations = j.at("iterations").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  const auto& o = j.at("optimizer");
  c.optimizer.lr_initial = o.at("lr_initial").get<double>();
  c.optimizer.lr_floor = o.at("lr_floor").get<double>();
  c.optimizer.beta1 = o.at("beta1").get<double>();
  c.optimizer.beta2 = o.at("beta2").get<double>();
  c.optimizer.epsilon = o.at("epsilon").get<double>();
  c.alpha_spec = mask_ratio_from_json(j.at("alpha"));
  c.seed = j.at("seed").get<std::uint64_t>();
  c.architecture = nn::ArchitectureSpec::from_json(j.at("architecture"));
  c.augment_flips = j.at("augment_flips").get<bool>();
  c.log_every = j.at("log_every").get<int>();
  c.validate_every = j.at("validate_every").get<int>();
  return c;
}

double cosine_lr(const OptimizerConfig& opt, int step, int total) {
  if (total <= 1) return opt.lr_initial;
  const double t = static_cast<double>(step) / static_cast<double>(total - 1);
  return opt.lr_floor + 0.5 * (opt.lr_initial - opt.lr_floor) * (1.0 + std::cos(std::numbers::pi * t));
}

TrainingDiverged::TrainingDiverged(int step_, double lr_)
    : std::runtime_error("training diverged: non-finite loss at step " + std::to_string(step_) +
                         " (learning rate " + std::to_string(lr_) + ")"),
      step(step_), lr(lr_) {}

std::string TrainingLog::to_csv() const {
  std::ostringstream os;
  os.precision(9);
  os << "step,loss,lr,val_psnr\n";
  for (const auto& r : rows) {
    os << r.step << ',' << r.loss << ',' << r.lr << ',';
    if (r.val_psnr) os << *r.val_psnr;
    os << '\n';
  }
  return os.str();
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_csv();
}

template <typename T>
double mse_loss(nn::Network<T>& net, const nn::Tensor4<T>& input, const nn::Tensor4<T>& target,
                bool backprop) {
  nn::Tensor4<T> out = backprop ? net.forward_train(input) : net.forward(input);
  if (!out.same_shape(target)) throw InternalError("mse_loss: output and target shapes differ");
  const double count = static_cast<double>(out.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = static_cast<double>(out.data[i]) - static_cast<double>(target.data[i]);
    acc += d * d;
  }
  if (backprop) {
    nn::Tensor4<T> grad(out.n, out.c, out.h, out.w);
    const double s = 2.0 / count;
    for (std::size_t i = 0; i < out.size(); ++i) {
      grad.data[i] = static_cast<T>(s * (static_cast<double>(out.data[i]) - static_cast<double>(target.data[i])));
    }
    net.backward(grad);
  }
  return acc / count;
}

template double mse_loss<float>(nn::Network<float>&, const nn::Tensor4<float>&, const nn::Tensor4<float>&, bool);
template double mse_loss<double>(nn::Network<double>&, const nn::Tensor4<double>&, const nn::Tensor4<double>&, bool);

double validation_psnr(const Denoiser& model, const std::vector<ValidationPair>& pairs,
                       const MaskRatioSpec& alpha_spec, std::uint64_t seed) {
  if (pairs.empty()) throw InvalidArgument("validation_psnr: no validation pairs");
  const RngStream root(seed, "validation");
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    RngStream ratio_rng = root.derive("ratio", i);
    RngStream mask_rng = root.derive("mask", i);
    const auto& in = pairs[i].input;
    const double alpha = sample_mask_ratio(alpha_spec, ratio_rng);
    const BinaryMask mask = sample_mask(in.height(), in.width(), alpha, mask_rng);
    const ImageTensor pred = clip01(denoise_padded(model, apply_mask(in, mask)));
    total += psnr(pred, pairs[i].target);
  }
  return total / static_cast<double>(pairs.size());
}

namespace {

class Adam {
 public:
  Adam(nn::Network<float>& net, const OptimizerConfig& cfg) : net_(net), cfg_(cfg) {
    for (const auto& p : net.parameters()) {
      m_.emplace_back(p.value.size(), 0.0f);
      v_.emplace_back(p.value.size(), 0.0f);
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    const float b1 = static_cast<float>(cfg_.beta1);
    const float b2 = static_cast<float>(cfg_.beta2);
    const float step_size = static_cast<float>(lr / bc1);
    const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
    const float eps = static_cast<float>(cfg_.epsilon);
    auto params = net_.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto value = params[k].value;
      auto grad = params[k].grad;
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < value.size(); ++i) {
        const float g = grad[i];
        m[i] = b1 * m[i] + (1.0f - b1) * g;
        v[i] = b2 * v[i] + (1.0f - b2) * g * g;
        value[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
      }
    }
  }

 private:
  nn::Network<float>& net_;
  OptimizerConfig cfg_;
  std::vector<std::vector<float>> m_, v_;
  int t_ = 0;
};

struct Sample {
  ImageTensor input;
  ImageTensor target;
  std::uint64_t mask_seed = 0;
};

Sample make_sample(const std::vector<const ImageTensor*>& eligible, const NoiseBank* bank,
                   const TrainConfig& cfg, const RngStream& sample_rng) {
  RngStream crop_rng = sample_rng.derive("crop");
  const ImageTensor& src = *eligible[crop_rng.below(eligible.size())];
  const int p = cfg.patch_size;
  const int y0 = static_cast<int>(crop_rng.below(static_cast<std::uint64_t>(src.height() - p + 1)));
  const int x0 = static_cast<int>(crop_rng.below(static_cast<std::uint64_t>(src.width() - p + 1)));
  ImageTensor clean = crop(src, y0, x0, p, p);
  if (cfg.augment_flips) {
    if (crop_rng.bernoulli(0.5)) clean = flip_horizontal(clean);
    if (crop_rng.bernoulli(0.5)) clean = flip_vertical(clean);
  }
  ImageTensor noisy = clean;
  if (bank) {
    RngStream noise_rng = sample_rng.derive("noise");
    noisy = add(clean, draw_noise(*bank, p, p, noise_rng, NoiseAugment{cfg.augment_flips}));
  }
  RngStream ratio_rng = sample_rng.derive("ratio");
  RngStream mask_rng = sample_rng.derive("mask");
  const double alpha = sample_mask_ratio(cfg.alpha_spec, ratio_rng);
  const BinaryMask mask = sample_mask(p, p, alpha, mask_rng);
  return {apply_mask(noisy, mask), std::move(clean), mask_rng.key()};
}

TrainResult train_impl(const std::vector<ImageTensor>& clean_set, const NoiseBank* bank,
                       const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (clean_set.empty()) throw InvalidArgument("train: clean set is empty");
  std::vector<const ImageTensor*> eligible;
  for (const auto& img : clean_set) {
    if (img.channels() != cfg.architecture.channels) {
      throw InvalidArgument("train: clean image channel count does not match the architecture");
    }
    if (img.height() >= cfg.patch_size && img.width() >= cfg.patch_size) eligible.push_back(&img);
  }
  if (eligible.empty()) throw InvalidArgument("train: patch_size larger than every clean image");
  if (bank && bank->channels() != cfg.architecture.channels) {
    throw InvalidArgument("train: noise bank channel count does not match the architecture");
  }

  const RngStream root(cfg.seed, "train");
  RngStream init_rng = root.derive("init");
  Denoiser model = Denoiser::create(cfg.architecture, init_rng, options.round_index);
  nn::Network<float>& net = model.network();
  Adam adam(net, cfg.optimizer);

  TrainingLog log;
  log.init_hash = model.init_hash();
  log.step_loss.reserve(cfg.iterations);
  log.mask_seeds.reserve(cfg.iterations);

  double window_loss = 0.0;
  int window_count = 0;
  std::vector<ImageTensor> inputs(cfg.batch_size), targets(cfg.batch_size);
  for (int step = 0; step < cfg.iterations; ++step) {
    const RngStream step_rng = root.derive("step", static_cast<std::uint64_t>(step));
    for (int b = 0; b < cfg.batch_size; ++b) {
      Sample s = make_sample(eligible, bank, cfg, step_rng.derive("sample", static_cast<std::uint64_t>(b)));
      if (b == 0) log.mask_seeds.push_back(s.mask_seed);
      inputs[b] = std::move(s.input);
      targets[b] = std::move(s.target);
    }
    const double lr = cosine_lr(cfg.optimizer, step, cfg.iterations);
    net.zero_grad();
    const double loss = mse_loss<float>(net, nn::to_batch<float>(inputs), nn::to_batch<float>(targets), true);
    if (!std::isfinite(loss)) throw TrainingDiverged(step, lr);
    adam.step(lr);

    log.step_loss.push_back(loss);
    window_loss += loss;
    ++window_count;
    const bool last = step + 1 == cfg.iterations;
    if ((step + 1) % cfg.log_every == 0 || last) {
      TrainingLog::Row row{step + 1, window_loss / window_count, lr, std::nullopt};
      const bool validate_now =
          options.validation && !options.validation->empty() &&
          (last || (cfg.validate_every > 0 && (step + 1) % cfg.validate_every == 0));
      if (validate_now) {
        row.val_psnr = validation_psnr(model, *options.validation, cfg.alpha_spec, cfg.seed);
      }
      log.rows.push_back(row);
      window_loss = 0.0;
      window_count = 0;
    }
    if (options.progress) options.progress(step + 1, loss, lr);
  }
  model.set_metadata(options.round_index, cfg.to_json(), log.init_hash);
  return {std::move(model), std::move(log)};
}

}  // namespace

TrainResult train_round(const std::vector<ImageTensor>& clean_set, const NoiseBank& bank,
                        const TrainConfig& cfg, const TrainOptions& options) {
  return train_impl(clean_set, &bank, cfg, options);
}

TrainResult train_inpainter(const std::vector<ImageTensor>& clean_set, double alpha,
                            const TrainConfig& cfg, const TrainOptions& options) {
  TrainConfig c = cfg;
  c.alpha_spec = MaskRatioSpec::fixed(alpha);
  return train_impl(clean_set, nullptr, c, options);
}

}  // namespace mid
