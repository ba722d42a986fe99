#include "mid/cli/run_config.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "mid/core/error.hpp"
#include "mid/core/json_io.hpp"

namespace mid {

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.study.benchmark = ToyBenchmarkConfig{};
  PipelineConfig& p = c.study.pipeline;
  p.train.iterations = 4000;
  p.train.batch_size = 8;
  p.train.patch_size = 32;
  p.train.optimizer.lr_initial = 1e-3;
  p.train.optimizer.lr_floor = 1e-5;
  p.train.architecture.channels = c.study.benchmark.channels;
  p.train.architecture.width = 16;
  p.awgn_bank_size = 200;
  return c;
}

nlohmann::json RunConfig::to_json() const {
  return {{"data", {{"clean_dir", clean_dir}, {"noisy_dir", noisy_dir}}},
          {"benchmark", study.benchmark.to_json()},
          {"pipeline", study.pipeline.to_json()},
          {"ablation",
           {{"masking_ratios", study.masking_ratios},
            {"ensemble_sizes", study.ensemble_sizes},
            {"inpainter_ratios", study.inpainter_ratios},
            {"inpainter_iterations", study.inpainter_iterations},
            {"eval_seed", study.eval_seed}}},
          {"inference",
           {{"k", inference.k},
            {"alpha", inference.alpha ? mask_ratio_to_json(*inference.alpha) : nlohmann::json(nullptr)},
            {"tile", inference.tile},
            {"overlap", inference.overlap}}}};
}

namespace {

// Overlays `user` on `base` in place, recording keys absent from the base.
void overlay(nlohmann::json& base, const nlohmann::json& user, const std::string& prefix,
             std::vector<std::string>& errors) {
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) {
      errors.push_back("unknown key '" + path + "'");
      continue;
    }
    nlohmann::json& slot = base[key];
    if (slot.is_object()) {
      if (!value.is_object()) {
        errors.push_back("'" + path + "' must be an object");
        continue;
      }
      overlay(slot, value, path, errors);
    } else {
      slot = value;
    }
  }
}

void collect_leaves(const nlohmann::json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      collect_leaves(value, path, out);
    } else {
      out.push_back(path);
    }
  }
}

template <typename F>
void guarded(const char* section, std::vector<std::string>& errors, F&& f) {
  try {
    f();
  } catch (const nlohmann::json::exception& e) {
    errors.push_back(std::string(section) + ": " + e.what());
  } catch (const ConfigError& e) {
    errors.push_back(e.what());
  } catch (const InvalidArgument& e) {
    errors.push_back(std::string(section) + ": " + e.what());
  }
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  nlohmann::json merged = defaults().to_json();
  std::vector<std::string> errors;
  overlay(merged, j, "", errors);

  RunConfig c = defaults();
  guarded("data", errors, [&] {
    c.clean_dir = merged.at("data").at("clean_dir").get<std::string>();
    c.noisy_dir = merged.at("data").at("noisy_dir").get<std::string>();
  });
  guarded("benchmark", errors, [&] { c.study.benchmark = ToyBenchmarkConfig::from_json(merged.at("benchmark")); });
  guarded("pipeline", errors, [&] { c.study.pipeline = PipelineConfig::from_json(merged.at("pipeline")); });
  guarded("ablation", errors, [&] {
    const auto& a = merged.at("ablation");
    c.study.masking_ratios = a.at("masking_ratios").get<std::vector<double>>();
    c.study.ensemble_sizes = a.at("ensemble_sizes").get<std::vector<int>>();
    c.study.inpainter_ratios = a.at("inpainter_ratios").get<std::vector<double>>();
    c.study.inpainter_iterations = a.at("inpainter_iterations").get<int>();
    c.study.eval_seed = a.at("eval_seed").get<std::uint64_t>();
  });
  guarded("inference", errors, [&] {
    const auto& i = merged.at("inference");
    c.inference.k = i.at("k").get<int>();
    if (!i.at("alpha").is_null()) c.inference.alpha = mask_ratio_from_json(i.at("alpha"));
    c.inference.tile = i.at("tile").get<int>();
    c.inference.overlap = i.at("overlap").get<int>();
  });
  if (errors.empty()) {
    guarded("config", errors, [&] { c.study.validate(); });
    guarded("inference", errors, [&] {
      EnsembleConfig ec;
      ec.k = c.inference.k;
      ec.tile = c.inference.tile;
      ec.overlap = c.inference.overlap;
      ec.validate();
    });
    if (c.clean_dir.empty() != c.noisy_dir.empty()) {
      errors.emplace_back("data.clean_dir and data.noisy_dir must be both set or both empty");
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void RunConfig::set_seed(std::uint64_t seed) { study.pipeline.seed = seed; }

void RunConfig::set_rounds(int rounds) {
  if (rounds < 0) throw ConfigError("--rounds must be >= 0");
  auto& schedule = study.pipeline.alpha_schedule;
  const MaskRatioSpec last = schedule.back();
  schedule.resize(static_cast<std::size_t>(rounds) + 1, last);
  study.pipeline.rounds = rounds;
}

std::string RunConfig::hash() const { return config_hash(to_json()); }

const std::vector<std::pair<std::string, std::string>>& config_key_docs() {
  static const std::vector<std::pair<std::string, std::string>> docs = {
      {"data.clean_dir", "directory of clean PNGs; empty selects the procedural toy benchmark"},
      {"data.noisy_dir", "directory of noisy PNGs (scene ids disjoint from the clean set)"},
      {"benchmark.scene_count", "procedural scenes generated for the toy benchmark"},
      {"benchmark.scene_size", "side length of each procedural scene in pixels"},
      {"benchmark.channels", "1 (gray) or 3 (RGB)"},
      {"benchmark.noise.base_sigma", "std of the injected noise, intensity units"},
      {"benchmark.noise.kernel_size", "odd side length of the correlation kernel"},
      {"benchmark.noise.kernel", "row-major kernel entries, summing to 1"},
      {"benchmark.noise.signal_gain", "noise std scales with sqrt(1 + gain * clean)"},
      {"benchmark.split.clean", "fraction of scenes in the clean training set"},
      {"benchmark.split.noisy", "fraction of scenes in the noisy training set"},
      {"benchmark.split.test", "fraction of scenes in the paired test set"},
      {"benchmark.seed", "seed for scene generation, split and noise"},
      {"pipeline.rounds", "last round index m; rounds 0..m are trained"},
      {"pipeline.alpha_schedule", "masking ratio per round: a number or [lo, hi]; m + 1 entries"},
      {"pipeline.train.iterations", "optimizer steps per round"},
      {"pipeline.train.batch_size", "samples per step"},
      {"pipeline.train.patch_size", "square crop side in pixels"},
      {"pipeline.train.optimizer.lr_initial", "Adam learning rate at step 0"},
      {"pipeline.train.optimizer.lr_floor", "cosine schedule end value"},
      {"pipeline.train.optimizer.beta1", "Adam beta1"},
      {"pipeline.train.optimizer.beta2", "Adam beta2"},
      {"pipeline.train.optimizer.epsilon", "Adam epsilon"},
      {"pipeline.train.alpha", "ignored by the pipeline (taken from alpha_schedule)"},
      {"pipeline.train.seed", "ignored by the pipeline (each round derives its own)"},
      {"pipeline.train.architecture.id", "unet or convstack"},
      {"pipeline.train.architecture.channels", "image channels; must equal benchmark.channels"},
      {"pipeline.train.architecture.width", "feature width of the first scale"},
      {"pipeline.train.architecture.depth", "convstack depth (unused by unet)"},
      {"pipeline.train.augment_flips", "random flips of clean crops and noise draws"},
      {"pipeline.train.log_every", "steps between training log rows"},
      {"pipeline.train.validate_every", "steps between validation PSNR rows; 0 = last step only"},
      {"pipeline.awgn_sigma", "std of the round-0 AWGN bank"},
      {"pipeline.awgn_bank_size", "patches in the round-0 AWGN bank"},
      {"pipeline.passes_per_image", "residuals extracted per noisy image per round"},
      {"pipeline.extract_ensemble_k", "masked passes averaged for the pseudo-clean image; 1 = single pass"},
      {"pipeline.extract_alpha", "extraction masking ratio; null = the extracting round's ratio"},
      {"pipeline.eval_k", "ensemble size for reported validation and held-out PSNR"},
      {"pipeline.seed", "global seed (overridden by --seed)"},
      {"ablation.masking_ratios", "ratios of the masking-ratio suite"},
      {"ablation.ensemble_sizes", "K values of the ensemble suite"},
      {"ablation.inpainter_ratios", "ratios of the inpainter suite"},
      {"ablation.inpainter_iterations", "training steps of each noise-free inpainter"},
      {"ablation.eval_seed", "seed of the held-out evaluation masks"},
      {"inference.k", "ensemble size for mid infer"},
      {"inference.alpha", "inference masking ratio; null = the checkpoint's training ratio"},
      {"inference.tile", "tile side for large images"},
      {"inference.overlap", "overlap between tiles"},
  };
  return docs;
}

std::vector<std::string> leaf_paths(const nlohmann::json& j) {
  std::vector<std::string> out;
  collect_leaves(j, "", out);
  return out;
}

std::string config_help_text() {
  const nlohmann::json defaults = RunConfig::defaults().to_json();
  std::ostringstream os;
  os << "Config keys (JSON; unknown keys are rejected):\n";
  for (const auto& [path, doc] : config_key_docs()) {
    nlohmann::json::json_pointer ptr("/" + [&] {
      std::string p = path;
      for (auto& ch : p) {
        if (ch == '.') ch = '/';
      }
      return p;
    }());
    os << "  " << path << " = " << defaults.at(ptr).dump() << "\n      " << doc << '\n';
  }
  return os.str();
}

std::filesystem::path default_run_dir(const RunConfig& cfg, const std::string& prefix) {
  const char* root = std::getenv("MID_RUN_ROOT");
  const std::filesystem::path base = (root && *root) ? root : "runs";
  return base / (prefix + "-" + std::to_string(cfg.seed()) + "-" + cfg.hash());
}

RunLock::RunLock(const std::filesystem::path& run_dir) : path_(run_dir / ".lock") {
  std::filesystem::create_directories(run_dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw IoError("run directory " + run_dir.string() + " is locked by another process (remove " +
                    path_.string() + " if stale)");
    }
    throw IoError("cannot create lock file " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

}  // namespace mid
