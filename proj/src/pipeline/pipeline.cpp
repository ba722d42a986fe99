#include "mid/pipeline/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "mid/core/error.hpp"
#include "mid/core/json_io.hpp"
#include "mid/eval/metrics.hpp"
#include "mid/inference/ensemble.hpp"
#include "mid/noise/noise.hpp"

namespace mid {

namespace fs = std::filesystem;

PipelineConfig PipelineConfig::full_scale_defaults() {
  PipelineConfig cfg;
  cfg.train = TrainConfig::full_scale_defaults();
  return cfg;
}

void PipelineConfig::validate() const {
  std::vector<std::string> errors;
  if (rounds < 0) errors.emplace_back("pipeline.rounds must be >= 0");
  if (static_cast<int>(alpha_schedule.size()) != rounds + 1) {
    errors.emplace_back("pipeline.alpha_schedule must have rounds + 1 = " + std::to_string(rounds + 1) +
                        " entries, has " + std::to_string(alpha_schedule.size()));
  }
  if (!(awgn_sigma >= 0.0)) errors.emplace_back("pipeline.awgn_sigma must be >= 0");
  if (awgn_bank_size < 1) errors.emplace_back("pipeline.awgn_bank_size must be >= 1");
  if (passes_per_image < 1) errors.emplace_back("pipeline.passes_per_image must be >= 1");
  if (extract_ensemble_k < 1) errors.emplace_back("pipeline.extract_ensemble_k must be >= 1");
  if (eval_k < 1) errors.emplace_back("pipeline.eval_k must be >= 1");
  try {
    train.validate();
  } catch (const ConfigError& e) {
    errors.emplace_back(e.what());
  }
  if (!errors.empty()) {
    std::string msg = "invalid pipeline config:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
}

std::uint64_t PipelineConfig::round_seed(int k) const {
  return RngStream(seed, "pipeline").derive("train-round", static_cast<std::uint64_t>(k)).key();
}

TrainConfig PipelineConfig::round_config(int k) const {
  TrainConfig c = train;
  c.alpha_spec = alpha_schedule.at(static_cast<std::size_t>(k));
  c.seed = round_seed(k);
  return c;
}

MaskRatioSpec PipelineConfig::extraction_alpha(int k) const {
  return extract_alpha ? *extract_alpha : alpha_schedule.at(static_cast<std::size_t>(k));
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json schedule = nlohmann::json::array();
  for (const auto& s : alpha_schedule) schedule.push_back(mask_ratio_to_json(s));
  return {{"rounds", rounds},
          {"alpha_schedule", schedule},
          {"train", train.to_json()},
          {"awgn_sigma", awgn_sigma},
          {"awgn_bank_size", awgn_bank_size},
          {"passes_per_image", passes_per_image},
          {"extract_ensemble_k", extract_ensemble_k},
          {"extract_alpha", extract_alpha ? mask_ratio_to_json(*extract_alpha) : nlohmann::json(nullptr)},
          {"eval_k", eval_k},
          {"seed", seed}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.rounds = j.at("rounds").get<int>();
  c.alpha_schedule.clear();
  for (const auto& s : j.at("alpha_schedule")) c.alpha_schedule.push_back(mask_ratio_from_json(s));
  c.train = TrainConfig::from_json(j.at("train"));
  c.awgn_sigma = j.at("awgn_sigma").get<double>();
  c.awgn_bank_size = j.at("awgn_bank_size").get<int>();
  c.passes_per_image = j.at("passes_per_image").get<int>();
  c.extract_ensemble_k = j.at("extract_ensemble_k").get<int>();
  if (!j.at("extract_alpha").is_null()) c.extract_alpha = mask_ratio_from_json(j.at("extract_alpha"));
  c.eval_k = j.at("eval_k").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

nlohmann::json PipelineState::to_json() const {
  nlohmann::json rounds_json = nlohmann::json::array();
  for (const auto& r : rounds) {
    rounds_json.push_back({{"round", r.round},
                           {"bank", r.bank},
                           {"checkpoint", r.checkpoint},
                           {"log", r.log},
                           {"next_bank", r.next_bank},
                           {"init_hash", r.init_hash},
                           {"train_seed", r.train_seed},
                           {"final_loss", r.final_loss},
                           {"val_psnr", r.val_psnr ? nlohmann::json(*r.val_psnr) : nlohmann::json(nullptr)},
                           {"val_psnr_ensemble",
                            r.val_psnr_ensemble ? nlohmann::json(*r.val_psnr_ensemble) : nlohmann::json(nullptr)}});
  }
  return {{"seed", seed},           {"config_hash", config_hash}, {"total_rounds", total_rounds},
          {"rounds", rounds_json},  {"clean_ids", clean_ids},     {"noisy_ids", noisy_ids}};
}

PipelineState PipelineState::from_json(const nlohmann::json& j) {
  PipelineState s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.config_hash = j.at("config_hash").get<std::string>();
  s.total_rounds = j.at("total_rounds").get<int>();
  s.clean_ids = j.at("clean_ids").get<std::vector<std::string>>();
  s.noisy_ids = j.at("noisy_ids").get<std::vector<std::string>>();
  for (const auto& r : j.at("rounds")) {
    RoundRecord rec;
    rec.round = r.at("round").get<int>();
    rec.bank = r.at("bank").get<std::string>();
    rec.checkpoint = r.at("checkpoint").get<std::string>();
    rec.log = r.at("log").get<std::string>();
    rec.next_bank = r.at("next_bank").get<std::string>();
    rec.init_hash = r.at("init_hash").get<std::uint64_t>();
    rec.train_seed = r.at("train_seed").get<std::uint64_t>();
    rec.final_loss = r.at("final_loss").get<double>();
    if (!r.at("val_psnr").is_null()) rec.val_psnr = r.at("val_psnr").get<double>();
    if (!r.at("val_psnr_ensemble").is_null()) rec.val_psnr_ensemble = r.at("val_psnr_ensemble").get<double>();
    s.rounds.push_back(rec);
  }
  return s;
}

std::string PipelineState::metrics_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "round,train_seed,init_hash,final_loss,val_psnr,val_psnr_ensemble\n";
  for (const auto& r : rounds) {
    os << r.round << ',' << r.train_seed << ',' << r.init_hash << ',' << r.final_loss << ',';
    if (r.val_psnr) os << *r.val_psnr;
    os << ',';
    if (r.val_psnr_ensemble) os << *r.val_psnr_ensemble;
    os << '\n';
  }
  return os.str();
}

void PipelineState::save(const fs::path& path) const {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << to_json().dump(2) << '\n';
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

PipelineState PipelineState::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed state file " + path.string() + ": " + e.what());
  }
}

std::string config_hash(const nlohmann::json& j) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(j.dump());
  return os.str();
}

namespace {

std::string round_dir(int k) { return "round-" + std::to_string(k); }
std::string bank_dir(int k) { return "banks/bank-" + std::to_string(k); }

std::vector<ValidationPair> to_validation_pairs(const std::vector<PairedScene>& scenes) {
  std::vector<ValidationPair> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back({s.noisy, s.clean});
  return out;
}

double ensemble_psnr(const Denoiser& model, const std::vector<PairedScene>& scenes, const MaskRatioSpec& alpha,
                     int k, std::uint64_t seed) {
  double total = 0.0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    EnsembleConfig ec;
    ec.k = k;
    ec.alpha_spec = alpha;
    ec.seed = RngStream(seed, "validation-ensemble", i).key();
    total += psnr(ensemble_denoise(model, scenes[i].noisy, ec), scenes[i].clean);
  }
  return total / static_cast<double>(scenes.size());
}

}  // namespace

PipelineResult run_pipeline(const ImageCorpus& clean_set, const ImageCorpus& noisy_set, const PipelineConfig& cfg,
                            const PipelineOptions& options) {
  cfg.validate();
  clean_set.validate();
  noisy_set.validate();
  if (clean_set.scenes.empty() || noisy_set.scenes.empty()) {
    throw InvalidArgument("run_pipeline: clean and noisy sets must be non-empty");
  }
  {
    const auto clean_ids = clean_set.ids();
    const std::set<std::string> clean_lookup(clean_ids.begin(), clean_ids.end());
    for (const auto& id : noisy_set.ids()) {
      if (clean_lookup.count(id)) {
        throw InvalidArgument("run_pipeline: scene '" + id + "' appears in both the clean and noisy sets");
      }
    }
  }
  auto say = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };

  const std::string hash = config_hash(cfg.to_json());
  const std::optional<fs::path>& run_dir = options.run_dir;
  const fs::path state_path = run_dir ? *run_dir / "state.json" : fs::path();

  PipelineState state;
  if (run_dir && fs::exists(state_path)) {
    state = PipelineState::load(state_path);
    if (state.config_hash != hash) {
      throw ConfigError("resume: run directory was created with a different config (hash " + state.config_hash +
                        ", current " + hash + ")");
    }
    say("resuming after " + std::to_string(state.completed_rounds()) + " completed round(s)");
  } else {
    state.seed = cfg.seed;
    state.config_hash = hash;
    state.total_rounds = cfg.rounds;
    state.clean_ids = clean_set.ids();
    state.noisy_ids = noisy_set.ids();
    if (run_dir) fs::create_directories(*run_dir);
  }

  const RngStream root(cfg.seed, "pipeline");
  const int channels = clean_set.channels();
  const auto clean_images = clean_set.images();
  std::vector<ValidationPair> val_pairs;
  if (options.validation && !options.validation->empty()) val_pairs = to_validation_pairs(*options.validation);

  std::optional<NoiseBank> bank;
  std::optional<Denoiser> model;
  const int start = state.completed_rounds();
  if (start == 0) {
    RngStream awgn_rng = root.derive("awgn");
    bank = build_awgn_bank(cfg.awgn_bank_size, cfg.train.patch_size, channels, cfg.awgn_sigma, awgn_rng);
    if (run_dir) bank->save(*run_dir / bank_dir(0));
  } else {
    const RoundRecord& last = state.rounds.back();
    model = Denoiser::load(*run_dir / last.checkpoint);
    if (!last.next_bank.empty()) bank = NoiseBank::load(*run_dir / last.next_bank);
  }

  for (int k = start; k <= cfg.rounds; ++k) {
    const TrainConfig rc = cfg.round_config(k);
    say("round " + std::to_string(k) + ": training on bank " + std::to_string(bank->round_index()) + " (" +
        std::to_string(bank->size()) + " samples), alpha " + rc.alpha_spec.to_string());
    TrainOptions topts;
    topts.round_index = k;
    topts.validation = val_pairs.empty() ? nullptr : &val_pairs;
    topts.progress = options.train_progress;
    TrainResult trained = train_round(clean_images, *bank, rc, topts);

    RoundRecord rec;
    rec.round = k;
    rec.bank = bank_dir(k);
    rec.init_hash = trained.model.init_hash();
    rec.train_seed = rc.seed;
    rec.final_loss = trained.log.rows.empty() ? 0.0 : trained.log.rows.back().loss;
    if (!val_pairs.empty()) {
      rec.val_psnr = validation_psnr(trained.model, val_pairs, rc.alpha_spec, rc.seed);
      rec.val_psnr_ensemble =
          ensemble_psnr(trained.model, *options.validation, rc.alpha_spec, cfg.eval_k, rc.seed);
      say("round " + std::to_string(k) + ": validation PSNR " + std::to_string(*rec.val_psnr) + " dB (K=1), " +
          std::to_string(*rec.val_psnr_ensemble) + " dB (K=" + std::to_string(cfg.eval_k) + ")");
    }
    if (run_dir) {
      rec.checkpoint = round_dir(k) + "/checkpoint.mid";
      rec.log = round_dir(k) + "/train_log.csv";
      trained.model.save(*run_dir / rec.checkpoint);
      trained.log.write_csv(*run_dir / rec.log);
    }

    std::optional<NoiseBank> next;
    if (k < cfg.rounds) {
      ExtractOptions eo;
      eo.passes_per_image = cfg.passes_per_image;
      eo.ensemble_k = cfg.extract_ensemble_k;
      eo.round_index = k + 1;
      eo.lineage = {{"source_round", k},
                    {"source_checkpoint", rec.checkpoint},
                    {"source_init_hash", rec.init_hash}};
      RngStream extract_rng = root.derive("extract", static_cast<std::uint64_t>(k + 1));
      next = extract_pseudo_noise(trained.model, noisy_set.scenes, cfg.extraction_alpha(k), extract_rng, eo);
      if (run_dir) {
        rec.next_bank = bank_dir(k + 1);
        next->save(*run_dir / rec.next_bank);
      }
      say("round " + std::to_string(k) + ": extracted " + std::to_string(next->size()) + " residuals");
    }

    state.rounds.push_back(rec);
    if (run_dir) {
      state.save(state_path);
      std::ofstream metrics(*run_dir / "metrics.csv", std::ios::trunc);
      metrics << state.metrics_csv();
      if (!metrics) throw IoError("failed writing metrics.csv in " + run_dir->string());
    }
    if (options.on_round) options.on_round(k, trained.model);
    model = std::move(trained.model);
    bank = std::move(next);
    if (options.stop_after_round && *options.stop_after_round == k) break;
  }
  return {std::move(*model), std::move(state)};
}

std::pair<ImageCorpus, ImageCorpus> make_unpaired_split(const std::vector<PairedScene>& pairs, RngStream& rng) {
  if (pairs.size() < 2) throw InvalidArgument("make_unpaired_split: need at least 2 pairs");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  const std::size_t n_clean = (pairs.size() + 1) / 2;
  ImageCorpus clean;
  ImageCorpus noisy;
  clean.role = CorpusRole::Clean;
  noisy.role = CorpusRole::Noisy;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const PairedScene& p = pairs[order[k]];
    if (k < n_clean) {
      clean.scenes.push_back({p.id, p.clean});
    } else {
      noisy.scenes.push_back({p.id, p.noisy});
    }
  }
  return {std::move(clean), std::move(noisy)};
}

}  // namespace mid
