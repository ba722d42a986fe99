#include "mid/eval/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mid/core/error.hpp"
#include "mid/core/json_io.hpp"
#include "mid/data/procedural.hpp"
#include "mid/eval/metrics.hpp"
#include "mid/inference/ensemble.hpp"
#include "mid/noise/noise.hpp"

namespace mid {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

nlohmann::json noise_to_json(const CorrelatedNoiseModel& m) {
  return {{"base_sigma", m.base_sigma},
          {"kernel_size", m.kernel_size},
          {"kernel", m.kernel},
          {"signal_gain", m.signal_gain}};
}

CorrelatedNoiseModel noise_from_json(const nlohmann::json& j) {
  CorrelatedNoiseModel m;
  m.base_sigma = j.at("base_sigma").get<double>();
  m.kernel_size = j.at("kernel_size").get<int>();
  m.kernel = j.at("kernel").get<std::vector<double>>();
  m.signal_gain = j.at("signal_gain").get<double>();
  return m;
}

std::string percent_label(double alpha) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g%%", alpha * 100.0);
  return buf;
}

std::string alpha_key(const char* prefix, double alpha) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%.6f", prefix, alpha);
  return buf;
}

// Published full-scale PSNR values, keyed by cell label.
std::optional<double> published_reference(const std::string& suite, const std::string& cell) {
  static const std::map<std::string, std::map<std::string, double>> refs = {
      {"masking-ratio", {{"0%", 25.24}, {"40%", 34.12}, {"60%", 35.65}, {"80%", 36.38}, {"90%", 35.90}}},
      // published rounds are numbered from 1 and reported for 1, 2, 4 and 6
      {"rounds", {{"round-0", 36.38}, {"round-1", 37.43}, {"round-3", 38.05}, {"round-5", 37.96}}},
      {"ensemble", {{"K=1", 37.68}, {"K=5", 37.87}, {"K=10", 38.05}, {"K=20", 38.07}}},
      {"components",
       {{"w/o masking", 25.24},
        {"w/o iterative refinement", 36.38},
        {"w/o prediction ensembling", 37.68},
        {"full", 38.05}}},
  };
  const auto s = refs.find(suite);
  if (s == refs.end()) return std::nullopt;
  const auto c = s->second.find(cell);
  if (c == s->second.end()) return std::nullopt;
  return c->second;
}

}  // namespace

void ToyBenchmarkConfig::validate() const {
  std::vector<std::string> errors;
  if (scene_count < 30) errors.emplace_back("benchmark.scene_count must be >= 30");
  if (scene_size < 16) errors.emplace_back("benchmark.scene_size must be >= 16");
  if (channels != 1 && channels != 3) errors.emplace_back("benchmark.channels must be 1 or 3");
  try {
    noise.validate();
  } catch (const InvalidArgument& e) {
    errors.emplace_back(std::string("benchmark.noise: ") + e.what());
  }
  if (std::abs(split.clean + split.noisy + split.test - 1.0) > 1e-9) {
    errors.emplace_back("benchmark.split fractions must sum to 1");
  }
  if (!errors.empty()) {
    std::string msg = "invalid benchmark config:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
}

nlohmann::json ToyBenchmarkConfig::to_json() const {
  return {{"scene_count", scene_count},
          {"scene_size", scene_size},
          {"channels", channels},
          {"noise", noise_to_json(noise)},
          {"split", {{"clean", split.clean}, {"noisy", split.noisy}, {"test", split.test}}},
          {"seed", seed}};
}

ToyBenchmarkConfig ToyBenchmarkConfig::from_json(const nlohmann::json& j) {
  ToyBenchmarkConfig c;
  c.scene_count = j.at("scene_count").get<int>();
  c.scene_size = j.at("scene_size").get<int>();
  c.channels = j.at("channels").get<int>();
  c.noise = noise_from_json(j.at("noise"));
  c.split.clean = j.at("split").at("clean").get<double>();
  c.split.noisy = j.at("split").at("noisy").get<double>();
  c.split.test = j.at("split").at("test").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

ToyBenchmark make_toy_benchmark(const ToyBenchmarkConfig& cfg) {
  cfg.validate();
  const RngStream root(cfg.seed, "toy-benchmark");
  RngStream scene_rng = root.derive("scenes");
  const ImageCorpus source = procedural_corpus(cfg.scene_count, cfg.scene_size, cfg.channels, scene_rng);
  RngStream split_rng = root.derive("split");
  return build_toy_benchmark(source, cfg.noise, cfg.split, split_rng);
}

void AblationConfig::validate() const {
  benchmark.validate();
  pipeline.validate();
  std::vector<std::string> errors;
  if (pipeline.train.architecture.channels != benchmark.channels) {
    errors.emplace_back("pipeline.train.architecture.channels must equal benchmark.channels");
  }
  for (double a : masking_ratios) {
    if (!(a >= 0.0 && a < 1.0)) errors.emplace_back("masking_ratios entries must be in [0, 1)");
  }
  for (double a : inpainter_ratios) {
    if (!(a >= 0.0 && a < 1.0)) errors.emplace_back("inpainter_ratios entries must be in [0, 1)");
  }
  for (int k : ensemble_sizes) {
    if (k < 1) errors.emplace_back("ensemble_sizes entries must be >= 1");
  }
  if (inpainter_iterations < 1) errors.emplace_back("inpainter_iterations must be >= 1");
  if (!errors.empty()) {
    std::string msg = "invalid ablation config:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
}

nlohmann::json AblationConfig::to_json() const {
  return {{"benchmark", benchmark.to_json()},
          {"pipeline", pipeline.to_json()},
          {"masking_ratios", masking_ratios},
          {"ensemble_sizes", ensemble_sizes},
          {"inpainter_ratios", inpainter_ratios},
          {"inpainter_iterations", inpainter_iterations},
          {"eval_seed", eval_seed}};
}

AblationConfig AblationConfig::from_json(const nlohmann::json& j) {
  AblationConfig c;
  c.benchmark = ToyBenchmarkConfig::from_json(j.at("benchmark"));
  c.pipeline = PipelineConfig::from_json(j.at("pipeline"));
  c.masking_ratios = j.at("masking_ratios").get<std::vector<double>>();
  c.ensemble_sizes = j.at("ensemble_sizes").get<std::vector<int>>();
  c.inpainter_ratios = j.at("inpainter_ratios").get<std::vector<double>>();
  c.inpainter_iterations = j.at("inpainter_iterations").get<int>();
  c.eval_seed = j.at("eval_seed").get<std::uint64_t>();
  return c;
}

std::string AblationTable::to_csv(bool include_runtime) const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "suite,cell,metric,value,seed" << (include_runtime ? ",runtime_s" : "") << '\n';
  for (const auto& r : rows) {
    os << r.suite << ',' << r.cell << ',' << r.metric << ',' << r.value << ',' << r.seed;
    if (include_runtime) os << ',' << std::setprecision(4) << r.runtime_s << std::setprecision(17);
    os << '\n';
  }
  return os.str();
}

std::optional<double> AblationTable::value(const std::string& cell, const std::string& metric) const {
  for (const auto& r : rows) {
    if (r.cell == cell && r.metric == metric && r.error.empty()) return r.value;
  }
  return std::nullopt;
}

std::string AblationTable::to_text() const {
  std::vector<std::string> cells;
  std::vector<std::string> metrics;
  for (const auto& r : rows) {
    if (std::find(cells.begin(), cells.end(), r.cell) == cells.end()) cells.push_back(r.cell);
    if (r.error.empty() && std::find(metrics.begin(), metrics.end(), r.metric) == metrics.end()) {
      metrics.push_back(r.metric);
    }
  }
  bool any_reference = false;
  for (const auto& r : rows) any_reference = any_reference || r.reference_value.has_value();
  std::ostringstream os;
  os << "suite " << suite << '\n';
  os << std::left << std::setw(28) << "cell";
  for (const auto& m : metrics) os << std::right << std::setw(14) << m;
  if (any_reference) os << std::right << std::setw(14) << "published";
  os << '\n';
  for (const auto& c : cells) {
    os << std::left << std::setw(28) << c;
    std::optional<double> published;
    std::string error;
    for (const auto& m : metrics) {
      const auto v = value(c, m);
      if (v) {
        os << std::right << std::setw(14) << std::fixed << std::setprecision(m == "ssim" ? 4 : 2) << *v;
      } else {
        os << std::right << std::setw(14) << "-";
      }
    }
    for (const auto& r : rows) {
      if (r.cell != c) continue;
      if (r.reference_value) published = r.reference_value;
      if (!r.error.empty()) error = r.error;
    }
    if (any_reference) {
      if (published) {
        os << std::right << std::setw(14) << std::fixed << std::setprecision(2) << *published;
      } else {
        os << std::right << std::setw(14) << "-";
      }
    }
    if (!error.empty()) os << "  FAILED: " << error;
    os << '\n';
  }
  return os.str();
}

std::string AblationTable::to_svg(const std::string& metric) const {
  std::vector<std::string> labels;
  std::vector<double> ys;
  for (const auto& r : rows) {
    if (r.metric == metric && r.error.empty()) {
      labels.push_back(r.cell);
      ys.push_back(r.value);
    }
  }
  const double width = 560;
  const double height = 360;
  const double left = 70;
  const double right = 20;
  const double top = 40;
  const double bottom = 60;
  double lo = ys.empty() ? 0.0 : *std::min_element(ys.begin(), ys.end());
  double hi = ys.empty() ? 1.0 : *std::max_element(ys.begin(), ys.end());
  if (hi - lo < 1e-6) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double pw = width - left - right;
  const double ph = height - top - bottom;
  auto px = [&](std::size_t i) {
    return labels.size() <= 1 ? left + pw / 2 : left + pw * static_cast<double>(i) / (labels.size() - 1);
  };
  auto py = [&](double v) { return top + ph * (hi - v) / (hi - lo); };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << suite << ": "
     << metric << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
     << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    os << "<line x1=\"" << left - 4 << "\" y1=\"" << py(v) << "\" x2=\"" << left << "\" y2=\"" << py(v)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << "<text x=\"" << px(i) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << labels[i]
       << "</text>\n";
  }
  os << "<text x=\"18\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 18 " << top + ph / 2
     << ")\" text-anchor=\"middle\">" << metric << "</text>\n";
  if (!ys.empty()) {
    os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) os << px(i) << ',' << py(ys[i]) << ' ';
    os << "\"/>\n";
    for (std::size_t i = 0; i < ys.size(); ++i) {
      os << "<circle cx=\"" << px(i) << "\" cy=\"" << py(ys[i]) << "\" r=\"3.5\" fill=\"#1f77b4\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

ToyStudy::ToyStudy(AblationConfig cfg, std::function<void(const std::string&)> log)
    : cfg_(std::move(cfg)), log_(std::move(log)) {
  cfg_.validate();
}

void ToyStudy::say(const std::string& msg) const {
  if (log_) log_(msg);
}

const ToyBenchmark& ToyStudy::benchmark() {
  if (!bench_) {
    bench_ = make_toy_benchmark(cfg_.benchmark);
    say("toy benchmark: " + std::to_string(bench_->clean_train.scenes.size()) + " clean, " +
        std::to_string(bench_->noisy_train.scenes.size()) + " noisy, " +
        std::to_string(bench_->paired_test.size()) + " test scenes; noise std " +
        std::to_string(bench_->measured_noise_std));
  }
  return *bench_;
}

double ToyStudy::build_seconds(const std::string& key) const {
  const auto it = build_seconds_.find(key);
  return it == build_seconds_.end() ? 0.0 : it->second;
}

const Denoiser& ToyStudy::awgn_model(double alpha) {
  const std::string key = alpha_key("awgn", alpha);
  if (auto it = models_.find(key); it != models_.end()) return *it->second;
  const ToyBenchmark& bench = benchmark();
  const auto t0 = Clock::now();
  if (!awgn_bank_) {
    RngStream awgn_rng = RngStream(cfg_.pipeline.seed, "pipeline").derive("awgn");
    awgn_bank_ = build_awgn_bank(cfg_.pipeline.awgn_bank_size, cfg_.pipeline.train.patch_size,
                                 cfg_.benchmark.channels, cfg_.pipeline.awgn_sigma, awgn_rng);
  }
  TrainConfig c = cfg_.pipeline.round_config(0);
  c.alpha_spec = MaskRatioSpec::fixed(alpha);
  say("training AWGN model at masking ratio " + percent_label(alpha));
  TrainOptions opts;
  opts.round_index = 0;
  TrainResult r = train_round(bench.clean_train.images(), *awgn_bank_, c, opts);
  build_seconds_[key] = seconds_since(t0);
  return *models_.emplace(key, std::make_unique<Denoiser>(std::move(r.model))).first->second;
}

const std::vector<Denoiser>& ToyStudy::pipeline_models() {
  if (rounds_) return *rounds_;
  const ToyBenchmark& bench = benchmark();
  const auto t0 = Clock::now();
  std::vector<Denoiser> models;
  PipelineOptions opts;
  opts.log = log_;
  opts.on_round = [&](int, const Denoiser& m) { models.push_back(m); };
  run_pipeline(bench.clean_train, bench.noisy_train, cfg_.pipeline, opts);
  build_seconds_["pipeline"] = seconds_since(t0);
  // round 0 is the single AWGN round at the first scheduled ratio
  const MaskRatioSpec& first = cfg_.pipeline.alpha_schedule.front();
  if (first.is_fixed()) {
    const std::string key = alpha_key("awgn", first.lo());
    if (!models_.count(key)) models_.emplace(key, std::make_unique<Denoiser>(models.front()));
  }
  rounds_ = std::move(models);
  return *rounds_;
}

const Denoiser& ToyStudy::inpainter(double alpha) {
  const std::string key = alpha_key("inpaint", alpha);
  if (auto it = models_.find(key); it != models_.end()) return *it->second;
  const ToyBenchmark& bench = benchmark();
  const auto t0 = Clock::now();
  TrainConfig c = cfg_.pipeline.train;
  c.iterations = cfg_.inpainter_iterations;
  c.alpha_spec = MaskRatioSpec::fixed(alpha);
  c.seed = RngStream(cfg_.pipeline.seed, "inpainter").key();
  say("training inpainter at masking ratio " + percent_label(alpha));
  TrainResult r = train_inpainter(bench.clean_train.images(), alpha, c);
  build_seconds_[key] = seconds_since(t0);
  return *models_.emplace(key, std::make_unique<Denoiser>(std::move(r.model))).first->second;
}

HeldOutScore ToyStudy::heldout(const Denoiser& model, const MaskRatioSpec& alpha, int k) {
  const ToyBenchmark& bench = benchmark();
  HeldOutScore s;
  for (std::size_t i = 0; i < bench.paired_test.size(); ++i) {
    EnsembleConfig ec;
    ec.k = k;
    ec.alpha_spec = alpha;
    ec.seed = RngStream(cfg_.eval_seed, "heldout", i).key();
    const ImageTensor out = ensemble_denoise(model, bench.paired_test[i].noisy, ec);
    s.psnr += psnr(out, bench.paired_test[i].clean);
    s.ssim += ssim(out, bench.paired_test[i].clean);
  }
  const auto n = static_cast<double>(bench.paired_test.size());
  s.psnr /= n;
  s.ssim /= n;
  return s;
}

std::pair<double, double> ToyStudy::inpainting_psnr(const Denoiser& model, double alpha) {
  const ToyBenchmark& bench = benchmark();
  double pred_total = 0.0;
  double masked_total = 0.0;
  for (std::size_t i = 0; i < bench.paired_test.size(); ++i) {
    const ImageTensor& x = bench.paired_test[i].clean;
    RngStream mask_rng(cfg_.eval_seed, "inpaint", i);
    const BinaryMask mask = sample_mask(x.height(), x.width(), alpha, mask_rng);
    const ImageTensor masked = apply_mask(x, mask);
    pred_total += psnr(clip01(denoise_padded(model, masked)), x);
    masked_total += psnr(masked, x);
  }
  const auto n = static_cast<double>(bench.paired_test.size());
  return {pred_total / n, masked_total / n};
}

const std::vector<std::string>& ablation_suites() {
  static const std::vector<std::string> suites = {"masking-ratio", "rounds", "ensemble", "components", "inpainter"};
  return suites;
}

AblationTable run_ablation(const std::string& suite, ToyStudy& study) {
  if (std::find(ablation_suites().begin(), ablation_suites().end(), suite) == ablation_suites().end()) {
    throw InvalidArgument("unknown ablation suite '" + suite + "'");
  }
  const AblationConfig& cfg = study.config();
  const std::uint64_t seed = cfg.pipeline.seed;
  const int eval_k = cfg.pipeline.eval_k;
  AblationTable table;
  table.suite = suite;

  auto cell = [&](const std::string& id, const std::function<std::vector<std::pair<std::string, double>>()>& body) {
    const auto t0 = Clock::now();
    try {
      const auto values = body();
      const double runtime = seconds_since(t0);
      for (const auto& [metric, v] : values) {
        AblationRow row{suite, id, metric, v, seed, runtime, std::nullopt, ""};
        if (metric == "psnr") row.reference_value = published_reference(suite, id);
        table.rows.push_back(row);
      }
    } catch (const std::exception& e) {
      table.rows.push_back({suite, id, "error", std::numeric_limits<double>::quiet_NaN(), seed, seconds_since(t0),
                            std::nullopt, e.what()});
    }
  };

  if (suite == "masking-ratio") {
    for (double a : cfg.masking_ratios) {
      cell(percent_label(a), [&] {
        const Denoiser& m = study.awgn_model(a);
        const HeldOutScore s = study.heldout(m, MaskRatioSpec::fixed(a), eval_k);
        const HeldOutScore s1 = study.heldout(m, MaskRatioSpec::fixed(a), 1);
        return std::vector<std::pair<std::string, double>>{{"psnr", s.psnr}, {"psnr_k1", s1.psnr}, {"ssim", s.ssim}};
      });
    }
  } else if (suite == "rounds") {
    for (int k = 0; k <= cfg.pipeline.rounds; ++k) {
      cell("round-" + std::to_string(k), [&] {
        const Denoiser& m = study.pipeline_models().at(static_cast<std::size_t>(k));
        const MaskRatioSpec& a = cfg.pipeline.alpha_schedule.at(static_cast<std::size_t>(k));
        const HeldOutScore s = study.heldout(m, a, eval_k);
        const HeldOutScore s1 = study.heldout(m, a, 1);
        return std::vector<std::pair<std::string, double>>{{"psnr", s.psnr}, {"psnr_k1", s1.psnr}, {"ssim", s.ssim}};
      });
    }
  } else if (suite == "ensemble") {
    for (int k : cfg.ensemble_sizes) {
      cell("K=" + std::to_string(k), [&] {
        const Denoiser& m = study.pipeline_models().back();
        const HeldOutScore s = study.heldout(m, cfg.pipeline.alpha_schedule.back(), k);
        return std::vector<std::pair<std::string, double>>{{"psnr", s.psnr}, {"ssim", s.ssim}};
      });
    }
  } else if (suite == "components") {
    cell("w/o masking", [&] {
      const HeldOutScore s = study.heldout(study.awgn_model(0.0), MaskRatioSpec::fixed(0.0), 1);
      return std::vector<std::pair<std::string, double>>{{"psnr", s.psnr}, {"ssim", s.ssim}};
    });
    cell("w/o iterative refinement", [&] {
      const HeldOutScore s =
          study.heldout(study.pipeline_models().front(), cfg.pipeline.alpha_schedule.front(), eval_k);
      return std::vector<std::pair<std::string, double>>{{"psnr", s.psnr}, {"ssim", s.ssim}};
    });
    cell("w/o prediction ensembling", [&] {
      const HeldOutScore s = study.heldout(study.pipeline_models().back(), cfg.pipeline.alpha_schedule.back(), 1);
      return std::vector<std::pair<std::string, double>>{{"psnr", s.psnr}, {"ssim", s.ssim}};
    });
    cell("full", [&] {
      const HeldOutScore s =
          study.heldout(study.pipeline_models().back(), cfg.pipeline.alpha_schedule.back(), eval_k);
      return std::vector<std::pair<std::string, double>>{{"psnr", s.psnr}, {"ssim", s.ssim}};
    });
  } else if (suite == "inpainter") {
    for (double a : cfg.inpainter_ratios) {
      cell(percent_label(a), [&] {
        const auto [pred, masked] = study.inpainting_psnr(study.inpainter(a), a);
        return std::vector<std::pair<std::string, double>>{
            {"psnr", pred}, {"masked_psnr", masked}, {"gain", pred - masked}};
      });
    }
  }
  return table;
}

}  // namespace mid
