#include "mid/cli/app.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <regex>

#include "CLI11.hpp"
#include "mid/cli/run_config.hpp"
#include "mid/core/error.hpp"
#include "mid/core/json_io.hpp"
#include "mid/data/corpus.hpp"
#include "mid/data/png_io.hpp"
#include "mid/eval/acceptance.hpp"
#include "mid/eval/kl.hpp"
#include "mid/eval/metrics.hpp"
#include "mid/noise/noise.hpp"
#include "mid/noise/noise_bank.hpp"

namespace mid {

namespace fs = std::filesystem;

namespace {

void log_line(const std::string& msg) { std::cout << msg << std::endl; }

MaskRatioSpec parse_alpha(const std::string& s) {
  const std::regex range(R"(\s*\[?\s*([0-9.eE+-]+)\s*[,:]\s*([0-9.eE+-]+)\s*\]?\s*)");
  std::smatch m;
  try {
    if (std::regex_match(s, m, range)) return MaskRatioSpec::interval(std::stod(m[1]), std::stod(m[2]));
    return MaskRatioSpec::fixed(std::stod(s));
  } catch (const std::invalid_argument&) {
    throw ConfigError("--alpha: expected a ratio like 0.8 or a range like 0.5,0.7; got '" + s + "'");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> rounds;
  std::string resume;
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  RunConfig cfg;
  fs::path run_dir;
  if (!a.resume.empty()) {
    run_dir = a.resume;
    cfg = RunConfig::load(run_dir / "config.json");
    if (!a.config.empty() || a.seed || a.rounds) {
      throw ConfigError("--resume takes the config stored in the run directory; drop --config/--seed/--rounds");
    }
  } else {
    cfg = a.config.empty() ? RunConfig::defaults() : RunConfig::load(a.config);
    if (a.seed) cfg.set_seed(*a.seed);
    if (a.rounds) cfg.set_rounds(*a.rounds);
    cfg = RunConfig::from_json(cfg.to_json());
    run_dir = a.out.empty() ? default_run_dir(cfg) : fs::path(a.out);
  }
  RunLock lock(run_dir);
  const fs::path config_path = run_dir / "config.json";
  if (a.resume.empty()) {
    if (fs::exists(config_path) && RunConfig::load(config_path).hash() != cfg.hash()) {
      throw ConfigError("run directory " + run_dir.string() + " holds a different config");
    }
    write_text(config_path, cfg.to_json().dump(2) + "\n");
  }
  log_line("run directory: " + run_dir.string());
  log_line("config hash: " + cfg.hash());

  ImageCorpus clean;
  ImageCorpus noisy;
  std::vector<PairedScene> validation;
  if (cfg.clean_dir.empty()) {
    ToyBenchmark bench = make_toy_benchmark(cfg.study.benchmark);
    clean = std::move(bench.clean_train);
    noisy = std::move(bench.noisy_train);
    validation = std::move(bench.paired_test);
    log_line("toy benchmark: " + std::to_string(clean.size()) + " clean, " + std::to_string(noisy.size()) +
             " noisy, " + std::to_string(validation.size()) + " held-out scenes");
  } else {
    clean = load_corpus(cfg.clean_dir, CorpusRole::Clean);
    noisy = load_corpus(cfg.noisy_dir, CorpusRole::Noisy);
  }
  PipelineOptions opts;
  opts.run_dir = run_dir;
  opts.validation = validation.empty() ? nullptr : &validation;
  opts.log = log_line;
  const PipelineResult result = run_pipeline(clean, noisy, cfg.study.pipeline, opts);
  log_line("finished " + std::to_string(result.state.completed_rounds()) + " round(s); final checkpoint " +
           (run_dir / result.state.rounds.back().checkpoint).string());
  return kExitOk;
}

struct InferArgs {
  std::string checkpoint;
  std::string input;
  std::string out;
  std::string config;
  std::optional<int> k;
  std::string alpha;
  std::uint64_t seed = 0;
  int bits = 8;
  bool raw = false;
};

int cmd_infer(const InferArgs& a) {
  const RunConfig cfg = a.config.empty() ? RunConfig::defaults() : RunConfig::load(a.config);
  const Denoiser model = Denoiser::load(a.checkpoint);
  const ImageCorpus input = load_corpus(a.input, CorpusRole::Noisy);
  EnsembleConfig ec;
  ec.k = a.k.value_or(cfg.inference.k);
  ec.alpha_spec = !a.alpha.empty() ? parse_alpha(a.alpha) : cfg.inference.alpha.value_or(training_alpha(model));
  ec.tile = cfg.inference.tile;
  ec.overlap = cfg.inference.overlap;
  ec.validate();
  fs::create_directories(a.out);
  log_line("inference: K=" + std::to_string(ec.k) + ", alpha " + ec.alpha_spec.to_string() + ", " +
           std::to_string(input.size()) + " image(s)");
  for (std::size_t i = 0; i < input.scenes.size(); ++i) {
    EnsembleConfig per = ec;
    per.seed = RngStream(a.seed, "infer", i).key();
    const ImageTensor out = tiled_denoise(model, input.scenes[i].image, per);
    write_png(fs::path(a.out) / (input.scenes[i].id + ".png"), out, a.bits);
    if (a.raw) write_f32_file(fs::path(a.out) / (input.scenes[i].id + ".f32"), out.values());
  }
  return kExitOk;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& out, double range) {
  const ImageCorpus pred = load_corpus(pred_dir, CorpusRole::Noisy);
  const ImageCorpus gt = load_corpus(gt_dir, CorpusRole::PairedGroundTruth);
  std::map<std::string, const ImageTensor*> truth;
  for (const auto& s : gt.scenes) truth[s.id] = &s.image;
  std::ostringstream csv;
  csv << std::setprecision(10) << "scene_id,psnr,ssim\n";
  double psum = 0.0;
  double ssum = 0.0;
  std::size_t n = 0;
  std::vector<std::string> missing;
  for (const auto& s : pred.scenes) {
    const auto it = truth.find(s.id);
    if (it == truth.end()) {
      missing.push_back(s.id);
      continue;
    }
    // range 255 on [0, 1] data is the mismatched convention, kept for comparison
    const double p = psnr(s.image, *it->second);
    const double q = ssim(s.image, *it->second, range);
    csv << s.id << ',' << p << ',' << q << '\n';
    psum += p;
    ssum += q;
    ++n;
  }
  if (!missing.empty()) {
    std::string msg = "no ground truth for:";
    for (const auto& id : missing) msg += " " + id;
    throw InvalidArgument(msg);
  }
  if (n == 0) throw InvalidArgument("eval: no images to compare");
  csv << "mean," << psum / n << ',' << ssum / n << '\n';
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(out, csv.str());
    log_line("mean PSNR " + std::to_string(psum / n) + " dB, SSIM " + std::to_string(ssum / n) + " -> " + out);
  }
  return kExitOk;
}

int cmd_ablate(const std::string& suite, const std::string& config, std::optional<std::uint64_t> seed,
               const std::string& out) {
  RunConfig cfg = config.empty() ? RunConfig::defaults() : RunConfig::load(config);
  if (seed) cfg.set_seed(*seed);
  std::vector<std::string> suites;
  if (suite == "all") {
    suites = ablation_suites();
  } else {
    if (std::find(ablation_suites().begin(), ablation_suites().end(), suite) == ablation_suites().end()) {
      std::string msg = "unknown suite '" + suite + "'; choose one of: all";
      for (const auto& s : ablation_suites()) msg += ", " + s;
      throw ConfigError(msg);
    }
    suites = {suite};
  }
  const fs::path dir = out.empty() ? default_run_dir(cfg, "ablate") : fs::path(out);
  RunLock lock(dir);
  write_text(dir / "config.json", cfg.to_json().dump(2) + "\n");
  ToyStudy study(cfg.study, log_line);
  bool any_failed = false;
  for (const auto& s : suites) {
    const AblationTable table = run_ablation(s, study);
    write_text(dir / (s + ".csv"), table.to_csv());
    write_text(dir / (s + ".svg"), table.to_svg());
    write_text(dir / (s + ".txt"), table.to_text());
    std::cout << '\n' << table.to_text();
    for (const auto& r : table.rows) any_failed = any_failed || !r.error.empty();
  }
  log_line("\nresults in " + dir.string());
  return any_failed ? kExitAssertion : kExitOk;
}

int cmd_klgap(std::int64_t trials, const std::string& patch, int levels, std::uint64_t seed) {
  const std::regex shape(R"((\d+)x(\d+))");
  std::smatch m;
  if (!std::regex_match(patch, m, shape)) throw ConfigError("--patch must look like 2x2");
  const int h = std::stoi(m[1]);
  const int w = std::stoi(m[2]);
  RngStream rng(seed, "klgap");
  const KlGapReport r = verify_kl_gap(trials, h, w, levels, rng);
  std::printf("%lld trials on %dx%d patches with %d levels: %lld violations (tolerance %.0e), min slack %.3e\n",
              static_cast<long long>(r.trials), h, w, levels, static_cast<long long>(r.violations), r.tolerance,
              r.min_slack);
  std::printf("%lld violations\n", static_cast<long long>(r.violations));
  return r.violations == 0 ? kExitOk : kExitAssertion;
}

struct ExtractArgs {
  std::string checkpoint;
  std::string noisy;
  std::string out;
  std::string alpha;
  std::uint64_t seed = 0;
  int passes = 1;
  int ensemble_k = 1;
};

int cmd_extract(const ExtractArgs& a) {
  const Denoiser model = Denoiser::load(a.checkpoint);
  const ImageCorpus noisy = load_corpus(a.noisy, CorpusRole::Noisy);
  ExtractOptions eo;
  eo.passes_per_image = a.passes;
  eo.ensemble_k = a.ensemble_k;
  eo.round_index = model.round_index() + 1;
  eo.lineage = {{"source_round", model.round_index()},
                {"source_checkpoint", fs::absolute(a.checkpoint).string()},
                {"source_init_hash", model.init_hash()}};
  RngStream rng(a.seed, "extract");
  const MaskRatioSpec alpha = a.alpha.empty() ? training_alpha(model) : parse_alpha(a.alpha);
  const NoiseBank bank = extract_pseudo_noise(model, noisy.scenes, alpha, rng, eo);
  bank.save(a.out);
  log_line("wrote " + std::to_string(bank.size()) + " residual(s) with alpha " + alpha.to_string() + " to " + a.out);
  return kExitOk;
}

int cmd_accept(const std::string& config, const std::string& only) {
  const RunConfig cfg = config.empty() ? RunConfig::defaults() : RunConfig::load(config);
  AcceptanceOptions opts;
  opts.log = log_line;
  if (!only.empty()) {
    std::stringstream ss(only);
    std::string tok;
    while (std::getline(ss, tok, ',')) opts.only.insert(std::stoi(tok));
  }
  const auto results = run_acceptance(cfg, opts);
  bool ok = true;
  for (const auto& r : results) {
    std::cout << format_result(r) << '\n';
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitAssertion;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"MID: mask, inpaint, denoise. Unpaired image denoising toolkit.", "mid"};
  app.require_subcommand(1);

  TrainArgs train;
  std::uint64_t train_seed = 0;
  int train_rounds = 0;
  auto* t = app.add_subcommand("train", "run the iterative training pipeline");
  t->add_option("--config", train.config, "JSON config file (defaults when omitted)");
  auto* seed_opt = t->add_option("--seed", train_seed, "override pipeline.seed");
  auto* rounds_opt = t->add_option("--rounds", train_rounds, "override pipeline.rounds");
  t->add_option("--resume", train.resume, "continue the run in this directory");
  t->add_option("--out", train.out, "run directory (default ${MID_RUN_ROOT:-runs}/run-<seed>-<hash>)");

  InferArgs infer;
  int infer_k = 10;
  auto* i = app.add_subcommand("infer", "denoise a directory of PNGs with masked ensembles");
  i->add_option("--checkpoint", infer.checkpoint, "checkpoint file")->required();
  i->add_option("--input", infer.input, "directory of noisy PNGs")->required();
  i->add_option("--out", infer.out, "output directory")->required();
  i->add_option("--config", infer.config, "config file for inference defaults");
  auto* k_opt = i->add_option("--k", infer_k, "ensemble size (default 10)");
  i->add_option("--alpha", infer.alpha, "masking ratio, 0.8 or 0.5,0.7 (default: checkpoint's)");
  i->add_option("--seed", infer.seed, "mask seed");
  i->add_option("--bits", infer.bits, "PNG bit depth, 8 or 16")->check(CLI::IsMember({8, 16}));
  i->add_flag("--raw", infer.raw, "also write float32 .f32 files");

  std::string pred_dir;
  std::string gt_dir;
  std::string eval_out;
  double ssim_range = 1.0;
  auto* e = app.add_subcommand("eval", "PSNR/SSIM of predictions against ground truth");
  e->add_option("--pred", pred_dir, "directory of predictions")->required();
  e->add_option("--gt", gt_dir, "directory of ground truth (same file names)")->required();
  e->add_option("--out", eval_out, "CSV output (stdout when omitted)");
  e->add_option("--ssim-range", ssim_range, "SSIM data range: 1 (default) or 255")->check(CLI::IsMember({1.0, 255.0}));

  std::string suite;
  std::string ablate_config;
  std::uint64_t ablate_seed = 0;
  std::string ablate_out;
  auto* ab = app.add_subcommand("ablate", "run an ablation suite on the toy benchmark");
  ab->add_option("suite", suite, "masking-ratio, rounds, ensemble, components, inpainter or all")->required();
  ab->add_option("--config", ablate_config, "JSON config file");
  auto* ab_seed = ab->add_option("--seed", ablate_seed, "override pipeline.seed");
  ab->add_option("--out", ablate_out, "output directory");

  std::int64_t trials = 100000;
  std::string patch = "2x2";
  int levels = 2;
  std::uint64_t kl_seed = 0;
  auto* kl = app.add_subcommand("klgap", "check KL(joint) >= KL(visible marginal) on random patch distributions");
  kl->add_option("--trials", trials, "number of random (p, q, split) triples");
  kl->add_option("--patch", patch, "patch shape HxW");
  kl->add_option("--levels", levels, "values per position");
  kl->add_option("--seed", kl_seed, "seed");

  ExtractArgs extract;
  auto* x = app.add_subcommand("extract", "extract a pseudo-noise bank with a trained model");
  x->add_option("--checkpoint", extract.checkpoint, "checkpoint file")->required();
  x->add_option("--noisy", extract.noisy, "directory of noisy PNGs")->required();
  x->add_option("--out", extract.out, "bank directory")->required();
  x->add_option("--alpha", extract.alpha, "masking ratio (default: checkpoint's)");
  x->add_option("--seed", extract.seed, "mask seed");
  x->add_option("--passes", extract.passes, "residuals per image");
  x->add_option("--ensemble-k", extract.ensemble_k, "masked passes averaged per residual");

  std::string accept_config;
  std::string accept_only;
  auto* ac = app.add_subcommand("accept", "run the acceptance criteria and print one line per criterion");
  ac->add_option("--config", accept_config, "JSON config file");
  ac->add_option("--only", accept_only, "comma-separated criterion numbers");

  std::string show_config;
  auto* cf = app.add_subcommand("config", "print the resolved config");
  cf->add_option("--config", show_config, "JSON config file");

  // set last: subcommands copy the footer of their parent at creation
  app.footer("\n" + config_help_text() +
             "\nEnvironment: MID_RUN_ROOT sets the root of default run directories (default: runs).\n"
             "Exit codes: 0 success, 1 usage error, 2 config error, 3 assertion failure, 4 I/O error.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*t) {
      if (*seed_opt) train.seed = train_seed;
      if (*rounds_opt) train.rounds = train_rounds;
      return cmd_train(train);
    }
    if (*i) {
      if (*k_opt) infer.k = infer_k;
      return cmd_infer(infer);
    }
    if (*e) return cmd_eval(pred_dir, gt_dir, eval_out, ssim_range);
    if (*ab) return cmd_ablate(suite, ablate_config, *ab_seed ? std::optional(ablate_seed) : std::nullopt, ablate_out);
    if (*kl) return cmd_klgap(trials, patch, levels, kl_seed);
    if (*x) return cmd_extract(extract);
    if (*ac) return cmd_accept(accept_config, accept_only);
    if (*cf) {
      const RunConfig c = show_config.empty() ? RunConfig::defaults() : RunConfig::load(show_config);
      std::cout << c.to_json().dump(2) << "\nhash " << c.hash() << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const InvalidArgument& err) {
    std::cerr << "invalid argument: " << err.what() << '\n';
    return kExitConfig;
  } catch (const IoError& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kExitIo;
  } catch (const InternalError& err) {
    std::cerr << "internal check failed: " << err.what() << '\n';
    return kExitAssertion;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mid
