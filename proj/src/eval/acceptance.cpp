#include "mid/eval/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mid/core/error.hpp"
#include "mid/core/mask.hpp"
#include "mid/eval/kl.hpp"
#include "mid/eval/metrics.hpp"
#include "mid/model/gradcheck.hpp"
#include "mid/noise/noise.hpp"
#include "mid/noise/noise_bank.hpp"

namespace mid {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Relative file name -> bytes for every regular file below `dir`.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_bytes(e.path());
  }
  return out;
}

class IdentityDenoiser final : public ImageDenoiser {
 public:
  [[nodiscard]] ImageTensor denoise(const ImageTensor& masked) const override { return masked; }
  [[nodiscard]] int downsample_factor() const override { return 1; }
};

bool bit_equal(const ImageTensor& a, const ImageTensor& b) {
  return a.same_shape(b) && std::memcmp(a.values().data(), b.values().data(), a.values().size() * sizeof(float)) == 0;
}

std::vector<Scene> random_scenes(int count, int h, int w, int c, std::uint64_t seed) {
  std::vector<Scene> out;
  for (int i = 0; i < count; ++i) {
    RngStream rng(seed, "acceptance-scene", static_cast<std::uint64_t>(i));
    ImageTensor img(h, w, c);
    for (float& v : img.data()) v = static_cast<float>(rng.uniform());
    out.push_back({"s" + std::to_string(i), img});
  }
  return out;
}

// One line per failed sub-check; empty when all hold.
using Checks = std::vector<std::string>;

void check(Checks& failures, bool ok, const std::string& what) {
  if (!ok) failures.push_back(what);
}

Checks mask_statistics() {
  Checks f;
  for (double alpha : {0.2, 0.5, 0.8}) {
    RngStream rng(7, "mask");
    const BinaryMask m = sample_mask(256, 256, alpha, rng);
    const double n = 256.0 * 256.0;
    const double sd = std::sqrt(n * alpha * (1.0 - alpha));
    check(f, std::abs(static_cast<double>(m.masked_count()) - n * alpha) <= 6.0 * sd,
          "mask count outside 6-sigma binomial bound at alpha " + fmt("%.1f", alpha));
  }
  RngStream rng(7, "mask");
  check(f, sample_mask(64, 64, 0.0, rng).masked_count() == 0, "alpha 0 masked some pixels");
  RngStream r1(7, "ratio");
  check(f, sample_mask_ratio(MaskRatioSpec::fixed(0.7), r1) == 0.7, "fixed ratio not returned exactly");
  for (int i = 0; i < 1000; ++i) {
    const double a = sample_mask_ratio(MaskRatioSpec::interval(0.5, 0.7), r1);
    if (a < 0.5 || a >= 0.7) {
      f.push_back("interval ratio outside [0.5, 0.7)");
      break;
    }
  }
  return f;
}

Checks residual_identities(const fs::path& work) {
  Checks f;
  nn::ArchitectureSpec arch;
  arch.channels = 3;
  arch.width = 2;
  RngStream init(11, "acceptance-init");
  const Denoiser model = Denoiser::create(arch, init);
  const auto scenes = random_scenes(3, 20, 24, 3, 5);
  RngStream rng(13, "acceptance-extract");
  ExtractOptions eo;
  const NoiseBank bank = extract_pseudo_noise(model, scenes, MaskRatioSpec::fixed(0.8), rng, eo);
  const fs::path dir = work / "residual-bank";
  fs::remove_all(dir);
  bank.save(dir);
  const NoiseBank loaded = NoiseBank::load(dir);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const ImageTensor& y = scenes[i].image;
    const PatchProvenance& prov = loaded.manifest()[i];
    RngStream replay = RngStream::from_key(prov.mask_seed);
    const BinaryMask mask = sample_mask(y.height(), y.width(), prov.mask_ratio, replay);
    const ImageTensor d = denoise_padded(model, apply_mask(y, mask));
    const ImageTensor r = subtract(y, d);
    check(f, bit_equal(r, loaded.patches()[i]), "stored residual differs from y - D(M * y) for " + scenes[i].id);
    const auto rv = loaded.patches()[i].values();
    const auto dv = d.values();
    const auto yv = y.values();
    for (std::size_t j = 0; j < yv.size(); ++j) {
      const float back = rv[j] + dv[j];
      const float scale = std::max({1.0f, std::abs(yv[j]), std::abs(dv[j])});
      if (std::abs(back - yv[j]) > 2.0f * std::numeric_limits<float>::epsilon() * scale) {
        f.push_back("residual + prediction does not reconstruct y within rounding for " + scenes[i].id);
        break;
      }
    }
  }
  const IdentityDenoiser identity;
  RngStream rng2(17, "acceptance-identity");
  const NoiseBank ib = extract_pseudo_noise(identity, scenes, MaskRatioSpec::fixed(0.5), rng2, eo);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const ImageTensor& y = scenes[i].image;
    RngStream replay = RngStream::from_key(ib.manifest()[i].mask_seed);
    const BinaryMask mask = sample_mask(y.height(), y.width(), ib.manifest()[i].mask_ratio, replay);
    ImageTensor expected = y;
    for (int yy = 0; yy < y.height(); ++yy) {
      for (int xx = 0; xx < y.width(); ++xx) {
        for (int c = 0; c < y.channels(); ++c) {
          if (mask.at(yy, xx) != 0) expected.at(yy, xx, c) = 0.0f;
        }
      }
    }
    check(f, bit_equal(ib.patches()[i], expected), "identity-denoiser residual is not (1 - M) * y for " + scenes[i].id);
  }
  return f;
}

Checks gradients() {
  Checks f;
  nn::ArchitectureSpec stack{"convstack", 1, 8, 3};
  const GradCheckResult a = gradient_check(stack, 3, 2, 8);
  check(f, a.max_rel_error <= 1e-3, "convstack gradient rel error " + fmt("%.2e", a.max_rel_error) + " at " +
                                        a.worst_param);
  nn::ArchitectureSpec unet{"unet", 2, 1, 3};
  const GradCheckResult b = gradient_check(unet, 4, 2, 8);
  check(f, b.max_rel_error <= 1e-3, "unet gradient rel error " + fmt("%.2e", b.max_rel_error) + " at " +
                                        b.worst_param);
  return f;
}

Checks metric_oracles() {
  Checks f;
  ImageTensor zero(16, 16, 1);
  ImageTensor tenth(16, 16, 1);
  ImageTensor one(16, 16, 1);
  for (float& v : tenth.data()) v = 0.1f;
  for (float& v : one.data()) v = 1.0f;
  check(f, psnr(zero, zero) == kPsnrCap, "identical images do not give the PSNR cap");
  check(f, std::abs(psnr(zero, tenth) - 20.0) < 1e-5, "constant 0.1 difference is not 20 dB");
  check(f, std::abs(psnr(zero, one)) < 1e-12, "constant 1.0 difference is not 0 dB");
  // reference values from scikit-image structural_similarity with gaussian
  // weights, sigma 1.5 and population covariance
  ImageTensor a(32, 32, 1);
  ImageTensor b(32, 32, 1);
  ImageTensor g(32, 32, 1);
  ImageTensor h(32, 32, 1);
  ImageTensor rgb_a(32, 32, 3);
  ImageTensor rgb_b(32, 32, 3);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const float v = static_cast<float>((y / 4 + x / 4) % 2);
      const double gv = (x / 31.0) * (0.5 + 0.5 * y / 31.0);
      a.at(y, x, 0) = v;
      b.at(y, x, 0) = 1.0f - v;
      g.at(y, x, 0) = static_cast<float>(gv);
      h.at(y, x, 0) = static_cast<float>(gv * gv);
      rgb_a.at(y, x, 0) = v;
      rgb_a.at(y, x, 1) = static_cast<float>(gv);
      rgb_a.at(y, x, 2) = static_cast<float>(gv * gv);
      rgb_b.at(y, x, 0) = 1.0f - v;
      rgb_b.at(y, x, 1) = static_cast<float>(gv * gv);
      rgb_b.at(y, x, 2) = static_cast<float>(gv);
    }
  }
  const struct {
    const char* name;
    double got;
    double want;
  } cases[] = {
      {"checkerboard vs inverse", ssim(a, b), -0.903411668365663},
      {"checkerboard vs inverse, range 255", ssim(a, b, 255.0), 0.9767436023961181},
      {"ramp vs squared ramp", ssim(g, h), 0.591882261525996},
      {"ramp vs squared ramp, range 255", ssim(g, h, 255.0), 0.9934051515522716},
      {"three-channel mix", ssim(rgb_a, rgb_b), 0.09345095156210965},
  };
  for (const auto& c : cases) {
    check(f, std::abs(c.got - c.want) <= 1e-6,
          std::string("SSIM ") + c.name + " = " + fmt("%.9f", c.got) + ", reference " + fmt("%.9f", c.want));
  }
  check(f, std::abs(ssim(g, g) - 1.0) < 1e-12, "SSIM of identical images is not 1");
  return f;
}

Checks round_trips(const fs::path& work) {
  Checks f;
  RngStream rng(19, "acceptance-bank");
  const NoiseBank bank = build_awgn_bank(5, 16, 3, 25.0 / 255.0, rng);
  const fs::path d1 = work / "bank-a";
  const fs::path d2 = work / "bank-b";
  fs::remove_all(d1);
  fs::remove_all(d2);
  bank.save(d1);
  NoiseBank::load(d1).save(d2);
  check(f, snapshot(d1) == snapshot(d2), "noise bank write-read-write is not byte-identical");
  const NoiseBank back = NoiseBank::load(d1);
  for (std::size_t i = 0; i < bank.size(); ++i) {
    check(f, bit_equal(bank.patches()[i], back.patches()[i]), "noise bank patch changed in round trip");
  }

  nn::ArchitectureSpec arch;
  arch.channels = 3;
  arch.width = 4;
  RngStream init(23, "acceptance-ckpt");
  const Denoiser model = Denoiser::create(arch, init, 2);
  const fs::path c1 = work / "a.mid";
  const fs::path c2 = work / "b.mid";
  model.save(c1);
  const Denoiser loaded = Denoiser::load(c1);
  loaded.save(c2);
  check(f, read_bytes(c1) == read_bytes(c2), "checkpoint save-load-save is not byte-identical");
  const ImageTensor probe = random_scenes(1, 16, 16, 3, 29).front().image;
  check(f, bit_equal(model.denoise(probe), loaded.denoise(probe)), "loaded checkpoint gives different outputs");
  check(f, loaded.round_index() == 2 && loaded.init_hash() == model.init_hash(), "checkpoint metadata changed");
  return f;
}

Checks resume_equivalence(const fs::path& work) {
  Checks f;
  const RunConfig cfg = tiny_run_config();
  const ToyBenchmark bench = make_toy_benchmark(cfg.study.benchmark);
  const fs::path straight = work / "resume-straight";
  const fs::path split = work / "resume-split";
  fs::remove_all(straight);
  fs::remove_all(split);
  PipelineOptions a;
  a.run_dir = straight;
  run_pipeline(bench.clean_train, bench.noisy_train, cfg.study.pipeline, a);
  PipelineOptions b;
  b.run_dir = split;
  b.stop_after_round = 1;
  run_pipeline(bench.clean_train, bench.noisy_train, cfg.study.pipeline, b);
  b.stop_after_round.reset();
  run_pipeline(bench.clean_train, bench.noisy_train, cfg.study.pipeline, b);
  const auto sa = snapshot(straight);
  const auto sb = snapshot(split);
  check(f, sa.size() == sb.size(), "resumed run produced a different set of files");
  for (const auto& [name, bytes] : sa) {
    const auto it = sb.find(name);
    if (it == sb.end() || it->second != bytes) f.push_back("resumed run differs in " + name);
  }
  return f;
}

}  // namespace

RunConfig determinism_run_config(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.study.pipeline.train.iterations = std::min(c.study.pipeline.train.iterations, 300);
  return c;
}

RunConfig tiny_run_config() {
  RunConfig c = RunConfig::defaults();
  c.study.benchmark.scene_count = 30;
  c.study.benchmark.scene_size = 16;
  c.study.benchmark.channels = 3;
  c.study.benchmark.seed = 5;
  PipelineConfig& p = c.study.pipeline;
  p.train.iterations = 6;
  p.train.batch_size = 2;
  p.train.patch_size = 8;
  p.train.log_every = 2;
  p.train.architecture.channels = 3;
  p.train.architecture.width = 2;
  p.awgn_bank_size = 8;
  p.eval_k = 3;
  p.seed = 21;
  c.study.inpainter_iterations = 4;
  return c;
}

std::string format_result(const CriterionResult& r) {
  char head[64];
  std::snprintf(head, sizeof head, "[%s] %d ", r.passed ? "PASS" : "FAIL", r.number);
  return std::string(head) + r.title + ": " + r.detail + " (" + fmt("%.1f", r.seconds) + " s)";
}

std::vector<CriterionResult> run_acceptance(const RunConfig& cfg, const AcceptanceOptions& options) {
  auto wanted = [&](int n) { return options.only.empty() || options.only.count(n) > 0; };
  auto say = [&](const std::string& m) {
    if (options.log) options.log(m);
  };
  const fs::path work = options.work_dir ? *options.work_dir : fs::temp_directory_path() / "mid-acceptance";
  fs::create_directories(work);

  std::vector<CriterionResult> results;
  auto run = [&](int n, const std::string& title, const std::function<std::pair<bool, std::string>()>& body) {
    if (!wanted(n)) return;
    say("criterion " + std::to_string(n) + ": " + title);
    const auto t0 = Clock::now();
    CriterionResult r;
    r.number = n;
    r.title = title;
    try {
      const auto [ok, detail] = body();
      r.passed = ok;
      r.detail = detail;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    say(format_result(r));
    results.push_back(r);
  };

  run(1, "KL gap on 2x2 binary patches", [&] {
    RngStream rng(cfg.seed(), "klgap");
    const auto t0 = Clock::now();
    const KlGapReport rep = verify_kl_gap(100000, 2, 2, 2, rng, 1e-9);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool ok = rep.violations == 0 && rep.trials >= 100000 && secs < 60.0;
    return std::pair{ok, std::to_string(rep.trials) + " trials, " + std::to_string(rep.violations) +
                             " violations, min slack " + fmt("%.3e", rep.min_slack) + ", " + fmt("%.1f", secs) + " s"};
  });

  const bool needs_study = wanted(2) || wanted(3) || wanted(4) || wanted(5) || wanted(6);
  std::unique_ptr<ToyStudy> study;
  if (needs_study) study = std::make_unique<ToyStudy>(cfg.study, options.log);
  const PipelineConfig& pc = cfg.study.pipeline;
  const int eval_k = pc.eval_k;
  // the pipeline's round 0 doubles as the masking-ratio sweep's 80% cell
  if (wanted(3) || wanted(4) || wanted(5)) study->pipeline_models();

  run(2, "masking-ratio trend", [&] {
    const double p0 = study->heldout(study->awgn_model(0.0), MaskRatioSpec::fixed(0.0), eval_k).psnr;
    const double p60 = study->heldout(study->awgn_model(0.6), MaskRatioSpec::fixed(0.6), eval_k).psnr;
    const double p80 = study->heldout(study->awgn_model(0.8), MaskRatioSpec::fixed(0.8), eval_k).psnr;
    const double best = std::max(p60, p80);
    return std::pair{p0 <= best - 2.0, "PSNR 0% " + fmt("%.2f", p0) + ", 60% " + fmt("%.2f", p60) + ", 80% " +
                                           fmt("%.2f", p80) + " dB; gap " + fmt("%.2f", best - p0) +
                                           " dB (need >= 2)"};
  });

  run(3, "iterative boosting trend", [&] {
    const auto& models = study->pipeline_models();
    if (pc.rounds < 3) return std::pair{false, std::string("config has fewer than 4 rounds")};
    const double r0 = study->heldout(models[0], pc.alpha_schedule[0], eval_k).psnr;
    const double r3 = study->heldout(models[3], pc.alpha_schedule[3], eval_k).psnr;
    std::string detail = "PSNR by round:";
    for (std::size_t k = 0; k < models.size(); ++k) {
      detail += " " + fmt("%.2f", study->heldout(models[k], pc.alpha_schedule[k], eval_k).psnr);
    }
    return std::pair{r3 - r0 >= 0.3, detail + " dB; round 3 - round 0 = " + fmt("%+.2f", r3 - r0) +
                                         " dB (need >= 0.3)"};
  });

  run(4, "ensemble trend", [&] {
    const Denoiser& m = study->pipeline_models().back();
    const MaskRatioSpec& a = pc.alpha_schedule.back();
    const double k1 = study->heldout(m, a, 1).psnr;
    const double k5 = study->heldout(m, a, 5).psnr;
    const double k10 = study->heldout(m, a, 10).psnr;
    const double k20 = study->heldout(m, a, 20).psnr;
    const bool mono = k5 >= k1 - 0.05 && k10 >= k5 - 0.05;
    const bool sat = k20 - k10 < 0.2;
    return std::pair{mono && sat, "PSNR K=1 " + fmt("%.2f", k1) + ", K=5 " + fmt("%.2f", k5) + ", K=10 " +
                                      fmt("%.2f", k10) + ", K=20 " + fmt("%.2f", k20) + " dB; K=20 gain " +
                                      fmt("%+.3f", k20 - k10) + " dB"};
  });

  run(5, "component knockout ordering", [&] {
    const auto& models = study->pipeline_models();
    const double no_mask = study->heldout(study->awgn_model(0.0), MaskRatioSpec::fixed(0.0), 1).psnr;
    const double no_iter = study->heldout(models.front(), pc.alpha_schedule.front(), eval_k).psnr;
    const double no_ens = study->heldout(models.back(), pc.alpha_schedule.back(), 1).psnr;
    const double full = study->heldout(models.back(), pc.alpha_schedule.back(), eval_k).psnr;
    const bool ok = no_mask < no_iter && no_iter <= no_ens && no_ens <= full && no_mask <= full - 2.0;
    return std::pair{ok, "w/o masking " + fmt("%.2f", no_mask) + " < w/o iterative " + fmt("%.2f", no_iter) +
                             " <= w/o ensembling " + fmt("%.2f", no_ens) + " <= full " + fmt("%.2f", full) + " dB"};
  });

  run(6, "inpainter recoverability", [&] {
    const std::vector<double> ratios = {0.2, 0.4, 0.6, 0.8, 0.9};
    std::vector<double> ps;
    double gain80 = 0.0;
    std::string detail = "PSNR";
    for (double a : ratios) {
      const auto [pred, masked] = study->inpainting_psnr(study->inpainter(a), a);
      ps.push_back(pred);
      if (a == 0.8) gain80 = pred - masked;
      detail += " " + fmt("%.0f%%", a * 100) + " " + fmt("%.2f", pred);
    }
    bool mono = true;
    for (std::size_t i = 1; i < ps.size(); ++i) mono = mono && ps[i] <= ps[i - 1] + 0.3;
    return std::pair{mono && gain80 >= 10.0,
                     detail + " dB; gain over masked input at 80% " + fmt("%.2f", gain80) + " dB (need >= 10)"};
  });

  run(7, "exact unit suites", [&] {
    const auto t0 = Clock::now();
    Checks all;
    const std::pair<const char*, std::function<Checks()>> parts[] = {
        {"mask statistics", mask_statistics},
        {"residual identities", [&] { return residual_identities(work); }},
        {"gradient check", gradients},
        {"PSNR/SSIM oracles", metric_oracles},
        {"bank and checkpoint round trips", [&] { return round_trips(work); }},
        {"resume equivalence", [&] { return resume_equivalence(work); }},
    };
    std::string names;
    for (const auto& [name, fn] : parts) {
      const Checks c = fn();
      names += std::string(names.empty() ? "" : ", ") + name + (c.empty() ? " ok" : " FAILED");
      all.insert(all.end(), c.begin(), c.end());
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::string detail = names;
    for (const auto& c : all) detail += "; " + c;
    if (secs >= 300.0) detail += "; took " + fmt("%.0f", secs) + " s (limit 300)";
    return std::pair{all.empty() && secs < 300.0, detail};
  });

  run(8, "determinism", [&] {
    const RunConfig det = determinism_run_config(cfg);
    const ToyBenchmark bench = make_toy_benchmark(det.study.benchmark);
    std::string csv[2];
    for (int i = 0; i < 2; ++i) {
      const fs::path dir = work / ("determinism-" + std::to_string(i));
      fs::remove_all(dir);
      PipelineOptions o;
      o.run_dir = dir;
      o.validation = &bench.paired_test;
      run_pipeline(bench.clean_train, bench.noisy_train, det.study.pipeline, o);
      csv[i] = read_bytes(dir / "metrics.csv");
    }
    const bool same = csv[0] == csv[1] && !csv[0].empty();
    const auto lines = std::count(csv[0].begin(), csv[0].end(), '\n');
    return std::pair{same, std::string(same ? "identical" : "different") + " metrics CSVs from two " +
                               std::to_string(det.study.pipeline.rounds + 1) + "-round runs of " +
                               std::to_string(det.study.pipeline.train.iterations) + " iterations (" +
                               std::to_string(lines) + " lines each)"};
  });

  if (options.report_dir && study) {
    fs::create_directories(*options.report_dir);
    for (const auto& suite : ablation_suites()) {
      const AblationTable t = run_ablation(suite, *study);
      std::ofstream(*options.report_dir / (suite + ".csv")) << t.to_csv();
      std::ofstream(*options.report_dir / (suite + ".svg")) << t.to_svg();
      std::ofstream(*options.report_dir / (suite + ".txt")) << t.to_text();
    }
  }
  return results;
}

}  // namespace mid
