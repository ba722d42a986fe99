// Runs acceptance criteria 1-8 on the default toy configuration and prints
// one PASS/FAIL line per criterion. Exit status is the number of failures.
#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "mid/cli/run_config.hpp"
#include "mid/eval/acceptance.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mid acceptance criteria"};
  std::vector<int> only;
  std::string config;
  std::string work_dir;
  std::string report_dir;
  bool quiet = false;
  app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
  app.add_option("--config", config, "run config JSON (defaults otherwise)");
  app.add_option("--work-dir", work_dir, "scratch directory");
  app.add_option("--report-dir", report_dir, "write ablation tables here");
  app.add_flag("--quiet", quiet, "only print the result lines");
  CLI11_PARSE(app, argc, argv);

  try {
    const mid::RunConfig cfg = config.empty() ? mid::RunConfig::defaults() : mid::RunConfig::load(config);
    mid::AcceptanceOptions opt;
    opt.only.insert(only.begin(), only.end());
    if (!work_dir.empty()) opt.work_dir = work_dir;
    if (!report_dir.empty()) opt.report_dir = report_dir;
    if (!quiet) opt.log = [](const std::string& m) { std::cerr << m << '\n'; };
    const auto results = mid::run_acceptance(cfg, opt);
    int failed = 0;
    for (const auto& r : results) {
      std::cout << mid::format_result(r) << '\n';
      failed += r.passed ? 0 : 1;
    }
    std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
    return failed;
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << '\n';
    return 100;
  }
}
