#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pmns/pmns.h"

namespace {

int fail(int code) {
  std::fprintf(stderr, "pmns: %s\n", pmns_last_error());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random frequency-space initial data, delayed mild evolution and bound checks"};
  app.set_version_flag("--version", std::string(pmns_version()));
  app.require_subcommand(1);

  std::string config;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out_dir;
  std::vector<double> ladder;

  const char* experiments[] = {"sample", "evolve", "bounds", "concentrate", "density", "kernel-check",
                               "census"};
  const char* help[] = {"sample initial fields and write them as CSV",
                        "evolve a sampled field with the delayed mild scheme",
                        "iterate the uniform-estimate recurrences over a K ladder",
                        "per-block variance and exceedance experiment",
                        "bad-set density experiment",
                        "empirical constants of the kernel bounds",
                        "subblock overlap census"};
  std::vector<CLI::App*> subs;
  for (int i = 0; i < 7; ++i) {
    auto* s = app.add_subcommand(experiments[i], help[i]);
    s->add_option("--config", config, "JSON configuration file")->check(CLI::ExistingFile);
    s->add_option("--seed", seed, "master seed (overrides run.seed)");
    s->add_option("--threads", threads, "OpenMP threads (overrides run.threads)")
        ->check(CLI::PositiveNumber);
    s->add_option("--out-dir", out_dir, "root directory for run directories");
    s->add_option("--ladder", ladder, "comma-separated K values (overrides run.ladder)")
        ->delimiter(',');
    subs.push_back(s);
  }
  std::vector<std::string> report_dirs;
  auto* rep = app.add_subcommand("report", "merge completed runs into report.csv");
  rep->add_option("runs", report_dirs, "run directories")->required();
  rep->add_option("--out-dir", out_dir, "root directory for the report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : PMNS_EINVAL;
  }

  if (rep->parsed()) {
    std::vector<const char*> dirs;
    for (const auto& d : report_dirs) dirs.push_back(d.c_str());
    char buf[4096];
    const int rc = pmns_report(dirs.data(), dirs.size(), out_dir.empty() ? nullptr : out_dir.c_str(),
                               buf, sizeof buf);
    if (rc != PMNS_OK) return fail(rc);
    std::printf("%s\n", buf);
    return 0;
  }

  for (auto* s : subs) {
    if (!s->parsed()) continue;
    pmns_run* run = nullptr;
    int rc = pmns_run_open(config.empty() ? nullptr : config.c_str(), &run);
    if (rc != PMNS_OK) return fail(rc);
    if (rc == PMNS_OK && s->count("--seed")) rc = pmns_run_set_seed(run, seed);
    if (rc == PMNS_OK && s->count("--threads")) rc = pmns_run_set_threads(run, threads);
    if (rc == PMNS_OK && s->count("--ladder")) rc = pmns_run_set_ladder(run, ladder.data(), ladder.size());
    if (rc == PMNS_OK && s->count("--out-dir")) rc = pmns_run_set_out_dir(run, out_dir.c_str());
    if (rc == PMNS_OK) rc = pmns_run_execute(run, s->get_name().c_str());
    if (rc != PMNS_OK) {
      pmns_run_close(run);
      return fail(rc);
    }
    std::printf("%s\n", pmns_run_directory(run));
    pmns_run_close(run);
    return 0;
  }
  return PMNS_EINVAL;
}
