#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "boltzlab/config.hpp"
#include "boltzlab/errors.hpp"
#include "boltzlab/harness.hpp"
#include "boltzlab/version.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool dry_run = false;
};

boltzlab::ExperimentConfig load_with_overrides(const std::string& path,
                                               const CommonFlags& flags) {
  auto cfg = boltzlab::load_config(path);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.seed_set) {
    cfg.seeds = {flags.seed};
    cfg.echo["seeds"] = cfg.seeds;
  }
  if (flags.threads > 0) cfg.threads = flags.threads;
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--out-dir", flags.out_dir, "override the artifact directory");
  cmd->add_option("--seed", flags.seed, "override the seed list with a single seed")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--threads", flags.threads, "worker threads (replicas run concurrently)");
  cmd->add_flag("--dry-run", flags.dry_run, "validate the config and exit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinetic-theory workbench: N-body ensembles, collision kernels, and the "
               "homogeneous kinetic solver"};
  app.set_version_flag("--version", boltzlab::kVersion);
  app.require_subcommand(1);

  std::string run_config, sweep_config, compare_dir;
  CommonFlags run_flags, sweep_flags;

  auto* run_cmd = app.add_subcommand("run", "execute one configured experiment");
  run_cmd->add_option("config", run_config, "experiment config (JSON)")->required();
  add_common(run_cmd, run_flags);

  auto* sweep_cmd =
      app.add_subcommand("sweep", "bridge runs across the full scaling schedule");
  sweep_cmd->add_option("config", sweep_config, "experiment config (JSON)")->required();
  add_common(sweep_cmd, sweep_flags);

  auto* compare_cmd = app.add_subcommand(
      "compare", "post-process bridge artifacts: the three-way closure comparison");
  compare_cmd->add_option("artifacts", compare_dir, "artifact directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const auto cfg = load_with_overrides(run_config, run_flags);
      if (run_flags.dry_run) {
        std::puts("config ok");
        return 0;
      }
      boltzlab::run_experiment(cfg);
    } else if (sweep_cmd->parsed()) {
      const auto cfg = load_with_overrides(sweep_config, sweep_flags);
      if (sweep_flags.dry_run) {
        std::puts("config ok");
        return 0;
      }
      boltzlab::grad_sweep(cfg);
    } else if (compare_cmd->parsed()) {
      boltzlab::compare_bogolyubov_artifacts(compare_dir);
    }
  } catch (const boltzlab::config_error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
