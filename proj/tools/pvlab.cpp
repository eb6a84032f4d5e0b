// pvlab: build pseudo videos from still images, run exact Markov-order
// oracles, fit last-frame predictors and verify the whole chain with one
// deterministic batch suite.

#include <CLI11.hpp>
#include <string>

#include "pvlab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"pseudo-video construction and Markov-order analysis toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pvlab::cli::kToolVersion);

  pvlab::cli::RunOptions options;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* config = sub->add_option("--config", options.config_path,
                                   "JSON experiment configuration");
    if (config_required) config->required();
    sub->add_option("--out", options.out_dir, "output directory")
        ->capture_default_str();
    sub->add_option("--seed", seed, "override the config seed")
        ->each([&](const std::string&) { options.has_seed_override = true; });
    sub->add_option("--threads", options.threads, "worker threads")
        ->envname("PVLAB_THREADS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  };

  CLI::App* augment = app.add_subcommand(
      "augment", "corrupt still images into pseudo-video tensor files");
  add_common(augment, true);
  CLI::App* oracle = app.add_subcommand(
      "oracle", "closed-form and brute-force minimum reconstruction errors");
  add_common(oracle, true);
  CLI::App* fit = app.add_subcommand(
      "fit", "train last-frame predictors on sampled chains");
  add_common(fit, true);
  CLI::App* generate = app.add_subcommand(
      "generate", "autoregressive context-window generation");
  add_common(generate, true);
  CLI::App* verify = app.add_subcommand(
      "verify", "run the full nested-context verification suite");
  add_common(verify, false);

  CLI11_PARSE(app, argc, argv);
  options.seed_override = seed;

  if (augment->parsed())
    return pvlab::cli::run_command("augment", pvlab::cli::cmd_augment, options);
  if (oracle->parsed())
    return pvlab::cli::run_command("oracle", pvlab::cli::cmd_oracle, options);
  if (fit->parsed()) return pvlab::cli::run_command("fit", pvlab::cli::cmd_fit, options);
  if (generate->parsed())
    return pvlab::cli::run_command("generate", pvlab::cli::cmd_generate, options);
  return pvlab::cli::run_command("verify", pvlab::cli::cmd_verify, options);
}
