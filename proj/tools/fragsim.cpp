#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "fragsim/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Fragmentation and fragmentation-with-immigration experiment runner"};
  std::string config;
  fragsim::cli::Overrides overrides;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out;
  app.add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Master seed; overrides the config");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads (default: $FRAGSIM_THREADS or config)")
                          ->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", out, "Output directory; overrides the config");
  app.add_flag("--dump-raw", overrides.dump_raw, "Also write raw_samples.jsonl");
  app.set_version_flag("--version", FRAGSIM_VERSION);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fragsim::cli::kValidationError;
  }

  if (*seed_opt) overrides.seed = seed;
  if (*threads_opt) {
    overrides.threads = threads;
  } else if (const char* env = std::getenv("FRAGSIM_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n < 1) throw std::invalid_argument("non-positive");
      overrides.threads = static_cast<unsigned>(n);
    } catch (const std::exception&) {
      std::cerr << "validation error: FRAGSIM_THREADS must be a positive integer\n";
      return fragsim::cli::kValidationError;
    }
  }
  if (*out_opt) overrides.out = out;
  return fragsim::cli::run(config, overrides, std::cerr);
}
