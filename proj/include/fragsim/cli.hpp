#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>

#include "fragsim/errors.hpp"
#include "fragsim/experiments.hpp"

namespace fragsim::cli {

enum ExitCode : int { kPass = 0, kCriterionFailure = 1, kValidationError = 2, kRuntimeError = 3 };

/// A config problem located either by line/column (syntax) or by JSON pointer (field).
class ConfigError : public ValidationError {
 public:
  ConfigError(const std::string& where, const std::string& what)
      : ValidationError(where + ": " + what), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::filesystem::path> out;
  bool dump_raw = false;
};

using ExperimentSpec = std::variant<Theorem1Spec, Theorem2Spec, SmallTimeSpec, CrossValidationSpec,
                                    StableImmigrationSpec, SamplerSuiteSpec>;

struct ExperimentConfig {
  std::string kind;
  ExperimentSpec spec;
  RunOptions run;
  std::filesystem::path output;
  /// The parsed config with the effective seed, serialized canonically; its hash names the run.
  std::string canonical;
};

/// Parses and validates config text. `source` names the text in error messages.
ExperimentConfig parse_config(std::string_view text, const Overrides& overrides, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides);

DislocationPtr parse_dislocation(const std::string& id, std::uint64_t seed = 0x5eed);
ImmigrationPtr parse_immigration(const std::string& id, std::uint64_t seed = 0x1b57);

ConvergenceReport execute(const ExperimentConfig& config);

std::string sha256_hex(std::string_view data);

/// Loads, runs and writes every artifact; returns the exit code. Messages go to `log`.
int run(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& log);

}  // namespace fragsim::cli
