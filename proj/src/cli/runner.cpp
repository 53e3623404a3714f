#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "fragsim/cli.hpp"
#include "fragsim/report.hpp"

namespace fragsim::cli {

namespace {

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Refuses a directory that holds another run's artifacts.
void check_output_dir(const std::filesystem::path& dir, const std::string& hash) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir)) return;
  if (!fs::is_directory(dir)) throw ValidationError("output path " + dir.string() + " is not a directory");
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string previous;
    try {
      previous = nlohmann::json::parse(in).at("config_sha256").get<std::string>();
    } catch (const std::exception&) {
      throw ValidationError("output directory " + dir.string() + " has an unreadable manifest; refusing to overwrite");
    }
    if (previous != hash)
      throw ValidationError("output directory " + dir.string() +
                            " holds results of a different config (hash " + previous + "); refusing to overwrite");
    return;
  }
  if (!fs::is_empty(dir))
    throw ValidationError("output directory " + dir.string() + " is not empty and has no manifest; refusing to overwrite");
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < length; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

ConvergenceReport execute(const ExperimentConfig& config) {
  return std::visit(
      [&](const auto& spec) -> ConvergenceReport {
        using S = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<S, Theorem1Spec>) return theorem1_experiment(spec, config.run);
        else if constexpr (std::is_same_v<S, Theorem2Spec>) return theorem2_experiment(spec, config.run);
        else if constexpr (std::is_same_v<S, SmallTimeSpec>) return small_time_experiment(spec, config.run);
        else if constexpr (std::is_same_v<S, CrossValidationSpec>) return cross_validate_brownian(spec, config.run);
        else if constexpr (std::is_same_v<S, StableImmigrationSpec>) return stable_immigration_experiment(spec, config.run);
        else return validate_samplers(spec, config.run);
      },
      config.spec);
}

int run(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& log) {
  ExperimentConfig config;
  std::string hash;
  try {
    config = load_config(config_path, overrides);
    hash = sha256_hex(config.canonical);
    check_output_dir(config.output, hash);
  } catch (const ValidationError& e) {
    log << "validation error: " << e.what() << '\n';
    return kValidationError;
  }

  ConvergenceReport report;
  try {
    report = execute(config);
  } catch (const ValidationError& e) {
    log << "validation error: " << e.what() << '\n';
    return kValidationError;
  } catch (const std::exception& e) {
    log << "runtime error: " << e.what() << '\n';
    return kRuntimeError;
  }

  try {
    write_report_files(config.output, report, config.run.keep_raw);
    const Json manifest{{"config", config_path.string()},
                        {"config_sha256", hash},
                        {"experiment", config.kind},
                        {"seed", config.run.seed},
                        {"threads", config.run.threads},
                        {"version", FRAGSIM_VERSION},
                        {"created_utc", utc_now()}};
    std::ofstream out(config.output / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write manifest");
  } catch (const std::exception& e) {
    log << "runtime error: " << e.what() << '\n';
    return kRuntimeError;
  }

  for (const auto& w : report.warnings) log << "warning: " << w << '\n';
  for (const auto& v : report.verdicts) log << (v.passed ? "PASS " : "FAIL ") << v.id << '\n';
  log << (report.passed() ? "all verdicts passed" : "some verdicts failed") << " -> " << config.output.string() << '\n';
  return report.passed() ? kPass : kCriterionFailure;
}

}  // namespace fragsim::cli
