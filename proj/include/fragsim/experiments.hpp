#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fragsim/frag_engine.hpp"
#include "fragsim/measures.hpp"

namespace fragsim {

using Json = nlohmann::ordered_json;

/// A flat table written as one CSV per criterion.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Verdict {
  std::string id;
  std::string description;
  bool passed;
  Json detail;
};

/// Everything an experiment produced. Contains no wall-clock data, so equal inputs give equal
/// reports.
struct ConvergenceReport {
  std::string experiment;
  Json parameters = Json::object();
  std::vector<Table> tables;
  std::vector<Verdict> verdicts;
  Json diagnostics = Json::object();
  std::vector<std::string> warnings;
  /// Raw samples keyed by a descriptive name, dumped on request.
  std::map<std::string, std::vector<double>> raw;

  bool passed() const;
};

/// eps(m) for an initial mass m: either fixed or min(1/2, m^exponent).
struct EpsilonCoupling {
  std::optional<double> fixed;
  double exponent = -2.0;
  double at(double m) const;
  Json describe() const;
};

struct RunOptions {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool keep_raw = false;
};

/// Acceptance thresholds shared by the convergence experiments.
struct Thresholds {
  double ks = 0.05;
  double trend_slack = 2.0;  ///< allowed increase between cells, in pooled KS standard errors
  double laplace_sigmas = 3.0;
  /// Mean neglected mass per replica above which a truncation warning is raised.
  double neglected_tolerance = 0.01;
};

struct Theorem1Spec {
  RateFunction tau = RateFunction::power(0.0);
  DislocationPtr nu;
  ImmigrationPtr immigration;
  std::vector<double> m_grid;
  std::vector<double> probe_times;
  std::size_t samples = 10000;
  EpsilonCoupling epsilon;
  Truncation truncation;  ///< epsilon is overridden per cell
  double atom_floor = 1e-4;
  std::vector<double> laplace_q{0.5, 1.0, 2.0};
  Thresholds thresholds;
};

ConvergenceReport theorem1_experiment(const Theorem1Spec& spec, const RunOptions& run);

struct TimeScale {
  enum class Kind { phi_over_tau, power } kind = Kind::phi_over_tau;
  double exponent = 0.0;  ///< time = m^exponent for the power kind
  double at(const RateFunction& tau, const DislocationMeasure& nu, double m) const;
  Json describe() const;
};

struct Theorem2Spec {
  enum class Regime { i, ii } regime = Regime::i;
  RateFunction tau = RateFunction::power(0.0);
  DislocationPtr nu;
  ImmigrationPtr immigration;
  TimeScale time_scale;
  std::vector<double> m_grid;
  std::vector<double> probe_times;
  std::size_t samples = 10000;
  EpsilonCoupling epsilon;
  Truncation truncation;
  double atom_floor = 1e-4;
  bool loss_of_mass = false;       ///< must be declared for regime (ii)
  double f2_quantile = 0.99;
  double f2_threshold = 0.05;      ///< regime (ii): final-cell quantile of F_2 must fall below this
  std::vector<double> laplace_q{0.5, 1.0, 2.0};
  Thresholds thresholds;
};

ConvergenceReport theorem2_experiment(const Theorem2Spec& spec, const RunOptions& run);

struct SmallTimeSpec {
  double alpha = -0.5;
  DislocationPtr nu;
  ImmigrationPtr immigration;      ///< the limit of phi(m) nu_m
  std::optional<double> rate_scale;  ///< lim m^(-alpha) phi(m); estimated at the finest eps if absent
  std::vector<double> eps_grid;
  std::vector<double> probe_times;
  std::size_t samples = 10000;
  Truncation truncation;
  double atom_floor = 1e-4;
  bool total_mass = false;         ///< also compare the total-mass functional (full simulations)
  std::size_t total_mass_samples = 1000;
  /// Full simulations track every fragment, so they get their own, coarser truncation.
  Truncation total_mass_truncation{.epsilon = 1e-15, .loss_floor = 1e-6, .mass_floor = 1e-3};
  Thresholds thresholds;
};

ConvergenceReport small_time_experiment(const SmallTimeSpec& spec, const RunOptions& run);

struct CrossValidationSpec {
  double m = 1.0;
  double alpha = -0.5;
  std::vector<double> probe_times{0.5};
  std::size_t samples = 10000;
  std::size_t grid = std::size_t{1} << 20;
  Truncation truncation;
  Thresholds thresholds;
};

/// Excursion construction of the Brownian fragmentation against the engine with nu_Br.
ConvergenceReport cross_validate_brownian(const CrossValidationSpec& spec, const RunOptions& run);

struct StableImmigrationSpec {
  double beta = 1.5;
  std::vector<double> probe_times{1.0};
  std::size_t samples = 10000;
  double atom_floor = 1e-3;
  StableImmigrationOptions immigration;
  double jump_floor = 1e-12;
  std::size_t max_children = 256;
  /// Laplace check of T(r) against exp(-r q^(1/beta)).
  std::vector<double> laplace_r{1.0};
  std::vector<double> laplace_q{1.0};
  std::size_t laplace_samples = 100000;
  Thresholds thresholds;
};

/// Pure immigration I^beta against the subordinated representation T(rho(.)).
ConvergenceReport stable_immigration_experiment(const StableImmigrationSpec& spec, const RunOptions& run);

struct SamplerSuiteSpec {
  std::size_t samples = 2000;
  double laplace_sigmas = 3.0;
};

/// Quick statistical and invariant checks on every sampler.
ConvergenceReport validate_samplers(const SamplerSuiteSpec& spec, const RunOptions& run);

}  // namespace fragsim
