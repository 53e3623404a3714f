#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

#include "fragsim/measures.hpp"
#include "fragsim/stable_jumps.hpp"

namespace fragsim {

struct WeightedEstimate {
  double value;
  double standard_error;
};

/// nu^beta realised through a pool of jump sequences.
///
/// The first Poisson arrival of each realization is drawn from a defensive mixture (half Exp(1),
/// half log-uniform on [1e-8, 1]) and carries the likelihood ratio as a weight; small first
/// arrivals give huge leading jumps and hence s_1 close to 1, which the rate at small eps needs.
/// Only the summary (s_1, T_1, weight) is kept; fractions are regenerated from the realization's
/// seed when it is resampled.
class StableDislocation final : public DislocationMeasure {
 public:
  StableDislocation(double beta, const StableDislocationOptions& opts);

  double rate(double eps) const override;
  double neglected_loss(double eps) const override;
  void sample_into(double eps, Rng& rng, Dislocation& out) const override;
  bool is_binary() const override { return false; }
  bool is_conservative() const override { return true; }
  std::string name() const override;

  double beta() const noexcept { return beta_; }
  double constant() const noexcept { return c_beta_; }
  std::size_t pool_size() const noexcept { return entries_.size(); }
  /// Weighted pool estimate of E[exp(-q T_1)].
  WeightedEstimate pool_laplace(double q) const;

 private:
  struct Entry {
    double s1;
    double total;
    double weight;
    double first_arrival;
    std::uint64_t seed;
  };
  void regenerate(const Entry& e, Dislocation& out) const;
  std::size_t eligible(double eps) const;

  double beta_;
  double c_beta_;
  StableDislocationOptions opts_;
  StableLevy levy_;
  std::vector<Entry> entries_;   // ascending in s1
  std::vector<double> prefix_;   // prefix sums of weight * total
  std::vector<double> suffix_loss_;  // suffix sums of weight * total * (1 - s1)
};

/// I^beta with the x^(-beta) factor cut at x_min(delta) and atoms filtered by total mass.
class StableImmigration final : public ImmigrationMeasure {
 public:
  StableImmigration(double beta, const StableImmigrationOptions& opts);

  double atom_rate(double delta) const override;
  MassPartition sample_atom(double delta, Rng& rng) const override;
  double neglected_mass(double delta) const override;
  std::optional<double> gamma() const override { return 1.0 - 1.0 / beta_; }
  bool singletons() const override { return false; }
  std::string name() const override;
  /// The atom total mass has tail rate beta / Gamma(1/beta) y^(-gamma), so the exponent is
  /// beta Gamma(1 - gamma) / Gamma(1/beta) q^gamma.
  std::optional<double> laplace_exponent(double q) const override;

  double beta() const noexcept { return beta_; }
  double median_total() const noexcept { return median_; }
  /// x_min(delta)^beta.
  double xmin_power(double delta) const;

 private:
  double beta_;
  double k_;
  StableImmigrationOptions opts_;
  StableLevy levy_;
  double median_ = 0.0;
  double acceptance_ = 0.0;       // E[min(1, (T_1 / c)^gamma)], c = median / ratio
  double moment_gamma_ = 0.0;     // E[T_1^gamma]
};

}  // namespace fragsim
