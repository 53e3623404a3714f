#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "fragsim/measures.hpp"
#include "fragsim/rng.hpp"
#include "fragsim/stable_jumps.hpp"

namespace fragsim {

struct Jump {
  double time;
  double size;  ///< > 0; +infinity marks killing
};

/// A subordinator path on [0, horizon]: drift * t plus the sum of the jumps up to t.
class JumpPath {
 public:
  JumpPath() = default;
  /// Jumps must have strictly increasing times in [0, horizon] and positive sizes.
  JumpPath(double horizon, double drift, std::vector<Jump> jumps);

  double horizon() const noexcept { return horizon_; }
  double drift() const noexcept { return drift_; }
  std::span<const Jump> jumps() const noexcept { return jumps_; }

  /// drift * t + sum of jumps at times <= t (right-continuous).
  double evaluate(double t) const;
  /// Number of jumps at times <= t.
  std::size_t jumps_until(double t) const;

  /// Appends a block [horizon, horizon + length] with the given jumps (times relative to the
  /// block start). Only used for drift-free paths.
  void extend(double length, std::span<const Jump> block);

  void write_csv(std::ostream& os) const;
  void write_jsonl(std::ostream& os) const;

 private:
  double horizon_ = 0.0;
  double drift_ = 0.0;
  std::vector<Jump> jumps_;
  std::vector<double> cumulative_;  // cumulative_[i] = sum of sizes of jumps_[0..i]
};

/// Stable subordinator with Levy density C gamma x^(-1-gamma) on [0, horizon]: jumps above
/// `jump_floor` form a Poisson process of rate C floor^(-gamma) with Pareto sizes; the discarded
/// small jumps are replaced by their mean as a drift.
JumpPath stable_path(double gamma, double c, double horizon, double jump_floor, Rng& rng);

/// xi(t) = sum of -log(s_1) over the dislocations of rate R(eps) up to t.
JumpPath xi_path(const DislocationMeasure& nu, double eps, double horizon, Rng& rng);

/// A xi path that grows in fixed-length blocks on demand.
class ExtendableXi {
 public:
  ExtendableXi(DislocationPtr nu, double eps, double block, Rng& rng);
  const JumpPath& path() const noexcept { return path_; }
  void extend();

 private:
  DislocationPtr nu_;
  double eps_;
  double block_;
  Rng* rng_;
  JumpPath path_;
};

enum class RhoStatus { finite, infinite, horizon_exhausted };

struct RhoResult {
  RhoStatus status;
  double value;  ///< meaningful when status == finite
};

/// int_0^u dr / tau(m exp(-xi(r))), exact for piecewise-constant xi; u <= horizon.
double integrated_clock(const JumpPath& xi, const RateFunction& tau, double m, double u);

/// rho(t) = inf{u : int_0^u dr / tau(m exp(-xi(r))) > t}, by exact piecewise-linear inversion.
/// `infinite` means the clock never reaches t (xi killed first); `horizon_exhausted` means the
/// path is too short to decide.
RhoResult rho_time_change(const JumpPath& xi, const RateFunction& tau, double m, double t);

/// Same query, extending the path block by block until it can be answered.
RhoResult rho_time_change(ExtendableXi& xi, const RateFunction& tau, double m, double t,
                          std::size_t max_blocks = 1u << 20);

/// Lambda(t) = m exp(-xi(rho(t))); 0 when rho(t) is infinite. Throws HorizonExhausted.
double lambda_process(const JumpPath& xi, const RateFunction& tau, double m, double t);

/// The k largest jump sizes at times <= t, descending and padded with zeros.
std::vector<double> largest_jumps(const JumpPath& path, double t, std::size_t k);

}  // namespace fragsim
