#pragma once

#include <cstddef>
#include <vector>

#include "fragsim/rng.hpp"

namespace fragsim {

/// Levy measure scale * gamma * x^(-1-gamma) dx on (0, inf), gamma in (0, 1).
/// The associated subordinator has Laplace exponent scale * Gamma(1-gamma) * q^gamma.
struct StableLevy {
  double gamma;
  double scale;

  /// Scale such that the Laplace exponent is `coefficient * q^gamma`.
  static StableLevy from_laplace(double coefficient, double gamma);

  void validate() const;

  /// Expected number of jumps larger than y per unit time.
  double tail_rate(double y) const;
  /// Expected sum of the jumps smaller than `cutoff` per unit time.
  double small_jump_mean(double cutoff) const;
  /// Variance of that sum per unit time.
  double small_jump_variance(double cutoff) const;
  double laplace_exponent(double q) const;
};

/// Jumps of a stable subordinator over a time window, largest first.
struct OrderedJumps {
  std::vector<double> sizes;  ///< non-increasing
  double compensation = 0.0;  ///< expected sum of the jumps that were not generated
  double cutoff = 0.0;        ///< every jump above this was generated
  double total() const;
};

/// Generates the jumps of the subordinator over a window of length `horizon` in decreasing
/// order (the Poisson arrivals G_1 < G_2 < ... of a unit-rate process mapped through the inverse
/// tail, size_k = (G_k / (scale*horizon))^(-1/gamma)). Generation stops below `floor` or after
/// `max_count` jumps; the remainder is replaced by its mean.
OrderedJumps ordered_jumps(const StableLevy& levy, double horizon, double floor, std::size_t max_count, Rng& rng);

/// Same, with the first arrival G_1 supplied by the caller (for importance sampling of the
/// largest jump). G_1 is Exp(1) under the true law.
OrderedJumps ordered_jumps_given_first(const StableLevy& levy, double horizon, double floor, std::size_t max_count,
                                       double first_arrival, Rng& rng);

}  // namespace fragsim
