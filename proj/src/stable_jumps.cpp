#include "fragsim/stable_jumps.hpp"

#include <cmath>
#include <numeric>

#include "fragsim/errors.hpp"

namespace fragsim {

StableLevy StableLevy::from_laplace(double coefficient, double gamma) {
  StableLevy l{gamma, coefficient / std::tgamma(1.0 - gamma)};
  l.validate();
  return l;
}

void StableLevy::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("stable index must lie in (0, 1)");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("stable scale must be positive");
}

double StableLevy::tail_rate(double y) const { return scale * std::pow(y, -gamma); }

double StableLevy::small_jump_mean(double cutoff) const {
  return scale * gamma / (1.0 - gamma) * std::pow(cutoff, 1.0 - gamma);
}

double StableLevy::small_jump_variance(double cutoff) const {
  return scale * gamma / (2.0 - gamma) * std::pow(cutoff, 2.0 - gamma);
}

double StableLevy::laplace_exponent(double q) const { return scale * std::tgamma(1.0 - gamma) * std::pow(q, gamma); }

double OrderedJumps::total() const { return std::accumulate(sizes.begin(), sizes.end(), 0.0) + compensation; }

OrderedJumps ordered_jumps_given_first(const StableLevy& levy, double horizon, double floor, std::size_t max_count,
                                       double first_arrival, Rng& rng) {
  levy.validate();
  if (!(horizon >= 0.0)) throw ValidationError("jump window must be non-negative");
  if (!(floor > 0.0)) throw ValidationError("jump floor must be positive");
  OrderedJumps out;
  out.cutoff = floor;
  if (horizon == 0.0) return out;

  const double intensity = levy.scale * horizon;
  const double inv_gamma = -1.0 / levy.gamma;
  double arrival = first_arrival;
  for (;;) {
    const double size = std::pow(arrival / intensity, inv_gamma);
    if (size < floor) break;
    if (out.sizes.size() == max_count) {
      out.cutoff = out.sizes.back();
      break;
    }
    out.sizes.push_back(size);
    arrival += exponential(rng, 1.0);
  }
  out.compensation = horizon * levy.small_jump_mean(out.cutoff);
  return out;
}

OrderedJumps ordered_jumps(const StableLevy& levy, double horizon, double floor, std::size_t max_count, Rng& rng) {
  return ordered_jumps_given_first(levy, horizon, floor, max_count, exponential(rng, 1.0), rng);
}

}  // namespace fragsim
