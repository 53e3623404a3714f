#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fragsim/partitions.hpp"
#include "fragsim/rng.hpp"

namespace fragsim {

/// Excursion of length m sampled on the grid k m / n, k = 0..n.
struct ExcursionGrid {
  double length = 0.0;
  std::size_t n = 0;
  std::vector<double> values;  ///< n + 1 entries, zero at both ends
};

/// Gaussian random-walk bridge of n steps, rotated at its minimum (Vervaat) and scaled to length m.
ExcursionGrid brownian_excursion(double m, std::size_t n, Rng& rng);
/// Same, reusing the grid's storage.
void brownian_excursion_into(ExcursionGrid& grid, double m, std::size_t n, Rng& rng);

/// Components of {x : 2 e(x) > t}: each maximal run of grid points above the level contributes
/// run_length * m / n; the rest of the length is dust.
MassPartition excursion_fragmentation_marginal(const ExcursionGrid& e, double t);
/// Largest component only.
double excursion_largest_component(const ExcursionGrid& e, double t);

/// P(max of a standard excursion <= x) = 1 + 2 sum_k (1 - 4 k^2 x^2) exp(-2 k^2 x^2).
double excursion_max_cdf(double x);

struct SubordinatedSample {
  double t;
  double rho;                   ///< rho(t)
  double total;                 ///< T(rho(t))
  std::vector<double> largest;  ///< k largest jumps of T before rho(t), zero-padded
};

struct SubordinatedOptions {
  double jump_floor = 1e-12;
  std::size_t max_children = 256;
  std::size_t k = 2;
};

/// rho: stable subordinator of index beta - 1 with Laplace exponent beta q^(beta-1); T: an
/// independent stable subordinator with Laplace exponent q^(1/beta). Returns T(rho(t)) and the
/// largest jumps of T on [0, rho(t)] at each (non-decreasing) probe time.
std::vector<SubordinatedSample> subordinated_stable_representation(double beta, std::span<const double> probe_times,
                                                                   const SubordinatedOptions& opts, Rng& rng);

}  // namespace fragsim
