#include "fragsim/excursion_models.hpp"

#include <algorithm>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <functional>

#include "fragsim/errors.hpp"
#include "fragsim/stable_jumps.hpp"

namespace fragsim {

void brownian_excursion_into(ExcursionGrid& grid, double m, std::size_t n, Rng& rng) {
  if (n < 2) throw ValidationError("excursion grid needs n >= 2");
  if (!(m > 0.0) || !std::isfinite(m)) throw ValidationError("excursion length must be positive");
  boost::random::normal_distribution<double> normal;
  thread_local std::vector<double> walk;
  walk.resize(n + 1);
  // Walk with unit steps; the bridge is W_k - (k/n) W_n and its minimum sits at k_min.
  walk[0] = 0.0;
  for (std::size_t k = 1; k <= n; ++k) walk[k] = walk[k - 1] + normal(rng);
  const double slope = walk[n] / static_cast<double>(n);
  std::size_t k_min = 0;
  double b_min = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double b = walk[k] - slope * static_cast<double>(k);
    if (b < b_min) {
      b_min = b;
      k_min = k;
    }
  }
  // Vervaat: read the bridge cyclically from k_min. Steps have variance 1, the unit-length
  // excursion needs 1/n, and Brownian scaling adds sqrt(m).
  const double scale = std::sqrt(m / static_cast<double>(n));
  std::vector<double>& v = grid.values;
  v.resize(n + 1);
  const auto write = [&](std::size_t j, std::size_t k) {
    v[j] = (walk[k] - slope * static_cast<double>(k) - b_min) * scale;
  };
  for (std::size_t j = 0; j < n - k_min; ++j) write(j, k_min + j);
  for (std::size_t j = n - k_min; j < n; ++j) write(j, j + k_min - n);
  v[0] = 0.0;
  v[n] = 0.0;
  grid.length = m;
  grid.n = n;
}

ExcursionGrid brownian_excursion(double m, std::size_t n, Rng& rng) {
  ExcursionGrid g;
  brownian_excursion_into(g, m, n, rng);
  return g;
}

namespace {

template <class Visit>
void for_each_run(const ExcursionGrid& e, double t, Visit&& visit) {
  if (!(t >= 0.0)) throw ValidationError("level must be non-negative");
  std::size_t run = 0;
  for (const double x : e.values) {
    if (2.0 * x > t) {
      ++run;
    } else if (run > 0) {
      visit(run);
      run = 0;
    }
  }
  if (run > 0) visit(run);
}

}  // namespace

MassPartition excursion_fragmentation_marginal(const ExcursionGrid& e, double t) {
  const double cell = e.length / static_cast<double>(e.n);
  std::vector<double> lengths;
  for_each_run(e, t, [&](std::size_t run) { lengths.push_back(static_cast<double>(run) * cell); });
  std::sort(lengths.begin(), lengths.end(), std::greater<>());
  double sum = 0.0;
  for (const double l : lengths) sum += l;
  return MassPartition::from_sorted(std::move(lengths), std::max(0.0, e.length - sum));
}

double excursion_largest_component(const ExcursionGrid& e, double t) {
  std::size_t best = 0;
  for_each_run(e, t, [&](std::size_t run) { best = std::max(best, run); });
  return static_cast<double>(best) * e.length / static_cast<double>(e.n);
}

double excursion_max_cdf(double x) {
  if (x <= 0.0) return 0.0;
  double sum = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double kx2 = static_cast<double>(k * k) * x * x;
    const double term = (1.0 - 4.0 * kx2) * std::exp(-2.0 * kx2);
    sum += term;
    if (std::abs(term) < 1e-18 && k > 2) break;
  }
  return std::clamp(1.0 + 2.0 * sum, 0.0, 1.0);
}

std::vector<SubordinatedSample> subordinated_stable_representation(double beta, std::span<const double> probe_times,
                                                                   const SubordinatedOptions& opts, Rng& rng) {
  if (!(beta > 1.0 && beta < 2.0)) throw ValidationError("stable index beta must lie in (1, 2)");
  if (opts.k < 1 || opts.max_children < opts.k) throw ValidationError("need 1 <= k <= max_children");
  const StableLevy rho_levy = StableLevy::from_laplace(beta, beta - 1.0);
  const StableLevy t_levy = StableLevy::from_laplace(1.0, 1.0 / beta);

  std::vector<SubordinatedSample> out;
  out.reserve(probe_times.size());
  double prev_t = 0.0, rho = 0.0, total = 0.0;
  std::vector<double> top;
  for (const double t : probe_times) {
    if (!(t >= prev_t)) throw ValidationError("probe times must be non-negative and non-decreasing");
    // Independent increments of rho over [prev_t, t], then of T over [rho(prev_t), rho(t)].
    const double drho = t > prev_t ? ordered_jumps(rho_levy, t - prev_t, opts.jump_floor, opts.max_children, rng).total()
                                   : 0.0;
    if (drho > 0.0) {
      const OrderedJumps j = ordered_jumps(t_levy, drho, opts.jump_floor, opts.max_children, rng);
      total += j.total();
      top.insert(top.end(), j.sizes.begin(), j.sizes.end());
      std::sort(top.begin(), top.end(), std::greater<>());
      if (top.size() > opts.k) top.resize(opts.k);
    }
    rho += drho;
    prev_t = t;
    SubordinatedSample s{t, rho, total, top};
    s.largest.resize(opts.k, 0.0);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fragsim
