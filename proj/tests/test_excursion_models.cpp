#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fragsim/errors.hpp"
#include "fragsim/excursion_models.hpp"
#include "fragsim/stats.hpp"

using namespace fragsim;

namespace {

// Dual theta series of the excursion maximum law, converging fast for small x.
double max_cdf_dual(double x) {
  double s = 0.0;
  for (int k = 1; k < 60; ++k) s += k * k * std::exp(-std::numbers::pi * std::numbers::pi * k * k / (2.0 * x * x));
  return std::numbers::pi / 2.0 * std::pow(2.0 * std::numbers::pi, 1.5) / (x * x * x) * s;
}

double grid_max(const ExcursionGrid& e) { return *std::max_element(e.values.begin(), e.values.end()); }

}  // namespace

TEST_CASE("excursion grid shape") {
  Rng rng = make_rng(51, {});
  const ExcursionGrid e = brownian_excursion(3.0, 1000, rng);
  REQUIRE(e.values.size() == 1001);
  CHECK(e.values.front() == 0.0);
  CHECK(e.values.back() == 0.0);
  CHECK(std::all_of(e.values.begin(), e.values.end(), [](double v) { return v >= 0.0; }));
  CHECK(e.length == 3.0);
}

TEST_CASE("maximum law of the standard excursion") {
  for (const double x : {0.5, 1.0, 1.5}) CHECK(excursion_max_cdf(x) == doctest::Approx(max_cdf_dual(x)).epsilon(1e-10));
  // Both the rotation minimum and the maximum are read off the grid, each off by about 0.5826 steps.
  const std::size_t n = 4096;
  const double level = 1.0 - 2.0 * 0.5826 / std::sqrt(static_cast<double>(n));
  Rng rng = make_rng(52, {});
  ExcursionGrid e;
  std::vector<double> hits(100000);
  for (double& h : hits) {
    brownian_excursion_into(e, 1.0, n, rng);
    h = grid_max(e) > level ? 1.0 : 0.0;
  }
  const Estimate p = mean_estimate(hits);
  CHECK(std::abs(p.value - (1.0 - max_cdf_dual(1.0))) <= 3.0 * p.standard_error);
}

TEST_CASE("Brownian scaling of the excursion") {
  Rng rng = make_rng(53, {});
  std::vector<double> a(10000), b(10000);
  ExcursionGrid e;
  for (std::size_t i = 0; i < a.size(); ++i) {
    brownian_excursion_into(e, 4.0, 4096, rng);
    a[i] = grid_max(e);
    brownian_excursion_into(e, 1.0, 4096, rng);
    b[i] = 2.0 * grid_max(e);
  }
  CHECK(ks_two_sample(a, b).statistic <= 0.02);
}

TEST_CASE("excursion fragmentation marginals") {
  Rng rng = make_rng(54, {});
  const std::size_t n = 1 << 14;
  const ExcursionGrid e = brownian_excursion(2.0, n, rng);
  const MassPartition whole = excursion_fragmentation_marginal(e, 0.0);
  CHECK(whole.size() == 1);
  CHECK(whole.largest() >= 2.0 - 2.0 * 2.0 / n);
  const MassPartition none = excursion_fragmentation_marginal(e, 2.0 * grid_max(e) + 1e-9);
  CHECK(none.empty());
  CHECK(none.dust() == 2.0);
  double prev_sum = 2.0, prev_largest = 2.0;
  for (double t = 0.0; t < 2.0 * grid_max(e); t += 0.05) {
    const MassPartition p = excursion_fragmentation_marginal(e, t);
    CHECK(p.total() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(p.mass_sum() <= prev_sum);
    CHECK(p.largest() <= prev_largest);
    CHECK(excursion_largest_component(e, t) == p.largest());
    prev_sum = p.mass_sum();
    prev_largest = p.largest();
  }
}

TEST_CASE("subordinated stable representation") {
  Rng rng = make_rng(55, {});
  const double beta = 1.5;
  const std::vector<double> probes{0.0, 0.5, 1.0};
  std::vector<double> totals;
  for (int i = 0; i < 20000; ++i) {
    const auto out = subordinated_stable_representation(beta, probes, {}, rng);
    REQUIRE(out.size() == 3);
    REQUIRE(out[0].total == 0.0);
    REQUIRE(out[0].largest == std::vector<double>{0.0, 0.0});
    REQUIRE(out[1].total <= out[2].total);
    REQUIRE(out[2].largest[0] >= out[2].largest[1]);
    REQUIRE(out[2].largest[0] <= out[2].total);
    totals.push_back(out[2].total);
  }
  // E exp(-q T(rho(1))) = exp(-beta q^(1 - 1/beta)).
  for (const double q : {0.5, 1.0, 2.0}) {
    const Estimate e = empirical_laplace(totals, q);
    CHECK(std::abs(e.value - std::exp(-beta * std::pow(q, 1.0 - 1.0 / beta))) <= 3.0 * e.standard_error);
  }
  CHECK_THROWS_AS(subordinated_stable_representation(2.5, probes, {}, rng), ValidationError);
}
