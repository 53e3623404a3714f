#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "fragsim/errors.hpp"
#include "fragsim/rng.hpp"
#include "fragsim/stats.hpp"
#include "fragsim/subordinators.hpp"

using namespace fragsim;

TEST_CASE("KS two-sample edge cases") {
  const std::vector a{0.1, 0.4, 0.9, 0.3};
  CHECK(ks_two_sample(a, a).statistic == 0.0);
  CHECK(ks_two_sample(std::vector(50, 0.0), std::vector(50, 1.0)).statistic == 1.0);
  CHECK_THROWS_AS(ks_two_sample(std::vector<double>{}, a), ValidationError);
  // Ties across samples are handled jointly.
  CHECK(ks_two_sample(std::vector{1.0, 1.0, 2.0}, std::vector{1.0, 2.0, 2.0}).statistic == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("KS of independent uniform samples stays below the 99% asymptotic quantile") {
  // 99% Kolmogorov quantile 1.6276 / sqrt(n_e), n_e = 5000.
  const double critical = 1.62762 / std::sqrt(5000.0);
  CHECK(critical == doctest::Approx(0.0230).epsilon(1e-3));
  CHECK(ks_critical_value(10000, 10000, 0.01) == doctest::Approx(critical).epsilon(1e-4));
  int exceed = 0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    Rng rng = make_rng(99, {rep});
    std::vector<double> a(10000), b(10000);
    for (double& x : a) x = open_unit(rng);
    for (double& x : b) x = open_unit(rng);
    const double d = ks_two_sample(a, b).statistic;
    CHECK(d <= 0.033);
    exceed += d > critical;
  }
  CHECK(exceed <= 2);
}

TEST_CASE("Kolmogorov survival reference values") {
  CHECK(kolmogorov_survival(1.3581) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(kolmogorov_survival(1.0) == doctest::Approx(0.26999967).epsilon(1e-6));
  CHECK(kolmogorov_survival(0.0) == 1.0);
  CHECK(ks_standard_error(10000, 10000) == doctest::Approx(std::sqrt(std::numbers::pi * std::numbers::pi / 12 -
                                                                     std::numbers::pi / 2 * std::log(2.0) * std::log(2.0)) /
                                                           std::sqrt(5000.0)));
}

TEST_CASE("empirical Laplace transform") {
  const std::vector x{0.3, 1.2, 4.0};
  CHECK(empirical_laplace(x, 0.0).value == 1.0);
  const std::vector c(10, std::sqrt(2.0));
  const Estimate e = empirical_laplace(c, 1.5);
  CHECK(e.value == doctest::Approx(std::exp(-1.5 * std::sqrt(2.0))));
  CHECK(e.standard_error == doctest::Approx(0.0));
}

TEST_CASE("empirical Laplace of the stable 1/2 subordinator") {
  const double c = std::sqrt(2.0 / std::numbers::pi);
  std::vector<double> v(100000);
  Rng rng = make_rng(2024, {});
  for (double& x : v) x = stable_path(0.5, c, 1.0, 1e-6, rng).evaluate(1.0);
  const Estimate e = empirical_laplace(v, 1.0);
  CHECK(std::exp(-std::sqrt(2.0)) == doctest::Approx(0.2431).epsilon(1e-3));
  CHECK(std::abs(e.value - std::exp(-std::sqrt(2.0))) <= 3.0 * e.standard_error);
}

TEST_CASE("means, quantiles and the trend rule") {
  const std::vector x{1.0, 2.0, 3.0, 4.0};
  const Estimate m = mean_estimate(x);
  CHECK(m.value == 2.5);
  CHECK(m.standard_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(quantile(x, 0.5) == 2.5);
  CHECK(quantile(x, 0.0) == 1.0);
  CHECK(quantile(x, 1.0) == 4.0);
  CHECK(ks_non_increasing(std::vector{0.1, 0.05, 0.02}, std::vector{0.01, 0.01, 0.01}));
  CHECK(ks_non_increasing(std::vector{0.05, 0.06}, std::vector{0.01, 0.01}));
  CHECK_FALSE(ks_non_increasing(std::vector{0.05, 0.09}, std::vector{0.01, 0.01}));
  CHECK(ks_non_increasing(std::vector{0.3}, std::vector{0.01}));
}
