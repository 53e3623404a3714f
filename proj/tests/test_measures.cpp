#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "fragsim/errors.hpp"
#include "fragsim/measures.hpp"
#include "fragsim/stable_measures.hpp"
#include "fragsim/stats.hpp"

using namespace fragsim;

namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

// Closed forms for nu_Br, obtained by integrating (2 pi x^3 (1-x)^3)^(-1/2) by hand.
double brownian_rate_oracle(double eps) { return kInvSqrt2Pi * 2.0 * (1.0 - 2.0 * eps) / std::sqrt(eps * (1.0 - eps)); }
double brownian_loss_oracle(double eps) { return kInvSqrt2Pi * 2.0 * std::sqrt(eps / (1.0 - eps)); }

// Composite Simpson rule for the rate on [1/2, 1 - eps] after x = 1 - u^2, as a second oracle.
double brownian_rate_simpson(double eps) {
  const auto f = [](double u) {
    const double x = 1.0 - u * u;
    return 2.0 * u * kInvSqrt2Pi / std::sqrt(x * x * x * u * u * u * u * u * u);
  };
  const double a = std::sqrt(eps), b = std::sqrt(0.5);
  const int n = 200000;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("Brownian rate against closed form and quadrature oracle") {
  const auto nu = nu_brownian();
  CHECK(nu->rate(0.5) == 0.0);
  CHECK(brownian_rate_simpson(0.25) == doctest::Approx(brownian_rate_oracle(0.25)).epsilon(1e-8));
  CHECK(nu->rate(0.25) == doctest::Approx(0.92132).epsilon(1e-5));
  for (const double eps : {0.4, 0.1, 1e-3, 1e-6, 1e-10}) {
    CHECK(nu->rate(eps) == doctest::Approx(brownian_rate_oracle(eps)).epsilon(1e-9));
    CHECK(nu->fast_rate(eps) == doctest::Approx(brownian_rate_oracle(eps)).epsilon(1e-7));
    CHECK(nu->neglected_loss(eps) == doctest::Approx(brownian_loss_oracle(eps)).epsilon(1e-9));
    CHECK(nu->fast_neglected_loss(eps) == doctest::Approx(brownian_loss_oracle(eps)).epsilon(1e-7));
  }
  const double eps = 1e-6;
  CHECK(nu->rate(eps) * std::sqrt(std::numbers::pi * eps / 2.0) == doctest::Approx(1.0).epsilon(0.01));
  CHECK_THROWS_AS((void)nu->rate(0.0), ValidationError);
  CHECK_THROWS_AS((void)nu->rate(0.6), ValidationError);
}

TEST_CASE("phi_nu values and inverse") {
  const auto nu = nu_brownian();
  CHECK(phi_nu(*nu, 4.0) == doctest::Approx(1.0 / 0.92132).epsilon(1e-4));
  CHECK(phi_nu(*nu, 1e6) == doctest::Approx(1.2533e-3).epsilon(0.01));
  CHECK(phi_nu(*nu, 1e6) * std::sqrt(2e6 / std::numbers::pi) == doctest::Approx(1.0).epsilon(0.01));
  CHECK_THROWS_AS((void)phi_nu(*nu, 2.0), UndefinedValue);
  const auto finite = nu_finite({{{0.5, 0.5}, 3.0}}, "three");
  for (const double m : {2.5, 10.0, 1e4}) CHECK(phi_nu(*finite, m) == doctest::Approx(1.0 / 3.0));
  for (const double m : geometric_grid(10.0, 1e9, 9)) {
    const double back = phi_nu_inverse(*nu, phi_nu(*nu, m));
    CHECK(back >= m * (1 - 1e-6));
    CHECK(back <= m * (1 + 1e-6));
  }
  CHECK(phi_nu_inverse(*nu, 1e3) > 2.0);
  CHECK_THROWS_AS((void)phi_nu_inverse(*nu, 1e-9), UndefinedValue);
  CHECK_THROWS_AS((void)phi_nu(*nu, 1.5), ValidationError);
}

TEST_CASE("regular variation index") {
  const auto grid = geometric_grid(1e2, 1e8, 13);
  CHECK(estimate_regular_variation_index(*nu_brownian(), grid) == doctest::Approx(-0.5).epsilon(0.04));
  CHECK(estimate_regular_variation_index(*nu_power(0.7), grid) == doctest::Approx(-0.7).epsilon(0.01 / 0.7));
  const auto stable = nu_stable(1.5);
  CHECK(std::abs(estimate_regular_variation_index(*stable, geometric_grid(1e2, 1e6, 9)) + 1.0 / 3.0) <= 0.05);
  CHECK_THROWS_AS((void)estimate_regular_variation_index(*nu_brownian(), geometric_grid(1.0e2, 1e4, 6)),
                  ValidationError);
}

TEST_CASE("power measure has exact rate and loss") {
  const auto nu = nu_power(0.7);
  for (const double eps : {0.5, 0.1, 1e-4, 1e-9}) {
    CHECK(nu->rate(eps) == doctest::Approx(std::pow(eps, -0.7)).epsilon(1e-12));
    CHECK(nu->neglected_loss(eps) == doctest::Approx(0.7 * std::pow(eps, 0.3) / 0.3).epsilon(1e-12));
  }
}

TEST_CASE("samples respect support and normalization") {
  Rng rng = make_rng(5, {});
  const std::vector<DislocationPtr> measures{nu_brownian(), nu_power(0.4), nu_binary_half(2.0)};
  for (const auto& nu : measures) {
    for (const double eps : {0.3, 1e-3, 1e-8}) {
      if (nu->rate(eps) == 0.0) continue;
      Dislocation d;
      for (int i = 0; i < 2000; ++i) {
        nu->sample_into(eps, rng, d);
        REQUIRE(d.fractions[0] < 1.0 - eps);
        REQUIRE(std::abs(d.sum() - 1.0) <= 1e-12);
        if (nu->is_binary()) REQUIRE(d.fractions.size() <= 2);
      }
    }
  }
}

TEST_CASE("Brownian sample mean of s_1 against quadrature") {
  // E[s_1 | s_1 < 1 - eps] = int x rho(x) dx / R(eps); with eps = 0.1 by Simpson on [1/2, 0.9].
  const double eps = 0.1;
  const auto density = [](double x) { return kInvSqrt2Pi / std::sqrt(std::pow(x * (1.0 - x), 3)); };
  const int n = 20000;
  const double a = 0.5, b = 1.0 - eps, h = (b - a) / n;
  double num = a * density(a) + b * density(b);
  for (int i = 1; i < n; ++i) num += (i % 2 ? 4.0 : 2.0) * (a + i * h) * density(a + i * h);
  const double mean = num * h / 3.0 / brownian_rate_oracle(eps);
  Rng rng = make_rng(6, {});
  std::vector<double> s(100000);
  const auto nu = nu_brownian();
  for (double& x : s) x = nu->sample(eps, rng).fractions[0];
  const Estimate e = mean_estimate(s);
  CHECK(std::abs(e.value - mean) <= 3.0 * e.standard_error);
}

TEST_CASE("rescaled samples") {
  const auto nu = nu_brownian();
  Rng rng = make_rng(7, {});
  for (int i = 0; i < 1000; ++i) {
    const MassPartition p = rescaled_sample(*nu, 100.0, rng);
    REQUIRE(p.size() == 1);
    REQUIRE(p[0] >= 1.0 - 1e-12);
  }
  const auto power = nu_power(0.5);
  for (int i = 0; i < 1000; ++i) {
    const double m = 1e3;
    Rng r2 = make_rng(8, {static_cast<std::uint64_t>(i)});
    const Dislocation d = power->sample(1.0 / m, r2);
    double rest = 0.0;
    for (std::size_t j = 1; j < d.fractions.size(); ++j) rest += m * d.fractions[j];
    REQUIRE(std::abs(m * (1.0 - d.fractions[0]) - rest) <= 1e-9 * m);
  }
  // tau(m) nu_m -> I_Br: the rescaled small fragment at large m against I_Br atoms above 1.
  const auto ibr = immigration_brownian();
  std::vector<double> a(10000), b(10000);
  for (double& x : a) x = rescaled_sample(*nu, 1e8, rng)[0];
  for (double& x : b) x = ibr->sample_atom(1.0, rng)[0];
  CHECK(ks_two_sample(a, b).statistic <= 0.05);
}

TEST_CASE("Brownian immigration measure") {
  const auto ibr = immigration_brownian();
  CHECK(ibr->atom_rate(0.01) == doctest::Approx(7.9788).epsilon(1e-4));
  const double c = std::sqrt(2.0 / std::numbers::pi);
  for (const double delta : {1e-6, 1e-2, 3.0}) CHECK(ibr->atom_rate(delta) == doctest::Approx(c * std::pow(delta, -0.5)));
  CHECK(*ibr->laplace_exponent(1.0) == doctest::Approx(std::sqrt(2.0)));
  CHECK(ibr->singletons());
  Rng rng = make_rng(9, {});
  std::vector<double> m(100000);
  for (double& x : m) {
    const MassPartition atom = ibr->sample_atom(0.01, rng);
    REQUIRE(atom.size() == 1);
    REQUIRE(atom[0] >= 0.01);
    x = std::min(atom[0], 1.0);
  }
  // Conditional density delta^(1/2) x^(-3/2) / 2 on (delta, inf): E min(x, 1) = 2 sqrt(delta) - delta.
  const Estimate e = mean_estimate(m);
  CHECK(std::abs(e.value - (2.0 * 0.1 - 0.01)) <= 3.0 * e.standard_error);
  CHECK(ibr->neglected_mass(0.01) == doctest::Approx(c * 0.1));
  CHECK(immigration_zero()->atom_rate(1e-9) == 0.0);
  CHECK(scaled_intensity(ibr, 2.0)->atom_rate(0.01) == doctest::Approx(2.0 * ibr->atom_rate(0.01)));
}

TEST_CASE("stable dislocation measure") {
  CHECK(stable_dislocation_constant(1.5) == doctest::Approx(1.1336).epsilon(1e-4));
  const auto nu = nu_stable(1.5);
  const auto& st = dynamic_cast<const StableDislocation&>(*nu);
  const WeightedEstimate e = st.pool_laplace(1.0);
  CHECK(std::abs(e.value - std::exp(-1.0)) <= 3.0 * e.standard_error);
  Rng rng = make_rng(10, {});
  double prev = 0.0;
  for (const double eps : {0.5, 0.1, 1e-2, 1e-4}) {
    const double r = nu->rate(eps);
    CHECK(r >= prev);
    prev = r;
    if (r == 0.0) continue;
    for (int i = 0; i < 500; ++i) {
      const Dislocation d = nu->sample(eps, rng);
      REQUIRE(std::abs(d.sum() - 1.0) <= 1e-6);
      REQUIRE(d.fractions[0] < 1.0 - eps);
    }
  }
}

TEST_CASE("stable immigration measure") {
  CHECK(stable_immigration_constant(1.5) == doctest::Approx(0.4231).epsilon(1e-4));
  const auto I = immigration_stable(1.5);
  const double gamma = 1.0 - 1.0 / 1.5;
  for (const double a : {0.1, 10.0})
    CHECK(I->atom_rate(a * 0.01) * std::pow(a, gamma) / I->atom_rate(0.01) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(I->atom_rate(0.01) == doctest::Approx(stable_immigration_rate_exact(1.5, 0.01)).epsilon(0.05));
  Rng rng = make_rng(11, {});
  for (int i = 0; i < 2000; ++i) REQUIRE(I->sample_atom(0.01, rng).total() > 0.01);
}
