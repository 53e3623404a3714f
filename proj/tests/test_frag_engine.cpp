#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fragsim/errors.hpp"
#include "fragsim/frag_engine.hpp"
#include "fragsim/stats.hpp"

using namespace fragsim;

namespace {

Truncation fine(double mass_floor) {
  Truncation t;
  t.epsilon = 1e-3;
  t.mass_floor = mass_floor;
  return t;
}

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t j) {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

}  // namespace

TEST_CASE("binary-half at unit rate is a Yule process") {
  const auto nu = nu_binary_half();
  Rng rng = make_rng(31, {});
  std::vector<double> counts(20000);
  for (double& c : counts) {
    const FragPath p = simulate(RateFunction::power(0.0), *nu, 1.0, 1.0, fine(1e-12), rng);
    c = static_cast<double>(p.marginal(1.0).size());
  }
  const Estimate e = mean_estimate(counts);
  CHECK(std::abs(e.value - std::numbers::e) <= 3.0 * e.standard_error);
}

TEST_CASE("paths start at the initial mass and are cadlag") {
  const auto nu = nu_brownian();
  Rng rng = make_rng(32, {});
  const FragPath p = simulate(RateFunction::power(-0.5), *nu, 5.0, 2.0, fine(1e-3), rng);
  CHECK(p.marginal(0.0) == MassPartition::single(5.0));
  CHECK_THROWS_AS((void)p.marginal(2.5), ValidationError);
  const auto ev = p.events();
  REQUIRE(ev.size() > 3);
  for (std::size_t i = 1; i < ev.size(); ++i) {
    REQUIRE(ev[i].time >= ev[i - 1].time);
    if (ev[i].time > ev[i - 1].time) {
      CHECK(p.marginal(ev[i].time) == ev[i].state);
      CHECK(p.marginal(std::nextafter(ev[i].time, 0.0)) == ev[i - 1].state);
    }
  }
  for (const auto& [t, f1] : p.largest_fragment_series()) CHECK(f1 <= 5.0);
}

TEST_CASE("property: mass is conserved at every event") {
  Rng rng = make_rng(33, {});
  const std::vector<DislocationPtr> measures{nu_brownian(), nu_binary_half(), nu_power(0.4)};
  double worst = 0.0;
  std::size_t checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto& nu = measures[static_cast<std::size_t>(trial) % measures.size()];
    const double m = std::exp(6.0 * open_unit(rng) - 2.0);
    const double alpha = -1.0 + 2.0 * open_unit(rng);
    const FragPath p = simulate(RateFunction::power(alpha), *nu, m, 0.5, fine(1e-4 * m), rng);
    for (const Snapshot& s : p.events()) {
      worst = std::max(worst, std::abs(s.state.total() - m) / m);
      ++checked;
    }
  }
  CHECK(checked > 1000);
  CHECK(worst <= 1e-9);
}

TEST_CASE("self-similarity in law") {
  // Largest mass from m at time t against m times the largest mass from 1 at time m^alpha t.
  const auto nu = nu_brownian();
  const double alpha = -0.5, m = 4.0, t = 0.5;
  const RateFunction tau = RateFunction::power(alpha);
  Rng rng = make_rng(34, {});
  std::vector<double> a(10000), b(10000);
  const std::vector<double> ta{t}, tb{std::pow(m, alpha) * t};
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = simulate_marginals(tau, *nu, MassPartition::single(m), ta, fine(1e-4 * m), rng)[0].largest();
    b[i] = m * simulate_marginals(tau, *nu, MassPartition::single(1.0), tb, fine(1e-4), rng)[0].largest();
  }
  CHECK(ks_two_sample(a, b).statistic <= 0.03);
}

TEST_CASE("top-k search matches the full simulation in law") {
  const auto nu = nu_brownian();
  const RateFunction tau = RateFunction::power(-0.5);
  Truncation trunc = fine(1e-3);
  trunc.loss_floor = 1e-4;
  Rng rng = make_rng(35, {});
  const std::vector<Seed> starts{{1.0, 0.0}, {0.5, 0.2}};
  std::vector<std::vector<double>> top, full;
  for (int i = 0; i < 5000; ++i) {
    top.push_back(simulate_top(tau, *nu, starts, 0.6, 2, trunc, rng));
    std::vector<double> masses;
    for (const Seed& s : starts) {
      const std::vector<double> probe{0.6 - s.time};
      const MassPartition p = simulate_marginals(tau, *nu, MassPartition::single(s.mass), probe, trunc, rng)[0];
      masses.insert(masses.end(), p.masses().begin(), p.masses().end());
    }
    std::sort(masses.begin(), masses.end(), std::greater<>());
    masses.resize(std::max<std::size_t>(masses.size(), 2), 0.0);
    full.push_back({masses[0], masses[1]});
  }
  for (std::size_t j = 0; j < 2; ++j) {
    const auto x = column(top, j), y = column(full, j);
    CHECK(ks_two_sample(x, y).statistic <= 0.04);
    CHECK(std::is_sorted(top[j].rbegin(), top[j].rend()));
  }
}

TEST_CASE("property: dust jumps stay below floor times arity and shrink with the floor") {
  const auto nu = nu_brownian();
  const RateFunction tau = RateFunction::power(-0.5);
  double previous = std::numeric_limits<double>::infinity();
  for (const double floor : {1e-3, 1e-4, 1e-5}) {
    Rng rng = make_rng(36, {});
    Truncation trunc = fine(floor);
    trunc.loss_floor = 0.1 * floor;
    const std::vector<double> probe{0.5};
    double largest = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      EngineDiagnostics d;
      (void)simulate_marginals(tau, *nu, MassPartition::single(1.0), probe, trunc, rng, &d);
      REQUIRE(d.max_floor_dust_jump <= floor * static_cast<double>(d.max_arity) + 1e-15);
      largest = std::max(largest, d.max_floor_dust_jump);
    }
    CHECK(largest < previous);
    previous = largest;
  }
}

TEST_CASE("erosion") {
  const auto nu = nu_brownian();
  Rng rng = make_rng(37, {});
  for (int trial = 0; trial < 1000; ++trial) {
    Truncation coarse = fine(1e-4);
    coarse.epsilon = 0.05;
    const FragPath p = simulate(RateFunction::power(0.0), *nu, 1.0, 1.0, coarse, rng);
    const FragPath same = apply_erosion(p, 0.0);
    const double c = 3.0 * open_unit(rng), t = open_unit(rng);
    REQUIRE(same.marginal(t) == p.marginal(t));
    const FragPath e = apply_erosion(p, c);
    const MassPartition a = p.marginal(t), b = e.marginal(t);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(b[i] == doctest::Approx(a[i] * std::exp(-c * t)).epsilon(1e-12));
    REQUIRE(b.total() == doctest::Approx(1.0).epsilon(1e-12));
  }
  const FragPath still = simulate(RateFunction::power(0.0), *nu_zero(), 1.0, 1.0, fine(1e-6), rng);
  const MassPartition half = apply_erosion(still, 1.0).marginal(std::log(2.0));
  CHECK(half.largest() == doctest::Approx(0.5));
  CHECK(half.dust() == doctest::Approx(0.5));
  CHECK_THROWS_AS((void)apply_erosion(simulate(RateFunction::power(-0.5), *nu, 1.0, 1.0, fine(1e-3), rng), 1.0),
                  ValidationError);
}

TEST_CASE("negative index loses mass to dust independently of the floor") {
  // At alpha = -1 the macroscopic mass at time 1/2 is well below 1 and agrees across mass floors. The loss
  // floor sits far below the mass floor so that every fragment above the mass floor keeps splitting.
  const auto nu = nu_brownian();
  const RateFunction tau = RateFunction::power(-1.0);
  std::vector<Estimate> means;
  for (const double floor : {1e-3, 1e-4}) {
    Truncation trunc = fine(floor);
    trunc.loss_floor = 0.01 * floor;
    Rng rng = make_rng(38, {});
    std::vector<double> mass(1000);
    const std::vector<double> probe{0.5};
    for (double& x : mass) x = simulate_marginals(tau, *nu, MassPartition::single(1.0), probe, trunc, rng)[0].mass_sum();
    means.push_back(mean_estimate(mass));
  }
  CHECK(means[0].value < 0.9);
  CHECK(std::abs(means[0].value - means[1].value) <= 4.0 * std::hypot(means[0].standard_error, means[1].standard_error));
}
