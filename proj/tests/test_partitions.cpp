#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "fragsim/errors.hpp"
#include "fragsim/partitions.hpp"
#include "fragsim/rng.hpp"

using namespace fragsim;

namespace {

std::vector<double> masses_of(const MassPartition& p) { return {p.masses().begin(), p.masses().end()}; }

}  // namespace

TEST_CASE("decreasing rearrangement sorts and drops zeros") {
  CHECK(masses_of(decreasing_rearrangement(std::vector{0.2, 0.5, 0.3})) == std::vector{0.5, 0.3, 0.2});
  const MassPartition empty = decreasing_rearrangement(std::vector<double>{});
  CHECK(empty.empty());
  CHECK(empty.dust() == 0.0);
  CHECK(masses_of(decreasing_rearrangement(std::vector{0.5, 0.0, 0.5})) == std::vector{0.5, 0.5});
}

TEST_CASE("rearrangement moves sub-floor values to dust and rejects bad input") {
  const MassPartition p = decreasing_rearrangement(std::vector{0.4, 1e-6, 0.6}, 1e-3);
  CHECK(masses_of(p) == std::vector{0.6, 0.4});
  CHECK(p.dust() == doctest::Approx(1e-6));
  CHECK_THROWS_AS(decreasing_rearrangement(std::vector{0.1, -0.2}), ValidationError);
  CHECK_THROWS_AS(decreasing_rearrangement(std::vector{std::nan("")}), ValidationError);
  CHECK_THROWS_AS(MassPartition::from_sorted({0.1, 0.2}), ValidationError);
}

TEST_CASE("l1 distance on zero-padded sequences") {
  const auto one = MassPartition::single(1.0);
  CHECK(l1_distance(one, one) == 0.0);
  CHECK(l1_distance(MassPartition::from_sorted({0.5, 0.5}), one) == doctest::Approx(1.0));
  CHECK(l1_distance(MassPartition{}, MassPartition::from_sorted({0.3, 0.2})) == doctest::Approx(0.5));
}

TEST_CASE("split_at replaces one mass and sends the deficit to dust") {
  const auto one = MassPartition::single(1.0);
  const auto halves = split_at(one, 0, std::vector{0.5, 0.5});
  CHECK(masses_of(halves) == std::vector{0.5, 0.5});
  CHECK(halves.dust() == 0.0);
  CHECK(split_at(one, 0, std::vector{1.0}) == one);
  const auto p = split_at(MassPartition::from_sorted({2.0, 1.0}), 0, std::vector{0.25, 0.25});
  CHECK(masses_of(p) == std::vector{1.0, 0.5, 0.5});
  CHECK(p.dust() == doctest::Approx(1.0));
  CHECK_THROWS_AS(split_at(one, 0, std::vector{0.7, 0.7}), ValidationError);
  CHECK_THROWS_AS(split_at(one, 3, std::vector{0.5}), ValidationError);
}

TEST_CASE("erosion and scaling keep the bookkeeping") {
  const auto p = MassPartition::from_sorted({0.6, 0.3}, 0.1);
  const auto e = eroded(p, 0.5);
  CHECK(masses_of(e) == std::vector{0.3, 0.15});
  CHECK(e.total() == doctest::Approx(1.0));
  const auto s = scaled(p, 4.0);
  CHECK(s.total() == doctest::Approx(4.0));
  CHECK(s.dust() == doctest::Approx(0.4));
  const std::vector parts{MassPartition::from_sorted({0.5}, 0.1), MassPartition::from_sorted({0.7, 0.2}, 0.2)};
  const auto m = merge(parts);
  CHECK(masses_of(m) == std::vector{0.7, 0.5, 0.2});
  CHECK(m.dust() == doctest::Approx(0.3));
}

TEST_CASE("property: rearrangement is an l1 contraction") {
  Rng rng = make_rng(11, {});
  std::uniform_int_distribution<int> len(0, 12);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> a(static_cast<std::size_t>(len(rng))), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = open_unit(rng);
      b[i] = open_unit(rng);
    }
    double direct = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) direct += std::abs(a[i] - b[i]);
    const double sorted = l1_distance(decreasing_rearrangement(a), decreasing_rearrangement(b));
    REQUIRE(sorted <= direct + 1e-12);
  }
}

TEST_CASE("property: random splits conserve total mass") {
  Rng rng = make_rng(12, {});
  for (int trial = 0; trial < 2000; ++trial) {
    MassPartition p = MassPartition::single(1.0 + 9.0 * open_unit(rng));
    const double total = p.total();
    for (int step = 0; step < 10 && !p.empty(); ++step) {
      const std::size_t idx = static_cast<std::size_t>(open_unit(rng) * static_cast<double>(p.size()));
      std::vector<double> f(1 + static_cast<std::size_t>(open_unit(rng) * 4));
      double left = 1.0;
      for (double& x : f) {
        x = left * open_unit(rng);
        left -= x;
      }
      std::sort(f.rbegin(), f.rend());
      p = split_at(p, std::min(idx, p.size() - 1), f, 1e-3);
      REQUIRE(std::is_sorted(p.masses().rbegin(), p.masses().rend()));
    }
    REQUIRE(std::abs(p.total() - total) <= 1e-9 * total);
  }
}
