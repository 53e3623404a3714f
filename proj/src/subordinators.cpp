#include "fragsim/subordinators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <string>

#include "fragsim/errors.hpp"

namespace fragsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_jumps(std::span<const Jump> jumps, double start, double end) {
  double prev = -kInf;
  for (const auto& j : jumps) {
    if (!(j.time >= start && j.time <= end)) throw ValidationError("jump time outside the path window");
    if (!(j.time > prev)) throw ValidationError("jump times must be strictly increasing");
    if (!(j.size > 0.0)) throw ValidationError("jump sizes must be positive");
    prev = j.time;
  }
}

// Sorted uniform times in [start, start + length), nudged to be strictly increasing.
std::vector<double> sorted_uniform_times(std::size_t n, double start, double length, Rng& rng) {
  std::vector<double> t(n);
  for (double& x : t) x = start + length * std::generate_canonical<double, 53>(rng);
  std::sort(t.begin(), t.end());
  for (std::size_t i = 1; i < n; ++i)
    if (t[i] <= t[i - 1]) t[i] = std::nextafter(t[i - 1], kInf);
  return t;
}

}  // namespace

JumpPath::JumpPath(double horizon, double drift, std::vector<Jump> jumps)
    : horizon_(horizon), drift_(drift), jumps_(std::move(jumps)) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ValidationError("path horizon must be finite and >= 0");
  if (!(drift >= 0.0) || !std::isfinite(drift)) throw ValidationError("path drift must be finite and >= 0");
  check_jumps(jumps_, 0.0, horizon_);
  cumulative_.resize(jumps_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < jumps_.size(); ++i) cumulative_[i] = acc += jumps_[i].size;
}

std::size_t JumpPath::jumps_until(double t) const {
  const auto it = std::upper_bound(jumps_.begin(), jumps_.end(), t, [](double x, const Jump& j) { return x < j.time; });
  return static_cast<std::size_t>(it - jumps_.begin());
}

double JumpPath::evaluate(double t) const {
  if (!(t >= 0.0)) throw ValidationError("path evaluated at negative time");
  if (t > horizon_) throw HorizonExhausted("path evaluated at t = " + std::to_string(t) + " beyond horizon " +
                                           std::to_string(horizon_));
  const std::size_t k = jumps_until(t);
  return drift_ * t + (k == 0 ? 0.0 : cumulative_[k - 1]);
}

void JumpPath::extend(double length, std::span<const Jump> block) {
  if (drift_ != 0.0) throw ValidationError("only drift-free paths can be extended");
  if (!(length > 0.0)) throw ValidationError("extension length must be positive");
  check_jumps(block, 0.0, length);
  double acc = cumulative_.empty() ? 0.0 : cumulative_.back();
  for (const auto& j : block) {
    const double t = horizon_ + j.time;
    if (!jumps_.empty() && t <= jumps_.back().time) continue;  // a jump exactly at the seam
    jumps_.push_back({t, j.size});
    cumulative_.push_back(acc += j.size);
  }
  horizon_ += length;
}

void JumpPath::write_csv(std::ostream& os) const {
  const auto old = os.precision(17);
  os << "time,value\n0," << 0.0 << "\n";
  for (std::size_t i = 0; i < jumps_.size(); ++i)
    os << jumps_[i].time << "," << drift_ * jumps_[i].time + cumulative_[i] << "\n";
  os << horizon_ << "," << evaluate(horizon_) << "\n";
  os.precision(old);
}

void JumpPath::write_jsonl(std::ostream& os) const {
  const auto old = os.precision(17);
  for (const auto& j : jumps_) {
    os << "{\"time\":" << j.time << ",\"size\":";
    if (std::isinf(j.size))
      os << "null";
    else
      os << j.size;
    os << "}\n";
  }
  os.precision(old);
}

// ---------------------------------------------------------------------------

JumpPath stable_path(double gamma, double c, double horizon, double jump_floor, Rng& rng) {
  const StableLevy levy{gamma, c};
  levy.validate();
  if (!(horizon >= 0.0)) throw ValidationError("horizon must be non-negative");
  if (!(jump_floor > 0.0)) throw ValidationError("jump floor must be positive");
  const double mean = levy.tail_rate(jump_floor) * horizon;
  std::poisson_distribution<long long> count(mean);
  const auto n = static_cast<std::size_t>(mean > 0.0 ? count(rng) : 0);
  const std::vector<double> times = sorted_uniform_times(n, 0.0, horizon, rng);
  std::vector<Jump> jumps(n);
  const double inv = -1.0 / gamma;
  for (std::size_t i = 0; i < n; ++i) jumps[i] = {times[i], jump_floor * std::pow(open_unit(rng), inv)};
  return JumpPath(horizon, levy.small_jump_mean(jump_floor), std::move(jumps));
}

namespace {

std::vector<Jump> xi_block(const DislocationMeasure& nu, double eps, double length, Rng& rng) {
  const double r = nu.fast_rate(eps);
  std::vector<Jump> jumps;
  if (r <= 0.0) return jumps;
  Dislocation d;
  double t = exponential(rng, r);
  while (t <= length) {
    nu.sample_into(eps, rng, d);
    const double s1 = d.fractions.empty() ? 0.0 : d.fractions.front();
    jumps.push_back({t, s1 > 0.0 ? -std::log(s1) : kInf});
    t += exponential(rng, r);
  }
  return jumps;
}

}  // namespace

JumpPath xi_path(const DislocationMeasure& nu, double eps, double horizon, Rng& rng) {
  check_truncation(eps);
  if (!(horizon >= 0.0)) throw ValidationError("horizon must be non-negative");
  return JumpPath(horizon, 0.0, xi_block(nu, eps, horizon, rng));
}

ExtendableXi::ExtendableXi(DislocationPtr nu, double eps, double block, Rng& rng)
    : nu_(std::move(nu)), eps_(eps), block_(block), rng_(&rng) {
  check_truncation(eps);
  if (!nu_) throw ValidationError("xi needs a dislocation measure");
  if (!(block > 0.0)) throw ValidationError("block length must be positive");
  path_ = JumpPath(0.0, 0.0, {});
  extend();
}

void ExtendableXi::extend() {
  const std::vector<Jump> b = xi_block(*nu_, eps_, block_, *rng_);
  path_.extend(block_, b);
}

// ---------------------------------------------------------------------------

namespace {

// Walks the piecewise-constant clock speed 1 / tau(m exp(-xi)) segment by segment.
// visit(start, end, speed, xi_value) returns true to stop.
template <class Visit>
bool walk_segments(const JumpPath& xi, const RateFunction& tau, double m, Visit&& visit) {
  if (xi.drift() != 0.0) throw ValidationError("time change needs a drift-free xi");
  double start = 0.0, level = 0.0;
  const auto speed = [&](double lv) {
    if (std::isinf(lv)) return 0.0;
    return 1.0 / tau(m * std::exp(-lv));
  };
  for (const auto& j : xi.jumps()) {
    if (visit(start, j.time, speed(level), level)) return true;
    start = j.time;
    level += j.size;
  }
  return visit(start, xi.horizon(), speed(level), level);
}

}  // namespace

double integrated_clock(const JumpPath& xi, const RateFunction& tau, double m, double u) {
  if (!(u >= 0.0)) throw ValidationError("clock evaluated at negative time");
  if (u > xi.horizon()) throw HorizonExhausted("clock evaluated beyond the path horizon");
  double acc = 0.0;
  walk_segments(xi, tau, m, [&](double a, double b, double speed, double) {
    const double end = std::min(b, u);
    if (end > a) acc += speed * (end - a);
    return b >= u;
  });
  return acc;
}

RhoResult rho_time_change(const JumpPath& xi, const RateFunction& tau, double m, double t) {
  if (!(t >= 0.0)) throw ValidationError("time change evaluated at negative time");
  if (!(m > 0.0)) throw ValidationError("initial mass must be positive");
  double acc = 0.0;
  RhoResult result{RhoStatus::horizon_exhausted, kInf};
  walk_segments(xi, tau, m, [&](double a, double b, double speed, double level) {
    if (std::isinf(level) || speed == 0.0) {
      result = {RhoStatus::infinite, kInf};
      return true;
    }
    if (!std::isfinite(speed)) throw RateOverflow("clock speed is not finite", m * std::exp(-level));
    const double reach = acc + speed * (b - a);
    if (t < reach) {
      result = {RhoStatus::finite, a + (t - acc) / speed};
      return true;
    }
    acc = reach;
    return false;
  });
  return result;
}

RhoResult rho_time_change(ExtendableXi& xi, const RateFunction& tau, double m, double t, std::size_t max_blocks) {
  for (std::size_t i = 0;; ++i) {
    const RhoResult r = rho_time_change(xi.path(), tau, m, t);
    if (r.status != RhoStatus::horizon_exhausted) return r;
    if (i == max_blocks) return r;
    xi.extend();
  }
}

double lambda_process(const JumpPath& xi, const RateFunction& tau, double m, double t) {
  if (t == 0.0) return m;
  const RhoResult r = rho_time_change(xi, tau, m, t);
  switch (r.status) {
    case RhoStatus::infinite:
      return 0.0;
    case RhoStatus::horizon_exhausted:
      throw HorizonExhausted("xi path too short for Lambda at t = " + std::to_string(t));
    case RhoStatus::finite:
      break;
  }
  return m * std::exp(-xi.evaluate(r.value));
}

std::vector<double> largest_jumps(const JumpPath& path, double t, std::size_t k) {
  const std::size_t n = path.jumps_until(t);
  std::vector<double> sizes(n);
  for (std::size_t i = 0; i < n; ++i) sizes[i] = path.jumps()[i].size;
  const std::size_t kk = std::min(k, n);
  std::partial_sort(sizes.begin(), sizes.begin() + static_cast<std::ptrdiff_t>(kk), sizes.end(), std::greater<>());
  sizes.resize(kk);
  sizes.resize(k, 0.0);
  return sizes;
}

}  // namespace fragsim
