#include "fragsim/stats.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>

#include "fragsim/errors.hpp"

namespace fragsim {

namespace {

double effective_size(std::size_t na, std::size_t nb) {
  return static_cast<double>(na) * static_cast<double>(nb) / static_cast<double>(na + nb);
}

}  // namespace

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("KS test needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = effective_size(x.size(), y.size());
  return {d, std::min(1.0, 2.0 * std::exp(-2.0 * ne * d * d)), kolmogorov_survival(std::sqrt(ne) * d)};
}

double ks_standard_error(std::size_t n_a, std::size_t n_b) {
  if (n_a == 0 || n_b == 0) throw ValidationError("KS standard error needs non-empty samples");
  const double ln2 = std::numbers::ln2;
  const double var = std::numbers::pi * std::numbers::pi / 12.0 - std::numbers::pi / 2.0 * ln2 * ln2;
  return std::sqrt(var / effective_size(n_a, n_b));
}

double ks_critical_value(std::size_t n_a, std::size_t n_b, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must lie in (0, 1)");
  const auto f = [level](double lambda) { return kolmogorov_survival(lambda) - level; };
  std::uintmax_t iters = 100;
  const auto [lo, hi] =
      boost::math::tools::bisect(f, 0.2, 10.0, boost::math::tools::eps_tolerance<double>(40), iters);
  return 0.5 * (lo + hi) / std::sqrt(effective_size(n_a, n_b));
}

Estimate mean_estimate(std::span<const double> samples) {
  if (samples.empty()) throw ValidationError("estimate needs a non-empty sample");
  const double n = static_cast<double>(samples.size());
  double s = 0.0;
  for (const double v : samples) s += v;
  const double mean = s / n;
  if (samples.size() < 2) return {mean, 0.0};
  // Leave-one-out means are (s - x_i) / (n - 1); their jackknife variance reduces to the
  // usual s^2 / n, computed here in the jackknife form.
  double ss = 0.0;
  for (const double v : samples) {
    const double loo = (s - v) / (n - 1.0);
    ss += (loo - mean) * (loo - mean);
  }
  return {mean, std::sqrt((n - 1.0) / n * ss)};
}

Estimate empirical_laplace(std::span<const double> samples, double q) {
  if (!(q >= 0.0)) throw ValidationError("Laplace argument must be non-negative");
  if (samples.empty()) throw ValidationError("estimate needs a non-empty sample");
  if (q == 0.0) return {1.0, 0.0};
  std::vector<double> v(samples.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(-q * samples[i]);
  return mean_estimate(v);
}

double quantile(std::span<const double> samples, double p) {
  if (samples.empty()) throw ValidationError("quantile needs a non-empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile level must lie in [0, 1]");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double h = p * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

bool ks_non_increasing(std::span<const double> ks, std::span<const double> standard_errors, double slack) {
  if (ks.size() != standard_errors.size()) throw ValidationError("KS and standard-error sequences differ in length");
  for (std::size_t i = 1; i < ks.size(); ++i) {
    const double pooled = std::hypot(standard_errors[i - 1], standard_errors[i]);
    if (ks[i] > ks[i - 1] + slack * pooled) return false;
  }
  return true;
}

}  // namespace fragsim
