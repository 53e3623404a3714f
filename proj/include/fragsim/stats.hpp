#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fragsim {

struct KsResult {
  double statistic;   ///< sup |F_a - F_b|
  double p_bound;     ///< min(1, 2 exp(-2 n_e D^2)), n_e = n_a n_b / (n_a + n_b); conservative
  double p_asymptotic;  ///< Kolmogorov limit law tail at sqrt(n_e) D
};

/// Two-sample Kolmogorov-Smirnov distance. Throws ValidationError on an empty sample.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

/// Standard deviation of the KS statistic under equal laws, from the Kolmogorov law:
/// sqrt(pi^2/12 - (pi/2) ln^2 2) / sqrt(n_e).
double ks_standard_error(std::size_t n_a, std::size_t n_b);

/// Largest D the two-sample test tolerates at the given level under equal laws (asymptotic).
double ks_critical_value(std::size_t n_a, std::size_t n_b, double level);

struct Estimate {
  double value;
  double standard_error;
};

/// Mean of exp(-q x) with its jackknife standard error.
Estimate empirical_laplace(std::span<const double> samples, double q);

/// Sample mean with jackknife standard error.
Estimate mean_estimate(std::span<const double> samples);

/// Empirical quantile (type 7, linear interpolation). p in [0, 1].
double quantile(std::span<const double> samples, double p);

/// Trend verdict for a sequence of KS statistics along a grid: each step may increase by at most
/// `slack` times the pooled standard error of the two cells. Returns true for fewer than two cells.
bool ks_non_increasing(std::span<const double> ks, std::span<const double> standard_errors, double slack = 2.0);

}  // namespace fragsim
