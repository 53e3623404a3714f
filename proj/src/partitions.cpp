#include "fragsim/partitions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "fragsim/errors.hpp"

namespace fragsim {

namespace {

void require_finite_non_negative(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0)
    throw ValidationError(std::string(what) + " must be finite and non-negative, got " + std::to_string(v));
}

}  // namespace

MassPartition MassPartition::from_sorted(std::vector<double> masses, double dust) {
  require_finite_non_negative(dust, "dust");
  for (std::size_t i = 0; i < masses.size(); ++i) {
    if (!std::isfinite(masses[i]) || masses[i] <= 0.0)
      throw ValidationError("partition masses must be positive and finite");
    if (i > 0 && masses[i] > masses[i - 1]) throw ValidationError("partition masses must be non-increasing");
  }
  return MassPartition(std::move(masses), dust);
}

MassPartition MassPartition::single(double m) {
  if (!std::isfinite(m) || m <= 0.0) throw ValidationError("initial mass must be positive and finite");
  return MassPartition({m}, 0.0);
}

double MassPartition::mass_sum() const noexcept { return std::accumulate(masses_.begin(), masses_.end(), 0.0); }

MassPartition decreasing_rearrangement(std::span<const double> values, double mass_floor) {
  std::vector<double> kept;
  kept.reserve(values.size());
  double dust = 0.0;
  for (const double v : values) {
    require_finite_non_negative(v, "rearranged value");
    if (v == 0.0) continue;
    if (v < mass_floor)
      dust += v;
    else
      kept.push_back(v);
  }
  std::sort(kept.begin(), kept.end(), std::greater<>());
  return MassPartition(std::move(kept), dust);
}

double l1_distance(const MassPartition& a, const MassPartition& b) {
  const std::size_t n = std::max(a.size(), b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) d += std::abs(a[i] - b[i]);
  return d;
}

MassPartition split_at(const MassPartition& p, std::size_t index, std::span<const double> fractions,
                       double mass_floor) {
  if (index >= p.size())
    throw ValidationError("split index " + std::to_string(index) + " out of range for partition of size " +
                          std::to_string(p.size()));
  double fsum = 0.0;
  for (const double f : fractions) {
    require_finite_non_negative(f, "fraction");
    fsum += f;
  }
  if (fsum > 1.0 + kFractionSumTolerance)
    throw ValidationError("fractions sum to " + std::to_string(fsum) + " > 1");

  const double parent = p.masses_[index];
  std::vector<double> values;
  values.reserve(p.size() + fractions.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    if (i != index) values.push_back(p.masses_[i]);
  double dust = p.dust_ + parent * std::max(0.0, 1.0 - fsum);
  for (const double f : fractions) {
    const double child = parent * f;
    if (child == 0.0) continue;
    if (child < mass_floor)
      dust += child;
    else
      values.push_back(child);
  }
  std::sort(values.begin(), values.end(), std::greater<>());
  return MassPartition(std::move(values), dust);
}

MassPartition with_dust(MassPartition p, double extra) {
  require_finite_non_negative(extra, "extra dust");
  p.dust_ += extra;
  return p;
}

MassPartition scaled(const MassPartition& p, double factor) {
  if (!std::isfinite(factor) || factor <= 0.0) throw ValidationError("scale factor must be positive");
  std::vector<double> m(p.masses_.begin(), p.masses_.end());
  for (double& x : m) x *= factor;
  return MassPartition(std::move(m), p.dust_ * factor);
}

MassPartition eroded(const MassPartition& p, double factor) {
  if (!(factor >= 0.0 && factor <= 1.0)) throw ValidationError("erosion factor must lie in [0, 1]");
  if (factor == 1.0) return p;
  if (factor == 0.0) return MassPartition({}, p.total());
  std::vector<double> m(p.masses_.begin(), p.masses_.end());
  double removed = 0.0;
  for (double& x : m) {
    const double y = x * factor;
    removed += x - y;
    x = y;
  }
  return MassPartition(std::move(m), p.dust_ + removed);
}

MassPartition merge(std::span<const MassPartition> parts) {
  std::size_t n = 0;
  double dust = 0.0;
  for (const auto& q : parts) {
    n += q.size();
    dust += q.dust_;
  }
  std::vector<double> values;
  values.reserve(n);
  for (const auto& q : parts) values.insert(values.end(), q.masses_.begin(), q.masses_.end());
  std::sort(values.begin(), values.end(), std::greater<>());
  return MassPartition(std::move(values), dust);
}

}  // namespace fragsim
