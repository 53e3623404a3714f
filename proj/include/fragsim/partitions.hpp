#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fragsim {

/// A finite element of l1-decreasing: positive masses in non-increasing order, plus the
/// mass already reduced to dust.
///
/// Instances are immutable once built. Every constructor path enforces the invariants
/// (masses sorted, strictly positive, finite; dust >= 0).
class MassPartition {
 public:
  /// The dust state: no masses, no dust.
  MassPartition() = default;

  /// Takes masses already in non-increasing order. Throws ValidationError otherwise.
  static MassPartition from_sorted(std::vector<double> masses, double dust = 0.0);

  /// A single mass m (m > 0), no dust.
  static MassPartition single(double m);

  std::span<const double> masses() const noexcept { return masses_; }
  double dust() const noexcept { return dust_; }
  std::size_t size() const noexcept { return masses_.size(); }
  bool empty() const noexcept { return masses_.empty(); }

  /// i-th largest mass, 0 past the end (the sequence is padded with zeros).
  double operator[](std::size_t i) const noexcept { return i < masses_.size() ? masses_[i] : 0.0; }
  double largest() const noexcept { return (*this)[0]; }

  double mass_sum() const noexcept;
  double total() const noexcept { return mass_sum() + dust_; }

  friend bool operator==(const MassPartition&, const MassPartition&) = default;

 private:
  MassPartition(std::vector<double> masses, double dust) : masses_(std::move(masses)), dust_(dust) {}

  std::vector<double> masses_;
  double dust_ = 0.0;

  friend MassPartition decreasing_rearrangement(std::span<const double>, double);
  friend MassPartition split_at(const MassPartition&, std::size_t, std::span<const double>, double);
  friend MassPartition with_dust(MassPartition, double);
  friend MassPartition scaled(const MassPartition&, double);
  friend MassPartition eroded(const MassPartition&, double);
  friend MassPartition merge(std::span<const MassPartition>);
};

/// Tolerance on sum(fractions) <= 1 when splitting.
inline constexpr double kFractionSumTolerance = 1e-9;

/// Sorts non-negative values into a partition. Zeros are dropped; values below
/// `mass_floor` are moved to dust. Throws ValidationError on a negative or non-finite value.
MassPartition decreasing_rearrangement(std::span<const double> values, double mass_floor = 0.0);

/// sum_i |a_i - b_i| over the masses (zero-padded); dust does not enter.
double l1_distance(const MassPartition& a, const MassPartition& b);

/// Replaces the mass at `index` by mass*fraction_j; the deficit mass*(1 - sum fractions) and
/// any child below `mass_floor` go to dust.
MassPartition split_at(const MassPartition& p, std::size_t index, std::span<const double> fractions,
                       double mass_floor = 0.0);

/// Same masses, dust increased by `extra` (>= 0).
MassPartition with_dust(MassPartition p, double extra);

/// Every mass and the dust multiplied by `factor` > 0.
MassPartition scaled(const MassPartition& p, double factor);

/// Masses multiplied by `factor` in [0, 1]; the removed mass goes to dust, so total() is kept.
MassPartition eroded(const MassPartition& p, double factor);

/// Rearrangement of the union of several partitions; dusts add.
MassPartition merge(std::span<const MassPartition> parts);

}  // namespace fragsim
