#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fragsim/measures.hpp"
#include "fragsim/partitions.hpp"
#include "fragsim/rng.hpp"

namespace fragsim {

/// Approximation knobs for one simulation.
struct Truncation {
  /// Global eps: dislocations with s_1 >= 1 - eps are ignored.
  double epsilon = 1e-4;
  /// Absolute loss floor eta (0 disables): a fragment of mass s ignores dislocations that would
  /// remove less than eta from it, i.e. uses eps(s) = min(1/2, max(epsilon, eta / s)).
  double loss_floor = 0.0;
  /// Absolute mass floor: children lighter than this become dust.
  double mass_floor = 1e-9;
  /// Children beyond this count (smallest first) become dust.
  std::size_t max_children = 1024;
  /// 0 means unlimited.
  std::uint64_t max_events = 0;

  double epsilon_for(double mass) const noexcept;
  void validate() const;
};

struct EngineDiagnostics {
  std::uint64_t events = 0;
  std::size_t max_arity = 0;
  std::uint64_t truncated_dislocations = 0;
  /// Largest dust increment caused by the mass floor or the arity cap in a single event.
  double max_floor_dust_jump = 0.0;
  /// Mass sent to dust as compensated residuals of the dislocation samples.
  double residual_dust = 0.0;
  /// Expected mass moved by the ignored dislocations (s_1 >= 1 - eps), summed over the simulated
  /// fragment lifetimes: sum of s tau(s) L(eps(s)) dt with L the measure's neglected loss.
  double neglected_mass = 0.0;

  void merge(const EngineDiagnostics& other);
};

struct Snapshot {
  double time;
  MassPartition state;
};

struct LineagePoint {
  double time;
  double mass;
  double s1;  ///< largest fraction of the dislocation at this time (1 at time 0)
};

/// Piecewise-constant record of a fragmentation: one snapshot per event.
class FragPath {
 public:
  double initial_mass() const noexcept { return initial_mass_; }
  double horizon() const noexcept { return horizon_; }
  const Truncation& truncation() const noexcept { return truncation_; }
  std::span<const Snapshot> events() const noexcept { return events_; }
  /// Masses of the fragment that always keeps the largest child of its dislocations.
  std::span<const LineagePoint> tagged_lineage() const noexcept { return lineage_; }
  const EngineDiagnostics& diagnostics() const noexcept { return diagnostics_; }
  double erosion_rate() const noexcept { return erosion_; }
  bool homogeneous() const noexcept { return homogeneous_; }

  /// State at the last event time <= t (with erosion applied at t). Throws ValidationError for
  /// t outside [0, horizon].
  MassPartition marginal(double t) const;
  double dust_mass(double t) const;
  /// (event time, largest mass) per event, erosion applied.
  std::vector<std::pair<double, double>> largest_fragment_series() const;

  void write_jsonl(std::ostream& os) const;

 private:
  friend FragPath simulate_from(const RateFunction&, const DislocationMeasure&, const MassPartition&, double,
                                const Truncation&, Rng&);
  friend FragPath apply_erosion(const FragPath&, double);
  const Snapshot& at(double t) const;

  double initial_mass_ = 0.0;
  double horizon_ = 0.0;
  Truncation truncation_;
  std::vector<Snapshot> events_;
  std::vector<LineagePoint> lineage_;
  EngineDiagnostics diagnostics_;
  double erosion_ = 0.0;
  bool homogeneous_ = false;
};

/// Event-driven (tau, nu)-fragmentation from a single mass m over [0, horizon].
FragPath simulate(const RateFunction& tau, const DislocationMeasure& nu, double m, double horizon,
                  const Truncation& trunc, Rng& rng);

/// Same, started from an arbitrary partition (its dust is carried along).
FragPath simulate_from(const RateFunction& tau, const DislocationMeasure& nu, const MassPartition& initial,
                       double horizon, const Truncation& trunc, Rng& rng);

/// States at the given non-decreasing probe times without storing every event.
std::vector<MassPartition> simulate_marginals(const RateFunction& tau, const DislocationMeasure& nu,
                                              const MassPartition& initial, std::span<const double> probe_times,
                                              const Truncation& trunc, Rng& rng,
                                              EngineDiagnostics* diag = nullptr);

/// Top-k masses at time t of the fragmentations started from each of `starts` (mass, start time),
/// descending and zero-padded. Fragments are explored heaviest first and a fragment is skipped
/// once it cannot beat the current k-th largest, so the cost scales with k rather than with the
/// number of fragments. The law equals that of the top-k of the full simulation.
struct Seed {
  double mass;
  double time;
};
std::vector<double> simulate_top(const RateFunction& tau, const DislocationMeasure& nu, std::span<const Seed> starts,
                                 double t, std::size_t k, const Truncation& trunc, Rng& rng,
                                 EngineDiagnostics* diag = nullptr);

/// Homogeneous fragmentation with erosion at rate c: masses at time t scaled by exp(-c t), the
/// deficit moved to dust. Only valid for paths simulated with tau == 1.
FragPath apply_erosion(const FragPath& path, double c);

}  // namespace fragsim
