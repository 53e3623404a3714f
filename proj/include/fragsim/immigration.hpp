#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fragsim/frag_engine.hpp"
#include "fragsim/measures.hpp"
#include "fragsim/subordinators.hpp"

namespace fragsim {

struct ImmigrantAtom {
  double time;
  MassPartition masses;
};

/// Poisson atoms (r_i, u^i) of an immigration measure on [0, horizon], restricted to atoms of
/// total mass above `atom_floor`.
struct ImmigrationRealization {
  double horizon = 0.0;
  double atom_floor = 0.0;
  std::vector<ImmigrantAtom> atoms;  ///< increasing times
};

ImmigrationRealization sample_immigration(const ImmigrationMeasure& I, double horizon, double atom_floor, Rng& rng);

/// sigma_I(t): a jump of size sum_j u^i_j at each r_i.
JumpPath sigma_path(const ImmigrationRealization& real);

/// Rearrangement of every immigrant mass that arrived by time t.
MassPartition pure_immigration_marginal(const ImmigrationRealization& real, double t);

/// Fragmentation with immigration: each immigrant mass fragments independently from its arrival.
///
/// Atom fragmentations are simulated on the first marginal query and cached, each from its own
/// stream keyed by (seed, atom index). Not safe for concurrent queries.
class FIProcess {
 public:
  FIProcess(RateFunction tau, DislocationPtr nu, ImmigrationRealization real, Truncation trunc, std::uint64_t seed);

  const ImmigrationRealization& realization() const noexcept { return real_; }
  MassPartition marginal(double t) const;
  /// Dust accumulated by time t (mass floor, deficits, and fragmentation losses).
  double dust(double t) const { return marginal(t).dust(); }
  EngineDiagnostics diagnostics() const;

 private:
  const FragPath& atom_path(std::size_t i) const;

  RateFunction tau_;
  DislocationPtr nu_;
  ImmigrationRealization real_;
  Truncation trunc_;
  std::uint64_t seed_;
  mutable std::vector<std::optional<FragPath>> cache_;
};

FIProcess simulate_FI(const RateFunction& tau, DislocationPtr nu, const ImmigrationMeasure& I, double horizon,
                      double atom_floor, const Truncation& trunc, std::uint64_t seed);

/// Top-k masses of FI(t) for a given realization, via the pruned search of simulate_top.
std::vector<double> fi_top(const RateFunction& tau, const DislocationMeasure& nu, const ImmigrationRealization& real,
                           double t, std::size_t k, const Truncation& trunc, Rng& rng,
                           EngineDiagnostics* diag = nullptr);

/// Total immigrant mass of atoms arriving by time t.
double immigrant_mass(const ImmigrationRealization& real, double t);

void write_jsonl(std::ostream& os, const ImmigrationRealization& real);

}  // namespace fragsim
