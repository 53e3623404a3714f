#include "fragsim/immigration.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "fragsim/errors.hpp"

namespace fragsim {

ImmigrationRealization sample_immigration(const ImmigrationMeasure& I, double horizon, double atom_floor, Rng& rng) {
  if (!(atom_floor > 0.0)) throw ValidationError("atom floor must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ValidationError("horizon must be finite and >= 0");
  ImmigrationRealization real;
  real.horizon = horizon;
  real.atom_floor = atom_floor;
  const double mean = I.is_zero() ? 0.0 : I.atom_rate(atom_floor) * horizon;
  if (!(mean > 0.0)) return real;
  std::poisson_distribution<long long> count(mean);
  const auto n = static_cast<std::size_t>(count(rng));
  std::vector<double> times(n);
  for (double& t : times) t = horizon * std::generate_canonical<double, 53>(rng);
  std::sort(times.begin(), times.end());
  real.atoms.reserve(n);
  for (const double t : times) real.atoms.push_back({t, I.sample_atom(atom_floor, rng)});
  return real;
}

JumpPath sigma_path(const ImmigrationRealization& real) {
  std::vector<Jump> jumps;
  jumps.reserve(real.atoms.size());
  for (const auto& a : real.atoms) {
    const double size = a.masses.total();
    if (!jumps.empty() && jumps.back().time == a.time)
      jumps.back().size += size;
    else
      jumps.push_back({a.time, size});
  }
  return JumpPath(real.horizon, 0.0, std::move(jumps));
}

double immigrant_mass(const ImmigrationRealization& real, double t) {
  double total = 0.0;
  for (const auto& a : real.atoms) {
    if (a.time > t) break;
    total += a.masses.total();
  }
  return total;
}

MassPartition pure_immigration_marginal(const ImmigrationRealization& real, double t) {
  if (!(t >= 0.0 && t <= real.horizon)) throw ValidationError("time outside the realization window");
  std::vector<MassPartition> parts;
  for (const auto& a : real.atoms) {
    if (a.time > t) break;
    parts.push_back(a.masses);
  }
  return merge(parts);
}

// ---------------------------------------------------------------------------

FIProcess::FIProcess(RateFunction tau, DislocationPtr nu, ImmigrationRealization real, Truncation trunc,
                     std::uint64_t seed)
    : tau_(std::move(tau)), nu_(std::move(nu)), real_(std::move(real)), trunc_(trunc), seed_(seed),
      cache_(real_.atoms.size()) {
  if (!nu_) throw ValidationError("FI needs a dislocation measure");
  trunc_.validate();
}

const FragPath& FIProcess::atom_path(std::size_t i) const {
  if (!cache_[i]) {
    const ImmigrantAtom& a = real_.atoms[i];
    const MassPartition start = with_dust(decreasing_rearrangement(a.masses.masses(), trunc_.mass_floor), a.masses.dust());
    Rng rng = make_rng(seed_, {stream::kFragmentation, i});
    cache_[i] = simulate_from(tau_, *nu_, start, real_.horizon - a.time, trunc_, rng);
  }
  return *cache_[i];
}

MassPartition FIProcess::marginal(double t) const {
  if (!(t >= 0.0 && t <= real_.horizon)) throw ValidationError("time outside the FI window");
  std::vector<MassPartition> parts;
  for (std::size_t i = 0; i < real_.atoms.size() && real_.atoms[i].time <= t; ++i)
    parts.push_back(atom_path(i).marginal(t - real_.atoms[i].time));
  return merge(parts);
}

EngineDiagnostics FIProcess::diagnostics() const {
  EngineDiagnostics d;
  for (const auto& p : cache_)
    if (p) d.merge(p->diagnostics());
  return d;
}

FIProcess simulate_FI(const RateFunction& tau, DislocationPtr nu, const ImmigrationMeasure& I, double horizon,
                      double atom_floor, const Truncation& trunc, std::uint64_t seed) {
  Rng rng = make_rng(seed, {stream::kImmigration});
  ImmigrationRealization real = sample_immigration(I, horizon, atom_floor, rng);
  return FIProcess(tau, std::move(nu), std::move(real), trunc, seed);
}

std::vector<double> fi_top(const RateFunction& tau, const DislocationMeasure& nu, const ImmigrationRealization& real,
                           double t, std::size_t k, const Truncation& trunc, Rng& rng, EngineDiagnostics* diag) {
  std::vector<Seed> seeds;
  for (const auto& a : real.atoms) {
    if (a.time > t) break;
    for (const double s : a.masses.masses())
      if (s >= trunc.mass_floor) seeds.push_back({s, a.time});
  }
  return simulate_top(tau, nu, seeds, t, k, trunc, rng, diag);
}

void write_jsonl(std::ostream& os, const ImmigrationRealization& real) {
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < real.atoms.size(); ++i) {
    const auto& a = real.atoms[i];
    os << "{\"atom\":" << i << ",\"time\":" << a.time << ",\"masses\":[";
    for (std::size_t j = 0; j < a.masses.size(); ++j) os << (j ? "," : "") << a.masses[j];
    os << "],\"dust\":" << a.masses.dust() << "}\n";
  }
  os.precision(old);
}

}  // namespace fragsim
