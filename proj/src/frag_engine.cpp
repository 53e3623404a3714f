#include "fragsim/frag_engine.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <queue>
#include <string>

#include "fragsim/errors.hpp"

namespace fragsim {

double Truncation::epsilon_for(double mass) const noexcept {
  double eps = epsilon;
  if (loss_floor > 0.0) eps = std::max(eps, loss_floor / mass);
  return std::min(eps, 0.5);
}

void Truncation::validate() const {
  check_truncation(epsilon);
  if (!(loss_floor >= 0.0) || !std::isfinite(loss_floor)) throw ValidationError("loss floor must be finite and >= 0");
  if (!(mass_floor >= 0.0) || !std::isfinite(mass_floor)) throw ValidationError("mass floor must be finite and >= 0");
  if (max_children < 1) throw ValidationError("max_children must be at least 1");
}

void EngineDiagnostics::merge(const EngineDiagnostics& o) {
  events += o.events;
  max_arity = std::max(max_arity, o.max_arity);
  truncated_dislocations += o.truncated_dislocations;
  max_floor_dust_jump = std::max(max_floor_dust_jump, o.max_floor_dust_jump);
  residual_dust += o.residual_dust;
  neglected_mass += o.neglected_mass;
}

namespace {

constexpr std::uint32_t kNoSlot = std::numeric_limits<std::uint32_t>::max();

struct Clock {
  double time;
  std::uint32_t slot;
  bool operator>(const Clock& o) const { return time > o.time || (time == o.time && slot > o.slot); }
};

}  // namespace

// Shared event loop. Fragments live in slots; each has exactly one pending clock (or none when
// its rate vanishes), sampled at creation.
class Simulator {
 public:
  Simulator(const RateFunction& tau, const DislocationMeasure& nu, const Truncation& trunc, Rng& rng)
      : tau_(tau), nu_(nu), trunc_(trunc), rng_(rng) {
    trunc.validate();
  }

  double rate(double s) const {
    const double r = tau_(s) * nu_.fast_rate(trunc_.epsilon_for(s));
    if (!std::isfinite(r) || r < 0.0)
      throw RateOverflow("splitting rate is not finite at mass " + std::to_string(s), s);
    return r;
  }

  double neglected(double s, double duration) const {
    if (duration <= 0.0) return 0.0;
    return s * tau_(s) * nu_.fast_neglected_loss(trunc_.epsilon_for(s)) * duration;
  }

  void start(const MassPartition& initial, double horizon) {
    horizon_ = horizon;
    dust_ = initial.dust();
    for (const double s : initial.masses()) add(s, 0.0);
    tagged_ = initial.empty() ? kNoSlot : 0;
  }

  // Runs events up to the horizon; `before(t)` is called with the time of each event before it
  // is applied, `after(t)` once it has been applied.
  template <class Before, class After>
  void run(Before&& before, After&& after) {
    while (!queue_.empty() && queue_.top().time <= horizon_) {
      const Clock c = queue_.top();
      queue_.pop();
      before(c.time);
      split(c.slot, c.time);
      after(c.time);
    }
    for (std::uint32_t i = 0; i < mass_.size(); ++i)
      if (mass_[i] > 0.0) diag_.neglected_mass += neglected(mass_[i], horizon_ - birth_[i]);
  }

  MassPartition state() const {
    std::vector<double> alive;
    alive.reserve(mass_.size());
    for (const double s : mass_)
      if (s > 0.0) alive.push_back(s);
    return with_dust(decreasing_rearrangement(alive), dust_);
  }

  const EngineDiagnostics& diagnostics() const { return diag_; }
  std::vector<LineagePoint>& lineage() { return lineage_; }

 private:
  void add(double s, double t) {
    std::uint32_t slot;
    if (!free_.empty()) {
      slot = free_.back();
      free_.pop_back();
      mass_[slot] = s;
      birth_[slot] = t;
    } else {
      slot = static_cast<std::uint32_t>(mass_.size());
      mass_.push_back(s);
      birth_.push_back(t);
    }
    schedule(slot, t);
  }

  void schedule(std::uint32_t slot, double t) {
    const double r = rate(mass_[slot]);
    if (r > 0.0) queue_.push({t + exponential(rng_, r), slot});
  }

  void split(std::uint32_t slot, double t) {
    if (trunc_.max_events != 0 && diag_.events >= trunc_.max_events)
      throw EventBudgetExceeded("event budget of " + std::to_string(trunc_.max_events) + " exhausted");
    ++diag_.events;
    const double s = mass_[slot];
    diag_.neglected_mass += neglected(s, t - birth_[slot]);
    nu_.sample_into(trunc_.epsilon_for(s), rng_, d_);

    const std::size_t arity = d_.fractions.size();
    diag_.max_arity = std::max(diag_.max_arity, arity);
    const std::size_t limit = std::min(arity, trunc_.max_children);
    if (limit < arity) ++diag_.truncated_dislocations;

    double kept = 0.0, floored = 0.0;
    bool parent_reused = false;
    for (std::size_t i = 0; i < arity; ++i) {
      const double child = s * d_.fractions[i];
      if (i >= limit || child < trunc_.mass_floor) {
        floored += child;
        continue;
      }
      kept += child;
      if (!parent_reused) {
        // The largest surviving child continues the parent's slot (and lineage).
        parent_reused = true;
        mass_[slot] = child;
        birth_[slot] = t;
        schedule(slot, t);
      } else {
        add(child, t);
      }
    }
    if (!parent_reused) {
      mass_[slot] = 0.0;
      free_.push_back(slot);
    }
    if (slot == tagged_) {
      lineage_.push_back({t, parent_reused ? mass_[slot] : 0.0, arity > 0 ? d_.fractions[0] : 0.0});
      if (!parent_reused) tagged_ = kNoSlot;
    }
    diag_.residual_dust += s * d_.residual;
    diag_.max_floor_dust_jump = std::max(diag_.max_floor_dust_jump, floored);
    // Fractions may exceed 1 by rounding.
    dust_ += std::max(0.0, s - kept);
  }

  const RateFunction& tau_;
  const DislocationMeasure& nu_;
  Truncation trunc_;
  Rng& rng_;
  double horizon_ = 0.0;
  double dust_ = 0.0;
  std::vector<double> mass_, birth_;
  std::vector<std::uint32_t> free_;
  std::priority_queue<Clock, std::vector<Clock>, std::greater<>> queue_;
  std::uint32_t tagged_ = kNoSlot;
  std::vector<LineagePoint> lineage_;
  EngineDiagnostics diag_;
  Dislocation d_;
};

namespace {

void check_horizon(double horizon) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ValidationError("horizon must be finite and >= 0");
}

}  // namespace

FragPath simulate_from(const RateFunction& tau, const DislocationMeasure& nu, const MassPartition& initial,
                       double horizon, const Truncation& trunc, Rng& rng) {
  check_horizon(horizon);
  Simulator sim(tau, nu, trunc, rng);
  sim.start(initial, horizon);
  FragPath path;
  path.initial_mass_ = initial.total();
  path.horizon_ = horizon;
  path.truncation_ = trunc;
  path.homogeneous_ = tau.homogeneous();
  path.events_.push_back({0.0, initial});
  path.lineage_.push_back({0.0, initial.largest(), 1.0});
  sim.run([](double) {}, [&](double t) { path.events_.push_back({t, sim.state()}); });
  path.lineage_.insert(path.lineage_.end(), sim.lineage().begin(), sim.lineage().end());
  path.diagnostics_ = sim.diagnostics();
  return path;
}

FragPath simulate(const RateFunction& tau, const DislocationMeasure& nu, double m, double horizon,
                  const Truncation& trunc, Rng& rng) {
  if (!(m > 0.0) || !std::isfinite(m)) throw ValidationError("initial mass must be positive and finite");
  if (!(trunc.mass_floor < m)) throw ValidationError("mass floor must lie below the initial mass");
  return simulate_from(tau, nu, MassPartition::single(m), horizon, trunc, rng);
}

std::vector<MassPartition> simulate_marginals(const RateFunction& tau, const DislocationMeasure& nu,
                                              const MassPartition& initial, std::span<const double> probe_times,
                                              const Truncation& trunc, Rng& rng, EngineDiagnostics* diag) {
  for (std::size_t i = 0; i < probe_times.size(); ++i) {
    check_horizon(probe_times[i]);
    if (i > 0 && probe_times[i] < probe_times[i - 1]) throw ValidationError("probe times must be non-decreasing");
  }
  std::vector<MassPartition> out;
  out.reserve(probe_times.size());
  if (probe_times.empty()) return out;
  Simulator sim(tau, nu, trunc, rng);
  sim.start(initial, probe_times.back());
  std::size_t next = 0;
  // A probe strictly before an event sees the pre-event state.
  sim.run(
      [&](double t) {
        while (next < probe_times.size() && probe_times[next] < t) {
          out.push_back(sim.state());
          ++next;
        }
      },
      [](double) {});
  while (next < probe_times.size()) {
    out.push_back(sim.state());
    ++next;
  }
  if (diag) diag->merge(sim.diagnostics());
  return out;
}

std::vector<double> simulate_top(const RateFunction& tau, const DislocationMeasure& nu, std::span<const Seed> starts,
                                 double t, std::size_t k, const Truncation& trunc, Rng& rng, EngineDiagnostics* diag) {
  trunc.validate();
  check_horizon(t);
  if (k == 0) throw ValidationError("simulate_top needs k >= 1");
  EngineDiagnostics local;
  std::vector<double> top;  // descending, at most k entries
  top.reserve(k + 1);
  const auto beaten = [&](double s) { return top.size() == k && s <= top.back(); };
  const auto insert = [&](double s) {
    top.insert(std::upper_bound(top.begin(), top.end(), s, std::greater<>()), s);
    if (top.size() > k) top.pop_back();
  };
  const auto rate = [&](double s) {
    const double r = tau(s) * nu.fast_rate(trunc.epsilon_for(s));
    if (!std::isfinite(r) || r < 0.0) throw RateOverflow("splitting rate is not finite at mass " + std::to_string(s), s);
    return r;
  };

  struct Pending {
    double mass;
    double time;
    bool operator<(const Pending& o) const { return mass < o.mass || (mass == o.mass && time > o.time); }
  };
  std::priority_queue<Pending> pending;
  for (const auto& s : starts) {
    if (!(s.mass >= 0.0) || !std::isfinite(s.mass)) throw ValidationError("start masses must be finite and >= 0");
    if (s.time <= t && s.mass > 0.0) pending.push({s.mass, s.time});
  }

  Dislocation d;
  while (!pending.empty()) {
    Pending p = pending.top();
    pending.pop();
    if (beaten(p.mass)) break;
    double s = p.mass, now = p.time;
    // Follow the largest child; side branches go back to the pending queue.
    for (;;) {
      const double r = rate(s);
      const double wait = r > 0.0 ? exponential(rng, r) : std::numeric_limits<double>::infinity();
      const double eps = trunc.epsilon_for(s);
      if (now + wait > t) {
        local.neglected_mass += s * tau(s) * nu.fast_neglected_loss(eps) * (t - now);
        insert(s);
        break;
      }
      if (trunc.max_events != 0 && local.events >= trunc.max_events)
        throw EventBudgetExceeded("event budget of " + std::to_string(trunc.max_events) + " exhausted");
      ++local.events;
      local.neglected_mass += s * tau(s) * nu.fast_neglected_loss(eps) * wait;
      now += wait;
      nu.sample_into(eps, rng, d);
      const std::size_t arity = d.fractions.size();
      local.max_arity = std::max(local.max_arity, arity);
      const std::size_t limit = std::min(arity, trunc.max_children);
      if (limit < arity) ++local.truncated_dislocations;
      local.residual_dust += s * d.residual;
      double next = 0.0, floored = 0.0;
      for (std::size_t i = 0; i < arity; ++i) {
        const double child = s * d.fractions[i];
        if (i >= limit || child < trunc.mass_floor) {
          floored += child;
          continue;
        }
        if (next == 0.0)
          next = child;
        else if (!beaten(child))
          pending.push({child, now});
      }
      local.max_floor_dust_jump = std::max(local.max_floor_dust_jump, floored);
      s = next;
      if (s == 0.0 || beaten(s)) break;
    }
  }
  if (diag) diag->merge(local);
  top.resize(k, 0.0);
  return top;
}

// ---------------------------------------------------------------------------
// FragPath

const Snapshot& FragPath::at(double t) const {
  if (!(t >= 0.0 && t <= horizon_))
    throw ValidationError("time " + std::to_string(t) + " outside [0, " + std::to_string(horizon_) + "]");
  const auto it =
      std::upper_bound(events_.begin(), events_.end(), t, [](double x, const Snapshot& s) { return x < s.time; });
  return *(it - 1);
}

MassPartition FragPath::marginal(double t) const {
  const Snapshot& s = at(t);
  if (erosion_ == 0.0) return s.state;
  return eroded(s.state, std::exp(-erosion_ * t));
}

double FragPath::dust_mass(double t) const { return marginal(t).dust(); }

std::vector<std::pair<double, double>> FragPath::largest_fragment_series() const {
  std::vector<std::pair<double, double>> out;
  out.reserve(events_.size());
  for (const auto& e : events_) out.emplace_back(e.time, e.state.largest() * std::exp(-erosion_ * e.time));
  return out;
}

void FragPath::write_jsonl(std::ostream& os) const {
  const auto old = os.precision(17);
  for (const auto& e : events_) {
    const MassPartition p = erosion_ == 0.0 ? e.state : eroded(e.state, std::exp(-erosion_ * e.time));
    os << "{\"time\":" << e.time << ",\"masses\":[";
    for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << p[i];
    os << "],\"dust\":" << p.dust() << "}\n";
  }
  os.precision(old);
}

FragPath apply_erosion(const FragPath& path, double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("erosion rate must be finite and >= 0");
  if (!path.homogeneous_)
    throw ValidationError(
        "erosion factorises only homogeneous fragmentations; this path was simulated with a mass-dependent rate");
  FragPath out = path;
  out.erosion_ += c;
  return out;
}

}  // namespace fragsim
