#include "fragsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "fragsim/errors.hpp"
#include "fragsim/excursion_models.hpp"
#include "fragsim/immigration.hpp"
#include "fragsim/parallel.hpp"
#include "fragsim/stable_jumps.hpp"
#include "fragsim/stable_measures.hpp"
#include "fragsim/stats.hpp"
#include "fragsim/subordinators.hpp"

namespace fragsim {

bool ConvergenceReport::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.passed; });
}

double EpsilonCoupling::at(double m) const {
  if (fixed) return *fixed;
  return std::min(0.5, std::pow(m, exponent));
}

Json EpsilonCoupling::describe() const {
  if (fixed) return Json{{"fixed", *fixed}};
  return Json{{"exponent", exponent}};
}

double TimeScale::at(const RateFunction& tau, const DislocationMeasure& nu, double m) const {
  if (kind == Kind::power) return std::pow(m, exponent);
  return phi_nu(nu, m) / tau(m);
}

Json TimeScale::describe() const {
  if (kind == Kind::power) return Json{{"kind", "power"}, {"exponent", exponent}};
  return Json{{"kind", "phi_over_tau"}};
}

namespace {

// Stream tags for the per-replica seeds of the different experiment roles.
constexpr std::uint64_t kExcursion = 0x45584352;  // "EXCR"
constexpr std::uint64_t kLaplace = 0x4c41504c;    // "LAPL"

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

Json truncation_json(const Truncation& t) {
  return Json{{"epsilon", t.epsilon},
              {"loss_floor", t.loss_floor},
              {"mass_floor", t.mass_floor},
              {"max_children", t.max_children},
              {"max_events", t.max_events}};
}

Json diagnostics_json(const EngineDiagnostics& d, std::size_t replicas) {
  const double n = static_cast<double>(std::max<std::size_t>(replicas, 1));
  return Json{{"events", d.events},
              {"events_per_replica", static_cast<double>(d.events) / n},
              {"max_arity", d.max_arity},
              {"truncated_dislocations", d.truncated_dislocations},
              {"max_floor_dust_jump", d.max_floor_dust_jump},
              {"residual_dust_per_replica", d.residual_dust / n},
              {"neglected_mass_per_replica", d.neglected_mass / n}};
}

EngineDiagnostics merge_all(const std::vector<EngineDiagnostics>& parts) {
  EngineDiagnostics d;
  for (const auto& p : parts) d.merge(p);
  return d;
}

void check_probe_times(std::vector<double>& times) {
  if (times.empty()) throw ValidationError("probe_times must not be empty");
  for (const double t : times)
    if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("probe times must be positive and finite");
  std::sort(times.begin(), times.end());
}

void check_samples(std::size_t n) {
  if (n < 2) throw ValidationError("sample size must be at least 2");
}

void check_immigration(const ImmigrationPtr& I) {
  if (!I) throw ValidationError("an immigration measure is required");
  if (I->is_zero()) throw ValidationError("the immigration measure must be non-zero (I(l1) != 0)");
}

struct KsCell {
  KsResult ks;
  double se;
};

KsCell ks_cell(const std::vector<double>& a, const std::vector<double>& b) {
  return {ks_two_sample(a, b), ks_standard_error(a.size(), b.size())};
}

std::string key(const std::string& what, double grid, double t) { return what + "[" + fmt(grid) + "][t=" + fmt(t) + "]"; }

// Adds trend and final-cell verdicts for one KS series along the grid.
void ks_verdicts(ConvergenceReport& report, const std::string& id, const std::string& description,
                 const std::vector<double>& grid, const std::vector<KsCell>& cells, const Thresholds& th) {
  std::vector<double> ks, se;
  for (const auto& c : cells) {
    ks.push_back(c.ks.statistic);
    se.push_back(c.se);
  }
  if (cells.size() >= 2) {
    report.verdicts.push_back({id + "_trend", description + ": KS non-increasing along the grid",
                               ks_non_increasing(ks, se, th.trend_slack),
                               Json{{"grid", grid}, {"ks", ks}, {"standard_errors", se}, {"slack", th.trend_slack}}});
  }
  report.verdicts.push_back({id + "_final", description + ": final-cell KS below threshold",
                             ks.back() <= th.ks,
                             Json{{"grid", grid.back()}, {"ks", ks.back()}, {"threshold", th.ks}}});
}

// Laplace cross-check of sampled immigrant masses against the closed-form exponent, allowing for
// the mass discarded with the atoms below the floor.
void target_laplace(ConvergenceReport& report, Table& table, const ImmigrationMeasure& I, double atom_floor,
                    double t, const std::vector<double>& samples, const std::vector<double>& qs, double sigmas) {
  for (const double q : qs) {
    const auto phi = I.laplace_exponent(q);
    if (!phi) continue;
    const Estimate e = empirical_laplace(samples, q);
    const double exact = std::exp(-t * *phi);
    const double bias = exact * std::expm1(t * q * I.neglected_mass(atom_floor));
    const double dev = std::abs(e.value - exact);
    table.rows.push_back({t, q, e.value, e.standard_error, exact, bias});
    report.verdicts.push_back({"target_laplace[t=" + fmt(t) + "][q=" + fmt(q) + "]",
                               "immigrant mass Laplace transform matches the closed form",
                               dev <= sigmas * e.standard_error + bias,
                               Json{{"estimate", e.value},
                                    {"standard_error", e.standard_error},
                                    {"exact", exact},
                                    {"truncation_bias_bound", bias}}});
  }
}

double largest_immigrant(const ImmigrationRealization& real, double t) {
  double best = 0.0;
  for (const auto& a : real.atoms) {
    if (a.time > t) break;
    best = std::max(best, a.masses.largest());
  }
  return best;
}

void warn_neglected(ConvergenceReport& report, const EngineDiagnostics& d, std::size_t n, double tol,
                    const std::string& where) {
  const double per = d.neglected_mass / static_cast<double>(n);
  if (per > tol)
    report.warnings.push_back("under-resolved truncation at " + where + ": neglected mass per replica " + fmt(per) +
                              " exceeds " + fmt(tol));
}

// Samples of (m - F_1, F_2) at each probe time from a single initial mass.
struct EngineSamples {
  std::vector<std::vector<double>> loss, f2;  // [probe][replica]
  EngineDiagnostics diag;
};

EngineSamples engine_top2(const RateFunction& tau, const DislocationMeasure& nu, double m,
                          const std::vector<double>& times, std::size_t n, const Truncation& trunc,
                          const RunOptions& run, std::uint64_t cell) {
  EngineSamples s;
  s.loss.assign(times.size(), std::vector<double>(n));
  s.f2.assign(times.size(), std::vector<double>(n));
  std::vector<EngineDiagnostics> diags(n);
  parallel_for(n, run.threads, [&](std::size_t r) {
    const Seed start{m, 0.0};
    for (std::size_t p = 0; p < times.size(); ++p) {
      Rng rng = make_rng(run.seed, {stream::kFragmentation, cell, r, p});
      const auto top = simulate_top(tau, nu, std::span(&start, 1), times[p], 2, trunc, rng, &diags[r]);
      s.loss[p][r] = m - top[0];
      s.f2[p][r] = top[1];
    }
  });
  s.diag = merge_all(diags);
  return s;
}

struct TargetSamples {
  std::vector<std::vector<double>> sigma, second;  // [probe][replica]
  EngineDiagnostics diag;
};

// sigma_I(t) and either the largest fragment of FI(t) (fragmenting = true) or the largest
// immigrant of the pure immigration process.
TargetSamples immigration_targets(const RateFunction& tau, const DislocationMeasure& nu, const ImmigrationMeasure& I,
                                  const std::vector<double>& times, std::size_t n, double atom_floor,
                                  const Truncation& trunc, bool fragmenting, const RunOptions& run) {
  TargetSamples s;
  s.sigma.assign(times.size(), std::vector<double>(n));
  s.second.assign(times.size(), std::vector<double>(n));
  std::vector<EngineDiagnostics> diags(n);
  parallel_for(n, run.threads, [&](std::size_t r) {
    Rng rng = make_rng(run.seed, {stream::kTarget, r});
    const ImmigrationRealization real = sample_immigration(I, times.back(), atom_floor, rng);
    for (std::size_t p = 0; p < times.size(); ++p) {
      s.sigma[p][r] = immigrant_mass(real, times[p]);
      if (fragmenting) {
        Rng frng = make_rng(run.seed, {stream::kTarget, r, p + 1});
        s.second[p][r] = fi_top(tau, nu, real, times[p], 1, trunc, frng, &diags[r])[0];
      } else {
        s.second[p][r] = largest_immigrant(real, times[p]);
      }
    }
  });
  s.diag = merge_all(diags);
  return s;
}

void check_grid(std::vector<double>& grid, const char* what) {
  if (grid.empty()) throw ValidationError(std::string(what) + " must not be empty");
  for (const double m : grid)
    if (!(m > 0.0) || !std::isfinite(m)) throw ValidationError(std::string(what) + " values must be positive");
}

}  // namespace

// ---------------------------------------------------------------------------

ConvergenceReport theorem1_experiment(const Theorem1Spec& spec_in, const RunOptions& run) {
  Theorem1Spec spec = spec_in;
  if (!spec.nu) throw ValidationError("a dislocation measure is required");
  check_immigration(spec.immigration);
  check_grid(spec.m_grid, "m_grid");
  std::sort(spec.m_grid.begin(), spec.m_grid.end());
  check_probe_times(spec.probe_times);
  check_samples(spec.samples);
  spec.truncation.validate();
  if (!(spec.atom_floor > 0.0)) throw ValidationError("atom_floor must be positive");

  ConvergenceReport report;
  report.experiment = "theorem1";
  report.parameters = Json{{"tau", spec.tau.name()},
                           {"nu", spec.nu->name()},
                           {"immigration", spec.immigration->name()},
                           {"m_grid", spec.m_grid},
                           {"probe_times", spec.probe_times},
                           {"samples", spec.samples},
                           {"epsilon", spec.epsilon.describe()},
                           {"truncation", truncation_json(spec.truncation)},
                           {"atom_floor", spec.atom_floor},
                           {"seed", run.seed},
                           {"ks_threshold", spec.thresholds.ks},
                           {"trend_slack", spec.thresholds.trend_slack}};

  Truncation target_trunc = spec.truncation;
  target_trunc.epsilon = spec.epsilon.at(spec.m_grid.back());
  const TargetSamples target = immigration_targets(spec.tau, *spec.nu, *spec.immigration, spec.probe_times,
                                                   spec.samples, spec.atom_floor, target_trunc, true, run);

  Table cells{"theorem1_cells",
              {"m", "t", "epsilon", "ks_loss", "ks_loss_se", "ks_loss_p", "ks_f2", "ks_f2_se", "ks_f2_p", "mean_loss",
               "mean_sigma", "median_f2", "median_fi1", "events_per_replica", "neglected_mass_per_replica"},
              {}};
  std::vector<std::vector<KsCell>> ks_loss(spec.probe_times.size()), ks_f2(spec.probe_times.size());
  Json cell_diag = Json::array();
  for (std::size_t c = 0; c < spec.m_grid.size(); ++c) {
    const double m = spec.m_grid[c];
    Truncation trunc = spec.truncation;
    trunc.epsilon = spec.epsilon.at(m);
    const EngineSamples eng = engine_top2(spec.tau, *spec.nu, m, spec.probe_times, spec.samples, trunc, run, c);
    warn_neglected(report, eng.diag, spec.samples, spec.thresholds.neglected_tolerance, "m=" + fmt(m));
    cell_diag.push_back(Json{{"m", m}, {"epsilon", trunc.epsilon}, {"engine", diagnostics_json(eng.diag, spec.samples)}});
    for (std::size_t p = 0; p < spec.probe_times.size(); ++p) {
      const double t = spec.probe_times[p];
      const KsCell a = ks_cell(eng.loss[p], target.sigma[p]);
      const KsCell b = ks_cell(eng.f2[p], target.second[p]);
      ks_loss[p].push_back(a);
      ks_f2[p].push_back(b);
      const double nrep = static_cast<double>(spec.samples);
      cells.rows.push_back({m, t, trunc.epsilon, a.ks.statistic, a.se, a.ks.p_asymptotic, b.ks.statistic, b.se,
                            b.ks.p_asymptotic, mean_estimate(eng.loss[p]).value, mean_estimate(target.sigma[p]).value,
                            quantile(eng.f2[p], 0.5), quantile(target.second[p], 0.5),
                            static_cast<double>(eng.diag.events) / nrep, eng.diag.neglected_mass / nrep});
      if (run.keep_raw) {
        report.raw[key("m_minus_F1", m, t)] = eng.loss[p];
        report.raw[key("F2", m, t)] = eng.f2[p];
      }
    }
  }
  report.tables.push_back(std::move(cells));

  Table laplace{"theorem1_target_laplace", {"t", "q", "estimate", "standard_error", "exact", "bias_bound"}, {}};
  for (std::size_t p = 0; p < spec.probe_times.size(); ++p) {
    const double t = spec.probe_times[p];
    ks_verdicts(report, "ks_loss[t=" + fmt(t) + "]", "m - F_1(t) against sigma_I(t)", spec.m_grid, ks_loss[p],
                spec.thresholds);
    ks_verdicts(report, "ks_f2[t=" + fmt(t) + "]", "F_2(t) against the largest fragment of FI(t)", spec.m_grid,
                ks_f2[p], spec.thresholds);
    target_laplace(report, laplace, *spec.immigration, spec.atom_floor, t, target.sigma[p], spec.laplace_q,
                   spec.thresholds.laplace_sigmas);
    if (run.keep_raw) {
      report.raw["sigma[t=" + fmt(t) + "]"] = target.sigma[p];
      report.raw["FI1[t=" + fmt(t) + "]"] = target.second[p];
    }
  }
  report.tables.push_back(std::move(laplace));
  report.diagnostics = Json{{"cells", cell_diag},
                            {"target_engine", diagnostics_json(target.diag, spec.samples)},
                            {"target_epsilon", target_trunc.epsilon},
                            {"neglected_immigrant_mass_rate", spec.immigration->neglected_mass(spec.atom_floor)}};
  return report;
}

// ---------------------------------------------------------------------------

ConvergenceReport theorem2_experiment(const Theorem2Spec& spec_in, const RunOptions& run) {
  Theorem2Spec spec = spec_in;
  if (!spec.nu) throw ValidationError("a dislocation measure is required");
  check_immigration(spec.immigration);
  check_grid(spec.m_grid, "m_grid");
  std::sort(spec.m_grid.begin(), spec.m_grid.end());
  check_probe_times(spec.probe_times);
  check_samples(spec.samples);
  spec.truncation.validate();
  if (!(spec.atom_floor > 0.0)) throw ValidationError("atom_floor must be positive");
  const bool regime_ii = spec.regime == Theorem2Spec::Regime::ii;
  if (regime_ii && !spec.loss_of_mass)
    throw ValidationError("regime ii needs the loss-of-mass condition to be declared (loss_of_mass: true)");
  if (!(spec.f2_quantile > 0.0 && spec.f2_quantile < 1.0)) throw ValidationError("f2_quantile must lie in (0, 1)");

  ConvergenceReport report;
  report.experiment = "theorem2";
  report.parameters = Json{{"regime", regime_ii ? "ii" : "i"},
                           {"tau", spec.tau.name()},
                           {"nu", spec.nu->name()},
                           {"immigration", spec.immigration->name()},
                           {"time_scale", spec.time_scale.describe()},
                           {"m_grid", spec.m_grid},
                           {"probe_times", spec.probe_times},
                           {"samples", spec.samples},
                           {"epsilon", spec.epsilon.describe()},
                           {"truncation", truncation_json(spec.truncation)},
                           {"atom_floor", spec.atom_floor},
                           {"seed", run.seed},
                           {"ks_threshold", spec.thresholds.ks},
                           {"trend_slack", spec.thresholds.trend_slack}};

  const TargetSamples target = immigration_targets(spec.tau, *spec.nu, *spec.immigration, spec.probe_times,
                                                   spec.samples, spec.atom_floor, spec.truncation, false, run);

  Table cells{"theorem2_cells",
              {"m", "t", "time", "epsilon", "ks_loss", "ks_loss_se", "ks_f2", "ks_f2_se", "f2_quantile",
               "mean_loss", "mean_sigma", "events_per_replica", "neglected_mass_per_replica"},
              {}};
  std::vector<std::vector<KsCell>> ks_loss(spec.probe_times.size()), ks_f2(spec.probe_times.size());
  std::vector<std::vector<double>> f2q(spec.probe_times.size());
  Json cell_diag = Json::array();
  for (std::size_t c = 0; c < spec.m_grid.size(); ++c) {
    const double m = spec.m_grid[c];
    const double scale = spec.time_scale.at(spec.tau, *spec.nu, m);
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("time scale is not positive at m=" + fmt(m));
    std::vector<double> times(spec.probe_times);
    for (double& t : times) t *= scale;
    Truncation trunc = spec.truncation;
    trunc.epsilon = spec.epsilon.at(m);
    const EngineSamples eng = engine_top2(spec.tau, *spec.nu, m, times, spec.samples, trunc, run, c);
    warn_neglected(report, eng.diag, spec.samples, spec.thresholds.neglected_tolerance, "m=" + fmt(m));
    cell_diag.push_back(Json{{"m", m},
                             {"time_scale", scale},
                             {"epsilon", trunc.epsilon},
                             {"engine", diagnostics_json(eng.diag, spec.samples)}});
    for (std::size_t p = 0; p < spec.probe_times.size(); ++p) {
      const double t = spec.probe_times[p];
      const KsCell a = ks_cell(eng.loss[p], target.sigma[p]);
      const KsCell b = ks_cell(eng.f2[p], target.second[p]);
      const double q = quantile(eng.f2[p], spec.f2_quantile);
      ks_loss[p].push_back(a);
      ks_f2[p].push_back(b);
      f2q[p].push_back(q);
      const double nrep = static_cast<double>(spec.samples);
      cells.rows.push_back({m, t, times[p], trunc.epsilon, a.ks.statistic, a.se, b.ks.statistic, b.se, q,
                            mean_estimate(eng.loss[p]).value, mean_estimate(target.sigma[p]).value,
                            static_cast<double>(eng.diag.events) / nrep, eng.diag.neglected_mass / nrep});
      if (run.keep_raw) {
        report.raw[key("m_minus_F1", m, t)] = eng.loss[p];
        report.raw[key("F2", m, t)] = eng.f2[p];
      }
    }
  }
  report.tables.push_back(std::move(cells));

  Table laplace{"theorem2_target_laplace", {"t", "q", "estimate", "standard_error", "exact", "bias_bound"}, {}};
  for (std::size_t p = 0; p < spec.probe_times.size(); ++p) {
    const double t = spec.probe_times[p];
    ks_verdicts(report, "ks_loss[t=" + fmt(t) + "]", "m - F_1 at the rescaled time against sigma_I(t)", spec.m_grid,
                ks_loss[p], spec.thresholds);
    if (!regime_ii) {
      ks_verdicts(report, "ks_f2[t=" + fmt(t) + "]", "F_2 at the rescaled time against the largest immigrant",
                  spec.m_grid, ks_f2[p], spec.thresholds);
    } else {
      const auto& q = f2q[p];
      bool decreasing = true;
      for (std::size_t i = 1; i < q.size(); ++i) decreasing = decreasing && q[i] <= q[i - 1];
      if (q.size() >= 2)
        report.verdicts.push_back({"f2_quantile_trend[t=" + fmt(t) + "]", "F_2 upper quantile decreases along the grid",
                                   decreasing, Json{{"grid", spec.m_grid}, {"quantiles", q}}});
      report.verdicts.push_back({"f2_quantile_final[t=" + fmt(t) + "]", "F_2 upper quantile below threshold",
                                 q.back() <= spec.f2_threshold,
                                 Json{{"quantile", q.back()}, {"level", spec.f2_quantile},
                                      {"threshold", spec.f2_threshold}}});
    }
    target_laplace(report, laplace, *spec.immigration, spec.atom_floor, t, target.sigma[p], spec.laplace_q,
                   spec.thresholds.laplace_sigmas);
    if (run.keep_raw) {
      report.raw["sigma[t=" + fmt(t) + "]"] = target.sigma[p];
      report.raw["largest_immigrant[t=" + fmt(t) + "]"] = target.second[p];
    }
  }
  report.tables.push_back(std::move(laplace));
  report.diagnostics = Json{{"cells", cell_diag},
                            {"neglected_immigrant_mass_rate", spec.immigration->neglected_mass(spec.atom_floor)}};
  return report;
}

// ---------------------------------------------------------------------------

ConvergenceReport small_time_experiment(const SmallTimeSpec& spec_in, const RunOptions& run) {
  SmallTimeSpec spec = spec_in;
  if (!spec.nu) throw ValidationError("a dislocation measure is required");
  check_immigration(spec.immigration);
  check_grid(spec.eps_grid, "eps_grid");
  std::sort(spec.eps_grid.begin(), spec.eps_grid.end(), std::greater<>());
  check_probe_times(spec.probe_times);
  check_samples(spec.samples);
  spec.truncation.validate();
  if (!std::isfinite(spec.alpha)) throw ValidationError("alpha must be finite");
  if (spec.rate_scale && !(*spec.rate_scale > 0.0)) throw ValidationError("rate_scale must be positive");
  if (spec.total_mass) {
    check_samples(spec.total_mass_samples);
    spec.total_mass_truncation.validate();
  }

  const RateFunction tau = RateFunction::power(spec.alpha);
  std::vector<double> masses, multipliers;
  Table inverse{"small_time_inverse", {"eps", "m", "phi_of_m", "relative_error"}, {}};
  for (const double eps : spec.eps_grid) {
    const double m = phi_nu_inverse(*spec.nu, eps);
    const double back = phi_nu(*spec.nu, m);
    inverse.rows.push_back({eps, m, back, std::abs(back - eps) / eps});
    masses.push_back(m);
    // F^(1)(eps t) = F^(m)(m^(-alpha) eps t) / m with eps = phi(m).
    multipliers.push_back(std::pow(m, -spec.alpha) * eps);
  }
  const double ell = spec.rate_scale.value_or(multipliers.back());
  const RateFunction target_tau = RateFunction::scaled_power(ell, spec.alpha);

  ConvergenceReport report;
  report.experiment = "small_time";
  report.parameters = Json{{"alpha", spec.alpha},
                           {"nu", spec.nu->name()},
                           {"immigration", spec.immigration->name()},
                           {"rate_scale", ell},
                           {"rate_scale_source", spec.rate_scale ? "config" : "plug-in at finest eps"},
                           {"eps_grid", spec.eps_grid},
                           {"probe_times", spec.probe_times},
                           {"samples", spec.samples},
                           {"truncation", truncation_json(spec.truncation)},
                           {"atom_floor", spec.atom_floor},
                           {"seed", run.seed},
                           {"ks_threshold", spec.thresholds.ks},
                           {"trend_slack", spec.thresholds.trend_slack}};

  const TargetSamples target = immigration_targets(target_tau, *spec.nu, *spec.immigration, spec.probe_times,
                                                   spec.samples, spec.atom_floor, spec.truncation, true, run);

  Table cells{"small_time_cells",
              {"eps", "m", "t", "time", "ks_loss", "ks_loss_se", "ks_f2", "ks_f2_se", "mean_loss", "mean_sigma",
               "events_per_replica", "neglected_mass_per_replica"},
              {}};
  std::vector<std::vector<KsCell>> ks_loss(spec.probe_times.size()), ks_f2(spec.probe_times.size());
  Json cell_diag = Json::array();
  for (std::size_t c = 0; c < masses.size(); ++c) {
    const double m = masses[c];
    std::vector<double> times(spec.probe_times);
    for (double& t : times) t *= multipliers[c];
    const EngineSamples eng = engine_top2(tau, *spec.nu, m, times, spec.samples, spec.truncation, run, c);
    warn_neglected(report, eng.diag, spec.samples, spec.thresholds.neglected_tolerance, "eps=" + fmt(spec.eps_grid[c]));
    cell_diag.push_back(Json{{"eps", spec.eps_grid[c]},
                             {"m", m},
                             {"time_multiplier", multipliers[c]},
                             {"engine", diagnostics_json(eng.diag, spec.samples)}});
    for (std::size_t p = 0; p < spec.probe_times.size(); ++p) {
      const double t = spec.probe_times[p];
      const KsCell a = ks_cell(eng.loss[p], target.sigma[p]);
      const KsCell b = ks_cell(eng.f2[p], target.second[p]);
      ks_loss[p].push_back(a);
      ks_f2[p].push_back(b);
      const double nrep = static_cast<double>(spec.samples);
      cells.rows.push_back({spec.eps_grid[c], m, t, times[p], a.ks.statistic, a.se, b.ks.statistic, b.se,
                            mean_estimate(eng.loss[p]).value, mean_estimate(target.sigma[p]).value,
                            static_cast<double>(eng.diag.events) / nrep, eng.diag.neglected_mass / nrep});
      if (run.keep_raw) {
        report.raw[key("rescaled_loss", spec.eps_grid[c], t)] = eng.loss[p];
        report.raw[key("rescaled_F2", spec.eps_grid[c], t)] = eng.f2[p];
      }
    }
  }
  report.tables.push_back(std::move(cells));
  report.tables.push_back(std::move(inverse));

  for (std::size_t p = 0; p < spec.probe_times.size(); ++p) {
    const double t = spec.probe_times[p];
    ks_verdicts(report, "ks_loss[t=" + fmt(t) + "]", "rescaled 1 - F_1 against sigma_I(t)", spec.eps_grid,
                ks_loss[p], spec.thresholds);
    ks_verdicts(report, "ks_f2[t=" + fmt(t) + "]", "rescaled F_2 against the largest fragment of FI(t)",
                spec.eps_grid, ks_f2[p], spec.thresholds);
  }

  if (spec.total_mass) {
    // Total mass needs every fragment, so these use full simulations on a smaller sample.
    const std::size_t n = spec.total_mass_samples;
    report.parameters["total_mass_samples"] = n;
    report.parameters["total_mass_truncation"] = truncation_json(spec.total_mass_truncation);
    Table tm{"small_time_total_mass", {"eps", "t", "ks", "ks_se", "mean_engine", "mean_target"}, {}};
    std::vector<std::vector<double>> tgt(spec.probe_times.size(), std::vector<double>(n));
    parallel_for(n, run.threads, [&](std::size_t r) {
      Rng rng = make_rng(run.seed, {stream::kTarget, kLaplace, r});
      ImmigrationRealization real = sample_immigration(*spec.immigration, spec.probe_times.back(), spec.atom_floor, rng);
      const FIProcess fi(target_tau, spec.nu, std::move(real), spec.total_mass_truncation, derive_seed(run.seed, {kLaplace, r}));
      for (std::size_t p = 0; p < spec.probe_times.size(); ++p) {
        const double t = spec.probe_times[p];
        tgt[p][r] = immigrant_mass(fi.realization(), t) - fi.marginal(t).mass_sum();
      }
    });
    for (std::size_t c = 0; c < masses.size(); ++c) {
      const double m = masses[c];
      std::vector<double> times(spec.probe_times);
      for (double& t : times) t *= multipliers[c];
      std::vector<std::vector<double>> eng(spec.probe_times.size(), std::vector<double>(n));
      parallel_for(n, run.threads, [&](std::size_t r) {
        Rng rng = make_rng(run.seed, {stream::kFragmentation, kLaplace, c, r});
        const auto states = simulate_marginals(tau, *spec.nu, MassPartition::single(m), times, spec.total_mass_truncation, rng);
        for (std::size_t p = 0; p < times.size(); ++p) eng[p][r] = m - states[p].mass_sum();
      });
      for (std::size_t p = 0; p < spec.probe_times.size(); ++p) {
        const KsCell k = ks_cell(eng[p], tgt[p]);
        tm.rows.push_back({spec.eps_grid[c], spec.probe_times[p], k.ks.statistic, k.se, mean_estimate(eng[p]).value,
                           mean_estimate(tgt[p]).value});
      }
    }
    report.tables.push_back(std::move(tm));
  }
  report.diagnostics = Json{{"cells", cell_diag},
                            {"target_engine", diagnostics_json(target.diag, spec.samples)},
                            {"neglected_immigrant_mass_rate", spec.immigration->neglected_mass(spec.atom_floor)}};
  return report;
}

// ---------------------------------------------------------------------------

ConvergenceReport cross_validate_brownian(const CrossValidationSpec& spec_in, const RunOptions& run) {
  CrossValidationSpec spec = spec_in;
  if (!(spec.m > 0.0)) throw ValidationError("m must be positive");
  if (spec.grid < 2) throw ValidationError("excursion grid must have at least 2 steps");
  check_probe_times(spec.probe_times);
  check_samples(spec.samples);
  spec.truncation.validate();
  const std::size_t np = spec.probe_times.size();

  ConvergenceReport report;
  report.experiment = "cross_validate_brownian";
  report.parameters = Json{{"m", spec.m},
                           {"alpha", spec.alpha},
                           {"nu", "brownian"},
                           {"probe_times", spec.probe_times},
                           {"samples", spec.samples},
                           {"excursion_grid", spec.grid},
                           {"truncation", truncation_json(spec.truncation)},
                           {"seed", run.seed},
                           {"ks_threshold", spec.thresholds.ks}};

  std::vector<std::vector<double>> exc1(np, std::vector<double>(spec.samples)), exc2 = exc1, excd = exc1;
  parallel_for(spec.samples, run.threads, [&](std::size_t r) {
    thread_local ExcursionGrid grid;
    Rng rng = make_rng(run.seed, {kExcursion, r});
    brownian_excursion_into(grid, spec.m, spec.grid, rng);
    for (std::size_t p = 0; p < np; ++p) {
      const MassPartition part = excursion_fragmentation_marginal(grid, spec.probe_times[p]);
      exc1[p][r] = part[0];
      exc2[p][r] = part[1];
      excd[p][r] = part.dust();
    }
  });

  const RateFunction tau = RateFunction::power(spec.alpha);
  const auto nu = nu_brownian();
  const EngineSamples eng = engine_top2(tau, *nu, spec.m, spec.probe_times, spec.samples, spec.truncation, run, 0);

  Table cells{"cross_validation_cells",
              {"t", "ks_f1", "ks_f1_se", "ks_f1_p", "ks_f2", "ks_f2_se", "median_f1_excursion", "median_f1_engine",
               "mean_dust_excursion"},
              {}};
  for (std::size_t p = 0; p < np; ++p) {
    const double t = spec.probe_times[p];
    std::vector<double> f1(spec.samples);
    for (std::size_t r = 0; r < spec.samples; ++r) f1[r] = spec.m - eng.loss[p][r];
    const KsCell a = ks_cell(exc1[p], f1);
    const KsCell b = ks_cell(exc2[p], eng.f2[p]);
    cells.rows.push_back({t, a.ks.statistic, a.se, a.ks.p_asymptotic, b.ks.statistic, b.se, quantile(exc1[p], 0.5),
                          quantile(f1, 0.5), mean_estimate(excd[p]).value});
    report.verdicts.push_back({"ks_f1[t=" + fmt(t) + "]", "largest fragment: excursion against engine",
                               a.ks.statistic <= spec.thresholds.ks,
                               Json{{"ks", a.ks.statistic}, {"threshold", spec.thresholds.ks},
                                    {"grid_quantization", spec.m / static_cast<double>(spec.grid)}}});
    if (run.keep_raw) {
      report.raw["excursion_F1[t=" + fmt(t) + "]"] = exc1[p];
      report.raw["excursion_F2[t=" + fmt(t) + "]"] = exc2[p];
      report.raw["excursion_dust[t=" + fmt(t) + "]"] = excd[p];
      report.raw["engine_F1[t=" + fmt(t) + "]"] = f1;
      report.raw["engine_F2[t=" + fmt(t) + "]"] = eng.f2[p];
    }
  }
  report.tables.push_back(std::move(cells));
  report.diagnostics = Json{{"engine", diagnostics_json(eng.diag, spec.samples)}};
  return report;
}

// ---------------------------------------------------------------------------

ConvergenceReport stable_immigration_experiment(const StableImmigrationSpec& spec_in, const RunOptions& run) {
  StableImmigrationSpec spec = spec_in;
  if (!(spec.beta > 1.0 && spec.beta < 2.0)) throw ValidationError("beta must lie in (1, 2)");
  check_probe_times(spec.probe_times);
  check_samples(spec.samples);
  if (!(spec.atom_floor > 0.0)) throw ValidationError("atom_floor must be positive");
  const std::size_t np = spec.probe_times.size();

  const auto I = immigration_stable(spec.beta, spec.immigration);
  const auto& stable_I = static_cast<const StableImmigration&>(*I);

  ConvergenceReport report;
  report.experiment = "stable_immigration";
  report.parameters = Json{{"beta", spec.beta},
                           {"probe_times", spec.probe_times},
                           {"samples", spec.samples},
                           {"atom_floor", spec.atom_floor},
                           {"xmin_ratio", spec.immigration.xmin_ratio},
                           {"atom_max_children", spec.immigration.max_children},
                           {"jump_floor", spec.jump_floor},
                           {"max_children", spec.max_children},
                           {"seed", run.seed},
                           {"ks_threshold", spec.thresholds.ks}};

  std::vector<std::vector<double>> imm1(np, std::vector<double>(spec.samples)), imm_total = imm1, sub1 = imm1,
                                                                                sub_total = imm1;
  parallel_for(spec.samples, run.threads, [&](std::size_t r) {
    Rng rng = make_rng(run.seed, {stream::kTarget, r});
    const ImmigrationRealization real = sample_immigration(*I, spec.probe_times.back(), spec.atom_floor, rng);
    Rng srng = make_rng(run.seed, {stream::kImmigration, r});
    const auto sub = subordinated_stable_representation(spec.beta, spec.probe_times,
                                                        {spec.jump_floor, spec.max_children, 1}, srng);
    for (std::size_t p = 0; p < np; ++p) {
      imm1[p][r] = largest_immigrant(real, spec.probe_times[p]);
      imm_total[p][r] = immigrant_mass(real, spec.probe_times[p]);
      sub1[p][r] = sub[p].largest[0];
      sub_total[p][r] = sub[p].total;
    }
  });

  Table cells{"stable_immigration_cells",
              {"t", "ks_largest", "ks_largest_se", "ks_largest_p", "ks_total", "ks_total_se", "median_largest_immigration",
               "median_largest_subordinated"},
              {}};
  for (std::size_t p = 0; p < np; ++p) {
    const double t = spec.probe_times[p];
    const KsCell a = ks_cell(imm1[p], sub1[p]);
    const KsCell b = ks_cell(imm_total[p], sub_total[p]);
    cells.rows.push_back({t, a.ks.statistic, a.se, a.ks.p_asymptotic, b.ks.statistic, b.se, quantile(imm1[p], 0.5),
                          quantile(sub1[p], 0.5)});
    report.verdicts.push_back({"ks_largest[t=" + fmt(t) + "]",
                               "largest immigrant of I^beta against the largest jump of T before rho(t)",
                               a.ks.statistic <= spec.thresholds.ks,
                               Json{{"ks", a.ks.statistic}, {"threshold", spec.thresholds.ks}}});
    if (run.keep_raw) {
      report.raw["immigration_largest[t=" + fmt(t) + "]"] = imm1[p];
      report.raw["immigration_total[t=" + fmt(t) + "]"] = imm_total[p];
      report.raw["subordinated_largest[t=" + fmt(t) + "]"] = sub1[p];
      report.raw["subordinated_total[t=" + fmt(t) + "]"] = sub_total[p];
    }
  }
  report.tables.push_back(std::move(cells));

  Table laplace{"stable_laplace", {"r", "q", "estimate", "standard_error", "exact"}, {}};
  const StableLevy levy = StableLevy::from_laplace(1.0, 1.0 / spec.beta);
  for (std::size_t i = 0; i < spec.laplace_r.size(); ++i) {
    const double horizon = spec.laplace_r[i];
    if (!(horizon > 0.0)) throw ValidationError("laplace_r values must be positive");
    check_samples(spec.laplace_samples);
    std::vector<double> totals(spec.laplace_samples);
    parallel_for(totals.size(), run.threads, [&](std::size_t r) {
      Rng rng = make_rng(run.seed, {kLaplace, i, r});
      totals[r] = ordered_jumps(levy, horizon, spec.jump_floor, spec.max_children, rng).total();
    });
    for (const double q : spec.laplace_q) {
      const Estimate e = empirical_laplace(totals, q);
      const double exact = std::exp(-horizon * std::pow(q, 1.0 / spec.beta));
      laplace.rows.push_back({horizon, q, e.value, e.standard_error, exact});
      report.verdicts.push_back({"laplace[r=" + fmt(horizon) + "][q=" + fmt(q) + "]",
                                 "E exp(-q T(r)) against exp(-r q^(1/beta))",
                                 std::abs(e.value - exact) <= spec.thresholds.laplace_sigmas * e.standard_error,
                                 Json{{"estimate", e.value}, {"standard_error", e.standard_error}, {"exact", exact}}});
    }
  }
  report.tables.push_back(std::move(laplace));
  report.diagnostics = Json{{"atom_rate", I->atom_rate(spec.atom_floor)},
                            {"atom_rate_closed_form", stable_immigration_rate_exact(spec.beta, spec.atom_floor)},
                            {"median_T1", stable_I.median_total()},
                            {"neglected_immigrant_mass_rate", I->neglected_mass(spec.atom_floor)}};
  return report;
}

// ---------------------------------------------------------------------------

namespace {

void add_check(ConvergenceReport& report, Table& table, const std::string& id, const std::string& description,
               double value, double target, double tolerance) {
  const bool ok = std::abs(value - target) <= tolerance;
  table.rows.push_back({static_cast<double>(table.rows.size()), value, target, tolerance, ok ? 1.0 : 0.0});
  report.verdicts.push_back(
      {id, description, ok, Json{{"value", value}, {"target", target}, {"tolerance", tolerance}}});
}

}  // namespace

ConvergenceReport validate_samplers(const SamplerSuiteSpec& spec, const RunOptions& run) {
  check_samples(spec.samples);
  const std::size_t n = spec.samples;
  ConvergenceReport report;
  report.experiment = "validate_samplers";
  report.parameters = Json{{"samples", n}, {"seed", run.seed}, {"laplace_sigmas", spec.laplace_sigmas}};
  Table table{"sampler_checks", {"index", "value", "target", "tolerance", "passed"}, {}};

  // Dislocation measures: support, normalization, monotone rates.
  const std::vector<std::pair<std::string, DislocationPtr>> measures{
      {"brownian", nu_brownian()},
      {"power", nu_power(0.7)},
      {"binary_half", nu_binary_half()},
      {"stable", nu_stable(1.5, {.jump_floor = 1e-8, .pool = 2000, .max_children = 256, .seed = run.seed})}};
  for (const auto& [name, nu] : measures) {
    Rng rng = make_rng(run.seed, {stream::kPool, std::hash<std::string>{}(name)});
    double worst_support = -std::numeric_limits<double>::infinity(), worst_sum = 0.0;
    bool monotone = true;
    double prev = -1.0;
    for (const double eps : {0.5, 0.25, 1e-2, 1e-4, 1e-6}) {
      const double r = nu->rate(eps);
      monotone = monotone && std::isfinite(r) && r >= prev;
      prev = r;
      if (r == 0.0) continue;
      Dislocation d;
      for (std::size_t i = 0; i < n / 4; ++i) {
        nu->sample_into(eps, rng, d);
        worst_support = std::max(worst_support, d.fractions[0] - (1.0 - eps));
        for (std::size_t j = 1; j < d.fractions.size(); ++j)
          if (d.fractions[j] > d.fractions[j - 1]) worst_support = std::max(worst_support, 1.0);
        worst_sum = std::max(worst_sum, std::abs(d.sum() - 1.0));
      }
    }
    report.verdicts.push_back({name + "_rate_monotone", "rate finite and non-decreasing as eps decreases", monotone,
                               Json::object()});
    report.verdicts.push_back({name + "_support", "sampled s_1 < 1 - eps and fractions sorted", worst_support < 0.0,
                               Json{{"max_excess", worst_support}}});
    add_check(report, table, name + "_normalized", "conservative samples sum to 1", worst_sum, 0.0,
              name == "stable" ? 1e-6 : 1e-9);
  }

  // phi_nu * rate(1/m) = 1, the Brownian asymptotics.
  const auto br = nu_brownian();
  add_check(report, table, "phi_times_rate", "phi_nu(m) rate(1/m) = 1", phi_nu(*br, 1e3) * br->rate(1e-3), 1.0, 1e-12);
  add_check(report, table, "brownian_phi_asymptotics", "phi(m) sqrt(2m/pi) near 1 at m = 1e6",
            phi_nu(*br, 1e6) * std::sqrt(2e6 / std::numbers::pi), 1.0, 0.01);

  // I_Br: closed-form rate and Poisson atom counts.
  const auto ibr = immigration_brownian();
  for (const double delta : {1e-4, 1e-2, 1.0})
    add_check(report, table, "ibr_rate[" + fmt(delta) + "]", "atom_rate = sqrt(2/(pi delta))", ibr->atom_rate(delta),
              std::sqrt(2.0 / (std::numbers::pi * delta)), 1e-12 * ibr->atom_rate(delta));
  {
    std::vector<double> counts(n);
    double min_mass = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; ++r) {
      Rng rng = make_rng(run.seed, {stream::kImmigration, r});
      const auto real = sample_immigration(*ibr, 1.0, 0.01, rng);
      counts[r] = static_cast<double>(real.atoms.size());
      for (const auto& a : real.atoms) min_mass = std::min(min_mass, a.masses.total() / 0.01);
    }
    const Estimate e = mean_estimate(counts);
    add_check(report, table, "ibr_atom_count", "mean atom count at delta = 0.01 (3 SE)", e.value,
              std::sqrt(2.0 / (std::numbers::pi * 0.01)), spec.laplace_sigmas * e.standard_error);
    report.verdicts.push_back({"ibr_support", "atoms exceed the floor", min_mass >= 1.0, Json{{"min_ratio", min_mass}}});
  }

  // Stable subordinator Laplace transform.
  {
    std::vector<double> values(n);
    const double c = std::sqrt(2.0 / std::numbers::pi);
    parallel_for(n, run.threads, [&](std::size_t r) {
      Rng rng = make_rng(run.seed, {kLaplace, r});
      values[r] = stable_path(0.5, c, 1.0, 1e-6, rng).evaluate(1.0);
    });
    for (const double q : {0.5, 1.0, 2.0}) {
      const Estimate e = empirical_laplace(values, q);
      add_check(report, table, "stable_path_laplace[q=" + fmt(q) + "]", "E exp(-q sigma(1)) = exp(-sqrt(2q)) (3 SE)",
                e.value, std::exp(-std::sqrt(2.0 * q)), spec.laplace_sigmas * e.standard_error);
    }
  }

  // Stable dislocation pool Laplace transform.
  {
    const auto& st = static_cast<const StableDislocation&>(*measures.back().second);
    const WeightedEstimate e = st.pool_laplace(1.0);
    add_check(report, table, "stable_pool_laplace", "pool E exp(-T_1) = exp(-1) (3 SE)", e.value, std::exp(-1.0),
              spec.laplace_sigmas * e.standard_error);
  }

  // I^beta atoms pass the mass filter.
  {
    const auto ib = immigration_stable(1.5, {.rate_samples = 20000, .seed = run.seed});
    Rng rng = make_rng(run.seed, {stream::kAtom});
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n / 10; ++i) min_ratio = std::min(min_ratio, ib->sample_atom(0.01, rng).total() / 0.01);
    report.verdicts.push_back({"stable_immigration_support", "accepted atoms exceed the floor", min_ratio >= 1.0,
                               Json{{"min_ratio", min_ratio}}});
  }

  // Engine mass conservation.
  {
    double worst = 0.0;
    const Truncation trunc{.epsilon = 1e-3, .loss_floor = 0.0, .mass_floor = 1e-4};
    for (std::size_t r = 0; r < std::min<std::size_t>(n, 200); ++r) {
      Rng rng = make_rng(run.seed, {stream::kFragmentation, r});
      const FragPath path = simulate(RateFunction::power(-0.5), *br, 1.0, 1.0, trunc, rng);
      for (const auto& e : path.events()) worst = std::max(worst, std::abs(e.state.total() - 1.0));
    }
    add_check(report, table, "engine_conservation", "masses + dust = m at every event", worst, 0.0, 1e-9);
  }

  report.tables.push_back(std::move(table));
  return report;
}

}  // namespace fragsim
