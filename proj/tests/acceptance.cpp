// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 only if all selected pass.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fragsim/cli.hpp"
#include "fragsim/frag_engine.hpp"
#include "fragsim/measures.hpp"
#include "fragsim/partitions.hpp"
#include "fragsim/report.hpp"
#include "fragsim/stable_jumps.hpp"
#include "fragsim/stats.hpp"
#include "fragsim/subordinators.hpp"

using namespace fragsim;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string num(double x, int digits = 5) {
  std::ostringstream os;
  os << std::setprecision(digits) << x;
  return os.str();
}

cli::ExperimentConfig config(const std::string& file) {
  return cli::load_config(std::filesystem::path(FRAGSIM_CONFIG_DIR) / file, {});
}

// Summarizes the failing verdicts, or the number that passed.
Outcome from_report(const ConvergenceReport& report, const std::function<bool(const Verdict&)>& select) {
  std::size_t used = 0;
  std::string failed;
  for (const Verdict& v : report.verdicts) {
    if (!select(v)) continue;
    ++used;
    if (!v.passed) failed += (failed.empty() ? "" : ", ") + v.id + "=" + v.detail.dump();
  }
  if (used == 0) return {false, "no verdicts selected"};
  if (!failed.empty()) return {false, "failed " + failed};
  return {true, std::to_string(used) + " verdicts passed"};
}

std::string ks_summary(const ConvergenceReport& report) {
  std::string out;
  for (const Verdict& v : report.verdicts)
    if (v.detail.is_object() && v.detail.contains("ks") && v.detail["ks"].is_number())
      out += (out.empty() ? "" : " ") + v.id + "=" + num(v.detail["ks"].get<double>(), 3);
  return out;
}

Outcome criterion1() {
  Rng rng = make_rng(101, {});
  std::vector<double> totals(100000);
  const double c = std::sqrt(2.0 / std::numbers::pi);
  for (double& x : totals) x = stable_path(0.5, c, 1.0, 1e-6, rng).evaluate(1.0);
  Outcome out{true, ""};
  for (const double q : {0.5, 1.0, 2.0}) {
    const Estimate e = empirical_laplace(totals, q);
    const double exact = std::exp(-std::sqrt(2.0) * std::sqrt(q));
    const double z = (e.value - exact) / e.standard_error;
    out.passed = out.passed && std::abs(z) <= 3.0;
    out.detail += "q=" + num(q) + ": " + num(e.value) + " vs " + num(exact) + " (z=" + num(z, 2) + ") ";
  }
  return out;
}

Outcome criterion2() {
  const double m = 1e6;
  const double ratio = phi_nu(*nu_brownian(), m) * std::sqrt(2.0 * m / std::numbers::pi);
  return {ratio >= 0.99 && ratio <= 1.01, "phi(1e6) sqrt(2m/pi) = " + num(ratio, 8)};
}

Outcome criterion3() {
  const std::vector<double> grid = geometric_grid(1e2, 1e8, 13);
  const double slope = estimate_regular_variation_index(*nu_brownian(), grid);
  return {std::abs(slope + 0.5) <= 0.02, "index = " + num(slope, 6)};
}

Outcome criterion4() {
  const ConvergenceReport report = cli::execute(config("theorem1_brownian.json"));
  Outcome out = from_report(report, [](const Verdict& v) { return v.id.starts_with("ks_"); });
  out.detail += "; " + ks_summary(report);
  return out;
}

Outcome criterion5() {
  const ConvergenceReport report = cli::execute(config("theorem2_aldous_pitman.json"));
  Outcome out = from_report(report, [](const Verdict& v) { return v.id.starts_with("ks_") && v.id.ends_with("_final"); });
  out.detail += "; " + ks_summary(report);
  return out;
}

Outcome criterion6() {
  const ConvergenceReport report = cli::execute(config("cross_validate_brownian.json"));
  Outcome out = from_report(report, [](const Verdict& v) { return v.id.starts_with("ks_f1"); });
  out.detail += "; " + ks_summary(report);
  return out;
}

Outcome criterion7() {
  cli::ExperimentConfig c = config("stable_immigration.json");
  const ConvergenceReport report = cli::execute(c);
  Outcome out = from_report(report, [](const Verdict& v) { return v.id.starts_with("ks_largest"); });
  out.detail += "; " + ks_summary(report);
  return out;
}

Outcome criterion8() {
  const double beta = 1.5;
  const StableLevy levy = StableLevy::from_laplace(1.0, 1.0 / beta);
  Rng rng = make_rng(108, {});
  std::vector<double> totals(100000);
  for (double& x : totals) x = ordered_jumps(levy, 1.0, 1e-12, 256, rng).total();
  const Estimate e = empirical_laplace(totals, 1.0);
  const double z = (e.value - std::exp(-1.0)) / e.standard_error;
  return {std::abs(z) <= 3.0, "E exp(-T(1)) = " + num(e.value) + " +- " + num(e.standard_error, 2) + " vs " +
                                  num(std::exp(-1.0)) + " (z=" + num(z, 2) + ")"};
}

Outcome criterion9() {
  constexpr int kCases = 1000;
  Rng rng = make_rng(109, {});
  const auto nu = nu_brownian();
  std::vector<std::string> failures;
  const auto note = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  double conservation = 0.0;
  for (int i = 0; i < kCases; ++i) {
    const double m = std::exp(4.0 * open_unit(rng));
    Truncation trunc;
    trunc.epsilon = 1e-3;
    trunc.mass_floor = 1e-4 * m;
    const FragPath p = simulate(RateFunction::power(-1.0 + 2.0 * open_unit(rng)), *nu, m, 0.5, trunc, rng);
    for (const Snapshot& s : p.events()) conservation = std::max(conservation, std::abs(s.state.total() - m) / m);
  }
  note(conservation <= 1e-9, "conservation " + num(conservation, 3));

  double contraction = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kCases; ++i) {
    const std::size_t n = 1 + static_cast<std::size_t>(20.0 * open_unit(rng));
    std::vector<double> x(n), y(n);
    double direct = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      x[j] = open_unit(rng);
      y[j] = open_unit(rng);
      direct += std::abs(x[j] - y[j]);
    }
    contraction = std::max(contraction, l1_distance(decreasing_rearrangement(x), decreasing_rearrangement(y)) - direct);
  }
  note(contraction <= 1e-12, "contraction excess " + num(contraction, 3));

  double residual = 0.0;
  bool monotone = true;
  for (int i = 0; i < kCases; ++i) {
    const RateFunction tau = RateFunction::power(-1.0 + 2.0 * open_unit(rng));
    const double m = std::exp(4.0 * open_unit(rng));
    const JumpPath xi = xi_path(*nu, 0.05, 4.0, rng);
    const double t = integrated_clock(xi, tau, m, xi.horizon()) * open_unit(rng);
    const RhoResult r = rho_time_change(xi, tau, m, t);
    if (r.status != RhoStatus::finite) {
      residual = std::numeric_limits<double>::infinity();
      continue;
    }
    residual = std::max(residual, std::abs(integrated_clock(xi, tau, m, r.value) - t) / std::max(1.0, t));
    double prev = lambda_process(xi, tau, m, 0.0);
    monotone = monotone && prev == m;
    const double end = integrated_clock(xi, tau, m, xi.horizon());
    for (int k = 1; k <= 20; ++k) {
      const double v = lambda_process(xi, tau, m, end * k / 21.0);
      monotone = monotone && v <= prev;
      prev = v;
    }
  }
  note(residual <= 1e-10, "rho residual " + num(residual, 3));
  note(monotone, "Lambda not monotone");

  std::vector<double> dust_jumps;
  bool bounded = true;
  for (const double floor : {1e-3, 1e-4, 1e-5}) {
    Rng local = make_rng(110, {});
    Truncation trunc;
    trunc.epsilon = 1e-3;
    trunc.loss_floor = 0.1 * floor;
    trunc.mass_floor = floor;
    const std::vector<double> probe{0.5};
    double largest = 0.0;
    for (int i = 0; i < kCases; ++i) {
      EngineDiagnostics d;
      (void)simulate_marginals(RateFunction::power(-0.5), *nu, MassPartition::single(1.0), probe, trunc, local, &d);
      bounded = bounded && d.max_floor_dust_jump <= floor * static_cast<double>(d.max_arity);
      largest = std::max(largest, d.max_floor_dust_jump);
    }
    dust_jumps.push_back(largest);
  }
  note(bounded, "dust jump above floor times arity");
  note(dust_jumps[0] > dust_jumps[1] && dust_jumps[1] > dust_jumps[2], "dust jumps not shrinking");

  double erosion = 0.0;
  for (int i = 0; i < kCases; ++i) {
    Truncation trunc;
    trunc.epsilon = 0.05;
    trunc.mass_floor = 1e-4;
    const FragPath p = simulate(RateFunction::power(0.0), *nu, 1.0, 1.0, trunc, rng);
    const double c = 3.0 * open_unit(rng), t = open_unit(rng);
    const MassPartition a = p.marginal(t), zero = apply_erosion(p, 0.0).marginal(t), b = apply_erosion(p, c).marginal(t);
    if (!(zero == a) || a.size() != b.size()) {
      erosion = std::numeric_limits<double>::infinity();
      continue;
    }
    for (std::size_t j = 0; j < a.size(); ++j) erosion = std::max(erosion, std::abs(b[j] - a[j] * std::exp(-c * t)) / a[j]);
  }
  note(erosion <= 1e-12, "erosion error " + num(erosion, 3));

  std::string detail = "conservation " + num(conservation, 3) + ", rho residual " + num(residual, 3) +
                       ", max dust jumps " + num(dust_jumps[0], 3) + "/" + num(dust_jumps[1], 3) + "/" +
                       num(dust_jumps[2], 3) + ", erosion " + num(erosion, 3);
  for (const auto& f : failures) detail += "; FAILED " + f;
  return {failures.empty(), detail};
}

Outcome criterion10() {
  const cli::ExperimentConfig c = config("theorem1_brownian.json");
  const std::string first = report_text(cli::execute(c));
  const std::string second = report_text(cli::execute(c));
  return {first == second, std::to_string(first.size()) + " bytes, " +
                               (first == second ? "identical" : "different") + ", sha256 " +
                               cli::sha256_hex(first).substr(0, 16)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-10); default runs all")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "stable subordinator Laplace transform", 60, criterion1},
      {2, "phi asymptotics for the Brownian measure", 1, criterion2},
      {3, "regular-variation index", 1, criterion3},
      {4, "large-mass limit, Brownian instance", 600, criterion4},
      {5, "Aldous-Pitman instance", 600, criterion5},
      {6, "excursion construction against the engine", 300, criterion6},
      {7, "stable immigration against the subordinated representation", 300, criterion7},
      {8, "Laplace transform of the stable subordinator T", 60, criterion8},
      {9, "invariant suites", 120, criterion9},
      {10, "determinism", 1200, criterion10},
  };

  bool all = true;
  for (const Criterion& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > c.limit_seconds) {
      out.passed = false;
      out.detail += "; runtime limit " + num(c.limit_seconds) + " s exceeded";
    }
    all = all && out.passed;
    std::cout << (out.passed ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << ", "
              << std::fixed << std::setprecision(2) << seconds << " s): " << std::defaultfloat << out.detail
              << std::endl;
  }
  return all ? 0 : 1;
}
