#include "fragsim/stable_measures.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fragsim/errors.hpp"

namespace fragsim {

namespace {

constexpr double kLogUniformMin = 1e-8;

void check_beta(double beta) {
  if (!(beta > 1.0 && beta < 2.0)) throw ValidationError("stable index beta must lie in (1, 2)");
}

struct FirstArrival {
  double value;
  double weight;  // density of Exp(1) over the proposal density
};

FirstArrival draw_first_arrival(Rng& rng) {
  static const double log_span = -std::log(kLogUniformMin);
  double g;
  if (open_unit(rng) < 0.5)
    g = exponential(rng, 1.0);
  else
    g = kLogUniformMin * std::exp(log_span * open_unit(rng));
  double proposal = 0.5 * std::exp(-g);
  if (g >= kLogUniformMin && g <= 1.0) proposal += 0.5 / (g * log_span);
  return {g, std::exp(-g) / proposal};
}

}  // namespace

double stable_dislocation_constant(double beta) {
  check_beta(beta);
  return beta * beta * std::tgamma(2.0 - 1.0 / beta) / std::tgamma(2.0 - beta);
}

double stable_immigration_constant(double beta) {
  check_beta(beta);
  return beta * (beta - 1.0) / std::tgamma(2.0 - beta);
}

double stable_immigration_rate_exact(double beta, double delta) {
  check_beta(beta);
  return beta / std::tgamma(1.0 / beta) * std::pow(delta, -(1.0 - 1.0 / beta));
}

// ---------------------------------------------------------------------------

StableDislocation::StableDislocation(double beta, const StableDislocationOptions& opts)
    : beta_(beta), c_beta_(stable_dislocation_constant(beta)), opts_(opts),
      levy_(StableLevy::from_laplace(1.0, 1.0 / beta)) {
  if (opts.pool < 1000) throw ValidationError("stable dislocation pool must hold at least 1000 realizations");
  if (!(opts.jump_floor > 0.0)) throw ValidationError("jump floor must be positive");
  if (opts.max_children < 1) throw ValidationError("max_children must be at least 1");

  entries_.reserve(opts.pool);
  for (std::size_t i = 0; i < opts.pool; ++i) {
    const std::uint64_t seed = derive_seed(opts.seed, {stream::kPool, i});
    Rng rng(seed);
    const FirstArrival first = draw_first_arrival(rng);
    const OrderedJumps j =
        ordered_jumps_given_first(levy_, 1.0, opts.jump_floor, opts.max_children, first.value, rng);
    const double total = j.total();
    const double s1 = j.sizes.empty() ? 0.0 : j.sizes.front() / total;
    entries_.push_back({s1, total, first.weight, first.value, seed});
  }
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.s1 < b.s1; });

  prefix_.assign(entries_.size() + 1, 0.0);
  for (std::size_t i = 0; i < entries_.size(); ++i)
    prefix_[i + 1] = prefix_[i] + entries_[i].weight * entries_[i].total;
  suffix_loss_.assign(entries_.size() + 1, 0.0);
  for (std::size_t i = entries_.size(); i-- > 0;)
    suffix_loss_[i] = suffix_loss_[i + 1] + entries_[i].weight * entries_[i].total * (1.0 - entries_[i].s1);
}

std::size_t StableDislocation::eligible(double eps) const {
  check_truncation(eps);
  const double bound = 1.0 - eps;
  const auto it = std::lower_bound(entries_.begin(), entries_.end(), bound,
                                   [](const Entry& e, double b) { return e.s1 < b; });
  return static_cast<std::size_t>(it - entries_.begin());
}

double StableDislocation::rate(double eps) const {
  return c_beta_ * prefix_[eligible(eps)] / static_cast<double>(entries_.size());
}

double StableDislocation::neglected_loss(double eps) const {
  return c_beta_ * suffix_loss_[eligible(eps)] / static_cast<double>(entries_.size());
}

void StableDislocation::regenerate(const Entry& e, Dislocation& out) const {
  Rng rng(e.seed);
  (void)draw_first_arrival(rng);
  const OrderedJumps j = ordered_jumps_given_first(levy_, 1.0, opts_.jump_floor, opts_.max_children, e.first_arrival, rng);
  out.fractions.resize(j.sizes.size());
  for (std::size_t i = 0; i < j.sizes.size(); ++i) out.fractions[i] = j.sizes[i] / e.total;
  out.residual = j.compensation / e.total;
}

void StableDislocation::sample_into(double eps, Rng& rng, Dislocation& out) const {
  const std::size_t k = eligible(eps);
  if (prefix_[k] <= 0.0) throw UndefinedValue("stable dislocation pool has no realization with s_1 < 1 - eps");
  const double u = open_unit(rng) * prefix_[k];
  const auto it = std::upper_bound(prefix_.begin() + 1, prefix_.begin() + static_cast<std::ptrdiff_t>(k) + 1, u);
  const std::size_t idx = std::min(static_cast<std::size_t>(it - (prefix_.begin() + 1)), k - 1);
  regenerate(entries_[idx], out);
}

std::string StableDislocation::name() const {
  std::ostringstream os;
  os << "stable:beta=" << beta_;
  return os.str();
}

WeightedEstimate StableDislocation::pool_laplace(double q) const {
  const double n = static_cast<double>(entries_.size());
  double s = 0.0, s2 = 0.0;
  for (const auto& e : entries_) {
    const double v = e.weight * std::exp(-q * e.total);
    s += v;
    s2 += v * v;
  }
  const double mean = s / n;
  const double var = std::max(0.0, s2 / n - mean * mean) * n / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

DislocationPtr nu_stable(double beta, const StableDislocationOptions& opts) {
  check_beta(beta);
  return std::make_shared<const StableDislocation>(beta, opts);
}

// ---------------------------------------------------------------------------

StableImmigration::StableImmigration(double beta, const StableImmigrationOptions& opts)
    : beta_(beta), k_(stable_immigration_constant(beta)), opts_(opts), levy_(StableLevy::from_laplace(1.0, 1.0 / beta)) {
  if (!(opts.xmin_ratio > 0.0 && opts.xmin_ratio < 1.0)) throw ValidationError("xmin_ratio must lie in (0, 1)");
  if (opts.rate_samples < 1000) throw ValidationError("rate_samples must be at least 1000");
  if (opts.max_children < 1) throw ValidationError("max_children must be at least 1");
  if (!(opts.jump_floor > 0.0)) throw ValidationError("jump floor must be positive");

  Rng rng = make_rng(opts.seed, {stream::kPool});
  std::vector<double> totals(opts.rate_samples);
  for (double& t : totals) t = ordered_jumps(levy_, 1.0, opts.jump_floor, opts.max_children, rng).total();
  std::vector<double> sorted = totals;
  const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  median_ = *mid;

  // Given T_1, the atom survives the mass filter iff the Pareto variable x^beta / x_min^beta
  // exceeds c / T_1, which has probability min(1, (T_1 / c)^gamma).
  const double gamma = 1.0 - 1.0 / beta;
  const double c = median_ / opts.xmin_ratio;
  double acc = 0.0, mom = 0.0;
  for (const double t : totals) {
    acc += std::min(1.0, std::pow(t / c, gamma));
    mom += std::pow(t, gamma);
  }
  acceptance_ = acc / static_cast<double>(totals.size());
  moment_gamma_ = mom / static_cast<double>(totals.size());
}

double StableImmigration::xmin_power(double delta) const {
  if (!(delta > 0.0)) throw ValidationError("atom mass cut must be positive");
  return opts_.xmin_ratio * delta / median_;
}

double StableImmigration::atom_rate(double delta) const {
  const double xmin = std::pow(xmin_power(delta), 1.0 / beta_);
  return k_ / (beta_ - 1.0) * std::pow(xmin, 1.0 - beta_) * acceptance_;
}

MassPartition StableImmigration::sample_atom(double delta, Rng& rng) const {
  const double base = xmin_power(delta);
  const double gamma = 1.0 - 1.0 / beta_;
  const double c = median_ / opts_.xmin_ratio;
  for (;;) {
    OrderedJumps j = ordered_jumps(levy_, 1.0, opts_.jump_floor, opts_.max_children, rng);
    const double total = j.total();
    if (open_unit(rng) > std::min(1.0, std::pow(total / c, gamma))) continue;
    const double v = std::max(1.0, c / total) * std::pow(open_unit(rng), -1.0 / gamma);
    const double scale = base * v;
    for (double& s : j.sizes) s *= scale;
    return MassPartition::from_sorted(std::move(j.sizes), scale * j.compensation);
  }
}

double StableImmigration::neglected_mass(double delta) const {
  if (!(delta > 0.0)) throw ValidationError("atom mass cut must be positive");
  return k_ * std::pow(delta, 1.0 / beta_) * moment_gamma_;
}

std::optional<double> StableImmigration::laplace_exponent(double q) const {
  const double gamma = 1.0 - 1.0 / beta_;
  return beta_ * std::tgamma(1.0 - gamma) / std::tgamma(1.0 / beta_) * std::pow(q, gamma);
}

std::string StableImmigration::name() const {
  std::ostringstream os;
  os << "stable:beta=" << beta_;
  return os.str();
}

ImmigrationPtr immigration_stable(double beta, const StableImmigrationOptions& opts) {
  check_beta(beta);
  return std::make_shared<const StableImmigration>(beta, opts);
}

}  // namespace fragsim
