#include "fragsim/measures.hpp"

#include <algorithm>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "fragsim/errors.hpp"
#include "fragsim/quadrature.hpp"

namespace fragsim {

// ---------------------------------------------------------------------------
// RateFunction

RateFunction RateFunction::power(double alpha) { return scaled_power(1.0, alpha); }

RateFunction RateFunction::scaled_power(double scale, double alpha) {
  if (!std::isfinite(alpha)) throw ValidationError("rate exponent must be finite");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ValidationError("rate scale must be positive");
  RateFunction r;
  r.kind_ = Kind::power;
  r.alpha_ = alpha;
  r.scale_ = scale;
  std::ostringstream os;
  if (scale != 1.0) os << scale << "*";
  os << "s^" << alpha;
  r.name_ = os.str();
  return r;
}

RateFunction RateFunction::general(std::function<double(double)> f, std::string name) {
  if (!f) throw ValidationError("rate function is empty");
  RateFunction r;
  r.kind_ = Kind::general;
  r.f_ = std::move(f);
  r.name_ = std::move(name);
  return r;
}

double RateFunction::operator()(double s) const {
  if (kind_ == Kind::power) return alpha_ == 0.0 ? scale_ : scale_ * std::pow(s, alpha_);
  return f_(s);
}

double RateFunction::alpha() const {
  if (kind_ != Kind::power) throw ValidationError("rate function '" + name_ + "' is not a power law");
  return alpha_;
}

// ---------------------------------------------------------------------------
// Shared helpers

double Dislocation::sum() const noexcept {
  return std::accumulate(fractions.begin(), fractions.end(), 0.0) + residual;
}

Dislocation DislocationMeasure::sample(double eps, Rng& rng) const {
  Dislocation d;
  sample_into(eps, rng, d);
  return d;
}

void check_truncation(double eps) {
  if (!(eps > 0.0 && eps <= 0.5))
    throw ValidationError("truncation eps must lie in (0, 1/2], got " + std::to_string(eps));
}

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;  // (2 pi)^(-1/2)

// ---------------------------------------------------------------------------
// Brownian dislocation measure

class BrownianDislocation final : public DislocationMeasure {
 public:
  double rate(double eps) const override {
    check_truncation(eps);
    if (eps == 0.5) return 0.0;
    // With u = 1 - x = z^2 the integrand becomes 2 z^-2 (1 - z^2)^(-3/2). The z^-2 part is
    // integrated exactly; the remainder is bounded near 0.
    const double a = std::sqrt(eps);
    const double b = std::numbers::sqrt2 / 2.0;
    const auto smooth = [](double z) {
      if (z < 1e-4) return 3.0 + 3.75 * z * z;
      return 2.0 * std::expm1(-1.5 * std::log1p(-z * z)) / (z * z);
    };
    const double tail = integrate_smooth(smooth, a, b).value;
    return kInvSqrt2Pi * (2.0 * (1.0 / a - std::numbers::sqrt2) + tail);
  }

  double fast_rate(double eps) const override {
    const Tables& t = tables();
    const double y = std::log(eps);
    if (y < t.y0 || y > t.y_last) return rate(eps);
    return std::exp(t.log_h(y)) * (0.5 - eps);
  }

  double fast_neglected_loss(double eps) const override {
    const Tables& t = tables();
    const double y = std::log(eps);
    if (y < t.y0 || y > t.y_last) return neglected_loss(eps);
    return std::exp(t.log_loss(y));
  }

  double neglected_loss(double eps) const override {
    check_truncation(eps);
    const double b = std::sqrt(eps);
    const auto f = [](double z) { return 2.0 * std::pow(1.0 - z * z, -1.5); };
    return kInvSqrt2Pi * integrate_smooth(f, 0.0, b).value;
  }

  void sample_into(double eps, Rng& rng, Dislocation& out) const override {
    check_truncation(eps);
    if (eps == 0.5) throw UndefinedValue("brownian measure restricted to s_1 < 1/2 is zero");
    // Proposal density proportional to (1-x)^(-3/2): v = (1-x)^(-1/2) is uniform on
    // [sqrt 2, eps^(-1/2)]. Accept with probability (2x)^(-3/2).
    const double lo = std::numbers::sqrt2;
    const double hi = 1.0 / std::sqrt(eps);
    double x;
    for (;;) {
      const double v = lo + (hi - lo) * open_unit(rng);
      const double u = 1.0 / (v * v);
      x = 1.0 - u;
      const double accept = std::pow(2.0 * x, -1.5);
      if (open_unit(rng) <= accept) break;
    }
    x = std::min(x, 1.0 - eps);
    out.fractions.assign({x, 1.0 - x});
    out.residual = 0.0;
  }

  bool is_binary() const override { return true; }
  bool is_conservative() const override { return true; }
  std::string name() const override { return "brownian"; }

 private:
  // log h(eps) with h = R(eps) / (1/2 - eps), tabulated on a uniform grid in log eps.
  struct Tables {
    double y0 = 0.0, y_last = 0.0;
    boost::math::interpolators::cardinal_cubic_b_spline<double> log_h;
    boost::math::interpolators::cardinal_cubic_b_spline<double> log_loss;
  };

  const Tables& tables() const {
    std::call_once(once_, [this] {
      constexpr double kEpsMin = 1e-15;
      constexpr double kEpsMax = 0.5 - 1e-6;
      constexpr int kPerDecade = 160;
      const double y0 = std::log(kEpsMin), y1 = std::log(kEpsMax);
      const int n = static_cast<int>(std::ceil((y1 - y0) / std::log(10.0) * kPerDecade)) + 1;
      const double h = (y1 - y0) / (n - 1);
      std::vector<double> values(n), losses(n);
      for (int i = 0; i < n; ++i) {
        const double eps = std::exp(y0 + h * i);
        values[i] = std::log(rate(eps) / (0.5 - eps));
        losses[i] = std::log(neglected_loss(eps));
      }
      tables_.y0 = y0;
      tables_.y_last = y0 + h * (n - 1);
      using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;
      tables_.log_h = Spline(values.begin(), values.end(), y0, h);
      tables_.log_loss = Spline(losses.begin(), losses.end(), y0, h);
    });
    return tables_;
  }

  mutable std::once_flag once_;
  mutable Tables tables_;
};

// ---------------------------------------------------------------------------
// Finite measures

class FiniteDislocation final : public DislocationMeasure {
 public:
  FiniteDislocation(std::vector<FiniteAtom> atoms, std::string name) : atoms_(std::move(atoms)), name_(std::move(name)) {
    binary_ = true;
    conservative_ = true;
    for (const auto& a : atoms_) {
      if (!(a.weight > 0.0) || !std::isfinite(a.weight)) throw ValidationError("atom weight must be positive");
      if (a.fractions.empty()) throw ValidationError("atom needs at least one fraction");
      double sum = 0.0;
      for (std::size_t i = 0; i < a.fractions.size(); ++i) {
        const double f = a.fractions[i];
        if (!(f > 0.0) || f >= 1.0) throw ValidationError("atom fractions must lie in (0, 1)");
        if (i > 0 && f > a.fractions[i - 1]) throw ValidationError("atom fractions must be non-increasing");
        sum += f;
      }
      if (sum > 1.0 + kFractionSumTolerance) throw ValidationError("atom fractions sum above 1");
      if (a.fractions.size() > 2) binary_ = false;
      if (std::abs(sum - 1.0) > kFractionSumTolerance) conservative_ = false;
    }
  }

  double rate(double eps) const override {
    check_truncation(eps);
    double r = 0.0;
    for (const auto& a : atoms_)
      if (a.fractions[0] < 1.0 - eps) r += a.weight;
    return r;
  }

  double neglected_loss(double eps) const override {
    check_truncation(eps);
    double r = 0.0;
    for (const auto& a : atoms_)
      if (a.fractions[0] >= 1.0 - eps) r += a.weight * (1.0 - a.fractions[0]);
    return r;
  }

  void sample_into(double eps, Rng& rng, Dislocation& out) const override {
    const double total = rate(eps);
    if (total == 0.0) throw UndefinedValue("finite measure '" + name_ + "' has no mass below 1 - eps");
    double u = open_unit(rng) * total;
    const FiniteAtom* chosen = nullptr;
    for (const auto& a : atoms_) {
      if (a.fractions[0] >= 1.0 - eps) continue;
      chosen = &a;
      u -= a.weight;
      if (u <= 0.0) break;
    }
    out.fractions.assign(chosen->fractions.begin(), chosen->fractions.end());
    out.residual = 0.0;
  }

  bool is_binary() const override { return binary_; }
  bool is_conservative() const override { return conservative_; }
  std::string name() const override { return name_; }

 private:
  std::vector<FiniteAtom> atoms_;
  std::string name_;
  bool binary_ = true;
  bool conservative_ = true;
};

// ---------------------------------------------------------------------------
// Exact power-law rate

class PowerDislocation final : public DislocationMeasure {
 public:
  explicit PowerDislocation(double a) : a_(a), atom_weight_(std::pow(2.0, a)) {
    if (!(a > 0.0 && a < 1.0)) throw ValidationError("power measure exponent must lie in (0, 1)");
  }

  double rate(double eps) const override {
    check_truncation(eps);
    return std::pow(eps, -a_);
  }

  double neglected_loss(double eps) const override {
    check_truncation(eps);
    return a_ / (1.0 - a_) * std::pow(eps, 1.0 - a_);
  }

  void sample_into(double eps, Rng& rng, Dislocation& out) const override {
    const double total = rate(eps);
    out.residual = 0.0;
    if (open_unit(rng) * total <= atom_weight_) {
      out.fractions.assign(4, 0.25);
      return;
    }
    // u^(-a) is uniform on [2^a, eps^(-a)].
    const double v = atom_weight_ + open_unit(rng) * (total - atom_weight_);
    const double u = std::clamp(std::pow(v, -1.0 / a_), eps, 0.5);
    out.fractions.assign({1.0 - u, u});
  }

  bool is_binary() const override { return false; }
  bool is_conservative() const override { return true; }
  std::string name() const override {
    std::ostringstream os;
    os << "power:a=" << a_;
    return os.str();
  }

 private:
  double a_;
  double atom_weight_;
};

// ---------------------------------------------------------------------------
// Immigration measures

class PowerImmigration final : public ImmigrationMeasure {
 public:
  PowerImmigration(double c, double gamma, std::string name) : c_(c), gamma_(gamma), name_(std::move(name)) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("immigration index must lie in (0, 1)");
    if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("immigration constant must be positive");
  }

  double atom_rate(double delta) const override {
    check_delta(delta);
    return c_ * std::pow(delta, -gamma_);
  }

  MassPartition sample_atom(double delta, Rng& rng) const override {
    check_delta(delta);
    return MassPartition::single(delta * std::pow(open_unit(rng), -1.0 / gamma_));
  }

  double neglected_mass(double delta) const override {
    check_delta(delta);
    return c_ * gamma_ / (1.0 - gamma_) * std::pow(delta, 1.0 - gamma_);
  }

  std::optional<double> gamma() const override { return gamma_; }
  bool singletons() const override { return true; }
  std::string name() const override { return name_; }
  std::optional<double> laplace_exponent(double q) const override {
    return c_ * std::tgamma(1.0 - gamma_) * std::pow(q, gamma_);
  }

 private:
  static void check_delta(double delta) {
    if (!(delta > 0.0)) throw ValidationError("atom mass cut must be positive");
  }
  double c_, gamma_;
  std::string name_;
};

class ZeroImmigration final : public ImmigrationMeasure {
 public:
  double atom_rate(double) const override { return 0.0; }
  MassPartition sample_atom(double, Rng&) const override {
    throw UndefinedValue("the zero immigration measure has no atoms");
  }
  double neglected_mass(double) const override { return 0.0; }
  std::optional<double> gamma() const override { return std::nullopt; }
  bool singletons() const override { return true; }
  bool is_zero() const override { return true; }
  std::string name() const override { return "zero"; }
  std::optional<double> laplace_exponent(double) const override { return 0.0; }
};

class ScaledImmigration final : public ImmigrationMeasure {
 public:
  ScaledImmigration(ImmigrationPtr base, double factor) : base_(std::move(base)), factor_(factor) {
    if (!base_) throw ValidationError("scaled immigration needs a base measure");
    if (!(factor > 0.0) || !std::isfinite(factor)) throw ValidationError("intensity factor must be positive");
  }
  double atom_rate(double delta) const override { return factor_ * base_->atom_rate(delta); }
  MassPartition sample_atom(double delta, Rng& rng) const override { return base_->sample_atom(delta, rng); }
  double neglected_mass(double delta) const override { return factor_ * base_->neglected_mass(delta); }
  std::optional<double> gamma() const override { return base_->gamma(); }
  bool singletons() const override { return base_->singletons(); }
  bool is_zero() const override { return base_->is_zero(); }
  std::optional<double> laplace_exponent(double q) const override {
    const auto b = base_->laplace_exponent(q);
    if (!b) return std::nullopt;
    return factor_ * *b;
  }
  std::string name() const override {
    std::ostringstream os;
    os << base_->name() << "*" << factor_;
    return os.str();
  }

 private:
  ImmigrationPtr base_;
  double factor_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Factories

DislocationPtr nu_brownian() {
  static const auto instance = std::make_shared<const BrownianDislocation>();
  return instance;
}

DislocationPtr nu_finite(std::vector<FiniteAtom> atoms, std::string name) {
  return std::make_shared<const FiniteDislocation>(std::move(atoms), std::move(name));
}

DislocationPtr nu_binary_half(double weight) {
  std::ostringstream os;
  os << "finite:binary-half";
  if (weight != 1.0) os << ",weight=" << weight;
  return nu_finite({{{0.5, 0.5}, weight}}, os.str());
}

DislocationPtr nu_zero() { return nu_finite({}, "zero"); }

DislocationPtr nu_power(double a) { return std::make_shared<const PowerDislocation>(a); }

ImmigrationPtr immigration_power(double c, double gamma) {
  std::ostringstream os;
  os << "power:C=" << c << ",gamma=" << gamma;
  return std::make_shared<const PowerImmigration>(c, gamma, os.str());
}

ImmigrationPtr immigration_brownian() {
  return std::make_shared<const PowerImmigration>(std::sqrt(2.0 / std::numbers::pi), 0.5, "brownian");
}

ImmigrationPtr immigration_zero() { return std::make_shared<const ZeroImmigration>(); }

ImmigrationPtr scaled_intensity(ImmigrationPtr base, double factor) {
  return std::make_shared<const ScaledImmigration>(std::move(base), factor);
}

// ---------------------------------------------------------------------------
// phi_nu and friends

double phi_nu(const DislocationMeasure& nu, double m) {
  if (!(m >= 2.0) || !std::isfinite(m)) throw ValidationError("phi_nu needs m >= 2");
  const double r = nu.rate(1.0 / m);
  if (r <= 0.0) throw UndefinedValue("phi undefined at this m: nu(s_1 < 1 - 1/m) = 0 for m = " + std::to_string(m));
  return 1.0 / r;
}

double phi_nu_inverse(const DislocationMeasure& nu, double target, double m_lo, double m_hi) {
  if (!(target > 0.0) || !std::isfinite(target)) throw ValidationError("phi_nu_inverse needs a positive target");
  if (!(m_lo > 2.0 && m_hi > m_lo)) throw ValidationError("phi_nu_inverse needs 2 < m_lo < m_hi");
  const double log_target = std::log(target);
  const auto f = [&](double y) { return std::log(phi_nu(nu, std::exp(y))) - log_target; };
  const double a = std::log(m_lo), b = std::log(m_hi);
  const double fa = f(a), fb = f(b);
  if (fa == 0.0) return m_lo;
  if (fb == 0.0) return m_hi;
  if ((fa > 0.0) == (fb > 0.0)) {
    std::ostringstream os;
    os << "phi_nu_inverse: target " << target << " not bracketed by phi(" << m_lo << ")=" << std::exp(fa + log_target)
       << " and phi(" << m_hi << ")=" << std::exp(fb + log_target);
    throw UndefinedValue(os.str());
  }
  std::uintmax_t iters = 200;
  const auto tol = boost::math::tools::eps_tolerance<double>(50);
  const auto [lo, hi] = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
  return std::exp(0.5 * (lo + hi));
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0 && hi > lo) || points < 2) throw ValidationError("geometric grid needs 0 < lo < hi and >= 2 points");
  std::vector<double> g(points);
  const double step = std::log(hi / lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
  g.back() = hi;
  return g;
}

double estimate_regular_variation_index(const DislocationMeasure& nu, std::span<const double> m_grid) {
  if (m_grid.size() < 4) throw ValidationError("regular variation fit needs at least 4 grid points");
  const auto [lo, hi] = std::minmax_element(m_grid.begin(), m_grid.end());
  if (*hi / *lo < 1e3 * (1.0 - 1e-9)) throw ValidationError("regular variation grid must span at least 3 decades");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(m_grid.size());
  for (const double m : m_grid) {
    const double x = std::log(m), y = std::log(phi_nu(nu, m));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

MassPartition rescaled_sample(const DislocationMeasure& nu, double m, Rng& rng) {
  (void)phi_nu(nu, m);
  const Dislocation d = nu.sample(1.0 / m, rng);
  std::vector<double> rest;
  rest.reserve(d.fractions.size());
  for (std::size_t i = 1; i < d.fractions.size(); ++i) rest.push_back(m * d.fractions[i]);
  return with_dust(decreasing_rearrangement(rest), m * d.residual);
}

}  // namespace fragsim
