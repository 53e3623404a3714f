#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fragsim/partitions.hpp"
#include "fragsim/rng.hpp"

namespace fragsim {

// ---------------------------------------------------------------------------
// Rate functions tau

/// Mass-dependent rate multiplier tau(s) > 0.
class RateFunction {
 public:
  enum class Kind { general, power };

  /// tau(s) = s^alpha.
  static RateFunction power(double alpha);
  /// tau(s) = scale * s^alpha.
  static RateFunction scaled_power(double scale, double alpha);
  static RateFunction general(std::function<double(double)> f, std::string name);

  double operator()(double s) const;
  Kind kind() const noexcept { return kind_; }
  /// Exponent for power kinds; throws for general kinds.
  double alpha() const;
  double scale() const noexcept { return scale_; }
  /// tau == 1 identically.
  bool homogeneous() const noexcept { return kind_ == Kind::power && alpha_ == 0.0 && scale_ == 1.0; }
  const std::string& name() const noexcept { return name_; }

 private:
  RateFunction() = default;
  Kind kind_ = Kind::power;
  double alpha_ = 0.0;
  double scale_ = 1.0;
  std::function<double(double)> f_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// Dislocation measures nu

/// Outcome of one dislocation: fractions of the parent mass in non-increasing order and the
/// fraction represented only in aggregate (compensated small pieces), which becomes dust.
struct Dislocation {
  std::vector<double> fractions;
  double residual = 0.0;
  double sum() const noexcept;
};

class DislocationMeasure {
 public:
  virtual ~DislocationMeasure() = default;

  /// R(eps) = nu(s_1 < 1 - eps) for eps in (0, 1/2].
  virtual double rate(double eps) const = 0;
  /// Same value, possibly from a precomputed table; used in hot loops.
  virtual double fast_rate(double eps) const { return rate(eps); }
  /// Integral of (1 - s_1) over {s_1 >= 1 - eps}: the relative mass drift that the eps
  /// truncation discards per unit time at tau = 1.
  virtual double neglected_loss(double eps) const = 0;
  virtual double fast_neglected_loss(double eps) const { return neglected_loss(eps); }

  /// Draws from nu restricted to {s_1 < 1 - eps}, normalized. Reuses `out`'s storage.
  virtual void sample_into(double eps, Rng& rng, Dislocation& out) const = 0;
  Dislocation sample(double eps, Rng& rng) const;

  virtual bool is_binary() const = 0;
  virtual bool is_conservative() const = 0;
  virtual std::string name() const = 0;
};

using DislocationPtr = std::shared_ptr<const DislocationMeasure>;

/// Throws ValidationError unless eps lies in (0, 1/2].
void check_truncation(double eps);

/// The Brownian dislocation measure: binary, s_1 with density (2 pi x^3 (1-x)^3)^(-1/2) on [1/2, 1).
DislocationPtr nu_brownian();

/// Finitely many atoms: each fraction list (non-increasing, sum <= 1) with a positive weight.
struct FiniteAtom {
  std::vector<double> fractions;
  double weight;
};
DislocationPtr nu_finite(std::vector<FiniteAtom> atoms, std::string name = "finite");
/// Point mass of weight `weight` at (1/2, 1/2).
DislocationPtr nu_binary_half(double weight = 1.0);
/// The zero measure (no dislocations).
DislocationPtr nu_zero();

/// Binary measure with R(eps) = eps^(-a) exactly, a in (0, 1): density a u^(-a-1) for the
/// smaller fragment u in (0, 1/2], plus an atom of weight 2^a at (1/4, 1/4, 1/4, 1/4).
DislocationPtr nu_power(double a);

/// Options for the stable dislocation measure.
struct StableDislocationOptions {
  double jump_floor = 1e-8;
  std::size_t pool = 20000;
  std::size_t max_children = 1024;
  std::uint64_t seed = 0x5eed;
};

/// nu^beta for beta in (1, 2): C_beta E[T_1 f(Delta / T_1)] where Delta are the jumps on [0, 1]
/// of a stable subordinator with Laplace exponent q^(1/beta).
DislocationPtr nu_stable(double beta, const StableDislocationOptions& opts = {});

/// beta^2 Gamma(2 - 1/beta) / Gamma(2 - beta).
double stable_dislocation_constant(double beta);

/// phi_nu(m) = 1 / R(1/m). Throws UndefinedValue if R(1/m) = 0.
double phi_nu(const DislocationMeasure& nu, double m);

/// Inverse of phi_nu: the m with phi_nu(m) = target, found by bracketing on log m. phi_nu must be
/// strictly decreasing on the bracket. Throws UndefinedValue with the bracket on failure.
double phi_nu_inverse(const DislocationMeasure& nu, double target, double m_lo = 2.0000001, double m_hi = 1e15);

/// Geometric grid of `points` values from lo to hi inclusive.
std::vector<double> geometric_grid(double lo, double hi, std::size_t points);

/// Least-squares slope of log phi_nu(m) against log m (an estimate of -gamma_nu).
/// The grid needs at least 4 points spanning at least 3 decades.
double estimate_regular_variation_index(const DislocationMeasure& nu, std::span<const double> m_grid);

/// Draws s from nu restricted to {s_1 < 1 - 1/m} and returns the rearrangement of (m s_2, m s_3, ...).
MassPartition rescaled_sample(const DislocationMeasure& nu, double m, Rng& rng);

// ---------------------------------------------------------------------------
// Immigration measures I

class ImmigrationMeasure {
 public:
  virtual ~ImmigrationMeasure() = default;

  /// Intensity of atoms whose total mass exceeds delta.
  virtual double atom_rate(double delta) const = 0;
  /// An atom conditioned on total mass > delta.
  virtual MassPartition sample_atom(double delta, Rng& rng) const = 0;
  /// Expected immigrant mass per unit time carried by atoms of total mass <= delta.
  virtual double neglected_mass(double delta) const = 0;
  /// Self-similarity index when known.
  virtual std::optional<double> gamma() const = 0;
  /// True when every atom is a single mass.
  virtual bool singletons() const = 0;
  virtual bool is_zero() const { return false; }
  virtual std::string name() const = 0;
  /// Laplace exponent of the immigrant-mass subordinator, when known in closed form.
  virtual std::optional<double> laplace_exponent(double) const { return std::nullopt; }
};

using ImmigrationPtr = std::shared_ptr<const ImmigrationMeasure>;

/// Single masses with Levy density C gamma x^(-1-gamma): atom_rate(delta) = C delta^(-gamma).
ImmigrationPtr immigration_power(double c, double gamma);
/// I_Br: density (2 pi x^3)^(-1/2), i.e. immigration_power(sqrt(2/pi), 1/2).
ImmigrationPtr immigration_brownian();
ImmigrationPtr immigration_zero();
/// Same atoms, intensity multiplied by `factor` > 0.
ImmigrationPtr scaled_intensity(ImmigrationPtr base, double factor);

struct StableImmigrationOptions {
  /// Lower cut x_min on the x^(-beta) factor is placed where x^beta median(T_1) = ratio * delta.
  double xmin_ratio = 1e-6;
  std::size_t max_children = 64;
  double jump_floor = 1e-12;
  /// Proposals used to estimate the acceptance probability behind atom_rate.
  std::size_t rate_samples = 200000;
  std::uint64_t seed = 0x1b57;
};

/// I^beta: beta(beta-1)/Gamma(2-beta) * int E[f(x^beta Delta)] x^(-beta) dx.
ImmigrationPtr immigration_stable(double beta, const StableImmigrationOptions& opts = {});
/// beta(beta - 1) / Gamma(2 - beta).
double stable_immigration_constant(double beta);
/// Closed form of the I^beta atom rate, beta / Gamma(1/beta) * delta^(-(1 - 1/beta)).
double stable_immigration_rate_exact(double beta, double delta);

}  // namespace fragsim
