#pragma once

#include <stdexcept>
#include <string>

namespace fragsim {

/// Bad argument or violated precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A quantity the caller asked for does not exist at this parameter (e.g. phi at a point
/// where the truncated rate vanishes).
class UndefinedValue : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A fragment's splitting rate is not finite; carries the offending mass.
class RateOverflow : public std::runtime_error {
 public:
  RateOverflow(const std::string& what, double mass) : std::runtime_error(what), mass_(mass) {}
  double mass() const noexcept { return mass_; }

 private:
  double mass_;
};

/// A subordinator path is too short to answer a time-change query. Extend and retry.
class HorizonExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The event loop hit its configured event budget.
class EventBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fragsim
