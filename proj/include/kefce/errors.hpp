#pragma once

#include <stdexcept>
#include <string>

namespace kefce {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Game validation.
struct TreeViolation : Error {
  using Error::Error;
};
struct RecallViolation : Error {
  using Error::Error;
};
struct StochasticityError : Error {
  using Error::Error;
};
struct RewardRange : Error {
  using Error::Error;
};

// Policies.
struct EmptyMixture : Error {
  using Error::Error;
};
struct PurityRequired : Error {
  using Error::Error;
};

// Rechistories and modifications.
struct SizeError : Error {
  using Error::Error;
};
struct LengthError : Error {
  using Error::Error;
};
struct BudgetExceeded : Error {
  using Error::Error;
};

// Regret minimization.
struct EmptyIndexSets : Error {
  using Error::Error;
};
struct RangeError : Error {
  using Error::Error;
};
struct ConvergenceFailure : Error {
  using Error::Error;
};
struct CapExceeded : Error {
  using Error::Error;
};

// Generators.
struct SizeGuard : Error {
  using Error::Error;
};

}  // namespace kefce
