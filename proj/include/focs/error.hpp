#pragma once

#include <stdexcept>
#include <string>

namespace focs {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad files, bad flags, violated preconditions on user data.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A configured resource cap (OBDD node budget, solver time budget) was hit.
class BudgetExceeded : public Error {
public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
  DivergenceError(std::size_t epoch)
      : Error("training diverged: non-finite loss at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

private:
  std::size_t epoch_;
};

}  // namespace focs
