#pragma once

#include <stdexcept>
#include <string>

namespace retard {

// Base of every error raised by the library. Callers that only care about
// "something numerical went wrong" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// A zero of the characteristic function sits on (or too close to) the
// contour; the caller has to move the box.
class ContourNearZero : public Error {
 public:
  using Error::Error;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class NeutralRecoveryFailure : public Error {
 public:
  using Error::Error;
};

class MissingDerivative : public Error {
 public:
  using Error::Error;
};

}  // namespace retard
