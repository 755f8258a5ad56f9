#pragma once

#include <stdexcept>
#include <string>

namespace ssm {

// Base class for every failure the toolkit can signal.  Each concrete type
// corresponds to one named condition a caller may want to branch on.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Arithmetic on truncated series ran out of certified coefficients.
struct PrecisionExhausted : Error {
  using Error::Error;
};

// A shift or division required divisibility that provably fails.
struct NotDivisible : Error {
  using Error::Error;
};

// Division by a non-unit series or field zero.
struct NotUnit : Error {
  using Error::Error;
};

// A search or enumeration exceeded its configured budget.
struct BudgetExceeded : Error {
  using Error::Error;
};

// The invariant of the input vanishes identically; no semistable model exists.
struct GITUnstable : Error {
  using Error::Error;
};

// A structured case analysis met input outside every handled case.
struct CaseNotMatched : Error {
  using Error::Error;
};

// The requested construction needs a formal section that was not supplied
// and could not be found.
struct NeedsFormalSection : Error {
  using Error::Error;
};

// Random/genericity retries were exhausted without a valid configuration.
struct GenericityExhausted : Error {
  using Error::Error;
};

// The tangent cone at the chosen point blocks the construction.
struct TangentConeObstruction : Error {
  using Error::Error;
};

// Three points that were required to span a plane are collinear.
struct CollinearPoints : Error {
  using Error::Error;
};

// Point counts did not settle into any dimension band.
struct InconclusiveDimension : Error {
  using Error::Error;
};

// A pencil whose two generators fail the complete-intersection criteria.
struct NotCompleteIntersection : Error {
  using Error::Error;
};

// A Galois orbit degenerated (repeated points) where distinct ones were needed.
struct DegenerateOrbit : Error {
  using Error::Error;
};

// A point was requested on a variety that provably has none.
struct NoPoint : Error {
  using Error::Error;
};

// Branch-and-lift reached its depth limit with live branches (inconclusive).
struct DepthExceeded : Error {
  using Error::Error;
};

// A supplied weight system does not actually destabilize the input.
struct NotDestabilizing : Error {
  using Error::Error;
};

// Model file or flag parsing failed.
struct ParseError : Error {
  using Error::Error;
};

// Input outside the supported (degree, dimension, characteristic) window.
struct UnsupportedCase : Error {
  using Error::Error;
};

}  // namespace ssm
