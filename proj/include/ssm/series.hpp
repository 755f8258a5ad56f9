#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ssm/field.hpp"

namespace ssm {

// Default number of certified t-adic coefficients for inexact data.
constexpr int64_t kDefaultPrecision = 16;

// Valuation of a truncated series: certified finite, a lower bound (all
// stored coefficients vanish but the element is not known exactly), or
// infinite (the element is exactly zero).
struct Valuation {
  enum class Kind { Finite, AtLeast, Infinite };
  Kind kind = Kind::Infinite;
  int64_t v = 0;  // value (Finite) or lower bound (AtLeast)

  static Valuation finite(int64_t v) { return {Kind::Finite, v}; }
  static Valuation at_least(int64_t v) { return {Kind::AtLeast, v}; }
  static Valuation infinite() { return {Kind::Infinite, 0}; }

  bool is_finite() const { return kind == Kind::Finite; }
  bool is_infinite() const { return kind == Kind::Infinite; }
  // The finite value; throws unless certified finite.
  int64_t finite_value() const;
  bool operator==(const Valuation& o) const { return kind == o.kind && (kind == Kind::Infinite || v == o.v); }
  std::string describe() const;
};

// Element of F_q[[t]] (or its fraction field after shifts) held as a dense
// coefficient window starting at t^0.  `known_exact` marks polynomials given
// exactly: their unstored coefficients are genuinely zero, and precision is
// unbounded.  Inexact elements certify exactly `precision` coefficients.
class Series {
 public:
  Series() = default;  // unset

  static Series exact_zero(const FieldSpecPtr& spec);
  static Series zero(const FieldSpecPtr& spec, int64_t prec);
  static Series constant(const FieldElement& c);            // exact
  static Series monomial(const FieldElement& c, int64_t e); // exact c * t^e
  static Series one(const FieldSpecPtr& spec);
  // Exact polynomial from dense little-endian coefficients.
  static Series polynomial(const FieldSpecPtr& spec, std::vector<FieldElement> coeffs);
  // Inexact window: exactly `prec` certified coefficients.
  static Series truncated(const FieldSpecPtr& spec, std::vector<FieldElement> coeffs, int64_t prec);

  bool valid() const { return spec_ != nullptr; }
  const FieldSpecPtr& spec() const { return spec_; }
  bool known_exact() const { return exact_; }
  // Effective precision: for exact elements a large sentinel, safe to add.
  int64_t precision() const;
  static constexpr int64_t kInfinitePrecision = std::numeric_limits<int64_t>::max() / 8;

  // Coefficient of t^i; zero beyond stored data for exact elements, throws
  // PrecisionExhausted for i >= precision of an inexact element.
  FieldElement coeff(int64_t i) const;
  // Degree of an exact polynomial (-1 for zero); throws on inexact data.
  int64_t poly_degree() const;
  const std::vector<FieldElement>& window() const { return c_; }

  Valuation valuation() const;
  // Constant-term residue (coeff(0)).
  FieldElement residue() const;
  bool is_certified_zero() const;
  // All known coefficients vanish (may still be nonzero beyond precision).
  bool all_known_coeffs_zero() const;
  // Certified unit (valuation zero).
  bool is_unit() const;

  Series operator+(const Series& o) const;
  Series operator-(const Series& o) const;
  Series operator*(const Series& o) const;
  Series operator-() const;
  Series scaled(const FieldElement& c) const;

  // Multiply by t^e.  Negative e demands certified divisibility: throws
  // NotDivisible when a known low coefficient is nonzero, PrecisionExhausted
  // when divisibility cannot be certified from the window.
  Series t_shift(int64_t e) const;

  // Substitute t = s^e (e >= 1): valuations and precision scale by e.
  Series base_change(uint32_t e) const;

  // Inverse of a unit, computed to `target_prec` coefficients (capped by the
  // operand's own precision).  Exact constants stay exact.
  Series inverse(int64_t target_prec) const;

  // Reduce the certified window (no-op if already narrower).  Exact elements
  // become inexact with the given precision.
  Series truncated_to(int64_t prec) const;

  // Evaluate an exact polynomial at t = x (x in the coefficient field).
  FieldElement evaluate(const FieldElement& x) const;

  // Agreement on the shared certified range.
  bool agrees_with(const Series& o) const;
  // Both exact and identical.
  bool certified_equal(const Series& o) const;

  std::string describe() const;

 private:
  Series(FieldSpecPtr spec, std::vector<FieldElement> c, bool exact, int64_t prec);
  void normalize();
  void check_compatible(const Series& o) const;

  FieldSpecPtr spec_;
  std::vector<FieldElement> c_;
  bool exact_ = true;
  int64_t prec_ = 0;  // meaningful iff !exact_
};

// num / den with den of certified finite valuation v: shifts both by t^{-v}
// and inverts the resulting unit to target_prec.
Series divide(const Series& num, const Series& den, int64_t target_prec);

}  // namespace ssm
