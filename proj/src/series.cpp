#include "ssm/series.hpp"

#include <algorithm>
#include <sstream>

namespace ssm {

int64_t Valuation::finite_value() const {
  if (kind != Kind::Finite) throw PrecisionExhausted("valuation is not certified finite");
  return v;
}

std::string Valuation::describe() const {
  switch (kind) {
    case Kind::Finite:
      return std::to_string(v);
    case Kind::AtLeast:
      return ">=" + std::to_string(v);
    default:
      return "inf";
  }
}

Series::Series(FieldSpecPtr spec, std::vector<FieldElement> c, bool exact, int64_t prec)
    : spec_(std::move(spec)), c_(std::move(c)), exact_(exact), prec_(prec) {
  normalize();
}

void Series::normalize() {
  if (!spec_) throw Error("series with null spec");
  if (exact_) {
    while (!c_.empty() && c_.back().is_zero()) c_.pop_back();
    prec_ = 0;
  } else {
    if (prec_ < 0) throw Error("series precision must be >= 0");
    c_.resize((size_t)prec_, FieldElement::zero(spec_));
  }
}

Series Series::exact_zero(const FieldSpecPtr& spec) {
  return Series(spec, {}, true, 0);
}

Series Series::zero(const FieldSpecPtr& spec, int64_t prec) {
  return Series(spec, {}, false, prec);
}

Series Series::constant(const FieldElement& c) {
  return Series(c.spec(), {c}, true, 0);
}

Series Series::one(const FieldSpecPtr& spec) {
  return constant(FieldElement::one(spec));
}

Series Series::monomial(const FieldElement& c, int64_t e) {
  if (e < 0) throw Error("monomial exponent must be >= 0");
  std::vector<FieldElement> v((size_t)e, FieldElement::zero(c.spec()));
  v.push_back(c);
  return Series(c.spec(), std::move(v), true, 0);
}

Series Series::polynomial(const FieldSpecPtr& spec, std::vector<FieldElement> coeffs) {
  return Series(spec, std::move(coeffs), true, 0);
}

Series Series::truncated(const FieldSpecPtr& spec, std::vector<FieldElement> coeffs, int64_t prec) {
  coeffs.resize((size_t)prec, FieldElement::zero(spec));
  return Series(spec, std::move(coeffs), false, prec);
}

int64_t Series::precision() const {
  if (!spec_) throw Error("unset series");
  return exact_ ? kInfinitePrecision : prec_;
}

FieldElement Series::coeff(int64_t i) const {
  if (!spec_) throw Error("unset series");
  if (i < 0) throw Error("negative coefficient index");
  if ((size_t)i < c_.size()) return c_[(size_t)i];
  if (exact_) return FieldElement::zero(spec_);
  throw PrecisionExhausted("coefficient beyond certified precision");
}

int64_t Series::poly_degree() const {
  if (!spec_) throw Error("unset series");
  if (!exact_) throw PrecisionExhausted("degree of a truncated series is not defined");
  return (int64_t)c_.size() - 1;
}

Valuation Series::valuation() const {
  if (!spec_) throw Error("unset series");
  for (size_t i = 0; i < c_.size(); ++i)
    if (!c_[i].is_zero()) return Valuation::finite((int64_t)i);
  return exact_ ? Valuation::infinite() : Valuation::at_least(prec_);
}

FieldElement Series::residue() const {
  return coeff(0);
}

bool Series::is_certified_zero() const {
  if (!spec_) throw Error("unset series");
  return exact_ && c_.empty();
}

bool Series::all_known_coeffs_zero() const {
  if (!spec_) throw Error("unset series");
  return std::all_of(c_.begin(), c_.end(), [](const FieldElement& x) { return x.is_zero(); });
}

bool Series::is_unit() const {
  if (!spec_) throw Error("unset series");
  if (!exact_ && prec_ == 0) throw PrecisionExhausted("cannot certify unit at precision 0");
  return !residue().is_zero();
}

void Series::check_compatible(const Series& o) const {
  if (!spec_ || !o.spec_) throw Error("unset series");
  if (spec_.get() != o.spec_.get() && !spec_->same_arithmetic(*o.spec_))
    throw Error("series arithmetic across incompatible field specs");
}

Series Series::operator+(const Series& o) const {
  check_compatible(o);
  bool exact = exact_ && o.exact_;
  int64_t prec = std::min(precision(), o.precision());
  size_t n = exact ? std::max(c_.size(), o.c_.size()) : (size_t)prec;
  std::vector<FieldElement> r(n, FieldElement::zero(spec_));
  for (size_t i = 0; i < n; ++i) {
    FieldElement a = (i < c_.size()) ? c_[i] : FieldElement::zero(spec_);
    FieldElement b = (i < o.c_.size()) ? o.c_[i] : FieldElement::zero(spec_);
    r[i] = a + b;
  }
  return Series(spec_, std::move(r), exact, exact ? 0 : prec);
}

Series Series::operator-(const Series& o) const {
  return *this + (-o);
}

Series Series::operator-() const {
  if (!spec_) throw Error("unset series");
  std::vector<FieldElement> r = c_;
  for (auto& x : r) x = -x;
  return Series(spec_, std::move(r), exact_, prec_);
}

Series Series::operator*(const Series& o) const {
  check_compatible(o);
  bool exact = exact_ && o.exact_;
  if (exact) {
    if (c_.empty() || o.c_.empty()) return exact_zero(spec_);
    std::vector<FieldElement> r(c_.size() + o.c_.size() - 1, FieldElement::zero(spec_));
    for (size_t i = 0; i < c_.size(); ++i) {
      if (c_[i].is_zero()) continue;
      for (size_t j = 0; j < o.c_.size(); ++j) r[i + j] = r[i + j] + c_[i] * o.c_[j];
    }
    return Series(spec_, std::move(r), true, 0);
  }
  int64_t prec = std::min(precision(), o.precision());
  std::vector<FieldElement> r((size_t)prec, FieldElement::zero(spec_));
  size_t na = std::min(c_.size(), (size_t)prec), nb = std::min(o.c_.size(), (size_t)prec);
  for (size_t i = 0; i < na; ++i) {
    if (c_[i].is_zero()) continue;
    for (size_t j = 0; j < nb && i + j < (size_t)prec; ++j)
      r[i + j] = r[i + j] + c_[i] * o.c_[j];
  }
  return Series(spec_, std::move(r), false, prec);
}

Series Series::scaled(const FieldElement& c) const {
  if (!spec_) throw Error("unset series");
  std::vector<FieldElement> r = c_;
  for (auto& x : r) x = x * c;
  return Series(spec_, std::move(r), exact_, prec_);
}

Series Series::t_shift(int64_t e) const {
  if (!spec_) throw Error("unset series");
  if (e == 0) return *this;
  if (e > 0) {
    std::vector<FieldElement> r((size_t)e, FieldElement::zero(spec_));
    r.insert(r.end(), c_.begin(), c_.end());
    return Series(spec_, std::move(r), exact_, exact_ ? 0 : prec_ + e);
  }
  int64_t drop = -e;
  for (int64_t i = 0; i < drop; ++i) {
    if ((size_t)i < c_.size()) {
      if (!c_[(size_t)i].is_zero())
        throw NotDivisible("t_shift: nonzero coefficient below the requested shift");
    } else if (!exact_) {
      throw PrecisionExhausted("t_shift: divisibility not certifiable at this precision");
    }
  }
  if (!exact_ && prec_ < drop)
    throw PrecisionExhausted("t_shift: divisibility not certifiable at this precision");
  std::vector<FieldElement> r;
  if ((size_t)drop < c_.size()) r.assign(c_.begin() + (size_t)drop, c_.end());
  return Series(spec_, std::move(r), exact_, exact_ ? 0 : prec_ - drop);
}

Series Series::base_change(uint32_t e) const {
  if (!spec_) throw Error("unset series");
  if (e == 0) throw Error("base_change degree must be >= 1");
  if (e == 1) return *this;
  std::vector<FieldElement> r;
  if (!c_.empty()) {
    r.assign((c_.size() - 1) * e + 1, FieldElement::zero(spec_));
    for (size_t i = 0; i < c_.size(); ++i) r[i * e] = c_[i];
  }
  return Series(spec_, std::move(r), exact_, exact_ ? 0 : prec_ * e);
}

Series Series::inverse(int64_t target_prec) const {
  if (!spec_) throw Error("unset series");
  if (!is_unit()) throw NotUnit("series inverse needs a unit (nonzero residue)");
  if (exact_ && c_.size() == 1) return constant(c_[0].inverse());
  int64_t prec = std::min(target_prec, precision());
  if (prec <= 0) throw PrecisionExhausted("inverse requested at nonpositive precision");
  FieldElement a0inv = c_[0].inverse();
  std::vector<FieldElement> b((size_t)prec, FieldElement::zero(spec_));
  b[0] = a0inv;
  for (int64_t k = 1; k < prec; ++k) {
    FieldElement acc = FieldElement::zero(spec_);
    for (int64_t i = 1; i <= k; ++i) {
      FieldElement ai = ((size_t)i < c_.size()) ? c_[(size_t)i] : FieldElement::zero(spec_);
      if (!ai.is_zero()) acc = acc + ai * b[(size_t)(k - i)];
    }
    b[(size_t)k] = -(a0inv * acc);
  }
  return Series(spec_, std::move(b), false, prec);
}

Series Series::truncated_to(int64_t prec) const {
  if (!spec_) throw Error("unset series");
  if (prec < 0) throw Error("negative precision");
  if (!exact_ && prec >= prec_) return *this;
  std::vector<FieldElement> r = c_;
  r.resize((size_t)prec, FieldElement::zero(spec_));
  return Series(spec_, std::move(r), false, prec);
}

FieldElement Series::evaluate(const FieldElement& x) const {
  if (!spec_) throw Error("unset series");
  if (!exact_) throw PrecisionExhausted("evaluation needs an exact polynomial");
  FieldElement acc = FieldElement::zero(spec_);
  for (size_t i = c_.size(); i-- > 0;) acc = acc * x + c_[i];
  return acc;
}

bool Series::agrees_with(const Series& o) const {
  check_compatible(o);
  int64_t upto = std::min(precision(), o.precision());
  if (upto >= kInfinitePrecision) upto = (int64_t)std::max(c_.size(), o.c_.size());
  for (int64_t i = 0; i < upto; ++i)
    if (coeff(i) != o.coeff(i)) return false;
  return true;
}

bool Series::certified_equal(const Series& o) const {
  check_compatible(o);
  if (!exact_ || !o.exact_) return false;
  if (c_.size() != o.c_.size()) return false;
  for (size_t i = 0; i < c_.size(); ++i)
    if (c_[i] != o.c_[i]) return false;
  return true;
}

std::string Series::describe() const {
  if (!spec_) return "<unset>";
  std::ostringstream os;
  bool any = false;
  for (size_t i = 0; i < c_.size(); ++i) {
    if (c_[i].is_zero()) continue;
    if (any) os << " + ";
    any = true;
    os << c_[i].describe();
    if (i == 1) os << "*t";
    if (i > 1) os << "*t^" << i;
  }
  if (!any) os << "0";
  if (!exact_) os << " + O(t^" << prec_ << ")";
  return os.str();
}

Series divide(const Series& num, const Series& den, int64_t target_prec) {
  Valuation dv = den.valuation();
  if (dv.is_infinite()) throw NotUnit("division by exact zero series");
  int64_t v = dv.finite_value();  // throws PrecisionExhausted if uncertified
  Series unit = den.t_shift(-v);
  Series shifted = num.t_shift(-v);  // may throw NotDivisible: quotient not integral
  return shifted * unit.inverse(target_prec);
}

}  // namespace ssm
