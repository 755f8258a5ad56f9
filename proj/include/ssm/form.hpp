#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ssm/series.hpp"

namespace ssm {

// ---------------------------------------------------------------------------
// Monomials under the global order: graded lexicographic with X_0 > ... > X_n.

class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::vector<uint32_t> e) : e_(std::move(e)) {}
  static Monomial constant(size_t nvars) { return Monomial(std::vector<uint32_t>(nvars, 0)); }
  static Monomial power(size_t nvars, size_t i, uint32_t d) {
    std::vector<uint32_t> e(nvars, 0);
    e[i] = d;
    return Monomial(std::move(e));
  }

  size_t nvars() const { return e_.size(); }
  uint32_t operator[](size_t i) const { return e_[i]; }
  const std::vector<uint32_t>& exps() const { return e_; }
  uint32_t total_degree() const {
    uint32_t d = 0;
    for (auto x : e_) d += x;
    return d;
  }
  Monomial operator*(const Monomial& o) const {
    std::vector<uint32_t> r(e_.size());
    for (size_t i = 0; i < e_.size(); ++i) r[i] = e_[i] + o.e_[i];
    return Monomial(std::move(r));
  }
  // True when *this precedes o: higher total degree first, then
  // lexicographically larger exponent vector (X_0 weighted heaviest).
  bool before(const Monomial& o) const {
    uint32_t da = total_degree(), db = o.total_degree();
    if (da != db) return da > db;
    return e_ > o.e_;
  }
  bool operator==(const Monomial& o) const { return e_ == o.e_; }
  bool operator!=(const Monomial& o) const { return e_ != o.e_; }

  std::string describe() const {
    std::ostringstream os;
    bool any = false;
    for (size_t i = 0; i < e_.size(); ++i) {
      if (e_[i] == 0) continue;
      any = true;
      os << "X" << i;
      if (e_[i] > 1) os << "^" << e_[i];
    }
    if (!any) os << "1";
    return os.str();
  }

 private:
  std::vector<uint32_t> e_;
};

struct MonomialOrder {
  bool operator()(const Monomial& a, const Monomial& b) const { return a.before(b); }
};

// ---------------------------------------------------------------------------
// Coefficient shims shared by field- and series-valued forms.

template <class C>
struct CoefOps;

template <>
struct CoefOps<FieldElement> {
  static FieldElement zero(const FieldSpecPtr& s) { return FieldElement::zero(s); }
  static FieldElement one(const FieldSpecPtr& s) { return FieldElement::one(s); }
  static bool drop(const FieldElement& c) { return c.is_zero(); }
};

template <>
struct CoefOps<Series> {
  static Series zero(const FieldSpecPtr& s) { return Series::exact_zero(s); }
  static Series one(const FieldSpecPtr& s) { return Series::one(s); }
  // Keep inexact zero windows: they carry precision information.
  static bool drop(const Series& c) { return c.is_certified_zero(); }
};

// ---------------------------------------------------------------------------
// Homogeneous form in nvars variables with coefficients in C.

template <class C>
class Form {
 public:
  using Terms = std::map<Monomial, C, MonomialOrder>;

  Form() = default;
  Form(FieldSpecPtr spec, size_t nvars, uint32_t degree)
      : spec_(std::move(spec)), nvars_(nvars), degree_(degree) {}

  static Form zero(const FieldSpecPtr& spec, size_t nvars, uint32_t degree) {
    return Form(spec, nvars, degree);
  }

  bool valid() const { return spec_ != nullptr; }
  const FieldSpecPtr& spec() const { return spec_; }
  size_t nvars() const { return nvars_; }
  uint32_t degree() const { return degree_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  void add_term(const Monomial& m, const C& c) {
    if (m.nvars() != nvars_ || m.total_degree() != degree_)
      throw Error("term does not match form shape");
    auto it = terms_.find(m);
    if (it == terms_.end()) {
      if (!CoefOps<C>::drop(c)) terms_.emplace(m, c);
    } else {
      it->second = it->second + c;
      if (CoefOps<C>::drop(it->second)) terms_.erase(it);
    }
  }

  void set_term(const Monomial& m, const C& c) {
    if (m.nvars() != nvars_ || m.total_degree() != degree_)
      throw Error("term does not match form shape");
    terms_.erase(m);
    if (!CoefOps<C>::drop(c)) terms_.emplace(m, c);
  }

  C coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    if (it != terms_.end()) return it->second;
    return CoefOps<C>::zero(spec_);
  }

  Form operator+(const Form& o) const {
    require_same_shape(o);
    Form r = *this;
    for (const auto& [m, c] : o.terms_) r.add_term(m, c);
    return r;
  }

  Form operator-(const Form& o) const { return *this + o.negated(); }

  Form negated() const {
    Form r(spec_, nvars_, degree_);
    for (const auto& [m, c] : terms_) r.terms_.emplace(m, -c);
    return r;
  }

  Form scaled(const C& c) const {
    Form r(spec_, nvars_, degree_);
    for (const auto& [m, co] : terms_) {
      C v = co * c;
      if (!CoefOps<C>::drop(v)) r.terms_.emplace(m, v);
    }
    return r;
  }

  Form operator*(const Form& o) const {
    if (nvars_ != o.nvars_) throw Error("form product across variable counts");
    Form r(spec_, nvars_, degree_ + o.degree_);
    for (const auto& [ma, ca] : terms_)
      for (const auto& [mb, cb] : o.terms_) r.add_term(ma * mb, ca * cb);
    return r;
  }

  // Substitute X_i := images[i]; all images are forms of a common degree in a
  // common variable set.  Degree-1 images give linear coordinate changes,
  // binary images give curve composition.
  Form substituted(const std::vector<Form>& images) const {
    if (images.size() != nvars_) throw Error("substitution needs one image per variable");
    size_t out_vars = images.empty() ? 0 : images[0].nvars();
    uint32_t img_deg = images.empty() ? 1 : images[0].degree();
    for (const auto& f : images)
      if (f.nvars() != out_vars || f.degree() != img_deg)
        throw Error("substitution images must share shape");
    Form r(spec_, out_vars, degree_ * img_deg);
    // cache powers of each image
    std::vector<std::vector<Form>> pows(nvars_);
    for (size_t i = 0; i < nvars_; ++i)
      pows[i].push_back(constant_one(spec_, out_vars));  // degree 0 placeholder
    for (const auto& [m, c] : terms_) {
      Form acc = constant_one(spec_, out_vars);
      for (size_t i = 0; i < nvars_; ++i) {
        while (pows[i].size() <= m[i]) pows[i].push_back(pows[i].back() * images[i]);
        if (m[i] > 0) acc = acc * pows[i][m[i]];
      }
      // acc has degree img_deg * deg(m); pad into r
      for (const auto& [mm, cc] : acc.terms_) r.add_term(mm, cc * c);
    }
    return r;
  }

  Form derivative(size_t i) const {
    if (degree_ == 0) throw Error("derivative of a constant form");
    Form r(spec_, nvars_, degree_ - 1);
    for (const auto& [m, c] : terms_) {
      uint32_t e = m[i];
      if (e == 0) continue;
      std::vector<uint32_t> ex = m.exps();
      ex[i] -= 1;
      C v = c * scalar_from_int(e);
      if (!CoefOps<C>::drop(v)) r.add_term(Monomial(std::move(ex)), v);
    }
    return r;
  }

  C evaluate(const std::vector<C>& point) const {
    if (point.size() != nvars_) throw Error("evaluation point has wrong arity");
    C acc = CoefOps<C>::zero(spec_);
    for (const auto& [m, c] : terms_) {
      C term = c;
      for (size_t i = 0; i < nvars_; ++i)
        for (uint32_t e = 0; e < m[i]; ++e) term = term * point[i];
      acc = acc + term;
    }
    return acc;
  }

  // Restrict to the subset of variables `keep` (others set to zero).
  Form restricted(const std::vector<size_t>& keep) const {
    Form r(spec_, keep.size(), degree_);
    for (const auto& [m, c] : terms_) {
      bool outside = false;
      for (size_t i = 0; i < nvars_ && !outside; ++i) {
        if (m[i] == 0) continue;
        bool kept = false;
        for (size_t k : keep)
          if (k == i) kept = true;
        if (!kept) outside = true;
      }
      if (outside) continue;
      std::vector<uint32_t> e(keep.size());
      for (size_t j = 0; j < keep.size(); ++j) e[j] = m[keep[j]];
      r.add_term(Monomial(std::move(e)), c);
    }
    return r;
  }

  // Variables that actually occur.
  std::vector<size_t> support_variables() const {
    std::vector<bool> used(nvars_, false);
    for (const auto& [m, c] : terms_) {
      (void)c;
      for (size_t i = 0; i < nvars_; ++i)
        if (m[i] > 0) used[i] = true;
    }
    std::vector<size_t> r;
    for (size_t i = 0; i < nvars_; ++i)
      if (used[i]) r.push_back(i);
    return r;
  }

  std::string describe() const {
    std::ostringstream os;
    bool any = false;
    for (const auto& [m, c] : terms_) {
      if (any) os << " + ";
      any = true;
      os << "(" << c.describe() << ")*" << m.describe();
    }
    if (!any) os << "0";
    return os.str();
  }

 private:
  static Form constant_one(const FieldSpecPtr& spec, size_t nvars) {
    Form r(spec, nvars, 0);
    r.terms_.emplace(Monomial::constant(nvars), CoefOps<C>::one(spec));
    return r;
  }
  C scalar_from_int(int64_t v) const;
  void require_same_shape(const Form& o) const {
    if (nvars_ != o.nvars_ || degree_ != o.degree_)
      throw Error("form arithmetic across shapes");
  }

  FieldSpecPtr spec_;
  size_t nvars_ = 0;
  uint32_t degree_ = 0;
  Terms terms_;
};

template <>
inline FieldElement Form<FieldElement>::scalar_from_int(int64_t v) const {
  return FieldElement::from_int(spec_, v);
}

template <>
inline Series Form<Series>::scalar_from_int(int64_t v) const {
  return Series::constant(FieldElement::from_int(spec_, v));
}

using FieldForm = Form<FieldElement>;
using HomogForm = Form<Series>;

// ---------------------------------------------------------------------------
// Conversions

// Form over F_q -> form over F_q[[t]] with exact constant coefficients.
HomogForm lift_to_series(const FieldForm& f);
// Residues of all coefficients (throws PrecisionExhausted when unknown).
FieldForm residue_form(const HomogForm& f);
// Re-interpret coefficients inside an extension (along recorded tower edges).
FieldForm embed_form(const FieldSpecPtr& ext, const FieldForm& f);
// Apply frobenius power to every coefficient.
FieldForm frobenius_form(const FieldForm& f, int64_t power);

// ---------------------------------------------------------------------------
// Matrices and determinants (division-free, usable over any coefficient ring)

template <class C>
using Mat = std::vector<std::vector<C>>;

// Determinant by dynamic programming over column subsets (no division).
template <class C>
C det(const Mat<C>& a, const FieldSpecPtr& spec) {
  size_t n = a.size();
  if (n == 0) throw Error("determinant of empty matrix");
  for (const auto& row : a)
    if (row.size() != n) throw Error("determinant needs a square matrix");
  if (n > 16) throw BudgetExceeded("determinant dimension too large");
  std::vector<C> dp((size_t)1 << n, CoefOps<C>::zero(spec));
  dp[0] = CoefOps<C>::one(spec);
  for (uint32_t mask = 0; mask < ((uint32_t)1 << n); ++mask) {
    uint32_t row = (uint32_t)__builtin_popcount(mask);
    if (row >= n) continue;
    if (CoefOps<C>::drop(dp[mask])) continue;  // certified zero contributes nothing
    uint32_t below = 0;  // set bits of mask below column j
    for (uint32_t j = 0; j < n; ++j) {
      if (mask & (1u << j)) {
        ++below;
        continue;
      }
      // new inversions = columns already used that exceed j
      C contrib = dp[mask] * a[row][j];
      if ((row - below) % 2 == 1) contrib = -contrib;
      dp[mask | (1u << j)] = dp[mask | (1u << j)] + contrib;
    }
  }
  return dp[((size_t)1 << n) - 1];
}

// Inverse of a field-valued matrix (Gauss-Jordan); throws NotUnit if singular.
Mat<FieldElement> mat_inverse(const Mat<FieldElement>& a, const FieldSpecPtr& spec);
// Rank over a field.
size_t mat_rank(Mat<FieldElement> a);
// Kernel basis (column vectors x with a x = 0) over a field.
std::vector<std::vector<FieldElement>> mat_kernel(Mat<FieldElement> a, const FieldSpecPtr& spec);

// ---------------------------------------------------------------------------
// Linear coordinate changes over the series ring.

struct LinearChange {
  // X_i = sum_j m[i][j] Y_j  (substitution matrix applied to the old
  // variables; columns index the new variables).
  Mat<Series> m;

  static LinearChange identity(const FieldSpecPtr& spec, size_t n);
  static LinearChange from_field_matrix(const Mat<FieldElement>& a);
  size_t dim() const { return m.size(); }
  Series determinant(const FieldSpecPtr& spec) const;
  // det is a unit of the series ring
  bool is_unimodular(const FieldSpecPtr& spec) const;
  LinearChange compose(const LinearChange& then, const FieldSpecPtr& spec) const;
};

HomogForm apply_linear(const HomogForm& f, const LinearChange& a);
FieldForm apply_linear_field(const FieldForm& f, const Mat<FieldElement>& a);

// F(t^{w_0} X_0, ..., t^{w_n} X_n): each coefficient shifts by <I, W>.
HomogForm weighted_scale(const HomogForm& f, const std::vector<int64_t>& w);
// Apply t -> s^e to every coefficient.
HomogForm base_change_form(const HomogForm& f, uint32_t e);
// t_shift every coefficient (normalization by powers of t).
HomogForm t_shift_form(const HomogForm& f, int64_t e);

// ---------------------------------------------------------------------------
// Wedge table of a pencil: F_S wedge G_S = sum a_IJ X_I wedge X_J over
// ordered monomial pairs I before J; a_IJ = F_I G_J - F_J G_I.

struct WedgeKey {
  Monomial i, j;
  bool operator<(const WedgeKey& o) const {
    MonomialOrder lt;
    if (i != o.i) return lt(i, o.i);
    if (j != o.j) return lt(j, o.j);
    return false;
  }
};

std::map<WedgeKey, Series> pencil_wedge(const HomogForm& f, const HomogForm& g);

// ---------------------------------------------------------------------------
// Univariate utility layer over a field (dense little-endian vectors).

using UnivPoly = std::vector<FieldElement>;

UnivPoly univ_trim(UnivPoly a);
UnivPoly univ_mul(const UnivPoly& a, const UnivPoly& b, const FieldSpecPtr& spec);
std::pair<UnivPoly, UnivPoly> univ_divmod(UnivPoly a, const UnivPoly& b, const FieldSpecPtr& spec);
UnivPoly univ_gcd(UnivPoly a, UnivPoly b, const FieldSpecPtr& spec);

// Binary form (nvars == 2) <-> univariate: B(s,u) = sum c_i s^i u^{d-i} with
// P(x) = sum c_i x^i.
UnivPoly binary_to_univ(const FieldForm& b);
FieldForm univ_to_binary(const UnivPoly& p, const FieldSpecPtr& spec, uint32_t degree);
// gcd of binary forms (monic-normalized leading coefficient), tracking s/u
// content exactly.
FieldForm binary_gcd(const FieldForm& a, const FieldForm& b);

// ---------------------------------------------------------------------------
// Maps P^1 -> P^n given by binary forms of a common degree.

struct BinaryCurveMap {
  std::vector<FieldForm> components;  // n+1 binary forms, common degree
  uint32_t degree() const { return components.empty() ? 0 : components[0].degree(); }
  // no common binary-form factor across components
  bool is_primitive() const;
  std::vector<FieldElement> evaluate(const FieldElement& s, const FieldElement& u) const;
};

// F composed with the map: a binary form of degree deg(F) * deg(L).
FieldForm compose_line(const FieldForm& f, const BinaryCurveMap& line);

// ---------------------------------------------------------------------------
// Scheme handle: equation list bundling forms, their partials, and (for a
// pair) the 2x2 Jacobian minors; membership = all equations vanish.

struct SchemeHandle {
  FieldSpecPtr spec;
  size_t nvars = 0;
  std::vector<FieldForm> equations;
  std::string describe() const;
};

SchemeHandle jacobian_scheme(const std::vector<FieldForm>& eqs);
// Just the equations themselves (the subscheme they cut out).
SchemeHandle scheme_of(const std::vector<FieldForm>& eqs);

}  // namespace ssm
