#include "ssm/witness.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "ssm/errors.hpp"

namespace ssm {
namespace {

// ---------------------------------------------------------------------------
// Small shared helpers.

Monomial um(size_t nv, size_t i) { return Monomial::power(nv, i, 1); }

void require_odd_char(const FieldSpecPtr& spec, const char* what) {
  if (spec->p() == 2) throw UnsupportedCase(std::string(what) + ": characteristic two unsupported");
}

Mat<FieldElement> zero_mat(size_t r, size_t c, const FieldSpecPtr& spec) {
  return Mat<FieldElement>(r, std::vector<FieldElement>(c, FieldElement::zero(spec)));
}

Mat<FieldElement> mat_mul(const Mat<FieldElement>& a, const Mat<FieldElement>& b,
                          const FieldSpecPtr& spec) {
  size_t r = a.size(), m = b.size(), c = b.empty() ? 0 : b[0].size();
  Mat<FieldElement> out = zero_mat(r, c, spec);
  for (size_t i = 0; i < r; ++i)
    for (size_t k = 0; k < m; ++k)
      for (size_t j = 0; j < c; ++j) out[i][j] = out[i][j] + a[i][k] * b[k][j];
  return out;
}

// result_i = sum_j m[i][j] v_j
std::vector<FieldElement> mat_apply(const Mat<FieldElement>& m, const std::vector<FieldElement>& v,
                                    const FieldSpecPtr& spec) {
  std::vector<FieldElement> r(m.size(), FieldElement::zero(spec));
  for (size_t i = 0; i < m.size(); ++i)
    for (size_t j = 0; j < v.size(); ++j) r[i] = r[i] + m[i][j] * v[j];
  return r;
}

// Same with binary forms in the slot of the vector entries.
std::vector<FieldForm> mat_apply_forms(const Mat<FieldElement>& m, const std::vector<FieldForm>& v,
                                       const FieldSpecPtr& spec) {
  std::vector<FieldForm> r;
  for (size_t i = 0; i < m.size(); ++i) {
    FieldForm acc = FieldForm::zero(spec, v[0].nvars(), v[0].degree());
    for (size_t j = 0; j < v.size(); ++j) acc = acc + v[j].scaled(m[i][j]);
    r.push_back(acc);
  }
  return r;
}

// Substitution matrix placing z at [1,0,...,0]: column 0 holds z, the other
// columns are the unit vectors skipping z's pivot coordinate.
Mat<FieldElement> translation_to(const ProjPoint& z) {
  ProjPoint zc = z.canonical();
  size_t nv = zc.nvars();
  const FieldSpecPtr& spec = zc.field;
  size_t pivot = 0;
  while (pivot < nv && zc.coords[pivot].is_zero()) ++pivot;
  Mat<FieldElement> t = zero_mat(nv, nv, spec);
  for (size_t i = 0; i < nv; ++i) t[i][0] = zc.coords[i];
  size_t col = 1;
  for (size_t i = 0; i < nv; ++i) {
    if (i == pivot) continue;
    t[i][col++] = FieldElement::one(spec);
  }
  return t;
}

// g(X_0,...,X_{n}) = sum_k X_0^{d-k} P_k(X_1..X_n); returns P_0..P_d, with
// P_k of degree k in the tail variables.
std::vector<FieldForm> graded_pieces(const FieldForm& g) {
  size_t nv = g.nvars();
  uint32_t d = g.degree();
  std::vector<FieldForm> pieces;
  for (uint32_t k = 0; k <= d; ++k) pieces.push_back(FieldForm::zero(g.spec(), nv - 1, k));
  for (const auto& [m, c] : g.terms()) {
    uint32_t k = d - m[0];
    std::vector<uint32_t> e(m.exps().begin() + 1, m.exps().end());
    pieces[k].add_term(Monomial(std::move(e)), c);
  }
  return pieces;
}

// Reduced echelon basis of the row span.
std::vector<std::vector<FieldElement>> row_basis(std::vector<std::vector<FieldElement>> rows) {
  size_t nc = rows.empty() ? 0 : rows[0].size();
  std::vector<std::vector<FieldElement>> basis;
  std::vector<size_t> pivots;
  for (auto& row : rows) {
    for (size_t b = 0; b < basis.size(); ++b) {
      FieldElement c = row[pivots[b]];
      if (c.is_zero()) continue;
      for (size_t j = 0; j < nc; ++j) row[j] = row[j] - c * basis[b][j];
    }
    size_t p = 0;
    while (p < nc && row[p].is_zero()) ++p;
    if (p == nc) continue;
    FieldElement inv = row[p].inverse();
    for (size_t j = 0; j < nc; ++j) row[j] = row[j] * inv;
    for (size_t b = 0; b < basis.size(); ++b) {
      FieldElement c = basis[b][p];
      if (c.is_zero()) continue;
      for (size_t j = 0; j < nc; ++j) basis[b][j] = basis[b][j] - c * row[j];
    }
    basis.push_back(row);
    pivots.push_back(p);
  }
  // order rows by pivot position
  std::vector<size_t> order(basis.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return pivots[a] < pivots[b]; });
  std::vector<std::vector<FieldElement>> out;
  for (size_t i : order) out.push_back(basis[i]);
  return out;
}

// f restricted to the span of the basis vectors: the ambient variable X_i is
// replaced by sum_j basis[j][i] V_j.
FieldForm restrict_to_span(const FieldForm& f,
                           const std::vector<std::vector<FieldElement>>& basis) {
  const FieldSpecPtr& spec = f.spec();
  size_t k = basis.size();
  std::vector<FieldForm> images;
  for (size_t i = 0; i < f.nvars(); ++i) {
    FieldForm ell = FieldForm::zero(spec, k, 1);
    for (size_t j = 0; j < k; ++j)
      if (!basis[j][i].is_zero()) ell.add_term(um(k, j), basis[j][i]);
    images.push_back(ell);
  }
  return f.substituted(images);
}

bool coords_less(const std::vector<FieldElement>& a, const std::vector<FieldElement>& b) {
  for (size_t i = 0; i < a.size(); ++i) {
    uint64_t ia = a[i].index(), ib = b[i].index();
    if (ia != ib) return ia < ib;
  }
  return false;
}

uint64_t pow_capped(uint64_t q, size_t e, uint64_t cap) {
  uint64_t r = 1;
  for (size_t i = 0; i < e; ++i) {
    if (r > cap / q) return cap + 1;
    r *= q;
  }
  return r;
}

constexpr uint64_t kScanCap = 80000000;

// Canonical projective enumeration: charts by position of the leading one
// (earlier coordinates zero), the digit just after the lead varying fastest.
// fn(digits, lead) returns true to stop; digits are element indices.
template <class Fn>
void projective_scan(uint64_t q, size_t nv, Fn&& fn) {
  if (pow_capped(q, nv - 1, kScanCap) > kScanCap)
    throw BudgetExceeded("projective scan larger than the enumeration budget");
  std::vector<uint64_t> digits(nv, 0);
  for (size_t lead = 0; lead < nv; ++lead) {
    std::fill(digits.begin(), digits.end(), 0);
    digits[lead] = 1;
    uint64_t total = 1;
    for (size_t i = lead + 1; i < nv; ++i) total *= q;
    for (uint64_t cc = 0; cc < total; ++cc) {
      uint64_t c = cc;
      for (size_t j = lead + 1; j < nv; ++j) {
        digits[j] = c % q;
        c /= q;
      }
      if (fn(digits, lead)) return;
    }
  }
}

std::vector<FieldElement> digits_to_elements(const FieldSpecPtr& spec,
                                             const std::vector<uint64_t>& digits) {
  std::vector<FieldElement> v;
  for (uint64_t d : digits) v.push_back(FieldElement::from_index(spec, d));
  return v;
}

// ---------------------------------------------------------------------------
// Table-driven evaluation for enumeration loops.

struct FlatForm {
  std::shared_ptr<const FlatField> ff;
  std::vector<std::pair<uint16_t, std::vector<uint16_t>>> terms;  // coeff index, exponents

  static FlatForm of(const FieldForm& f, std::shared_ptr<const FlatField> tables) {
    FlatForm r;
    r.ff = std::move(tables);
    for (const auto& [m, c] : f.terms()) {
      std::vector<uint16_t> e(m.exps().begin(), m.exps().end());
      r.terms.emplace_back(static_cast<uint16_t>(c.index()), std::move(e));
    }
    return r;
  }

  uint16_t eval(const std::vector<uint64_t>& pt) const {
    uint16_t acc = 0;
    for (const auto& [c, e] : terms) {
      uint16_t t = c;
      for (size_t i = 0; i < e.size(); ++i)
        for (uint16_t k = 0; k < e[i]; ++k) t = ff->mul(t, static_cast<uint16_t>(pt[i]));
      acc = ff->add(acc, t);
    }
    return acc;
  }
};

// ---------------------------------------------------------------------------
// Univariate extras on top of the dense polynomial layer.

UnivPoly univ_add(const UnivPoly& a, const UnivPoly& b, const FieldSpecPtr& spec) {
  UnivPoly r(std::max(a.size(), b.size()), FieldElement::zero(spec));
  for (size_t i = 0; i < a.size(); ++i) r[i] = r[i] + a[i];
  for (size_t i = 0; i < b.size(); ++i) r[i] = r[i] + b[i];
  return univ_trim(std::move(r));
}

UnivPoly univ_neg(UnivPoly a) {
  for (auto& c : a) c = -c;
  return a;
}

UnivPoly univ_embed(const UnivPoly& p, const FieldSpecPtr& ext) {
  UnivPoly r;
  for (const auto& c : p) r.push_back(embed_in_extension(ext, c));
  return r;
}

FieldElement univ_eval(const UnivPoly& p, const FieldElement& x) {
  FieldElement acc = FieldElement::zero(x.spec());
  for (size_t i = p.size(); i-- > 0;) acc = acc * x + p[i];
  return acc;
}

// Determinant by cofactor expansion (tiny matrices of polynomials).
UnivPoly poly_det(const std::vector<std::vector<UnivPoly>>& m, const FieldSpecPtr& spec) {
  size_t n = m.size();
  if (n == 1) return m[0][0];
  UnivPoly acc;
  for (size_t j = 0; j < n; ++j) {
    if (m[0][j].empty()) continue;
    std::vector<std::vector<UnivPoly>> minor;
    for (size_t i = 1; i < n; ++i) {
      std::vector<UnivPoly> row;
      for (size_t k = 0; k < n; ++k)
        if (k != j) row.push_back(m[i][k]);
      minor.push_back(std::move(row));
    }
    UnivPoly term = univ_mul(m[0][j], poly_det(minor, spec), spec);
    if (j % 2) term = univ_neg(std::move(term));
    acc = univ_add(acc, term, spec);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Binary-form helpers.

// Root (s : u) of a nonzero linear binary form A*s + B*u.
std::pair<FieldElement, FieldElement> binary_linear_root(const FieldForm& ell) {
  const FieldSpecPtr& spec = ell.spec();
  FieldElement a = ell.coefficient(um(2, 0)), b = ell.coefficient(um(2, 1));
  if (a.is_zero() && b.is_zero()) throw Error("root of the zero linear form");
  if (a.is_zero()) return {FieldElement::one(spec), FieldElement::zero(spec)};
  return {-b, a};
}

// Exact division of binary forms; verified by multiplying back.
FieldForm binary_divide_exact(const FieldForm& f, const FieldForm& g) {
  const FieldSpecPtr& spec = f.spec();
  if (g.is_zero()) throw NotDivisible("binary division by zero");
  if (f.degree() < g.degree()) throw NotDivisible("binary division drops degree");
  auto [q, r] = univ_divmod(binary_to_univ(f), binary_to_univ(g), spec);
  if (!univ_trim(r).empty()) throw NotDivisible("binary division leaves a remainder");
  FieldForm h = univ_to_binary(q, spec, f.degree() - g.degree());
  if (!(g * h - f).is_zero()) throw NotDivisible("binary division mismatch in the torus content");
  return h;
}

// ---------------------------------------------------------------------------
// Intersection cycle of two plane conics without a common component: a random
// coordinate change puts the intersection in one affine chart with separated
// fibers, the resultant of the dehomogenized equations is an exact quartic,
// and its roots over the extensions of degree <= 4 carry the cycle.

struct BiconicOrbit {
  int degree = 1;
  int multiplicity = 1;
  ProjPoint rep;
};

struct BiconicCycle {
  std::vector<BiconicOrbit> orbits;
  int64_t total = 0;
  std::vector<std::string> notes;
};

// Throws NotCompleteIntersection when the conics share a component.
void check_no_common_component(const FieldForm& c1, const FieldForm& c2) {
  if (proportional_forms(c1, c2))
    throw NotCompleteIntersection("the two conics are proportional");
  for (int round = 0; round < 2; ++round) {
    const FieldForm& a = round == 0 ? c1 : c2;
    const FieldForm& b = round == 0 ? c2 : c1;
    if (mat_rank(gram_matrix(a)) > 2) continue;
    for (const FieldForm& ell : split_rank2_quadric(a)) {
      FieldForm be = embed_form(ell.spec(), b);
      if (divide_by_linear(be, ell))
        throw NotCompleteIntersection("the two conics share a line");
    }
  }
}

BiconicCycle biconic_cycle(const FieldForm& c1, const FieldForm& c2, std::mt19937_64& rng) {
  const FieldSpecPtr& spec = c1.spec();
  check_no_common_component(c1, c2);
  uint64_t q = spec->order();
  if (pow_capped(q, 4, kScanCap) > kScanCap)
    throw BudgetExceeded("conic intersection cycle over a field too large to enumerate");

  for (int attempt = 0; attempt < kGenericityRetries; ++attempt) {
    // random invertible change of the three coordinates
    Mat<FieldElement> m = zero_mat(3, 3, spec);
    for (int draws = 0; draws < 1000; ++draws) {
      for (auto& row : m)
        for (auto& e : row) e = FieldElement::from_index(spec, rng() % q);
      if (mat_rank(m) == 3) break;
    }
    if (mat_rank(m) != 3) throw GenericityExhausted("no invertible coordinate change drawn");
    FieldForm d1 = apply_linear_field(c1, m), d2 = apply_linear_field(c2, m);
    if (d1.coefficient(Monomial::power(3, 2, 2)).is_zero()) continue;
    if (d2.coefficient(Monomial::power(3, 2, 2)).is_zero()) continue;

    // dehomogenize at X_1 = 1 with x = X_0: d = A(x) z^2 + B(x) z + C(x)
    auto decompose = [&](const FieldForm& d) {
      UnivPoly A{d.coefficient(Monomial::power(3, 2, 2))};
      UnivPoly B{d.coefficient(Monomial({0, 1, 1})), d.coefficient(Monomial({1, 0, 1}))};
      UnivPoly C{d.coefficient(Monomial({0, 2, 0})), d.coefficient(Monomial({1, 1, 0})),
                 d.coefficient(Monomial({2, 0, 0}))};
      return std::array<UnivPoly, 3>{univ_trim(std::move(A)), univ_trim(std::move(B)),
                                     univ_trim(std::move(C))};
    };
    auto [A1, B1, C1] = decompose(d1);
    auto [A2, B2, C2] = decompose(d2);
    UnivPoly zero;
    std::vector<std::vector<UnivPoly>> syl = {{A1, B1, C1, zero},
                                              {zero, A1, B1, C1},
                                              {A2, B2, C2, zero},
                                              {zero, A2, B2, C2}};
    UnivPoly res = univ_trim(poly_det(syl, spec));
    if (res.size() != 5) continue;  // need an exact quartic: no point over X_1 = 0

    BiconicCycle cycle;
    cycle.notes.push_back("resultant of the dehomogenized conics is an exact quartic");
    bool ok = true;
    int64_t accounted = 0;
    for (int k = 1; k <= 4 && ok; ++k) {
      FieldSpecPtr extk = k == 1 ? spec : FieldSpec::make_extension(spec, k);
      UnivPoly rk = k == 1 ? res : univ_embed(res, extk);
      uint64_t qk = extk->order();
      for (uint64_t idx = 0; idx < qk && ok; ++idx) {
        FieldElement r = FieldElement::from_index(extk, idx);
        // exact degree k: fixed by no smaller Frobenius power
        bool minimal = true;
        for (int j = 1; j < k; ++j)
          if (k % j == 0 && frobenius(r, j) == r) minimal = false;
        if (!minimal) continue;
        if (!univ_eval(rk, r).is_zero()) continue;
        // canonical orbit representative: smallest index among conjugates
        bool least = true;
        for (int j = 1; j < k; ++j)
          if (frobenius(r, j).index() < idx) least = false;
        if (!least) continue;
        // multiplicity by repeated division by (x - r)
        UnivPoly lin{-r, FieldElement::one(extk)};
        UnivPoly rem = rk;
        int mult = 0;
        while (true) {
          auto [quo, rr] = univ_divmod(rem, lin, extk);
          if (!univ_trim(rr).empty()) break;
          rem = quo;
          ++mult;
        }
        // the fiber over the root must be a single z in the same field
        FieldForm e1 = embed_form(extk, d1), e2 = embed_form(extk, d2);
        std::vector<FieldElement> zs;
        for (uint64_t zi = 0; zi < qk; ++zi) {
          FieldElement z = FieldElement::from_index(extk, zi);
          std::vector<FieldElement> pt{r, FieldElement::one(extk), z};
          if (e1.evaluate(pt).is_zero() && e2.evaluate(pt).is_zero()) zs.push_back(z);
        }
        if (zs.size() != 1) {
          ok = false;  // fibers not separated; redraw coordinates
          break;
        }
        std::vector<FieldElement> chart_pt{r, FieldElement::one(extk), zs[0]};
        Mat<FieldElement> me = m;
        if (k > 1)
          for (auto& row : me)
            for (auto& e : row) e = embed_in_extension(extk, e);
        BiconicOrbit orbit;
        orbit.degree = k;
        orbit.multiplicity = mult;
        orbit.rep = ProjPoint::make(extk, mat_apply(me, chart_pt, extk));
        // reducedness cross-check: simple root iff transversal intersection
        Mat<FieldElement> jac = zero_mat(2, 3, extk);
        FieldForm ce1 = embed_form(extk, c1), ce2 = embed_form(extk, c2);
        for (size_t j = 0; j < 3; ++j) {
          jac[0][j] = ce1.derivative(j).evaluate(orbit.rep.coords);
          jac[1][j] = ce2.derivative(j).evaluate(orbit.rep.coords);
        }
        size_t jrank = mat_rank(jac);
        if ((mult == 1) != (jrank == 2))
          throw Error("intersection multiplicity disagrees with the Jacobian rank");
        std::ostringstream os;
        os << "closed point of degree " << k << " with multiplicity " << mult << " at "
           << orbit.rep.describe() << " (Jacobian rank " << jrank << ")";
        cycle.notes.push_back(os.str());
        accounted += int64_t(k) * mult;
        cycle.orbits.push_back(std::move(orbit));
      }
    }
    if (!ok) continue;
    if (accounted != 4) throw Error("conic intersection cycle does not sum to four");
    cycle.total = accounted;
    return cycle;
  }
  throw GenericityExhausted("no coordinate change separated the conic intersection");
}

// Trace vector sum_a frobenius(g^j * P_i, a) over the declared base.
std::vector<FieldElement> twisted_trace(const std::vector<FieldElement>& p,
                                        const FieldElement& mult, uint32_t rel_deg,
                                        const FieldSpecPtr& base) {
  std::vector<FieldElement> out;
  for (const auto& c : p) {
    FieldElement acc = FieldElement::zero(c.spec());
    for (uint32_t a = 0; a < rel_deg; ++a) acc = acc + frobenius(mult * c, a);
    auto down = project_to_base(acc);
    if (!down) throw Error("trace of an orbit vector failed to land in the base field");
    if (!down->spec()->same_arithmetic(*base)) throw Error("trace landed in an unexpected field");
    out.push_back(*down);
  }
  return out;
}

// Least canonical rational point among the combinations of basis vectors.
ProjPoint least_point_of_span(const std::vector<std::vector<FieldElement>>& basis,
                              const FieldSpecPtr& spec) {
  std::optional<ProjPoint> best;
  projective_scan(spec->order(), basis.size(), [&](const std::vector<uint64_t>& digits, size_t) {
    std::vector<FieldElement> combo(basis[0].size(), FieldElement::zero(spec));
    for (size_t j = 0; j < basis.size(); ++j) {
      FieldElement c = FieldElement::from_index(spec, digits[j]);
      for (size_t i = 0; i < combo.size(); ++i) combo[i] = combo[i] + c * basis[j][i];
    }
    ProjPoint cand = ProjPoint::make(spec, std::move(combo));
    if (!best || coords_less(cand.coords, best->coords)) best = cand;
    return false;
  });
  if (!best) throw Error("empty span has no rational point");
  return *best;
}

// Solve p = s b0 + u b1 over the extension; the basis is rational.
std::pair<FieldElement, FieldElement> coordinates_in_plane(
    const std::vector<FieldElement>& p, const std::vector<FieldElement>& b0,
    const std::vector<FieldElement>& b1, const FieldSpecPtr& ext) {
  size_t n = p.size();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      FieldElement a = embed_in_extension(ext, b0[i]), b = embed_in_extension(ext, b1[i]);
      FieldElement c = embed_in_extension(ext, b0[j]), d = embed_in_extension(ext, b1[j]);
      FieldElement det = a * d - b * c;
      if (det.is_zero()) continue;
      FieldElement inv = det.inverse();
      FieldElement s = (p[i] * d - b * p[j]) * inv;
      FieldElement u = (a * p[j] - p[i] * c) * inv;
      for (size_t k = 0; k < n; ++k) {
        FieldElement lhs = s * embed_in_extension(ext, b0[k]) + u * embed_in_extension(ext, b1[k]);
        if (lhs != p[k]) throw Error("point does not lie in the span of its trace vectors");
      }
      return {s, u};
    }
  throw Error("trace vectors are linearly dependent");
}

}  // namespace

// ---------------------------------------------------------------------------
// ProjPoint

ProjPoint ProjPoint::make(FieldSpecPtr field, std::vector<FieldElement> coords) {
  ProjPoint p{std::move(field), std::move(coords)};
  return p.canonical();
}

ProjPoint ProjPoint::canonical() const {
  size_t pivot = coords.size();
  for (size_t i = 0; i < coords.size(); ++i)
    if (!coords[i].is_zero()) {
      pivot = i;
      break;
    }
  if (pivot == coords.size()) throw Error("projective point needs a nonzero coordinate");
  FieldElement inv = coords[pivot].inverse();
  ProjPoint p{field, {}};
  for (const auto& c : coords) p.coords.push_back(c * inv);
  return p;
}

bool ProjPoint::same_point(const ProjPoint& o) const {
  if (!field->same_arithmetic(*o.field) || coords.size() != o.coords.size()) return false;
  ProjPoint a = canonical(), b = o.canonical();
  for (size_t i = 0; i < a.coords.size(); ++i)
    if (a.coords[i] != b.coords[i]) return false;
  return true;
}

bool ProjPoint::is_rational_over_base() const {
  ProjPoint c = canonical();
  for (const auto& x : c.coords)
    if (!in_declared_base(x)) return false;
  return true;
}

ProjPoint ProjPoint::project_to_declared_base() const {
  ProjPoint c = canonical();
  if (!field->base()) return c;
  ProjPoint p{field->base(), {}};
  for (const auto& x : c.coords) {
    auto down = project_to_base(x);
    if (!down) throw Error("coordinate does not lie in the declared base field");
    p.coords.push_back(*down);
  }
  return p;
}

std::string ProjPoint::describe() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < coords.size(); ++i) {
    if (i) os << ":";
    os << coords[i].index();
  }
  os << "] over F_" << field->order();
  return os.str();
}

bool on_all(const std::vector<FieldForm>& eqs, const ProjPoint& p) {
  for (const auto& eq : eqs) {
    FieldForm e = eq.spec()->same_arithmetic(*p.field) ? eq : embed_form(p.field, eq);
    if (!e.evaluate(p.coords).is_zero()) return false;
  }
  return true;
}

bool smooth_on(const std::vector<FieldForm>& eqs, const ProjPoint& p) {
  if (eqs.empty()) throw Error("smoothness of an empty equation list");
  Mat<FieldElement> jac = zero_mat(eqs.size(), p.nvars(), p.field);
  for (size_t e = 0; e < eqs.size(); ++e) {
    FieldForm f = eqs[e].spec()->same_arithmetic(*p.field) ? eqs[e] : embed_form(p.field, eqs[e]);
    for (size_t j = 0; j < p.nvars(); ++j) jac[e][j] = f.derivative(j).evaluate(p.coords);
  }
  return mat_rank(jac) == eqs.size();
}

// ---------------------------------------------------------------------------
// Smooth points on cubics.

ProjPoint smooth_point_by_projection(const FieldForm& f, const ProjPoint& z) {
  const FieldSpecPtr& spec = f.spec();
  require_odd_char(spec, "projection from a double point");
  if (f.degree() != 3) throw Error("projection construction needs a cubic form");
  if (!spec->same_arithmetic(*z.field)) throw Error("point field does not match the cubic");
  size_t nv = f.nvars();
  Mat<FieldElement> t = translation_to(z);
  FieldForm g = apply_linear_field(f, t);
  std::vector<FieldForm> pieces = graded_pieces(g);
  if (!pieces[0].is_zero()) throw Error("projection center must lie on the cubic");
  if (!pieces[1].is_zero()) throw Error("projection center must be a singular point");
  if (pieces[2].is_zero()) throw Error("projection center must have multiplicity exactly two");
  const FieldForm& qf = pieces[2];
  const FieldForm& cf = pieces[3];
  std::optional<ProjPoint> found;
  projective_scan(spec->order(), nv - 1, [&](const std::vector<uint64_t>& digits, size_t) {
    std::vector<FieldElement> y = digits_to_elements(spec, digits);
    FieldElement qv = qf.evaluate(y);
    if (qv.is_zero()) return false;
    std::vector<FieldElement> cand{-cf.evaluate(y)};
    for (const auto& yi : y) cand.push_back(yi * qv);
    found = ProjPoint::make(spec, mat_apply(t, cand, spec));
    return true;
  });
  if (!found) throw Error("tangent cone quadric vanished on every rational direction");
  if (!on_all({f}, *found) || !smooth_on({f}, *found))
    throw Error("projection produced a point failing its own certificate");
  return *found;
}

SmoothPointResult smooth_point_on_cubic(const FieldForm& f) {
  const FieldSpecPtr& spec = f.spec();
  require_odd_char(spec, "smooth point search on a cubic");
  if (f.degree() != 3 || f.is_zero()) throw Error("smooth point search needs a nonzero cubic form");
  size_t nv = f.nvars();
  if (nv < 3) throw Error("smooth point search needs at least three variables");

  SmoothPointResult res;
  auto tables = FlatField::get(spec);
  FlatForm ff = FlatForm::of(f, tables);
  std::vector<FlatForm> partials;
  for (size_t i = 0; i < nv; ++i) partials.push_back(FlatForm::of(f.derivative(i), tables));

  std::vector<std::vector<uint64_t>> singular;
  std::optional<ProjPoint> smooth;
  projective_scan(spec->order(), nv, [&](const std::vector<uint64_t>& digits, size_t) {
    if (ff.eval(digits) != 0) return false;
    bool sm = false;
    for (const auto& d : partials)
      if (d.eval(digits) != 0) {
        sm = true;
        break;
      }
    if (sm) {
      smooth = ProjPoint::make(spec, digits_to_elements(spec, digits));
      return true;
    }
    singular.push_back(digits);
    return false;
  });
  if (smooth) {
    res.point = smooth;
    res.evidence.push_back("smooth rational point found by the exhaustive chart scan");
    return res;
  }

  // No smooth rational point in the scan: walk the rational points looking
  // for one of multiplicity exactly two and project away from it.
  for (const auto& digits : singular) {
    ProjPoint z = ProjPoint::make(spec, digits_to_elements(spec, digits));
    FieldForm g = apply_linear_field(f, translation_to(z));
    if (!graded_pieces(g)[2].is_zero()) {
      res.point = smooth_point_by_projection(f, z);
      res.evidence.push_back("no smooth rational point in the scan; projected away from the double point " +
                             z.describe());
      return res;
    }
  }

  // Every rational point (if any) has multiplicity three: the cubic is a
  // triple hyperplane or a union of three conjugate hyperplanes.  The
  // rational points span the common linear space of the factors.
  if (auto ell = rational_linear_factor(f)) {
    auto quot = divide_by_linear(f, *ell);
    if (!quot || !proportional_forms(*quot, *ell * *ell))
      throw Error("cubic without smooth points has a stray rational linear factor");
    res.tag = CubicNormalForm::kTripleHyperplane;
    res.hyperplane = normalize_linear(*ell);
    res.evidence.push_back("cubic is a triple hyperplane; rational linear factor divides it with a square quotient");
    return res;
  }

  std::vector<std::vector<FieldElement>> rows;
  for (const auto& digits : singular) rows.push_back(digits_to_elements(spec, digits));
  std::vector<std::vector<FieldElement>> span = row_basis(rows);
  size_t m = span.size();
  size_t r = nv - m;
  if (r > 3) throw Error("cubic without smooth points has too many essential variables");
  // coordinates: first r columns complete the span, last m columns are the span
  std::vector<bool> is_pivot(nv, false);
  for (const auto& row : span) {
    size_t p = 0;
    while (p < nv && row[p].is_zero()) ++p;
    is_pivot[p] = true;
  }
  Mat<FieldElement> change = zero_mat(nv, nv, spec);
  size_t col = 0;
  for (size_t i = 0; i < nv; ++i)
    if (!is_pivot[i]) change[i][col++] = FieldElement::one(spec);
  for (size_t j = 0; j < m; ++j)
    for (size_t i = 0; i < nv; ++i) change[i][r + j] = span[j][i];
  FieldForm fr = apply_linear_field(f, change);
  for (const auto& [mono, c] : fr.terms()) {
    (void)c;
    for (size_t i = r; i < nv; ++i)
      if (mono[i] > 0) throw Error("cubic does not restrict to its essential variables");
  }
  std::vector<size_t> keep(r);
  for (size_t i = 0; i < r; ++i) keep[i] = i;
  FieldForm core = fr.restricted(keep);

  FieldSpecPtr ext = FieldSpec::make_extension(spec, 3);
  FieldForm fe = embed_form(ext, core);
  auto ell = rational_linear_factor(fe);
  if (!ell) throw Error("cubic without smooth points has no linear factor over the cubic extension");
  FieldForm s1 = frobenius_form(*ell, 1), s2 = frobenius_form(*ell, 2);
  auto quot = divide_by_linear(fe, *ell);
  if (!quot || !proportional_forms(*quot, s1 * s2))
    throw Error("conjugate factorization of the cubic failed to verify");
  // pull the factor back to the original coordinates
  Mat<FieldElement> inv = mat_inverse(change, spec);
  FieldForm pulled = FieldForm::zero(ext, nv, 1);
  for (size_t j = 0; j < nv; ++j) {
    FieldElement acc = FieldElement::zero(ext);
    for (size_t i = 0; i < r; ++i)
      acc = acc + ell->coefficient(um(r, i)) * embed_in_extension(ext, inv[i][j]);
    if (!acc.is_zero()) pulled.add_term(um(nv, j), acc);
  }
  FieldForm product = pulled * frobenius_form(pulled, 1) * frobenius_form(pulled, 2);
  if (!proportional_forms(product, embed_form(ext, f)))
    throw Error("conjugate hyperplane product does not reproduce the cubic");
  res.tag = CubicNormalForm::kThreeConjugateHyperplanes;
  res.hyperplane = normalize_linear(pulled);
  res.evidence.push_back(
      "cubic is a union of three conjugate hyperplanes; the product of the factor with its two "
      "Frobenius conjugates reproduces the form");
  return res;
}

ProjPoint quadric_point(const FieldForm& q, bool require_smooth) {
  const FieldSpecPtr& spec = q.spec();
  require_odd_char(spec, "point search on a quadric");
  if (q.degree() != 2 || q.is_zero()) throw Error("point search needs a nonzero quadratic form");
  size_t nv = q.nvars();
  if (spec->order() > FlatField::kMaxOrder)
    throw BudgetExceeded("quadric point scan over a field too large to enumerate");
  auto tables = FlatField::get(spec);
  FlatForm fq = FlatForm::of(q, tables);
  std::vector<FlatForm> partials;
  for (size_t i = 0; i < nv; ++i) partials.push_back(FlatForm::of(q.derivative(i), tables));

  std::optional<ProjPoint> any;
  std::optional<ProjPoint> smooth;
  projective_scan(spec->order(), nv, [&](const std::vector<uint64_t>& digits, size_t) {
    if (fq.eval(digits) != 0) return false;
    if (!any) any = ProjPoint::make(spec, digits_to_elements(spec, digits));
    if (!require_smooth) return true;
    for (const auto& d : partials)
      if (d.eval(digits) != 0) {
        smooth = ProjPoint::make(spec, digits_to_elements(spec, digits));
        return true;
      }
    return false;
  });
  if (require_smooth && smooth) return *smooth;
  if (any) return *any;
  if (nv >= 3) throw Error("quadric in three or more variables lost its rational point");
  throw NoPoint("anisotropic quadric in at most two variables has no rational point");
}

// ---------------------------------------------------------------------------
// Galois descent.

ProjPoint descend_odd(const std::vector<FieldForm>& eqs, const ProjPoint& p, uint64_t seed) {
  if (eqs.empty() || eqs.size() > 2) throw Error("descent expects one or two quadratic equations");
  const FieldSpecPtr& spec = eqs[0].spec();
  require_odd_char(spec, "Galois descent");
  for (const auto& e : eqs) {
    if (!e.spec()->same_arithmetic(*spec) || e.nvars() != eqs[0].nvars() || e.degree() != 2)
      throw Error("descent equations must be quadrics in common variables");
  }
  ProjPoint pc = p.canonical();
  if (!on_all(eqs, pc)) throw Error("descent input point does not lie on the variety");
  if (pc.field->same_arithmetic(*spec)) return pc;
  if (!pc.field->base() || !pc.field->base()->same_arithmetic(*spec) ||
      pc.field->relative_degree() != 3)
    throw Error("descent point must live over the cubic extension of the equation field");
  if (pc.is_rational_over_base()) {
    ProjPoint down = pc.project_to_declared_base();
    if (!on_all(eqs, down)) throw Error("projected point fell off the variety");
    return down;
  }

  // Rational span of the Frobenius orbit via twisted traces.
  FieldElement g = FieldElement::generator(pc.field);
  std::vector<std::vector<FieldElement>> rows;
  FieldElement mult = FieldElement::one(pc.field);
  for (int j = 0; j < 3; ++j) {
    rows.push_back(twisted_trace(pc.coords, mult, 3, spec));
    mult = mult * g;
  }
  std::vector<std::vector<FieldElement>> basis = row_basis(rows);
  if (basis.size() < 2 || basis.size() > 3)
    throw Error("orbit span has unexpected dimension");

  if (basis.size() == 2) {
    // the orbit spans a rational line with three points on degree-2 equations:
    // the line lies in the variety
    for (const auto& e : eqs)
      if (!restrict_to_span(e, basis).is_zero())
        throw Error("line through the orbit does not lie in the variety");
    ProjPoint out = least_point_of_span(basis, spec);
    if (!on_all(eqs, out)) throw Error("descended point fell off the variety");
    return out;
  }

  // plane case: restrict the equations to the plane
  std::vector<FieldForm> conics;
  for (const auto& e : eqs) {
    FieldForm c = restrict_to_span(e, basis);
    if (!c.is_zero()) conics.push_back(c);
  }
  if (conics.size() == 2 && proportional_forms(conics[0], conics[1])) conics.pop_back();
  std::optional<ProjPoint> plane_pt;
  if (conics.empty()) {
    plane_pt = least_point_of_span(basis, spec);
  } else if (conics.size() == 1) {
    ProjPoint in_plane = quadric_point(conics[0]);
    std::vector<FieldElement> combo(basis[0].size(), FieldElement::zero(spec));
    for (size_t j = 0; j < 3; ++j)
      for (size_t i = 0; i < combo.size(); ++i)
        combo[i] = combo[i] + in_plane.coords[j] * basis[j][i];
    plane_pt = ProjPoint::make(spec, std::move(combo));
  } else {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    BiconicCycle cycle = biconic_cycle(conics[0], conics[1], rng);
    std::optional<ProjPoint> rational;
    for (const auto& orbit : cycle.orbits)
      if (orbit.degree == 1) {
        if (rational) throw Error("intersection cycle has two rational residual points");
        rational = orbit.rep;
      }
    if (!rational)
      throw Error("intersection cycle of the orbit plane has no rational residual point");
    std::vector<FieldElement> combo(basis[0].size(), FieldElement::zero(spec));
    for (size_t j = 0; j < 3; ++j)
      for (size_t i = 0; i < combo.size(); ++i)
        combo[i] = combo[i] + rational->coords[j] * basis[j][i];
    plane_pt = ProjPoint::make(spec, std::move(combo));
  }
  if (!on_all(eqs, *plane_pt)) throw Error("descended point fell off the variety");
  return *plane_pt;
}

ProjPoint descend_even_cubic(const FieldForm& f, const ProjPoint& p) {
  const FieldSpecPtr& spec = f.spec();
  require_odd_char(spec, "Galois descent");
  if (f.degree() != 3) throw Error("descent along a line needs a cubic form");
  ProjPoint pc = p.canonical();
  if (!on_all({f}, pc)) throw Error("descent input point does not lie on the cubic");
  if (pc.field->same_arithmetic(*spec)) return pc;
  if (!pc.field->base() || !pc.field->base()->same_arithmetic(*spec) ||
      pc.field->relative_degree() != 2)
    throw Error("descent point must live over the quadratic extension of the equation field");
  if (pc.is_rational_over_base()) {
    ProjPoint down = pc.project_to_declared_base();
    if (!on_all({f}, down)) throw Error("projected point fell off the cubic");
    return down;
  }

  FieldElement g = FieldElement::generator(pc.field);
  std::vector<std::vector<FieldElement>> rows;
  rows.push_back(twisted_trace(pc.coords, FieldElement::one(pc.field), 2, spec));
  rows.push_back(twisted_trace(pc.coords, g, 2, spec));
  std::vector<std::vector<FieldElement>> basis = row_basis(rows);
  if (basis.size() != 2) throw Error("orbit of a quadratic point does not span a line");

  FieldForm b = restrict_to_span(f, basis);
  if (b.is_zero()) {
    ProjPoint out = least_point_of_span(basis, spec);
    if (!on_all({f}, out)) throw Error("descended point fell off the cubic");
    return out;
  }
  auto [s0, u0] = coordinates_in_plane(pc.coords, basis[0], basis[1], pc.field);
  // conjugate pair of parameter roots as a rational binary quadratic
  FieldForm root_f = FieldForm::zero(pc.field, 2, 1);
  root_f.add_term(um(2, 0), u0);
  root_f.add_term(um(2, 1), -s0);
  FieldForm pair = root_f * frobenius_form(root_f, 1);
  FieldForm pair_base = FieldForm::zero(spec, 2, 2);
  for (const auto& [mono, c] : pair.terms()) {
    auto down = project_to_base(c);
    if (!down) throw Error("conjugate parameter pair is not rational");
    pair_base.add_term(mono, *down);
  }
  FieldForm third = binary_divide_exact(b, pair_base);
  auto [s3, u3] = binary_linear_root(third);
  std::vector<FieldElement> combo(basis[0].size(), FieldElement::zero(spec));
  for (size_t i = 0; i < combo.size(); ++i) combo[i] = s3 * basis[0][i] + u3 * basis[1][i];
  ProjPoint out = ProjPoint::make(spec, std::move(combo));
  if (!on_all({f}, out)) throw Error("third intersection point fell off the cubic");
  return out;
}

// ---------------------------------------------------------------------------
// Connecting curves.

CurveWitness r_connect_cubic(const FieldForm& y_cubic, const ProjPoint& z, const ProjPoint& u,
                             uint64_t seed) {
  const FieldSpecPtr& spec = y_cubic.spec();
  require_odd_char(spec, "curve through a double point");
  if (y_cubic.degree() != 3) throw Error("curve construction needs a cubic form");
  if (!spec->same_arithmetic(*z.field) || !spec->same_arithmetic(*u.field))
    throw Error("endpoint fields do not match the cubic");
  ProjPoint zc = z.canonical(), uc = u.canonical();
  if (zc.same_point(uc)) throw Error("endpoints must be distinct");
  if (!on_all({y_cubic}, uc)) throw Error("target endpoint does not lie on the cubic");
  size_t nv = y_cubic.nvars();

  Mat<FieldElement> t = translation_to(zc);
  FieldForm g = apply_linear_field(y_cubic, t);
  std::vector<FieldForm> pieces = graded_pieces(g);
  if (!pieces[0].is_zero()) throw Error("base endpoint does not lie on the cubic");
  if (!pieces[1].is_zero()) throw Error("base endpoint must be a double point");
  if (pieces[2].is_zero()) throw Error("base endpoint must have multiplicity exactly two");
  const FieldForm& qf = pieces[2];
  const FieldForm& cf = pieces[3];

  Mat<FieldElement> tinv = mat_inverse(t, spec);
  std::vector<FieldElement> ut = mat_apply(tinv, uc.coords, spec);
  std::vector<FieldElement> v(ut.begin() + 1, ut.end());
  bool vzero = true;
  for (const auto& c : v)
    if (!c.is_zero()) vzero = false;
  if (vzero) throw Error("endpoints must be distinct");

  CurveWitness wit;
  FieldElement qv = qf.evaluate(v);
  if (qv.is_zero()) {
    // the direction lies in the tangent cone, so the whole line through the
    // endpoints lies in the cubic
    if (!cf.evaluate(v).is_zero()) throw Error("target endpoint fell off the cubic");
    BinaryCurveMap line;
    for (size_t i = 0; i < nv; ++i) {
      FieldForm comp = FieldForm::zero(spec, 2, 1);
      if (!uc.coords[i].is_zero()) comp.add_term(um(2, 0), uc.coords[i]);
      if (!zc.coords[i].is_zero()) comp.add_term(um(2, 1), zc.coords[i]);
      line.components.push_back(comp);
    }
    if (!compose_line(y_cubic, line).is_zero())
      throw Error("line through the endpoints does not lie in the cubic");
    wit.curve = line;
    wit.checks.push_back("line through the endpoints lies in the cubic (composition vanishes)");
    wit.checks.push_back("parameter 0 maps to the double point, parameter infinity to the target");
    return wit;
  }

  // pick a second direction w in the tangent cone with no common root of the
  // restricted quadric and cubic along the line (v, w)
  auto try_w = [&](const std::vector<FieldElement>& w) -> bool {
    Mat<FieldElement> two{v, w};
    if (mat_rank(two) != 2) return false;
    BinaryCurveMap span;
    for (size_t i = 0; i + 1 < nv; ++i) {
      FieldForm comp = FieldForm::zero(spec, 2, 1);
      if (!v[i].is_zero()) comp.add_term(um(2, 0), v[i]);
      if (!w[i].is_zero()) comp.add_term(um(2, 1), w[i]);
      span.components.push_back(comp);
    }
    FieldForm qr = compose_line(qf, span);
    FieldForm cr = compose_line(cf, span);
    if (qr.is_zero() || cr.is_zero()) return false;
    if (binary_gcd(qr, cr).degree() != 0) return false;
    // image of the plane (v, w) under projection from the double point
    BinaryCurveMap curve;
    curve.components.push_back(cr.negated());
    for (size_t i = 0; i + 1 < nv; ++i) curve.components.push_back(span.components[i] * qr);
    curve.components = mat_apply_forms(t, curve.components, spec);
    if (!compose_line(y_cubic, curve).is_zero())
      throw Error("constructed curve fell off the cubic");
    FieldElement one = FieldElement::one(spec), zero = FieldElement::zero(spec);
    ProjPoint at0 = ProjPoint::make(spec, curve.evaluate(zero, one));
    ProjPoint atinf = ProjPoint::make(spec, curve.evaluate(one, zero));
    if (!at0.same_point(zc) || !atinf.same_point(uc))
      throw Error("constructed curve has wrong endpoints");
    wit.curve = curve;
    wit.checks.push_back("cubic composed with the degree-3 map vanishes identically");
    wit.checks.push_back("parameter 0 maps to the double point, parameter infinity to the target");
    wit.checks.push_back("restricted quadric and cubic share no root along the chosen plane");
    return true;
  };

  Mat<FieldElement> gram = gram_matrix(qf);
  size_t rank = mat_rank(gram);
  bool nonsplit_pair = false;
  if (rank <= 2 && rank >= 1) {
    bool rational_factor = false;
    for (const FieldForm& ell : split_rank2_quadric(qf))
      if (form_is_rational(normalize_linear(ell))) rational_factor = true;
    nonsplit_pair = (rank == 2) && !rational_factor;
  }

  if (nonsplit_pair) {
    // rational zeros of the cone quadric all lie in its radical subspace
    std::vector<std::vector<FieldElement>> ker = mat_kernel(gram, spec);
    if (!ker.empty()) {
      bool done = false;
      projective_scan(spec->order(), ker.size(), [&](const std::vector<uint64_t>& digits, size_t) {
        std::vector<FieldElement> w(nv - 1, FieldElement::zero(spec));
        for (size_t j = 0; j < ker.size(); ++j) {
          FieldElement c = FieldElement::from_index(spec, digits[j]);
          for (size_t i = 0; i + 1 < nv; ++i) w[i] = w[i] + c * ker[j][i];
        }
        done = try_w(w);
        return done;
      });
      if (done) return wit;
    }
    throw TangentConeObstruction(
        "tangent cone at the double point is a pair of conjugate hyperplanes with no usable "
        "rational ruling");
  }

  std::mt19937_64 rng(seed ^ 0xda3e39cb94b95bdbULL);
  uint64_t q = spec->order();
  int tested = 0;
  for (int draws = 0; draws < kGenericityRetries * 64 && tested < kGenericityRetries; ++draws) {
    std::vector<FieldElement> w;
    for (size_t i = 0; i + 1 < nv; ++i) w.push_back(FieldElement::from_index(spec, rng() % q));
    bool wzero = true;
    for (const auto& c : w)
      if (!c.is_zero()) wzero = false;
    if (wzero || !qf.evaluate(w).is_zero()) continue;
    ++tested;
    if (try_w(w)) return wit;
  }
  // deterministic sweep before giving up
  bool done = false;
  projective_scan(q, nv - 1, [&](const std::vector<uint64_t>& digits, size_t) {
    std::vector<FieldElement> w = digits_to_elements(spec, digits);
    if (!qf.evaluate(w).is_zero()) return false;
    done = try_w(w);
    return done;
  });
  if (done) return wit;
  throw GenericityExhausted("no ruling of the tangent cone gives a transversal cubic section");
}

CurveWitness r_connect_ci22(const FieldForm& f2, const FieldForm& g2, const ProjPoint& x,
                            const ProjPoint& y, uint64_t seed) {
  const FieldSpecPtr& spec = f2.spec();
  require_odd_char(spec, "curve on an intersection of two quadrics");
  if (f2.degree() != 2 || g2.degree() != 2 || !g2.spec()->same_arithmetic(*spec) ||
      f2.nvars() != g2.nvars())
    throw Error("curve construction needs two quadrics in common variables");
  size_t nv = f2.nvars();
  if (nv < 6) throw Error("curve construction needs an intersection of two quadrics in P^5 or larger");
  if (!spec->same_arithmetic(*x.field) || !spec->same_arithmetic(*y.field))
    throw Error("endpoint fields do not match the equations");
  ProjPoint xc = x.canonical(), yc = y.canonical();
  if (xc.same_point(yc)) throw Error("endpoints must be distinct");
  if (!on_all({f2, g2}, xc) || !on_all({f2, g2}, yc))
    throw Error("endpoints must lie on both quadrics");

  Mat<FieldElement> t1 = translation_to(xc);
  FieldForm f = apply_linear_field(f2, t1);
  FieldForm g = apply_linear_field(g2, t1);
  auto fp = graded_pieces(f);
  auto gp = graded_pieces(g);
  Mat<FieldElement> tan = zero_mat(2, nv - 1, spec);
  for (size_t j = 0; j + 1 < nv; ++j) {
    tan[0][j] = fp[1].coefficient(um(nv - 1, j));
    tan[1][j] = gp[1].coefficient(um(nv - 1, j));
  }
  if (mat_rank(tan) != 2) throw Error("base endpoint must be a smooth point of the intersection");

  std::vector<FieldElement> y1 = mat_apply(mat_inverse(t1, spec), yc.coords, spec);
  std::vector<FieldElement> ytail(y1.begin() + 1, y1.end());
  FieldElement tf = fp[1].evaluate(ytail), tg = gp[1].evaluate(ytail);
  if (tf.is_zero() && tg.is_zero())
    throw GenericityExhausted("target endpoint lies on both tangent hyperplanes at the base point");
  // the unique pencil member whose tangent hyperplane at x passes through y
  FieldElement lam = tg, mu = -tf;

  CurveWitness wit;
  std::mt19937_64 rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
  uint64_t q = spec->order();
  std::string failure = "no generic choice found for the conic construction";

  std::vector<std::pair<FieldElement, FieldElement>> complements;
  projective_scan(q, 2, [&](const std::vector<uint64_t>& digits, size_t) {
    FieldElement lp = FieldElement::from_index(spec, digits[0]);
    FieldElement mp = FieldElement::from_index(spec, digits[1]);
    if (!(lam * mp - mu * lp).is_zero()) complements.emplace_back(lp, mp);
    return false;
  });

  for (const auto& [lp, mp] : complements) {
    FieldForm fn = f.scaled(lam) + g.scaled(mu);
    FieldForm gn = f.scaled(lp) + g.scaled(mp);
    FieldForm lf = fp[1].scaled(lam) + gp[1].scaled(mu);
    FieldForm lg = fp[1].scaled(lp) + gp[1].scaled(mp);
    Mat<FieldElement> m = complete_to_basis({lf, lg}, spec, nv - 1);
    Mat<FieldElement> minv = mat_inverse(m, spec);
    Mat<FieldElement> bfull = zero_mat(nv, nv, spec);
    bfull[0][0] = FieldElement::one(spec);
    for (size_t i = 0; i + 1 < nv; ++i)
      for (size_t j = 0; j + 1 < nv; ++j) bfull[1 + i][1 + j] = minv[i][j];
    FieldForm fmodel = apply_linear_field(fn, bfull);
    FieldForm gmodel = apply_linear_field(gn, bfull);
    auto fmp = graded_pieces(fmodel);
    auto gmp = graded_pieces(gmodel);
    FieldElement cf = fmp[1].coefficient(um(nv - 1, 0));
    FieldElement cg = gmp[1].coefficient(um(nv - 1, 1));
    if (cf.is_zero() || cg.is_zero()) throw Error("tangent coordinates failed to normalize");
    // normalize the equations to X_0 X_1 + q and X_0 X_2 + q'
    FieldForm qq = fmp[2].scaled(cf.inverse());
    FieldForm qp = gmp[2].scaled(cg.inverse());
    // the linear pieces must be exactly the first two new coordinates
    FieldForm e0 = FieldForm::zero(spec, nv - 1, 1);
    e0.add_term(um(nv - 1, 0), FieldElement::one(spec));
    FieldForm e1 = FieldForm::zero(spec, nv - 1, 1);
    e1.add_term(um(nv - 1, 1), FieldElement::one(spec));
    if (!proportional_forms(fmp[1], e0) || !proportional_forms(gmp[1], e1))
      throw Error("tangent coordinates failed to normalize");

    std::vector<size_t> keep;
    for (size_t i = 1; i + 1 < nv; ++i) keep.push_back(i);
    FieldForm qhat = qq.restricted(keep);    // quadric in X_2..X_{n}
    FieldForm qphat = qp.restricted(keep);
    if (mat_rank(gram_matrix(qhat)) != nv - 2) {
      failure = "projection of the member through the target onto its tangent hyperplane is singular";
      continue;
    }
    std::vector<size_t> keep2;
    for (size_t i = 1; i + 2 < nv; ++i) keep2.push_back(i);
    FieldForm qsec = qhat.restricted(keep2);  // section X_2 = 0
    if (mat_rank(gram_matrix(qsec)) < 3) {
      failure = "hyperplane section of the projected quadric is not geometrically integral";
      continue;
    }

    std::vector<FieldElement> y2(nv, FieldElement::zero(spec));
    y2[0] = y1[0];
    std::vector<FieldElement> ytail2 = mat_apply(m, ytail, spec);
    for (size_t i = 0; i + 1 < nv; ++i) y2[1 + i] = ytail2[i];
    if (!y2[1].is_zero()) throw Error("target endpoint fell off its tangent hyperplane");
    if (y2[2].is_zero()) throw Error("target endpoint degenerated under the normalization");
    std::vector<FieldElement> u(y2.begin() + 2, y2.end());  // point of the projected quadric
    if (!qhat.evaluate(u).is_zero()) throw Error("projected target fell off the quadric");

    // scan two points of the hyperplane section with nonzero second quadric
    auto draw_section_point = [&]() -> std::optional<std::vector<FieldElement>> {
      for (int tries = 0; tries < 200; ++tries) {
        std::vector<FieldElement> s;
        for (size_t i = 0; i + 3 < nv; ++i) s.push_back(FieldElement::from_index(spec, rng() % q));
        bool zero = true;
        for (const auto& c : s)
          if (!c.is_zero()) zero = false;
        if (zero || !qsec.evaluate(s).is_zero()) continue;
        std::vector<FieldElement> padded(nv - 2, FieldElement::zero(spec));
        for (size_t i = 0; i + 3 < nv; ++i) padded[1 + i] = s[i];
        if (qphat.evaluate(padded).is_zero()) continue;
        return padded;
      }
      return std::nullopt;
    };

    bool built = false;
    for (int pair_try = 0; pair_try < 25 && !built; ++pair_try) {
      auto v = draw_section_point();
      auto w = draw_section_point();
      if (!v || !w) {
        failure = "no rational point of the hyperplane section avoids the second quadric";
        break;
      }
      Mat<FieldElement> three{*v, *w, u};
      if (mat_rank(three) != 3) continue;
      // conic cut on the plane (v, w, u): pure squares vanish since all three
      // lie on the quadric
      std::vector<FieldForm> imgs;
      for (size_t i = 0; i + 2 < nv; ++i) {
        FieldForm ell = FieldForm::zero(spec, 3, 1);
        if (!(*v)[i].is_zero()) ell.add_term(um(3, 0), (*v)[i]);
        if (!(*w)[i].is_zero()) ell.add_term(um(3, 1), (*w)[i]);
        if (!u[i].is_zero()) ell.add_term(um(3, 2), u[i]);
        imgs.push_back(ell);
      }
      FieldForm conic = qhat.substituted(imgs);
      for (size_t i = 0; i < 3; ++i)
        if (!conic.coefficient(Monomial::power(3, i, 2)).is_zero())
          throw Error("plane conic has a square term at a point of the quadric");
      FieldElement a = conic.coefficient(Monomial({0, 1, 1}));
      FieldElement b = conic.coefficient(Monomial({1, 0, 1}));
      FieldElement c = conic.coefficient(Monomial({1, 1, 0}));
      if (a.is_zero() || b.is_zero() || c.is_zero()) continue;
      // parametrization through the three plane points
      FieldForm al = FieldForm::zero(spec, 2, 2);
      al.add_term(Monomial({1, 1}), -a);
      al.add_term(Monomial({0, 2}), a);
      FieldForm be = FieldForm::zero(spec, 2, 2);
      be.add_term(Monomial({2, 0}), b);
      be.add_term(Monomial({1, 1}), -b);
      FieldForm ga = FieldForm::zero(spec, 2, 2);
      ga.add_term(Monomial({1, 1}), c);
      FieldForm comp_check = conic.substituted({al, be, ga});
      if (!comp_check.is_zero()) throw Error("conic parametrization failed its identity");

      std::vector<FieldForm> pvec;
      for (size_t i = 0; i + 2 < nv; ++i)
        pvec.push_back(al.scaled((*v)[i]) + be.scaled((*w)[i]) + ga.scaled(u[i]));
      // inverse of the projection: [-q'(p), 0, p_0 p_j]
      BinaryCurveMap curve;
      curve.components.push_back(qphat.substituted(pvec).negated());
      curve.components.push_back(FieldForm::zero(spec, 2, 4));
      for (size_t j = 0; j + 2 < nv; ++j) curve.components.push_back(pvec[0] * pvec[j]);
      Mat<FieldElement> mtot = mat_mul(t1, bfull, spec);
      curve.components = mat_apply_forms(mtot, curve.components, spec);
      if (!compose_line(f2, curve).is_zero() || !compose_line(g2, curve).is_zero())
        throw Error("constructed curve fell off the intersection");
      FieldElement one = FieldElement::one(spec), zero = FieldElement::zero(spec);
      ProjPoint a0 = ProjPoint::make(spec, curve.evaluate(zero, one));
      ProjPoint ainf = ProjPoint::make(spec, curve.evaluate(one, zero));
      ProjPoint a1 = ProjPoint::make(spec, curve.evaluate(one, one));
      if (!a0.same_point(xc) || !ainf.same_point(xc) || !a1.same_point(yc))
        throw Error("constructed curve has wrong endpoints");
      wit.curve = curve;
      wit.checks.push_back("both quadrics composed with the degree-4 map vanish identically");
      wit.checks.push_back("parameters 0 and infinity map to the base point, parameter 1 to the target");
      wit.checks.push_back("plane conic through the three section points is smooth");
      built = true;
    }
    if (built) return wit;
  }
  throw GenericityExhausted(failure);
}

// ---------------------------------------------------------------------------
// Lines through a point.

LinesThroughPoint lines_through_point(const std::vector<FieldForm>& eqs, const ProjPoint& x,
                                      int K, uint64_t seed) {
  if (eqs.empty()) throw Error("line scheme needs at least one equation");
  const FieldSpecPtr& spec = eqs[0].spec();
  require_odd_char(spec, "line scheme");
  size_t nv = eqs[0].nvars();
  for (const auto& e : eqs)
    if (!e.spec()->same_arithmetic(*spec) || e.nvars() != nv || e.is_zero())
      throw Error("line scheme equations must be nonzero forms in common variables");
  if (!spec->same_arithmetic(*x.field)) throw Error("point field does not match the equations");
  ProjPoint xc = x.canonical();
  if (!on_all(eqs, xc)) throw Error("center must lie on the variety");

  LinesThroughPoint out;
  Mat<FieldElement> t = translation_to(xc);
  int degsum = 0;
  std::vector<FieldForm> cut;
  for (const auto& e : eqs) {
    degsum += int(e.degree());
    auto pieces = graded_pieces(apply_linear_field(e, t));
    if (!pieces[0].is_zero()) throw Error("center must lie on the variety");
    for (uint32_t k = 1; k <= e.degree(); ++k) {
      if (pieces[k].is_zero()) {
        std::ostringstream os;
        os << "graded piece of degree " << k << " vanishes (the center is not a simple point of "
           << "that equation)";
        out.evidence.push_back(os.str());
        continue;
      }
      cut.push_back(pieces[k]);
    }
  }
  out.scheme = scheme_of(cut);
  out.expected_dim = int(nv) - 2 - degsum;

  // count on the reduced scheme (same counts, much smaller loops)
  ReducedScheme red = eliminate_linear(out.scheme);
  if (red.scheme.nvars == 0) {
    out.dimension.conclusive = true;
    out.dimension.dim = -1;
    out.dimension.note = "linear pieces are inconsistent: no line through the point";
    out.length = 0;
  } else if (red.scheme.equations.empty()) {
    out.dimension.conclusive = true;
    out.dimension.dim = int(red.scheme.nvars) - 1;
    out.dimension.note = "all equations eliminated: the line scheme is a projective space";
  } else {
    out.dimension = dim_by_counting(red.scheme, K);
    out.evidence.push_back("dimension estimated after eliminating the linear pieces (" +
                           std::to_string(red.scheme.nvars) + " variables remain)");
  }

  // length certificate for the two-conic shape
  if (red.scheme.nvars == 3) {
    std::vector<FieldForm> conics;
    bool shape = true;
    for (const auto& e : red.scheme.equations) {
      if (e.is_zero()) continue;
      if (e.degree() == 2)
        conics.push_back(e);
      else
        shape = false;
    }
    if (shape && conics.size() == 2 && !proportional_forms(conics[0], conics[1])) {
      std::mt19937_64 rng(seed ^ 0x94d049bb133111ebULL);
      try {
        BiconicCycle cycle = biconic_cycle(conics[0], conics[1], rng);
        out.length = cycle.total;
        for (auto& n : cycle.notes) out.evidence.push_back(std::move(n));
        if (!out.dimension.conclusive) {
          out.dimension.conclusive = true;
          out.dimension.dim = 0;
          out.dimension.note = "zero-dimensional: certified by the intersection cycle";
        }
      } catch (const NotCompleteIntersection& e) {
        out.evidence.push_back(std::string("length not computed: ") + e.what());
      } catch (const GenericityExhausted& e) {
        out.evidence.push_back(std::string("length not computed: ") + e.what());
      }
    }
  }

  // zero-dimensional fallback: all counts bounded by the product of degrees
  // and consistent with a union of closed points
  if (!out.dimension.conclusive && !out.dimension.counts.empty()) {
    int64_t bezout = 1;
    for (const auto& e : red.scheme.equations) bezout *= std::max<int64_t>(1, e.degree());
    bool bounded = true;
    int64_t last = 0;
    for (const auto& [k, n] : out.dimension.counts) {
      (void)k;
      if (n > bezout) bounded = false;
      last = std::max(last, n);
    }
    if (bounded && last > 0) {
      std::vector<int64_t> nk(out.dimension.counts.size() + 1, 0);
      for (const auto& [k, n] : out.dimension.counts)
        if (k >= 1 && size_t(k) < nk.size()) nk[k] = n;
      std::vector<int64_t> orbits(nk.size(), 0);
      bool consistent = true;
      for (size_t k = 1; k < nk.size(); ++k) {
        int64_t r = nk[k];
        for (size_t d = 1; d < k; ++d)
          if (k % d == 0) r -= int64_t(d) * orbits[d];
        if (r < 0 || r % int64_t(k) != 0) consistent = false;
        if (consistent) orbits[k] = r / int64_t(k);
      }
      if (consistent) {
        out.dimension.conclusive = true;
        out.dimension.dim = 0;
        out.dimension.note = "zero-dimensional: counts bounded by the degree product and orbit-consistent";
      }
    }
  }
  if (!out.dimension.conclusive)
    throw InconclusiveDimension("line scheme dimension could not be certified");
  out.excess = out.dimension.dim > out.expected_dim;
  if (out.excess)
    out.evidence.push_back("line scheme dimension exceeds the expected value for a general point");
  return out;
}

// ---------------------------------------------------------------------------
// Tangent cones.

TangentConeReport tangent_cone(const std::vector<FieldForm>& eqs, const ProjPoint& x) {
  if (eqs.empty()) throw Error("tangent cone needs at least one equation");
  const FieldSpecPtr& spec = eqs[0].spec();
  require_odd_char(spec, "tangent cone");
  size_t nv = eqs[0].nvars();
  for (const auto& e : eqs)
    if (!e.spec()->same_arithmetic(*spec) || e.nvars() != nv || e.is_zero())
      throw Error("tangent cone equations must be nonzero forms in common variables");
  if (!spec->same_arithmetic(*x.field)) throw Error("point field does not match the equations");
  ProjPoint xc = x.canonical();
  if (!on_all(eqs, xc)) throw Error("point must lie on the variety");

  TangentConeReport rep;
  rep.translate = translation_to(xc);
  for (const auto& e : eqs) {
    auto pieces = graded_pieces(apply_linear_field(e, rep.translate));
    if (!pieces[0].is_zero()) throw Error("point must lie on the variety");
    uint32_t mult = 1;
    while (mult < e.degree() && pieces[mult].is_zero()) ++mult;
    rep.multiplicity.push_back(mult);
    rep.cone.push_back(pieces[mult]);
    rep.pieces.push_back(std::move(pieces));
  }

  // classification of the cone
  if (rep.cone.size() == 1) {
    const FieldForm& c = rep.cone[0];
    if (c.degree() == 1) {
      rep.evidence.push_back("smooth point: the tangent cone is the tangent hyperplane");
    } else if (c.degree() == 2) {
      rep.cone_report = classify_quadric(c);
    } else if (c.degree() == 3) {
      try {
        rep.cone_report = classify_cubic(c);
      } catch (const Error& e) {
        rep.evidence.push_back(std::string("cone classification unavailable: ") + e.what());
      }
    }
  } else if (rep.cone.size() == 2 && rep.cone[0].degree() == 2 && rep.cone[1].degree() == 2) {
    try {
      rep.cone_report = classify_pencil(rep.cone[0], rep.cone[1]);
    } catch (const Error& e) {
      rep.evidence.push_back(std::string("cone classification unavailable: ") + e.what());
    }
  }

  // hypersurface at a smooth point: second-order data and the tangent section
  if (eqs.size() == 1 && rep.multiplicity[0] == 1 && eqs[0].degree() >= 2) {
    rep.second_form = rep.pieces[0][2];
    rep.second_rank = rep.second_form->is_zero() ? 0 : int(mat_rank(gram_matrix(*rep.second_form)));
    {
      std::ostringstream os;
      os << "quadratic graded piece at the smooth point has Gram rank " << rep.second_rank;
      rep.evidence.push_back(os.str());
    }
    // rotate the tangent form to the first tail coordinate and cut by it
    Mat<FieldElement> m = complete_to_basis({rep.pieces[0][1]}, spec, nv - 1);
    Mat<FieldElement> minv = mat_inverse(m, spec);
    Mat<FieldElement> bfull = zero_mat(nv, nv, spec);
    bfull[0][0] = FieldElement::one(spec);
    for (size_t i = 0; i + 1 < nv; ++i)
      for (size_t j = 0; j + 1 < nv; ++j) bfull[1 + i][1 + j] = minv[i][j];
    FieldForm rotated = apply_linear_field(apply_linear_field(eqs[0], rep.translate), bfull);
    std::vector<size_t> keep{0};
    for (size_t i = 2; i < nv; ++i) keep.push_back(i);
    rep.section = rotated.restricted(keep);
    Mat<FieldElement> full = mat_mul(rep.translate, bfull, spec);
    rep.section_chart = zero_mat(nv, nv - 1, spec);
    for (size_t i = 0; i < nv; ++i)
      for (size_t j = 0; j < keep.size(); ++j) rep.section_chart[i][j] = full[i][keep[j]];
    // rational singular points of the section, with the rank of the local
    // quadratic piece
    if (!rep.section->is_zero()) {
      auto tables = FlatField::get(spec);
      FlatForm fs = FlatForm::of(*rep.section, tables);
      std::vector<FlatForm> parts;
      for (size_t i = 0; i + 1 < nv; ++i)
        parts.push_back(FlatForm::of(rep.section->derivative(i), tables));
      projective_scan(spec->order(), nv - 1, [&](const std::vector<uint64_t>& digits, size_t) {
        if (fs.eval(digits) != 0) return false;
        for (const auto& d : parts)
          if (d.eval(digits) != 0) return false;
        ProjPoint s = ProjPoint::make(spec, digits_to_elements(spec, digits));
        auto spieces = graded_pieces(apply_linear_field(*rep.section, translation_to(s)));
        int rank = spieces[2].is_zero() ? 0 : int(mat_rank(gram_matrix(spieces[2])));
        ProjPoint orig = ProjPoint::make(spec, mat_apply(rep.section_chart, s.coords, spec));
        rep.section_singularities.emplace_back(orig, rank);
        return false;
      });
      std::ostringstream os;
      os << "tangent hyperplane section has " << rep.section_singularities.size()
         << " rational singular point(s)";
      rep.evidence.push_back(os.str());
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Conic through three points of a quadric.

PlaneConicResult plane_conic(const FieldForm& q, const ProjPoint& x1, const ProjPoint& x2,
                             const ProjPoint& x3) {
  const FieldSpecPtr& spec = q.spec();
  require_odd_char(spec, "plane conic");
  if (q.degree() != 2) throw Error("plane conic needs a quadratic form");
  for (const ProjPoint* p : {&x1, &x2, &x3}) {
    if (!spec->same_arithmetic(*p->field)) throw Error("point field does not match the quadric");
    if (!on_all({q}, *p)) throw Error("all three points must lie on the quadric");
  }
  ProjPoint a = x1.canonical(), b = x2.canonical(), c = x3.canonical();
  Mat<FieldElement> rows{a.coords, b.coords, c.coords};
  if (mat_rank(rows) != 3)
    throw CollinearPoints("the three points must be distinct and non-collinear");

  PlaneConicResult out;
  std::vector<FieldForm> imgs;
  for (size_t i = 0; i < q.nvars(); ++i) {
    FieldForm ell = FieldForm::zero(spec, 3, 1);
    if (!a.coords[i].is_zero()) ell.add_term(um(3, 0), a.coords[i]);
    if (!b.coords[i].is_zero()) ell.add_term(um(3, 1), b.coords[i]);
    if (!c.coords[i].is_zero()) ell.add_term(um(3, 2), c.coords[i]);
    imgs.push_back(ell);
  }
  out.conic = q.substituted(imgs);
  for (size_t i = 0; i < 3; ++i)
    if (!out.conic.coefficient(Monomial::power(3, i, 2)).is_zero())
      throw Error("restricted conic has a square term at a point of the quadric");
  if (out.conic.is_zero())
    throw Error("the plane through the three points lies inside the quadric");
  out.verdict = classify_quadric(out.conic);

  FieldElement ca = out.conic.coefficient(Monomial({0, 1, 1}));
  FieldElement cb = out.conic.coefficient(Monomial({1, 0, 1}));
  FieldElement cc = out.conic.coefficient(Monomial({1, 1, 0}));
  out.checks.push_back("three points verified on the quadric, plane verified three-dimensional");
  if (!ca.is_zero() && !cb.is_zero() && !cc.is_zero()) {
    FieldForm al = FieldForm::zero(spec, 2, 2);
    al.add_term(Monomial({1, 1}), -ca);
    al.add_term(Monomial({0, 2}), ca);
    FieldForm be = FieldForm::zero(spec, 2, 2);
    be.add_term(Monomial({2, 0}), cb);
    be.add_term(Monomial({1, 1}), -cb);
    FieldForm ga = FieldForm::zero(spec, 2, 2);
    ga.add_term(Monomial({1, 1}), cc);
    if (!out.conic.substituted({al, be, ga}).is_zero())
      throw Error("conic parametrization failed its identity");
    BinaryCurveMap curve;
    for (size_t i = 0; i < q.nvars(); ++i)
      curve.components.push_back(al.scaled(a.coords[i]) + be.scaled(b.coords[i]) +
                                 ga.scaled(c.coords[i]));
    if (!compose_line(q, curve).is_zero())
      throw Error("parametrized conic fell off the quadric");
    FieldElement one = FieldElement::one(spec), zero = FieldElement::zero(spec);
    if (!ProjPoint::make(spec, curve.evaluate(zero, one)).same_point(a) ||
        !ProjPoint::make(spec, curve.evaluate(one, zero)).same_point(b) ||
        !ProjPoint::make(spec, curve.evaluate(one, one)).same_point(c))
      throw Error("parametrized conic misses its three points");
    out.through = curve;
    out.checks.push_back("smooth conic parametrized; 0, infinity, 1 map to the three points");
  } else {
    out.checks.push_back("conic through the three points is singular; no parametrization emitted");
  }
  return out;
}

}  // namespace ssm
