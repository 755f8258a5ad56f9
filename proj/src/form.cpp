#include "ssm/form.hpp"

#include <algorithm>

namespace ssm {

// ---------------------------------------------------------------------------
// Conversions

HomogForm lift_to_series(const FieldForm& f) {
  HomogForm r(f.spec(), f.nvars(), f.degree());
  for (const auto& [m, c] : f.terms()) r.set_term(m, Series::constant(c));
  return r;
}

FieldForm residue_form(const HomogForm& f) {
  FieldForm r(f.spec(), f.nvars(), f.degree());
  for (const auto& [m, c] : f.terms()) r.add_term(m, c.residue());
  return r;
}

FieldForm embed_form(const FieldSpecPtr& ext, const FieldForm& f) {
  FieldForm r(ext, f.nvars(), f.degree());
  for (const auto& [m, c] : f.terms()) r.set_term(m, embed_in_extension(ext, c));
  return r;
}

FieldForm frobenius_form(const FieldForm& f, int64_t power) {
  FieldForm r(f.spec(), f.nvars(), f.degree());
  for (const auto& [m, c] : f.terms()) r.set_term(m, frobenius(c, power));
  return r;
}

// ---------------------------------------------------------------------------
// Field-matrix helpers

Mat<FieldElement> mat_inverse(const Mat<FieldElement>& a, const FieldSpecPtr& spec) {
  size_t n = a.size();
  Mat<FieldElement> work = a;
  Mat<FieldElement> inv(n, std::vector<FieldElement>(n, FieldElement::zero(spec)));
  for (size_t i = 0; i < n; ++i) inv[i][i] = FieldElement::one(spec);
  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    while (pivot < n && work[pivot][col].is_zero()) ++pivot;
    if (pivot == n) throw NotUnit("matrix is singular");
    std::swap(work[pivot], work[col]);
    std::swap(inv[pivot], inv[col]);
    FieldElement pinv = work[col][col].inverse();
    for (size_t j = 0; j < n; ++j) {
      work[col][j] = work[col][j] * pinv;
      inv[col][j] = inv[col][j] * pinv;
    }
    for (size_t r = 0; r < n; ++r) {
      if (r == col || work[r][col].is_zero()) continue;
      FieldElement factor = work[r][col];
      for (size_t j = 0; j < n; ++j) {
        work[r][j] = work[r][j] - factor * work[col][j];
        inv[r][j] = inv[r][j] - factor * inv[col][j];
      }
    }
  }
  return inv;
}

size_t mat_rank(Mat<FieldElement> a) {
  if (a.empty()) return 0;
  size_t rows = a.size(), cols = a[0].size();
  size_t rank = 0;
  for (size_t col = 0; col < cols && rank < rows; ++col) {
    size_t pivot = rank;
    while (pivot < rows && a[pivot][col].is_zero()) ++pivot;
    if (pivot == rows) continue;
    std::swap(a[pivot], a[rank]);
    FieldElement pinv = a[rank][col].inverse();
    for (size_t j = col; j < cols; ++j) a[rank][j] = a[rank][j] * pinv;
    for (size_t r = 0; r < rows; ++r) {
      if (r == rank || a[r][col].is_zero()) continue;
      FieldElement f = a[r][col];
      for (size_t j = col; j < cols; ++j) a[r][j] = a[r][j] - f * a[rank][j];
    }
    ++rank;
  }
  return rank;
}

std::vector<std::vector<FieldElement>> mat_kernel(Mat<FieldElement> a, const FieldSpecPtr& spec) {
  if (a.empty()) return {};
  size_t rows = a.size(), cols = a[0].size();
  std::vector<size_t> pivot_col;
  size_t rank = 0;
  for (size_t col = 0; col < cols && rank < rows; ++col) {
    size_t pivot = rank;
    while (pivot < rows && a[pivot][col].is_zero()) ++pivot;
    if (pivot == rows) continue;
    std::swap(a[pivot], a[rank]);
    FieldElement pinv = a[rank][col].inverse();
    for (size_t j = col; j < cols; ++j) a[rank][j] = a[rank][j] * pinv;
    for (size_t r = 0; r < rows; ++r) {
      if (r == rank || a[r][col].is_zero()) continue;
      FieldElement f = a[r][col];
      for (size_t j = col; j < cols; ++j) a[r][j] = a[r][j] - f * a[rank][j];
    }
    pivot_col.push_back(col);
    ++rank;
  }
  std::vector<bool> is_pivot(cols, false);
  for (size_t c : pivot_col) is_pivot[c] = true;
  std::vector<std::vector<FieldElement>> basis;
  for (size_t free = 0; free < cols; ++free) {
    if (is_pivot[free]) continue;
    std::vector<FieldElement> v(cols, FieldElement::zero(spec));
    v[free] = FieldElement::one(spec);
    for (size_t r = 0; r < rank; ++r) v[pivot_col[r]] = -a[r][free];
    basis.push_back(std::move(v));
  }
  return basis;
}

// ---------------------------------------------------------------------------
// Linear changes over the series ring

LinearChange LinearChange::identity(const FieldSpecPtr& spec, size_t n) {
  LinearChange c;
  c.m.assign(n, std::vector<Series>(n, Series::exact_zero(spec)));
  for (size_t i = 0; i < n; ++i) c.m[i][i] = Series::one(spec);
  return c;
}

LinearChange LinearChange::from_field_matrix(const Mat<FieldElement>& a) {
  LinearChange c;
  c.m.reserve(a.size());
  for (const auto& row : a) {
    std::vector<Series> r;
    r.reserve(row.size());
    for (const auto& x : row) r.push_back(Series::constant(x));
    c.m.push_back(std::move(r));
  }
  return c;
}

Series LinearChange::determinant(const FieldSpecPtr& spec) const {
  return det(m, spec);
}

bool LinearChange::is_unimodular(const FieldSpecPtr& spec) const {
  Series d = determinant(spec);
  Valuation v = d.valuation();
  return v.is_finite() && v.finite_value() == 0;
}

LinearChange LinearChange::compose(const LinearChange& then, const FieldSpecPtr& spec) const {
  // first apply *this (X = M Y), then `then` (Y = N Z): X = (M N) Z
  size_t n = dim();
  if (then.dim() != n) throw Error("composing linear changes of different dimension");
  LinearChange r;
  r.m.assign(n, std::vector<Series>(n, Series::exact_zero(spec)));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      Series acc = Series::exact_zero(spec);
      for (size_t k = 0; k < n; ++k) acc = acc + m[i][k] * then.m[k][j];
      r.m[i][j] = acc;
    }
  return r;
}

HomogForm apply_linear(const HomogForm& f, const LinearChange& a) {
  if (a.dim() != f.nvars()) throw Error("linear change dimension mismatch");
  std::vector<HomogForm> images;
  images.reserve(f.nvars());
  for (size_t i = 0; i < f.nvars(); ++i) {
    HomogForm img(f.spec(), f.nvars(), 1);
    for (size_t j = 0; j < f.nvars(); ++j)
      img.set_term(Monomial::power(f.nvars(), j, 1), a.m[i][j]);
    images.push_back(std::move(img));
  }
  return f.substituted(images);
}

FieldForm apply_linear_field(const FieldForm& f, const Mat<FieldElement>& a) {
  if (a.size() != f.nvars()) throw Error("linear change dimension mismatch");
  std::vector<FieldForm> images;
  images.reserve(f.nvars());
  for (size_t i = 0; i < f.nvars(); ++i) {
    FieldForm img(f.spec(), f.nvars(), 1);
    for (size_t j = 0; j < f.nvars(); ++j) img.set_term(Monomial::power(f.nvars(), j, 1), a[i][j]);
    images.push_back(std::move(img));
  }
  return f.substituted(images);
}

HomogForm weighted_scale(const HomogForm& f, const std::vector<int64_t>& w) {
  if (w.size() != f.nvars()) throw Error("weight system arity mismatch");
  HomogForm r(f.spec(), f.nvars(), f.degree());
  for (const auto& [m, c] : f.terms()) {
    int64_t shift = 0;
    for (size_t i = 0; i < w.size(); ++i) shift += (int64_t)m[i] * w[i];
    r.set_term(m, c.t_shift(shift));
  }
  return r;
}

HomogForm base_change_form(const HomogForm& f, uint32_t e) {
  HomogForm r(f.spec(), f.nvars(), f.degree());
  for (const auto& [m, c] : f.terms()) r.set_term(m, c.base_change(e));
  return r;
}

HomogForm t_shift_form(const HomogForm& f, int64_t e) {
  HomogForm r(f.spec(), f.nvars(), f.degree());
  for (const auto& [m, c] : f.terms()) r.set_term(m, c.t_shift(e));
  return r;
}

// ---------------------------------------------------------------------------
// Pencil wedge table

std::map<WedgeKey, Series> pencil_wedge(const HomogForm& f, const HomogForm& g) {
  if (f.nvars() != g.nvars() || f.degree() != g.degree())
    throw Error("pencil wedge needs two forms of the same shape");
  std::vector<Monomial> support;
  {
    std::map<Monomial, bool, MonomialOrder> seen;
    for (const auto& [m, c] : f.terms()) {
      (void)c;
      seen[m] = true;
    }
    for (const auto& [m, c] : g.terms()) {
      (void)c;
      seen[m] = true;
    }
    for (const auto& [m, b] : seen) {
      (void)b;
      support.push_back(m);
    }
  }
  std::map<WedgeKey, Series> r;
  for (size_t a = 0; a < support.size(); ++a) {
    for (size_t b = a + 1; b < support.size(); ++b) {
      const Monomial& i = support[a];
      const Monomial& j = support[b];
      Series v = f.coefficient(i) * g.coefficient(j) - f.coefficient(j) * g.coefficient(i);
      if (!v.is_certified_zero()) r.emplace(WedgeKey{i, j}, std::move(v));
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Univariate utilities over a field

UnivPoly univ_trim(UnivPoly a) {
  while (!a.empty() && a.back().is_zero()) a.pop_back();
  return a;
}

UnivPoly univ_mul(const UnivPoly& a, const UnivPoly& b, const FieldSpecPtr& spec) {
  if (a.empty() || b.empty()) return {};
  UnivPoly r(a.size() + b.size() - 1, FieldElement::zero(spec));
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].is_zero()) continue;
    for (size_t j = 0; j < b.size(); ++j) r[i + j] = r[i + j] + a[i] * b[j];
  }
  return univ_trim(std::move(r));
}

std::pair<UnivPoly, UnivPoly> univ_divmod(UnivPoly a, const UnivPoly& b0, const FieldSpecPtr& spec) {
  UnivPoly b = univ_trim(b0);
  a = univ_trim(std::move(a));
  if (b.empty()) throw Error("univariate division by zero");
  FieldElement lead_inv = b.back().inverse();
  UnivPoly q;
  if (a.size() >= b.size()) q.assign(a.size() - b.size() + 1, FieldElement::zero(spec));
  while (a.size() >= b.size() && !a.empty()) {
    FieldElement c = a.back() * lead_inv;
    size_t shift = a.size() - b.size();
    if (!c.is_zero()) {
      q[shift] = c;
      for (size_t i = 0; i < b.size(); ++i) a[i + shift] = a[i + shift] - b[i] * c;
    }
    a.pop_back();
    a = univ_trim(std::move(a));
  }
  return {univ_trim(std::move(q)), std::move(a)};
}

UnivPoly univ_gcd(UnivPoly a, UnivPoly b, const FieldSpecPtr& spec) {
  a = univ_trim(std::move(a));
  b = univ_trim(std::move(b));
  while (!b.empty()) {
    UnivPoly r = univ_divmod(a, b, spec).second;
    a = std::move(b);
    b = std::move(r);
  }
  if (!a.empty()) {
    FieldElement inv = a.back().inverse();
    for (auto& c : a) c = c * inv;
  }
  return a;
}

UnivPoly binary_to_univ(const FieldForm& b) {
  if (b.nvars() != 2) throw Error("binary form expected");
  UnivPoly p(b.degree() + 1, FieldElement::zero(b.spec()));
  for (const auto& [m, c] : b.terms()) p[m[0]] = c;
  return univ_trim(std::move(p));
}

FieldForm univ_to_binary(const UnivPoly& p, const FieldSpecPtr& spec, uint32_t degree) {
  FieldForm r(spec, 2, degree);
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i].is_zero()) continue;
    if (i > degree) throw Error("univariate degree exceeds target binary degree");
    r.set_term(Monomial({(uint32_t)i, degree - (uint32_t)i}), p[i]);
  }
  return r;
}

FieldForm binary_gcd(const FieldForm& a, const FieldForm& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  const FieldSpecPtr& spec = a.spec();
  UnivPoly pa = binary_to_univ(a), pb = binary_to_univ(b);
  uint32_t ua = a.degree() - (uint32_t)(pa.size() - 1);  // multiplicity of u in a
  uint32_t ub = b.degree() - (uint32_t)(pb.size() - 1);
  UnivPoly g = univ_gcd(pa, pb, spec);  // common s-powers ride along as x-powers
  uint32_t u_common = std::min(ua, ub);
  return univ_to_binary(g, spec, (uint32_t)(g.size() - 1) + u_common);
}

// ---------------------------------------------------------------------------
// Maps P^1 -> P^n

bool BinaryCurveMap::is_primitive() const {
  FieldForm g;
  bool any = false;
  for (const auto& c : components) {
    if (c.is_zero()) continue;
    g = any ? binary_gcd(g, c) : c;
    any = true;
    if (g.degree() == 0) return true;
  }
  return any && g.degree() == 0;
}

std::vector<FieldElement> BinaryCurveMap::evaluate(const FieldElement& s,
                                                   const FieldElement& u) const {
  std::vector<FieldElement> r;
  r.reserve(components.size());
  for (const auto& c : components) r.push_back(c.evaluate({s, u}));
  return r;
}

FieldForm compose_line(const FieldForm& f, const BinaryCurveMap& line) {
  if (line.components.size() != f.nvars())
    throw Error("curve map arity does not match the form");
  return f.substituted(line.components);
}

// ---------------------------------------------------------------------------
// Scheme handles

std::string SchemeHandle::describe() const {
  std::ostringstream os;
  os << equations.size() << " equations in P^" << (nvars ? nvars - 1 : 0);
  return os.str();
}

SchemeHandle scheme_of(const std::vector<FieldForm>& eqs) {
  if (eqs.empty()) throw Error("scheme needs at least one equation");
  SchemeHandle h;
  h.spec = eqs[0].spec();
  h.nvars = eqs[0].nvars();
  for (const auto& e : eqs) {
    if (e.nvars() != h.nvars) throw Error("scheme equations must share variables");
    if (!e.is_zero()) h.equations.push_back(e);
  }
  return h;
}

SchemeHandle jacobian_scheme(const std::vector<FieldForm>& eqs) {
  if (eqs.empty() || eqs.size() > 2)
    throw UnsupportedCase("jacobian scheme supports one form or a pair");
  SchemeHandle h;
  h.spec = eqs[0].spec();
  h.nvars = eqs[0].nvars();
  for (const auto& e : eqs) {
    if (e.nvars() != h.nvars) throw Error("scheme equations must share variables");
    if (!e.is_zero()) h.equations.push_back(e);
  }
  if (eqs.size() == 1) {
    for (size_t i = 0; i < h.nvars; ++i) {
      FieldForm d = eqs[0].derivative(i);
      if (!d.is_zero()) h.equations.push_back(std::move(d));
    }
  } else {
    // rank <= 1 locus on the pair: all 2x2 minors of the Jacobian
    std::vector<FieldForm> df, dg;
    for (size_t i = 0; i < h.nvars; ++i) {
      df.push_back(eqs[0].derivative(i));
      dg.push_back(eqs[1].derivative(i));
    }
    for (size_t i = 0; i < h.nvars; ++i)
      for (size_t j = i + 1; j < h.nvars; ++j) {
        FieldForm minor = df[i] * dg[j] - df[j] * dg[i];
        if (!minor.is_zero()) h.equations.push_back(std::move(minor));
      }
  }
  return h;
}

}  // namespace ssm
