#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <utility>

#include "ssm/errors.hpp"
#include "ssm/fiber.hpp"
#include "ssm/stab.hpp"

namespace ssm {

// ---------------------------------------------------------------------------
// Weight systems
// ---------------------------------------------------------------------------

WeightSystem::WeightSystem(std::vector<int64_t> weights) : w(std::move(weights)) {
  if (w.empty()) throw Error("weight system needs at least one weight");
  int64_t mn = w[0];
  for (int64_t x : w) {
    if (x < 0) throw Error("weight system entries must be nonnegative");
    mn = std::min(mn, x);
  }
  if (mn > 0) {
    for (int64_t& x : w) x -= mn;
  }
}

WeightSystem WeightSystem::zero(size_t n) { return WeightSystem(std::vector<int64_t>(n, 0)); }

int64_t WeightSystem::sum() const {
  int64_t s = 0;
  for (int64_t x : w) s += x;
  return s;
}

std::string WeightSystem::describe() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < w.size(); ++i) {
    if (i) os << ",";
    os << w[i];
  }
  os << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// Multiplicities
// ---------------------------------------------------------------------------

namespace {

// One term's contribution to a weighted minimum: either an exact value or a
// lower bound coming from a truncated coefficient.
struct TermBound {
  bool finite = true;
  int64_t v = 0;  // exact valuation or certified lower bound
  std::vector<uint32_t> e;
};

std::vector<TermBound> single_bounds(const HomogForm& f) {
  std::vector<TermBound> out;
  for (const auto& [m, c] : f.terms()) {
    Valuation val = c.valuation();
    if (val.is_infinite()) continue;
    TermBound tb;
    tb.finite = val.is_finite();
    tb.v = val.is_finite() ? val.finite_value() : val.v;
    tb.e = m.exps();
    out.push_back(std::move(tb));
  }
  return out;
}

std::vector<TermBound> wedge_bounds(const HomogForm& f, const HomogForm& g) {
  std::vector<TermBound> out;
  for (const auto& [key, c] : pencil_wedge(f, g)) {
    Valuation val = c.valuation();
    if (val.is_infinite()) continue;
    TermBound tb;
    tb.finite = val.is_finite();
    tb.v = val.is_finite() ? val.finite_value() : val.v;
    const auto& ei = key.i.exps();
    const auto& ej = key.j.exps();
    tb.e.resize(ei.size());
    for (size_t k = 0; k < ei.size(); ++k) tb.e[k] = ei[k] + ej[k];
    out.push_back(std::move(tb));
  }
  return out;
}

int64_t dot_weights(const std::vector<uint32_t>& e, const std::vector<int64_t>& w) {
  int64_t s = 0;
  for (size_t i = 0; i < e.size(); ++i) s += static_cast<int64_t>(e[i]) * w[i];
  return s;
}

// Certified minimum of v + <e, W> over the bounds; throws when a truncated
// term could undercut the best exact one.
int64_t certified_min(const std::vector<TermBound>& terms, const WeightSystem& w,
                      const char* what) {
  bool have_exact = false;
  int64_t best_exact = 0;
  bool have_bound = false;
  int64_t best_bound = 0;
  for (const auto& t : terms) {
    int64_t c = t.v + dot_weights(t.e, w.w);
    if (t.finite) {
      if (!have_exact || c < best_exact) best_exact = c, have_exact = true;
    } else {
      if (!have_bound || c < best_bound) best_bound = c, have_bound = true;
    }
  }
  if (!have_exact) {
    std::ostringstream os;
    os << what << ": no certified-finite term at working precision";
    throw PrecisionExhausted(os.str());
  }
  if (have_bound && best_bound < best_exact) {
    std::ostringstream os;
    os << what << ": a truncated coefficient could fall below the certified minimum "
       << best_exact;
    throw PrecisionExhausted(os.str());
  }
  return best_exact;
}

// Decide mult <= num/den without requiring the exact mult: +1 pass, -1 fail;
// throws when the truncation leaves the comparison open.
int bounded_compare(const std::vector<TermBound>& terms, const std::vector<int64_t>& w,
                    int64_t num, int64_t den, const char* what) {
  bool have_any = false;
  int64_t ub = 0;  // min over exact terms
  bool have_ub = false;
  int64_t lb = 0;  // min over all terms (bounds included)
  for (const auto& t : terms) {
    int64_t c = t.v + dot_weights(t.e, w);
    if (t.finite && (!have_ub || c < ub)) ub = c, have_ub = true;
    if (!have_any || c < lb) lb = c, have_any = true;
  }
  if (!have_any) {
    std::ostringstream os;
    os << what << ": all terms vanish to working precision";
    throw PrecisionExhausted(os.str());
  }
  if (have_ub && ub * den <= num) return +1;  // mult <= ub <= threshold
  if (lb * den > num) return -1;              // mult >= lb > threshold
  std::ostringstream os;
  os << what << ": truncation leaves the semistability comparison open";
  throw PrecisionExhausted(os.str());
}

}  // namespace

int64_t mult_w(const HomogForm& f, const WeightSystem& w) {
  if (w.size() != f.nvars()) throw Error("mult_w: weight count must match variable count");
  std::vector<TermBound> terms = single_bounds(f);
  if (terms.empty()) throw Error("mult_w: form is certified zero");
  return certified_min(terms, w, "mult_w");
}

int64_t mult_w_pencil(const HomogForm& f, const HomogForm& g, const WeightSystem& w) {
  if (f.nvars() != g.nvars() || f.degree() != g.degree())
    throw Error("mult_w_pencil: members must share shape");
  if (w.size() != f.nvars()) throw Error("mult_w_pencil: weight count must match variable count");
  std::vector<TermBound> terms = wedge_bounds(f, g);
  if (terms.empty())
    throw NotCompleteIntersection("mult_w_pencil: wedge table vanishes (proportional members)");
  return certified_min(terms, w, "mult_w_pencil");
}

// ---------------------------------------------------------------------------
// Semistability inequality
// ---------------------------------------------------------------------------

std::string WeightCheck::describe() const {
  std::ostringstream os;
  os << "mult " << mult << " vs threshold " << threshold_num << "/" << threshold_den << ": "
     << (pass ? (boundary ? "pass (boundary)" : "pass") : "fail");
  return os.str();
}

namespace {

WeightCheck finish_check(int64_t mult, int64_t num, int64_t den) {
  WeightCheck c;
  c.mult = mult;
  c.threshold_num = num;
  c.threshold_den = den;
  c.pass = mult * den <= num;
  c.boundary = mult * den == num;
  return c;
}

}  // namespace

WeightCheck check_weight_single(const HomogForm& f, const WeightSystem& w) {
  int64_t num = static_cast<int64_t>(f.degree()) * w.sum();
  int64_t den = static_cast<int64_t>(f.nvars());
  return finish_check(mult_w(f, w), num, den);
}

WeightCheck check_weight_pencil(const HomogForm& f, const HomogForm& g, const WeightSystem& w) {
  int64_t num = 2 * static_cast<int64_t>(f.degree()) * w.sum();
  int64_t den = static_cast<int64_t>(f.nvars());
  return finish_check(mult_w_pencil(f, g, w), num, den);
}

// ---------------------------------------------------------------------------
// Destabilizer witnesses
// ---------------------------------------------------------------------------

DestabilizerWitness make_destabilizer_witness(const ModelState& state, const LinearChange& change,
                                              const WeightSystem& weights, std::string origin) {
  std::vector<HomogForm> moved;
  for (const auto& eq : state.equations) moved.push_back(apply_linear(eq, change));
  WeightCheck c = state.is_pencil() ? check_weight_pencil(moved[0], moved[1], weights)
                                    : check_weight_single(moved[0], weights);
  if (c.pass) {
    throw NotDestabilizing("witness passes the semistability inequality: " + c.describe());
  }
  return DestabilizerWitness{change, weights, c, std::move(origin)};
}

// ---------------------------------------------------------------------------
// Destabilizer search
// ---------------------------------------------------------------------------

namespace {

struct Candidate {
  Mat<FieldElement> m;  // substitution matrix X = m * Y
  std::string origin;
};

std::string matrix_key(const Mat<FieldElement>& m) {
  std::ostringstream os;
  for (const auto& row : m)
    for (const auto& x : row) os << x.index() << ",";
  return os.str();
}

// Invertible matrix whose trailing columns span the given vectors.
Mat<FieldElement> trailing_span_matrix(const std::vector<std::vector<FieldElement>>& vecs,
                                       const FieldSpecPtr& spec, size_t nv) {
  Mat<FieldElement> rows(vecs);
  std::vector<std::vector<FieldElement>> cut = mat_kernel(rows, spec);
  std::vector<FieldForm> forms;
  for (const auto& k : cut) {
    FieldForm ell(spec, nv, 1);
    for (size_t j = 0; j < nv; ++j) {
      if (!k[j].is_zero()) ell.set_term(Monomial::power(nv, j, 1), k[j]);
    }
    forms.push_back(std::move(ell));
  }
  Mat<FieldElement> t = complete_to_basis(forms, spec, nv);
  return mat_inverse(t, spec);
}

// Project every coefficient one tower level down; nullopt when any escapes.
std::optional<FieldForm> project_form(const FieldForm& f, const FieldSpecPtr& base) {
  FieldForm r(base, f.nvars(), f.degree());
  for (const auto& [m, c] : f.terms()) {
    auto pr = project_to_base(c);
    if (!pr) return std::nullopt;
    r.set_term(m, *pr);
  }
  return r;
}

class CandidateSet {
 public:
  CandidateSet(FieldSpecPtr spec, size_t nv) : spec_(std::move(spec)), nv_(nv) {
    Mat<FieldElement> id(nv_, std::vector<FieldElement>(nv_, FieldElement::zero(spec_)));
    for (size_t i = 0; i < nv_; ++i) id[i][i] = FieldElement::one(spec_);
    add(id, "identity");
  }

  void add(const Mat<FieldElement>& m, const std::string& origin) {
    std::string key = matrix_key(m);
    if (!seen_.insert(key).second) return;
    out_.push_back(Candidate{m, origin});
  }

  // Coordinate change placing the given independent linear forms first.
  void add_leading_forms(const std::vector<FieldForm>& forms, const std::string& origin) {
    try {
      Mat<FieldElement> t = complete_to_basis(forms, spec_, nv_);
      add(mat_inverse(t, spec_), origin);
    } catch (const Error&) {
      // dependent or malformed input: not a usable candidate
    }
  }

  // Coordinate change placing the span of the vectors on the trailing axes.
  void add_trailing_span(const std::vector<std::vector<FieldElement>>& vecs,
                         const std::string& origin) {
    if (vecs.empty()) return;
    try {
      add(trailing_span_matrix(vecs, spec_, nv_), origin);
    } catch (const Error&) {
    }
  }

  const std::vector<Candidate>& all() const { return out_; }

 private:
  FieldSpecPtr spec_;
  size_t nv_;
  std::set<std::string> seen_;
  std::vector<Candidate> out_;
};

// Rational singular points of the residue scheme, each moved to the last
// coordinate axis.
void add_singular_points(CandidateSet& cs, const SchemeHandle& sing) {
  constexpr size_t kPointCap = 32;
  std::vector<std::vector<FieldElement>> pts;
  try {
    pts = collect_points(sing, 1, kPointCap);
  } catch (const Error&) {
    return;  // enumeration too large: skip this family of candidates
  }
  for (const auto& p : pts) {
    std::vector<FieldElement> base;
    bool ok = true;
    for (const auto& x : p) {
      auto pr = project_to_base(x);
      if (!pr) {
        ok = false;
        break;
      }
      base.push_back(*pr);
    }
    if (ok) cs.add_trailing_span({base}, "singular point to the trailing coordinate");
  }
}

void add_quadric_candidates(CandidateSet& cs, const FieldForm& res) {
  FieldSpecPtr spec = res.spec();
  Mat<FieldElement> gm = gram_matrix(res);
  auto ker = mat_kernel(gm, spec);
  if (!ker.empty()) cs.add_trailing_span(ker, "Gram kernel to the trailing coordinates");
  if (mat_rank(gm) <= 2 && !res.is_zero()) {
    for (const auto& factor : split_rank2_quadric(res)) {
      if (!form_is_rational(factor)) continue;
      if (auto base = project_form(normalize_linear(factor), spec)) {
        cs.add_leading_forms({*base}, "linear factor to the leading coordinate");
      }
    }
  }
}

void add_cubic_candidates(CandidateSet& cs, const FieldForm& res) {
  FieldSpecPtr spec = res.spec();
  auto vk = vertex_kernel(res);
  if (!vk.empty()) cs.add_trailing_span(vk, "vertex directions to the trailing coordinates");
  if (auto ell = rational_linear_factor(res)) {
    cs.add_leading_forms({*ell}, "rational linear factor to the leading coordinate");
  }
  try {
    FiberReport rep = classify_cubic(res);
    if (rep.nonnormal_linear_component) {
      cs.add_leading_forms(*rep.nonnormal_linear_component,
                           "singular linear component to the leading coordinates");
    }
  } catch (const Error&) {
  }
  add_singular_points(cs, jacobian_scheme({res}));
}

void add_pencil_candidates(CandidateSet& cs, const FieldForm& rf, const FieldForm& rg) {
  FieldSpecPtr spec = rf.spec();
  size_t nv = rf.nvars();

  // Rational linear factors of degenerate members over the base.
  uint64_t q = spec->order();
  std::vector<std::pair<FieldElement, FieldElement>> pts;
  for (uint64_t i = 0; i < q; ++i) {
    pts.emplace_back(FieldElement::one(spec), FieldElement::from_index(spec, static_cast<uint32_t>(i)));
  }
  pts.emplace_back(FieldElement::zero(spec), FieldElement::one(spec));
  for (const auto& [lam, mu] : pts) {
    FieldForm mem = rf.scaled(lam) + rg.scaled(mu);
    if (mem.is_zero()) continue;
    if (mat_rank(gram_matrix(mem)) > 2) continue;
    for (const auto& factor : split_rank2_quadric(mem)) {
      if (!form_is_rational(factor)) continue;
      if (auto base = project_form(normalize_linear(factor), spec)) {
        cs.add_leading_forms({*base},
                             "linear factor of a degenerate member to the leading coordinate");
      }
    }
  }

  // Common Gram kernel (the vertex of the whole pencil).
  Mat<FieldElement> a = gram_matrix(rf);
  Mat<FieldElement> b = gram_matrix(rg);
  Mat<FieldElement> stacked;
  for (const auto& row : a) stacked.push_back(row);
  for (const auto& row : b) stacked.push_back(row);
  auto ker = mat_kernel(stacked, spec);
  if (!ker.empty()) cs.add_trailing_span(ker, "common Gram kernel to the trailing coordinates");

  try {
    FiberReport rep = classify_pencil(rf, rg);
    if (rep.nonnormal_linear_component) {
      cs.add_leading_forms(*rep.nonnormal_linear_component,
                           "singular linear component to the leading coordinates");
    }
  } catch (const Error&) {
  }
  (void)nv;
  add_singular_points(cs, jacobian_scheme({rf, rg}));
}

// Odometer over weight vectors in {0..bound}^n, lexicographic order (first
// entry most significant).  Returns false when the enumeration wraps.
bool next_weights(std::vector<int64_t>& w, int64_t bound) {
  for (size_t i = w.size(); i-- > 0;) {
    if (w[i] < bound) {
      ++w[i];
      for (size_t j = i + 1; j < w.size(); ++j) w[j] = 0;
      return true;
    }
  }
  return false;
}

}  // namespace

StabilityVerdict search_destabilizer(const ModelState& state, uint64_t budget) {
  const auto& eqs = state.equations;
  if (eqs.empty() || eqs.size() > 2) throw Error("search needs one or two equations");
  FieldSpecPtr spec = state.spec();
  size_t nv = state.nvars();
  int64_t d = state.degree();

  CandidateSet cs(spec, nv);
  try {
    std::vector<FieldForm> residues;
    bool any_zero = false;
    for (const auto& eq : eqs) {
      residues.push_back(residue_form(eq));
      if (residues.back().is_zero()) any_zero = true;
    }
    // With a vanishing residue the zero weight system already destabilizes;
    // geometric candidates need a visible central fiber.
    if (!any_zero) {
      if (eqs.size() == 2) {
        add_pencil_candidates(cs, residues[0], residues[1]);
      } else if (d == 2) {
        add_quadric_candidates(cs, residues[0]);
      } else if (d == 3) {
        add_cubic_candidates(cs, residues[0]);
      }
    }
  } catch (const PrecisionExhausted&) {
    // Central fiber not visible at working precision: fall back to the
    // identity change; the weight checks below report their own precision
    // failures where the comparison actually matters.
  }

  uint64_t checks = 0;
  auto spend = [&]() {
    if (++checks > budget) {
      std::ostringstream os;
      os << "destabilizer search budget of " << budget << " weight checks exhausted";
      throw BudgetExceeded(os.str());
    }
  };

  for (const auto& cand : cs.all()) {
    LinearChange change = LinearChange::from_field_matrix(cand.m);
    std::vector<HomogForm> moved;
    for (const auto& eq : eqs) moved.push_back(apply_linear(eq, change));
    std::vector<TermBound> terms =
        eqs.size() == 2 ? wedge_bounds(moved[0], moved[1]) : single_bounds(moved[0]);
    if (terms.empty()) {
      if (eqs.size() == 2)
        throw NotCompleteIntersection("search_destabilizer: wedge table vanishes");
      throw Error("search_destabilizer: equation is certified zero");
    }
    int64_t den = static_cast<int64_t>(nv);
    int64_t dd = eqs.size() == 2 ? 2 * d : d;

    // Phase one: 0/1 weight systems; phase two: the full {0..d} cube.
    for (int phase = 0; phase < 2; ++phase) {
      int64_t bound = phase == 0 ? 1 : d;
      if (phase == 1 && d <= 1) break;
      std::vector<int64_t> w(nv, 0);
      do {
        int64_t mx = *std::max_element(w.begin(), w.end());
        int64_t mn = *std::min_element(w.begin(), w.end());
        if (mn != 0) continue;              // normalized representatives only
        if (phase == 1 && mx <= 1) continue;  // already covered in phase one
        spend();
        int64_t num = dd * std::accumulate(w.begin(), w.end(), int64_t{0});
        if (bounded_compare(terms, w, num, den, "search_destabilizer") < 0) {
          StabilityVerdict v;
          v.semistable_against_search = false;
          v.witness = make_destabilizer_witness(state, change, WeightSystem(w), cand.origin);
          std::ostringstream os;
          os << "stopped at the first failure after " << checks << " weight checks";
          v.searched = os.str();
          return v;
        }
      } while (next_weights(w, bound));
    }
  }

  StabilityVerdict v;
  v.semistable_against_search = true;
  std::ostringstream os;
  os << "exhausted weight systems with entries in {0.." << d << "} across " << cs.all().size()
     << " coordinate changes (" << checks << " checks)";
  v.searched = os.str();
  return v;
}

// ---------------------------------------------------------------------------
// Invariant valuations
// ---------------------------------------------------------------------------

Mat<Series> gram_series(const HomogForm& q) {
  if (q.degree() != 2) throw Error("gram_series: form must be a quadric");
  FieldSpecPtr spec = q.spec();
  if (spec->p() == 2) throw UnsupportedCase("gram_series: characteristic 2 not supported");
  size_t nv = q.nvars();
  FieldElement half = FieldElement::from_int(spec, 2).inverse();
  Mat<Series> a(nv, std::vector<Series>(nv, Series::exact_zero(spec)));
  for (size_t i = 0; i < nv; ++i) {
    for (size_t j = i; j < nv; ++j) {
      Monomial m = Monomial::power(nv, i, 1) * Monomial::power(nv, j, 1);
      Series c = q.coefficient(m);
      if (i == j) {
        a[i][i] = c;
      } else {
        a[i][j] = a[j][i] = c.scaled(half);
      }
    }
  }
  return a;
}

namespace {

// Dense univariate polynomial with series coefficients, for division-free
// determinants of matrices whose entries are linear in one parameter.
struct UPoly {
  std::vector<Series> c;  // little-endian

  UPoly operator+(const UPoly& o) const {
    UPoly r;
    size_t n = std::max(c.size(), o.c.size());
    for (size_t i = 0; i < n; ++i) {
      if (i < c.size() && i < o.c.size())
        r.c.push_back(c[i] + o.c[i]);
      else
        r.c.push_back(i < c.size() ? c[i] : o.c[i]);
    }
    return r;
  }
  UPoly operator-() const {
    UPoly r;
    for (const auto& x : c) r.c.push_back(-x);
    return r;
  }
  UPoly operator-(const UPoly& o) const { return *this + (-o); }
  UPoly operator*(const UPoly& o) const {
    UPoly r;
    if (c.empty() || o.c.empty()) return r;
    const FieldSpecPtr& spec = c[0].spec();
    r.c.assign(c.size() + o.c.size() - 1, Series::exact_zero(spec));
    for (size_t i = 0; i < c.size(); ++i)
      for (size_t j = 0; j < o.c.size(); ++j) r.c[i + j] = r.c[i + j] + c[i] * o.c[j];
    return r;
  }
};

}  // namespace

template <>
struct CoefOps<UPoly> {
  static UPoly zero(const FieldSpecPtr&) { return UPoly{}; }
  static UPoly one(const FieldSpecPtr& s) { return UPoly{{Series::one(s)}}; }
  static bool drop(const UPoly& p) {
    for (const auto& x : p.c)
      if (!x.is_certified_zero()) return false;
    return true;
  }
};

std::vector<Series> pencil_det_series(const HomogForm& f, const HomogForm& g) {
  if (f.nvars() != g.nvars() || f.degree() != 2 || g.degree() != 2)
    throw Error("pencil_det_series: two quadrics in common variables required");
  FieldSpecPtr spec = f.spec();
  size_t nv = f.nvars();
  Mat<Series> a = gram_series(f);
  Mat<Series> b = gram_series(g);
  // det(u a + b) as a polynomial in u; homogenizing gives det(lambda a + mu b).
  Mat<UPoly> m(nv, std::vector<UPoly>(nv));
  for (size_t i = 0; i < nv; ++i)
    for (size_t j = 0; j < nv; ++j) m[i][j] = UPoly{{b[i][j], a[i][j]}};
  UPoly p = det(m, spec);
  std::vector<Series> out(nv + 1, Series::exact_zero(spec));
  for (size_t k = 0; k < p.c.size() && k <= nv; ++k) out[k] = p.c[k];
  return out;
}

namespace {

Valuation series_valuation_or_throw(const Series& s, const char* what) {
  Valuation v = s.valuation();
  if (v.kind == Valuation::Kind::AtLeast) {
    std::ostringstream os;
    os << what << ": valuation not certified at working precision (>= " << v.v << ")";
    throw PrecisionExhausted(os.str());
  }
  return v;
}

Series embed_series(const FieldSpecPtr& ext, const Series& s) {
  std::vector<FieldElement> c;
  for (const auto& x : s.window()) c.push_back(embed_in_extension(ext, x));
  if (s.known_exact()) return Series::polynomial(ext, std::move(c));
  return Series::truncated(ext, std::move(c), s.precision());
}

int64_t binom_int(int64_t n, int64_t k) {
  if (k < 0 || k > n) return 0;
  int64_t r = 1;
  for (int64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Sylvester resultant of p (formal degree dp) and q (formal degree dq), both
// given little-endian with exactly dp+1 and dq+1 entries.
Series sylvester_resultant(const std::vector<Series>& p, const std::vector<Series>& q,
                           const FieldSpecPtr& spec) {
  size_t dp = p.size() - 1, dq = q.size() - 1;
  size_t n = dp + dq;
  Mat<Series> s(n, std::vector<Series>(n, Series::exact_zero(spec)));
  for (size_t r = 0; r < dq; ++r)
    for (size_t k = 0; k <= dp; ++k) s[r][r + k] = p[dp - k];
  for (size_t r = 0; r < dp; ++r)
    for (size_t k = 0; k <= dq; ++k) s[dq + r][r + k] = q[dq - k];
  return det(s, spec);
}

// Valuation of the discriminant of the binary form with coefficients D
// (D[k] multiplies lambda^k mu^{m-k}): factor out the t-content, move to a
// member with unit determinant by a shear, then take the univariate
// discriminant with certified-unit leading coefficient.
Valuation binary_disc_valuation(std::vector<Series> dd, const FieldSpecPtr& spec0) {
  int64_t m = static_cast<int64_t>(dd.size()) - 1;
  // t-content
  bool any_finite = false;
  int64_t v0 = 0;
  bool any_bound = false;
  int64_t b0 = 0;
  for (const auto& c : dd) {
    Valuation v = c.valuation();
    if (v.is_finite()) {
      if (!any_finite || v.finite_value() < v0) v0 = v.finite_value(), any_finite = true;
    } else if (v.kind == Valuation::Kind::AtLeast) {
      if (!any_bound || v.v < b0) b0 = v.v, any_bound = true;
    }
  }
  if (!any_finite) {
    if (any_bound) throw PrecisionExhausted("pencil determinant form vanishes to precision");
    return Valuation::infinite();  // determinant form is exactly zero
  }
  if (any_bound && b0 <= v0)
    throw PrecisionExhausted("pencil determinant content not certified at working precision");
  for (auto& c : dd) c = c.t_shift(-v0);

  // Shear (lambda, mu) -> (lambda, mu + c lambda) so the leading coefficient
  // D'_m = sum_k D_k c^{m-k} becomes a unit.
  FieldSpecPtr spec = spec0;
  std::optional<FieldElement> shift;
  for (int level = 0; level < 2 && !shift; ++level) {
    if (level == 1) {
      FieldSpecPtr ext = FieldSpec::make_extension(spec0, 2);
      std::vector<Series> lifted;
      for (const auto& c : dd) lifted.push_back(embed_series(ext, c));
      dd = std::move(lifted);
      spec = ext;
    }
    uint64_t q = spec->order();
    for (uint64_t i = 0; i < q && !shift; ++i) {
      FieldElement c = FieldElement::from_index(spec, static_cast<uint32_t>(i));
      FieldElement acc = FieldElement::zero(spec);
      FieldElement pw = FieldElement::one(spec);
      // sum_k residue(D_k) c^{m-k}, accumulated from k = m downward
      for (int64_t k = m; k >= 0; --k) {
        acc = acc + dd[k].residue() * pw;
        pw = pw * c;
      }
      if (!acc.is_zero()) shift = c;
    }
  }
  if (!shift) throw Error("binary discriminant: no unit member over the quadratic extension");

  std::vector<Series> p(m + 1, Series::exact_zero(spec));
  for (int64_t i = 0; i <= m; ++i) {
    for (int64_t k = 0; k <= i; ++k) {
      int64_t bi = binom_int(m - k, i - k);
      if (bi == 0) continue;
      FieldElement c = FieldElement::from_int(spec, bi) * shift->pow(static_cast<uint64_t>(i - k));
      p[i] = p[i] + dd[k].scaled(c);
    }
  }
  std::vector<Series> dp(m, Series::exact_zero(spec));
  for (int64_t i = 1; i <= m; ++i) dp[i - 1] = p[i].scaled(FieldElement::from_int(spec, i));

  Series res = sylvester_resultant(p, dp, spec);
  Valuation v = series_valuation_or_throw(res, "pencil discriminant");
  if (v.is_infinite()) return v;
  return Valuation::finite(v.finite_value() + 2 * (m - 1) * v0);
}

// Classical resultant of the three partial quadrics of a ternary cubic: the
// ten-by-ten determinant over the cubic monomials whose rows are the variable
// multiples of the partials plus their Jacobian determinant.
Series ternary_cubic_invariant(const HomogForm& f) {
  FieldSpecPtr spec = f.spec();
  if (spec->p() < 5)
    throw UnsupportedCase("ternary cubic invariant needs characteristic at least five");
  std::vector<HomogForm> q;
  for (size_t i = 0; i < 3; ++i) q.push_back(f.derivative(i));

  std::vector<HomogForm> rows;
  for (size_t i = 0; i < 3; ++i) {
    for (size_t v = 0; v < 3; ++v) {
      HomogForm xv(spec, 3, 1);
      xv.set_term(Monomial::power(3, v, 1), Series::one(spec));
      rows.push_back(xv * q[i]);
    }
  }
  // Jacobian determinant of the partials (a cubic).
  Mat<HomogForm> jm(3, std::vector<HomogForm>(3));
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 3; ++j) jm[i][j] = q[i].derivative(j);
  HomogForm jac = jm[0][0] * (jm[1][1] * jm[2][2] - jm[1][2] * jm[2][1]) -
                  jm[0][1] * (jm[1][0] * jm[2][2] - jm[1][2] * jm[2][0]) +
                  jm[0][2] * (jm[1][0] * jm[2][1] - jm[1][1] * jm[2][0]);
  rows.push_back(jac);

  std::vector<Monomial> basis;
  for (uint32_t a = 0; a <= 3; ++a)
    for (uint32_t b = 0; a + b <= 3; ++b)
      basis.push_back(Monomial(std::vector<uint32_t>{a, b, 3 - a - b}));
  std::sort(basis.begin(), basis.end(), [](const Monomial& x, const Monomial& y) {
    return x.before(y);
  });

  Mat<Series> m(10, std::vector<Series>(10, Series::exact_zero(spec)));
  for (size_t r = 0; r < 10; ++r)
    for (size_t c = 0; c < 10; ++c) m[r][c] = rows[r].coefficient(basis[c]);
  return det(m, spec);
}

}  // namespace

Valuation invariant_valuation(const ModelState& state) {
  const auto& eqs = state.equations;
  if (state.is_pencil()) {
    size_t nv = state.nvars();
    if (nv < 4 || nv > 8)
      throw UnsupportedCase("pencil invariant supports four to eight variables");
    return binary_disc_valuation(pencil_det_series(eqs[0], eqs[1]), state.spec());
  }
  const HomogForm& f = eqs[0];
  if (f.degree() == 2) {
    return series_valuation_or_throw(det(gram_series(f), f.spec()), "Gram determinant");
  }
  if (f.degree() == 3) {
    if (f.nvars() != 3)
      throw UnsupportedCase("cubic invariant oracle covers only three variables");
    return series_valuation_or_throw(ternary_cubic_invariant(f), "cubic discriminant");
  }
  throw UnsupportedCase("no invariant oracle for this degree");
}

}  // namespace ssm
