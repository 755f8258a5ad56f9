#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ssm/errors.hpp"
#include "ssm/fiber.hpp"
#include "ssm/model.hpp"
#include "ssm/reduce.hpp"

namespace ssm {

// ---------------------------------------------------------------------------
// Ledger steps
// ---------------------------------------------------------------------------

LedgerStep LedgerStep::linear_step(LinearChange a) {
  LedgerStep s;
  s.kind = Kind::Linear;
  s.linear = std::move(a);
  return s;
}

LedgerStep LedgerStep::weighted_step(std::vector<int64_t> w, std::vector<int64_t> shifts) {
  LedgerStep s;
  s.kind = Kind::WeightedScale;
  s.weights = std::move(w);
  s.shifts = std::move(shifts);
  return s;
}

LedgerStep LedgerStep::recombine_step(bool swapped, Series a, int64_t v) {
  LedgerStep s;
  s.kind = Kind::Recombine;
  s.swapped = swapped;
  s.a = std::move(a);
  s.v = v;
  return s;
}

LedgerStep LedgerStep::base_change_step(uint32_t e) {
  if (e < 1) throw Error("base change needs e >= 1");
  LedgerStep s;
  s.kind = Kind::BaseChange;
  s.e = e;
  return s;
}

std::string LedgerStep::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Linear:
      os << "linear change on " << linear.dim() << " variables";
      break;
    case Kind::WeightedScale: {
      os << "weighted scale (";
      for (size_t i = 0; i < weights.size(); ++i) {
        if (i) os << ",";
        os << weights[i];
      }
      os << ") with t-shifts (";
      for (size_t i = 0; i < shifts.size(); ++i) {
        if (i) os << ",";
        os << -shifts[i];
      }
      os << ")";
      break;
    }
    case Kind::Recombine:
      os << "recombine:";
      if (swapped) os << " swap;";
      os << " second <- t^-" << v << " (second - (" << a.describe() << ") * first)";
      break;
    case Kind::BaseChange:
      os << "base change t = s^" << e;
      break;
  }
  return os.str();
}

std::vector<HomogForm> apply_step(const std::vector<HomogForm>& eqs, const LedgerStep& s) {
  std::vector<HomogForm> out;
  switch (s.kind) {
    case LedgerStep::Kind::Linear:
      for (const auto& f : eqs) out.push_back(apply_linear(f, s.linear));
      break;
    case LedgerStep::Kind::WeightedScale: {
      if (s.shifts.size() != eqs.size())
        throw Error("weighted step needs one t-shift per equation");
      for (size_t i = 0; i < eqs.size(); ++i) {
        out.push_back(t_shift_form(weighted_scale(eqs[i], s.weights), -s.shifts[i]));
      }
      break;
    }
    case LedgerStep::Kind::Recombine: {
      if (eqs.size() != 2) throw Error("recombine step needs exactly two equations");
      HomogForm first = eqs[0], second = eqs[1];
      if (s.swapped) std::swap(first, second);
      out.push_back(first);
      out.push_back(t_shift_form(second - first.scaled(s.a), -s.v));
      break;
    }
    case LedgerStep::Kind::BaseChange:
      for (const auto& f : eqs) out.push_back(base_change_form(f, s.e));
      break;
  }
  return out;
}

std::vector<HomogForm> replay_ledger(std::vector<HomogForm> eqs, const ChangeLedger& ledger) {
  for (const auto& s : ledger.steps) eqs = apply_step(eqs, s);
  return eqs;
}

// ---------------------------------------------------------------------------
// Model states
// ---------------------------------------------------------------------------

ModelState ModelState::single(HomogForm f) {
  if (!f.valid()) throw Error("model state needs a valid form");
  if (f.is_zero()) throw Error("model state needs a nonzero form");
  ModelState st;
  st.equations.push_back(std::move(f));
  return st;
}

ModelState ModelState::pencil(HomogForm f, HomogForm g) {
  if (!f.valid() || !g.valid()) throw Error("model state needs valid forms");
  if (f.nvars() != g.nvars() || f.degree() != g.degree())
    throw Error("pencil members must share shape");
  if (f.degree() != 2) throw UnsupportedCase("pencil model states are pencils of quadrics");
  if (residue_form(f).is_zero() && residue_form(g).is_zero())
    throw Error("pencil model state needs a residue member");
  ModelState st;
  st.equations.push_back(std::move(f));
  st.equations.push_back(std::move(g));
  return st;
}

// ---------------------------------------------------------------------------
// Form-level valuations
// ---------------------------------------------------------------------------

Valuation form_valuation(const HomogForm& f) {
  bool have_finite = false;
  int64_t best = 0;
  bool have_bound = false;
  int64_t bound = Series::kInfinitePrecision;
  for (const auto& [m, c] : f.terms()) {
    (void)m;
    Valuation v = c.valuation();
    switch (v.kind) {
      case Valuation::Kind::Finite:
        if (!have_finite || v.v < best) {
          have_finite = true;
          best = v.v;
        }
        break;
      case Valuation::Kind::AtLeast:
        have_bound = true;
        bound = std::min(bound, v.v);
        break;
      case Valuation::Kind::Infinite:
        break;
    }
  }
  if (have_finite && (!have_bound || best <= bound)) return Valuation::finite(best);
  if (have_bound) return Valuation::at_least(bound);
  return Valuation::infinite();
}

FieldForm coeff_form(const HomogForm& f, int64_t k) {
  FieldForm r(f.spec(), f.nvars(), f.degree());
  for (const auto& [m, c] : f.terms()) {
    FieldElement v = c.coeff(k);
    if (!v.is_zero()) r.add_term(m, v);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

namespace {

std::string report_summary(const FiberReport& rep) {
  std::ostringstream os;
  os << "reduced=" << (rep.reduced ? "yes" : "no")
     << " irreducible_over_base=" << (rep.irreducible_over_base ? "yes" : "no")
     << " geometrically_integral=" << (rep.geometrically_integral ? "yes" : "no")
     << " singular_dim=" << rep.singular_dim << " vertex_dim=" << rep.vertex_space_dim
     << " cone_over_plane_curve=" << (rep.cone_over_plane_curve ? "yes" : "no");
  if (rep.nonnormal_linear_component) os << " nonnormal_linear_component=yes";
  if (rep.conjugate_hyperplane_member) os << " conjugate_member=yes";
  return os.str();
}

bool change_is_identity(const LinearChange& a, const FieldSpecPtr& spec) {
  Series one = Series::one(spec);
  Series zero = Series::exact_zero(spec);
  for (size_t i = 0; i < a.dim(); ++i)
    for (size_t j = 0; j < a.dim(); ++j)
      if (!a.m[i][j].certified_equal(i == j ? one : zero)) return false;
  return true;
}

bool field_matrix_is_identity(const Mat<FieldElement>& a, const FieldSpecPtr& spec) {
  FieldElement one = FieldElement::one(spec);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < a[i].size(); ++j) {
      bool ok = (i == j) ? (a[i][j] == one) : a[i][j].is_zero();
      if (!ok) return false;
    }
  return true;
}

void apply_and_record(ModelState& st, const LedgerStep& step) {
  st.equations = apply_step(st.equations, step);
  st.ledger.steps.push_back(step);
  if (step.kind == LedgerStep::Kind::BaseChange) st.ramification *= step.e;
}

// Particular solution of a x = b over the field (free variables zero);
// nullopt when the system is inconsistent.
std::optional<std::vector<FieldElement>> solve_field_linear(Mat<FieldElement> a,
                                                            std::vector<FieldElement> b,
                                                            const FieldSpecPtr& spec) {
  size_t rows = a.size();
  if (rows == 0) return std::vector<FieldElement>{};
  size_t cols = a[0].size();
  if (b.size() != rows) throw Error("linear solve shape mismatch");
  std::vector<size_t> pivot_col;
  size_t r = 0;
  for (size_t c = 0; c < cols && r < rows; ++c) {
    size_t sel = r;
    while (sel < rows && a[sel][c].is_zero()) ++sel;
    if (sel == rows) continue;
    std::swap(a[sel], a[r]);
    std::swap(b[sel], b[r]);
    FieldElement inv = a[r][c].inverse();
    for (size_t j = c; j < cols; ++j) a[r][j] = a[r][j] * inv;
    b[r] = b[r] * inv;
    for (size_t i = 0; i < rows; ++i) {
      if (i == r || a[i][c].is_zero()) continue;
      FieldElement f = a[i][c];
      for (size_t j = c; j < cols; ++j) a[i][j] = a[i][j] - f * a[r][j];
      b[i] = b[i] - f * b[r];
    }
    pivot_col.push_back(c);
    ++r;
  }
  for (size_t i = r; i < rows; ++i)
    if (!b[i].is_zero()) return std::nullopt;
  std::vector<FieldElement> x(cols, FieldElement::zero(spec));
  for (size_t i = 0; i < pivot_col.size(); ++i) x[pivot_col[i]] = b[i];
  return x;
}

Mat<FieldElement> mat_from_columns(const std::vector<std::vector<FieldElement>>& cols,
                                   const FieldSpecPtr& spec) {
  if (cols.empty()) throw Error("matrix from empty column set");
  size_t n = cols[0].size();
  Mat<FieldElement> m(n, std::vector<FieldElement>(cols.size(), FieldElement::zero(spec)));
  for (size_t j = 0; j < cols.size(); ++j) {
    if (cols[j].size() != n) throw Error("column length mismatch");
    for (size_t i = 0; i < n; ++i) m[i][j] = cols[j][i];
  }
  return m;
}

size_t rank_of_vectors(const std::vector<std::vector<FieldElement>>& vecs) {
  if (vecs.empty()) return 0;
  Mat<FieldElement> m;
  for (const auto& v : vecs) m.push_back(v);
  return mat_rank(std::move(m));
}

// Greedy completion of an independent vector set to a basis by unit vectors.
std::vector<std::vector<FieldElement>> basis_completion(
    const std::vector<std::vector<FieldElement>>& have, const FieldSpecPtr& spec, size_t nv) {
  std::vector<std::vector<FieldElement>> acc = have;
  std::vector<std::vector<FieldElement>> added;
  for (size_t j = 0; j < nv && acc.size() < nv; ++j) {
    std::vector<FieldElement> e(nv, FieldElement::zero(spec));
    e[j] = FieldElement::one(spec);
    acc.push_back(e);
    if (rank_of_vectors(acc) == acc.size()) {
      added.push_back(e);
    } else {
      acc.pop_back();
    }
  }
  if (acc.size() != nv) throw Error("basis completion failed: dependent input vectors");
  return added;
}

std::vector<FieldElement> gradient_at(const FieldForm& f, const std::vector<FieldElement>& p) {
  std::vector<FieldElement> g(f.nvars());
  for (size_t j = 0; j < f.nvars(); ++j) g[j] = f.derivative(j).evaluate(p);
  return g;
}

FieldForm coord_form(const FieldSpecPtr& spec, size_t nv, size_t j) {
  FieldForm f(spec, nv, 1);
  std::vector<uint32_t> e(nv, 0);
  e[j] = 1;
  f.add_term(Monomial(std::move(e)), FieldElement::one(spec));
  return f;
}

// Re-embed a form on the variable subset `vars` into arity nv.
FieldForm expand_form(const FieldForm& small, const std::vector<size_t>& vars, size_t nv) {
  std::vector<FieldForm> images;
  images.reserve(small.nvars());
  for (size_t i = 0; i < small.nvars(); ++i) images.push_back(coord_form(small.spec(), nv, vars[i]));
  return small.substituted(images);
}

// Solve a x = b over the series ring by Gaussian elimination with unit
// pivots.  Exactness is preserved whenever pivots are exactly one and the
// eliminated entries are certified zero.
std::vector<Series> solve_series_linear(Mat<Series> a, std::vector<Series> b,
                                        const FieldSpecPtr& spec, int64_t prec) {
  size_t n = a.size();
  if (b.size() != n) throw Error("series linear solve shape mismatch");
  Series one = Series::one(spec);
  for (size_t c = 0; c < n; ++c) {
    size_t sel = c;
    while (sel < n && !a[sel][c].is_unit()) ++sel;
    if (sel == n) throw Error("series linear solve needs a unimodular matrix");
    std::swap(a[sel], a[c]);
    std::swap(b[sel], b[c]);
    if (!a[c][c].certified_equal(one)) {
      Series inv = a[c][c].inverse(prec);
      for (size_t j = 0; j < n; ++j) a[c][j] = a[c][j] * inv;
      b[c] = b[c] * inv;
    }
    for (size_t i = 0; i < n; ++i) {
      if (i == c) continue;
      const Series& f = a[i][c];
      if (f.is_certified_zero() || f.all_known_coeffs_zero()) continue;
      Series factor = f;
      for (size_t j = 0; j < n; ++j) a[i][j] = a[i][j] - factor * a[c][j];
      b[i] = b[i] - factor * b[c];
    }
  }
  return b;
}

// Transport projective series coordinates through X_i = t^{w_i} Y_i,
// rescaling the whole vector so the new coordinates are integral with a unit
// entry.
std::vector<Series> transport_weighted(const std::vector<Series>& s,
                                       const std::vector<int64_t>& w) {
  if (s.size() != w.size()) throw Error("weighted transport arity mismatch");
  bool have_min = false;
  int64_t lead = 0;
  int64_t bound = Series::kInfinitePrecision;
  bool have_bound = false;
  for (size_t i = 0; i < s.size(); ++i) {
    Valuation v = s[i].valuation();
    if (v.is_finite()) {
      int64_t cand = v.v - w[i];
      if (!have_min || cand < lead) {
        have_min = true;
        lead = cand;
      }
    } else if (!v.is_infinite()) {
      have_bound = true;
      bound = std::min(bound, v.v - w[i]);
    }
  }
  if (!have_min) throw Error("weighted transport of a section with no unit content");
  if (have_bound && bound < lead)
    throw PrecisionExhausted("section transport under the weighted move is uncertified");
  std::vector<Series> out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) out.push_back(s[i].t_shift(-w[i] - lead));
  return out;
}

// Smallest certified precision across the coefficients of the state; fully
// exact data gets a finite working window.
int64_t working_precision(const ModelState& st) {
  int64_t p = Series::kInfinitePrecision;
  for (const auto& eq : st.equations)
    for (const auto& [m, c] : eq.terms()) {
      (void)m;
      p = std::min(p, c.precision());
    }
  if (p >= Series::kInfinitePrecision / 2) return 4 * kDefaultPrecision;
  return p;
}

// Every equation vanishes along the section to the stated order.
void verify_section_on_family(const std::vector<HomogForm>& eqs, const std::vector<Series>& sec,
                              int64_t min_order) {
  for (const auto& eq : eqs) {
    Series val = eq.evaluate(sec);
    Valuation v = val.valuation();
    if (v.is_finite() && v.v < min_order)
      throw Error("supplied point is not a section of the family: equation value " +
                  val.describe());
  }
}

std::optional<Valuation> try_invariant(const ModelState& st) {
  try {
    return invariant_valuation(st);
  } catch (const UnsupportedCase&) {
    return std::nullopt;
  }
}

// Diagnostic probe for generic-fiber smoothness: specialize the coefficient
// windows at t = a for every unit a of the base field and point-count the
// Jacobian scheme over extensions that fit the operation budget.  A smooth
// specialization certifies nothing beyond itself, but a family whose every
// unit specialization is singular is rejected with a diagnostic.  This is a
// heuristic gate, not a proof of smoothness.
void require_generic_smoothness(const ModelState& st) {
  const FieldSpecPtr& spec = st.spec();
  size_t nv = st.nvars();
  uint64_t q = spec->order();
  uint64_t tried = 0;
  for (uint64_t idx = 1; idx < q && tried < 8; ++idx) {
    FieldElement a = FieldElement::from_index(spec, idx);
    std::vector<FieldForm> eqs_a;
    bool degenerate = false;
    for (const auto& eq : st.equations) {
      FieldForm r(spec, nv, eq.degree());
      for (const auto& [m, c] : eq.terms()) {
        FieldElement acc = FieldElement::zero(spec);
        FieldElement pw = FieldElement::one(spec);
        const auto& win = c.window();
        for (size_t i = 0; i < win.size(); ++i) {
          acc = acc + win[i] * pw;
          pw = pw * a;
        }
        if (!acc.is_zero()) r.add_term(m, acc);
      }
      if (r.is_zero()) degenerate = true;
      eqs_a.push_back(std::move(r));
    }
    ++tried;
    if (degenerate) continue;
    SchemeHandle jac = jacobian_scheme(eqs_a);
    bool singular = false;
    for (int k = 1; k <= 3 && !singular; ++k) {
      // estimated scan length: charts * |F_{q^k}|^(nv-1)
      long double est = static_cast<long double>(nv);
      for (size_t i = 0; i + 1 < nv; ++i) est *= powl(static_cast<long double>(q), k);
      if (k > 1 && est > static_cast<long double>(kDefaultOpBudget)) break;
      singular = count_points(jac, k, kDefaultOpBudget) > 0;
    }
    if (!singular) return;
  }
  throw Error(
      "no smooth specialization of the generic fiber found: every unit value of t probed gave a "
      "singular (or degenerate) fiber");
}

}  // namespace

// ---------------------------------------------------------------------------
// One reduction step
// ---------------------------------------------------------------------------

ModelState destabilize_step(const ModelState& state, const DestabilizerWitness& witness) {
  if (witness.weights.size() != state.nvars())
    throw Error("destabilizer weight system has the wrong arity");
  if (witness.change.dim() != state.nvars())
    throw Error("destabilizer coordinate change has the wrong dimension");

  // Recompute the violation on this state; refuse witnesses that pass.
  std::vector<HomogForm> moved;
  moved.reserve(state.equations.size());
  for (const auto& f : state.equations) moved.push_back(apply_linear(f, witness.change));
  WeightCheck chk = state.is_pencil() ? check_weight_pencil(moved[0], moved[1], witness.weights)
                                      : check_weight_single(moved[0], witness.weights);
  if (chk.pass)
    throw NotDestabilizing("weight check passes on this state: " + chk.describe());

  ModelState out = state;
  if (!change_is_identity(witness.change, state.spec()))
    apply_and_record(out, LedgerStep::linear_step(witness.change));
  std::vector<int64_t> shifts;
  shifts.reserve(out.equations.size());
  for (const auto& f : out.equations) shifts.push_back(mult_w(f, witness.weights));
  apply_and_record(out, LedgerStep::weighted_step(witness.weights.w, shifts));

  if (!out.is_pencil()) return out;

  FieldForm rf = residue_form(out.equations[0]);
  FieldForm rg = residue_form(out.equations[1]);
  if (rf.is_zero() || rg.is_zero())
    throw Error("weighted step left a pencil residue zero despite the multiplicity shift");
  if (!proportional_forms(rf, rg)) return out;

  // rg = a * rf: recombine so the pencil has independent residues again.
  const auto& lead = *rf.terms().begin();
  FieldElement a = rg.coefficient(lead.first) * lead.second.inverse();
  Valuation dev_f = form_valuation(out.equations[0] - lift_to_series(rf));
  Valuation dev_g = form_valuation(out.equations[1] - lift_to_series(rg));
  // Keep the equation that deviates from its residue at the larger order;
  // swap exactly when the first certifiably deviates earlier than the second.
  bool swapped = false;
  if (dev_f.is_finite()) {
    if (dev_g.is_infinite())
      swapped = true;
    else if (dev_g.is_finite() && dev_f.v < dev_g.v)
      swapped = true;
    else if (!dev_g.is_finite() && !dev_g.is_infinite() && dev_f.v < dev_g.v)
      swapped = true;
  }
  FieldElement ratio = swapped ? a.inverse() : a;
  const HomogForm& kept = out.equations[swapped ? 1 : 0];
  const HomogForm& other = out.equations[swapped ? 0 : 1];
  HomogForm diff = other - kept.scaled(Series::constant(ratio));
  Valuation dv = form_valuation(diff);
  if (dv.is_infinite())
    throw GITUnstable(
        "the two equations span a pencil of rank one: the wedge vanishes identically");
  if (!dv.is_finite())
    throw PrecisionExhausted("recombination order lies beyond the certified precision");
  apply_and_record(out, LedgerStep::recombine_step(swapped, Series::constant(ratio), dv.v));
  return out;
}

// ---------------------------------------------------------------------------
// Reduction loop
// ---------------------------------------------------------------------------

ReduceResult reduce_to_semistable(ModelState state, uint64_t budget, uint64_t search_budget) {
  require_generic_smoothness(state);

  ReduceResult out;
  std::optional<Valuation> inv = try_invariant(state);
  if (inv && inv->is_infinite())
    throw GITUnstable("the classical invariant vanishes identically: no semistable model exists");
  uint64_t allowed = budget;
  if (inv && inv->is_finite()) allowed = static_cast<uint64_t>(inv->v);

  for (uint64_t iter = 0;; ++iter) {
    StabilityVerdict verdict = search_destabilizer(state, search_budget);
    if (verdict.semistable_against_search) {
      out.certificate = verdict.searched;
      break;
    }
    if (iter >= allowed)
      throw BudgetExceeded("destabilizer still present after the allowed number of steps");
    ReduceTraceEntry entry;
    entry.origin = verdict.witness->origin;
    entry.weights = verdict.witness->weights.describe();
    entry.mult = verdict.witness->check.mult;
    entry.invariant_before = inv;
    entry.ledger_begin = state.ledger.steps.size();
    state = destabilize_step(state, *verdict.witness);
    entry.ledger_end = state.ledger.steps.size();
    std::optional<Valuation> next = try_invariant(state);
    if (next && next->is_infinite())
      throw GITUnstable(
          "the classical invariant vanishes identically: no semistable model exists");
    if (inv && next && inv->is_finite() && next->is_finite() && next->v >= inv->v)
      throw Error("invariant valuation failed to decrease across a reduction step (" +
                  inv->describe() + " -> " + next->describe() + ")");
    entry.invariant_after = next;
    inv = next;
    out.trace.push_back(std::move(entry));
  }
  out.state = std::move(state);
  return out;
}

// ---------------------------------------------------------------------------
// Hensel lifting of a smooth central point
// ---------------------------------------------------------------------------

std::vector<Series> lift_section(const std::vector<HomogForm>& eqs, const ProjPoint& center,
                                 int64_t prec) {
  if (eqs.empty()) throw Error("section lift needs at least one equation");
  if (prec < 1) throw Error("section lift needs positive precision");
  const FieldSpecPtr& spec = eqs[0].spec();
  size_t nv = eqs[0].nvars();
  for (const auto& eq : eqs)
    if (eq.spec() != spec || eq.nvars() != nv)
      throw Error("section lift equations must share their shape");
  if (center.field != spec) throw Error("lift center must live over the family's field");
  if (center.nvars() != nv) throw Error("lift center has the wrong arity");

  std::vector<FieldForm> res;
  res.reserve(eqs.size());
  for (const auto& eq : eqs) res.push_back(residue_form(eq));
  ProjPoint c = center.canonical();
  if (!on_all(res, c)) throw Error("lift center is not on the central fiber");
  if (!smooth_on(res, c)) throw Error("lift center is not a smooth point of the central fiber");

  size_t pivot = 0;
  while (pivot < nv && c.coords[pivot].is_zero()) ++pivot;
  std::vector<size_t> freev;
  for (size_t j = 0; j < nv; ++j)
    if (j != pivot) freev.push_back(j);

  // Constant Jacobian in the free coordinates; full row rank because the
  // pivot column is an Euler combination of the free ones.
  Mat<FieldElement> jac(eqs.size(), std::vector<FieldElement>(freev.size()));
  for (size_t i = 0; i < eqs.size(); ++i)
    for (size_t jj = 0; jj < freev.size(); ++jj)
      jac[i][jj] = res[i].derivative(freev[jj]).evaluate(c.coords);

  std::vector<std::vector<FieldElement>> co(nv);
  for (size_t j = 0; j < nv; ++j) co[j] = {c.coords[j]};

  for (int64_t k = 1; k < prec; ++k) {
    std::vector<Series> cur(nv);
    for (size_t j = 0; j < nv; ++j) cur[j] = Series::polynomial(spec, co[j]);
    std::vector<FieldElement> rhs(eqs.size());
    bool any = false;
    for (size_t i = 0; i < eqs.size(); ++i) {
      Series val = eqs[i].evaluate(cur);
      FieldElement ck;
      try {
        ck = val.coeff(k);
      } catch (const PrecisionExhausted&) {
        throw PrecisionExhausted("section lift ran past the certified precision of the family");
      }
      rhs[i] = -ck;
      any = any || !ck.is_zero();
    }
    if (!any) continue;
    auto delta = solve_field_linear(jac, rhs, spec);
    if (!delta) throw Error("section lift correction system is inconsistent");
    for (size_t jj = 0; jj < freev.size(); ++jj) {
      if ((*delta)[jj].is_zero()) continue;
      auto& cj = co[freev[jj]];
      if (cj.size() <= static_cast<size_t>(k)) cj.resize(k + 1, FieldElement::zero(spec));
      cj[k] = cj[k] + (*delta)[jj];
    }
  }

  std::vector<Series> outv(nv);
  for (size_t j = 0; j < nv; ++j) outv[j] = Series::polynomial(spec, co[j]);
  return outv;
}

}  // namespace ssm
