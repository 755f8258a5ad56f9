#include "ssm/fiber.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <sstream>

namespace ssm {

// ---------------------------------------------------------------------------
// FlatField
// ---------------------------------------------------------------------------

FlatField::FlatField(const FieldSpecPtr& spec) : spec_(spec) {
  uint64_t q64 = spec->order();
  if (q64 > kMaxOrder) throw UnsupportedCase("FlatField: field order too large for lookup tables");
  q_ = static_cast<uint32_t>(q64);
  mul_.assign(static_cast<size_t>(q_) * q_, 0);
  add_.assign(static_cast<size_t>(q_) * q_, 0);
  neg_.assign(q_, 0);
  inv_.assign(q_, 0);
  sqrt_.assign(q_, -1);

  std::vector<FieldElement> elts;
  elts.reserve(q_);
  for (uint32_t i = 0; i < q_; ++i) elts.push_back(FieldElement::from_index(spec, i));
  for (uint32_t a = 0; a < q_; ++a) {
    for (uint32_t b = a; b < q_; ++b) {
      uint16_t s = static_cast<uint16_t>((elts[a] + elts[b]).index());
      uint16_t m = static_cast<uint16_t>((elts[a] * elts[b]).index());
      add_[static_cast<size_t>(a) * q_ + b] = s;
      add_[static_cast<size_t>(b) * q_ + a] = s;
      mul_[static_cast<size_t>(a) * q_ + b] = m;
      mul_[static_cast<size_t>(b) * q_ + a] = m;
    }
  }
  for (uint32_t a = 0; a < q_; ++a) {
    neg_[a] = static_cast<uint16_t>((-elts[a]).index());
    if (a != 0) inv_[a] = static_cast<uint16_t>(elts[a].inverse().index());
  }
  // sqrt_[s] = least index a with a*a == s, or -1 when s has no square root.
  for (uint32_t a = 0; a < q_; ++a) {
    uint16_t s = mul_[static_cast<size_t>(a) * q_ + a];
    if (sqrt_[s] < 0) sqrt_[s] = static_cast<int32_t>(a);
  }
}

std::shared_ptr<const FlatField> FlatField::get(const FieldSpecPtr& spec) {
  static std::map<std::string, std::shared_ptr<const FlatField>> cache;
  std::string key = spec->describe();
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, std::shared_ptr<const FlatField>(new FlatField(spec))).first;
  }
  return it->second;
}

uint16_t FlatField::inv(uint16_t a) const {
  if (a == 0) throw NotUnit("FlatField: inverse of zero");
  return inv_[a];
}

uint16_t FlatField::pow(uint16_t a, uint32_t e) const {
  uint16_t r = 1;
  while (e) {
    if (e & 1) r = mul(r, a);
    a = mul(a, a);
    e >>= 1;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Small shared helpers
// ---------------------------------------------------------------------------

namespace {

Mat<FieldElement> make_mat(size_t rows, size_t cols, const FieldSpecPtr& spec) {
  return Mat<FieldElement>(rows, std::vector<FieldElement>(cols, FieldElement::zero(spec)));
}

Monomial unit_mono(size_t nv, size_t i) { return Monomial::power(nv, i, 1); }

}  // namespace

FieldForm normalize_linear(const FieldForm& ell) {
  for (const auto& [m, c] : ell.terms()) {
    (void)m;
    return ell.scaled(c.inverse());
  }
  return ell;
}

bool proportional_forms(const FieldForm& a, const FieldForm& b) {
  if (a.is_zero() || b.is_zero()) return a.is_zero() && b.is_zero();
  const auto& [ma, ca] = *a.terms().begin();
  FieldElement cb = b.coefficient(ma);
  if (cb.is_zero()) return false;
  return (b.scaled(ca * cb.inverse()) - a).is_zero();
}

bool form_is_rational(const FieldForm& f) {
  for (const auto& [m, c] : f.terms()) {
    (void)m;
    if (!in_declared_base(c)) return false;
  }
  return true;
}

namespace {

// Indices of unit vectors that extend the span of the given length-nv vectors
// to the whole space (greedy, smallest index first).
std::vector<size_t> completing_units(const std::vector<std::vector<FieldElement>>& vecs,
                                     const FieldSpecPtr& spec, size_t nv) {
  std::vector<std::vector<FieldElement>> rows = vecs;
  std::vector<size_t> picked;
  for (size_t j = 0; j < nv && rows.size() < nv; ++j) {
    std::vector<FieldElement> unit(nv, FieldElement::zero(spec));
    unit[j] = FieldElement::one(spec);
    rows.push_back(unit);
    if (mat_rank(rows) == rows.size()) {
      picked.push_back(j);
    } else {
      rows.pop_back();
    }
  }
  if (rows.size() != nv) throw Error("completing_units: input vectors are dependent");
  return picked;
}

}  // namespace

Mat<FieldElement> complete_to_basis(const std::vector<FieldForm>& forms, const FieldSpecPtr& spec,
                                    size_t nv) {
  std::vector<std::vector<FieldElement>> rows;
  for (const auto& ell : forms) {
    std::vector<FieldElement> r;
    for (size_t j = 0; j < nv; ++j) r.push_back(ell.coefficient(unit_mono(nv, j)));
    rows.push_back(r);
  }
  std::vector<size_t> extra = completing_units(rows, spec, nv);
  Mat<FieldElement> t = make_mat(nv, nv, spec);
  for (size_t i = 0; i < rows.size(); ++i) t[i] = rows[i];
  for (size_t k = 0; k < extra.size(); ++k) t[rows.size() + k][extra[k]] = FieldElement::one(spec);
  return t;
}

namespace {

// Substitution images for restricting to the hyperplane ell = 0, where ell has
// an invertible coefficient at position pivot: the pivot variable is replaced
// by the solved linear combination of the remaining ones.
std::vector<FieldForm> hyperplane_images(const FieldForm& ell, size_t pivot) {
  FieldSpecPtr spec = ell.spec();
  size_t nv = ell.nvars();
  FieldElement cpi = ell.coefficient(unit_mono(nv, pivot)).inverse();
  std::vector<FieldForm> images;
  for (size_t j = 0; j < nv; ++j) {
    FieldForm img(spec, nv - 1, 1);
    if (j != pivot) {
      size_t jj = j < pivot ? j : j - 1;
      img.set_term(unit_mono(nv - 1, jj), FieldElement::one(spec));
    } else {
      for (size_t k = 0; k < nv; ++k) {
        if (k == pivot) continue;
        FieldElement ck = ell.coefficient(unit_mono(nv, k));
        if (ck.is_zero()) continue;
        size_t kk = k < pivot ? k : k - 1;
        img.add_term(unit_mono(nv - 1, kk), -(ck * cpi));
      }
    }
    images.push_back(img);
  }
  return images;
}

size_t linear_pivot(const FieldForm& ell) {
  size_t nv = ell.nvars();
  for (size_t j = 0; j < nv; ++j) {
    if (!ell.coefficient(unit_mono(nv, j)).is_zero()) return j;
  }
  throw Error("linear_pivot: zero form");
}

FieldForm restrict_to_hyperplane(const FieldForm& f, const FieldForm& ell) {
  return f.substituted(hyperplane_images(ell, linear_pivot(ell)));
}

// Enumerate the canonical hyperplanes of P^{nv-1} over the base field: leading
// coefficient 1 at position `lead`, zeros before, free tail.  The callback may
// return false to stop.
void for_each_hyperplane(const FieldSpecPtr& spec, size_t nv,
                         const std::function<bool(const FieldForm&)>& fn) {
  uint64_t q = spec->order();
  if (q > FlatField::kMaxOrder) throw UnsupportedCase("hyperplane scan: field too large");
  for (size_t lead = 0; lead < nv; ++lead) {
    size_t tail = nv - 1 - lead;
    uint64_t combos = 1;
    for (size_t i = 0; i < tail; ++i) combos *= q;
    std::vector<uint32_t> idx(tail, 0);
    for (uint64_t it = 0; it < combos; ++it) {
      FieldForm ell(spec, nv, 1);
      ell.set_term(unit_mono(nv, lead), FieldElement::one(spec));
      for (size_t i = 0; i < tail; ++i) {
        if (idx[i] != 0) {
          ell.set_term(unit_mono(nv, lead + 1 + i), FieldElement::from_index(spec, idx[i]));
        }
      }
      if (!fn(ell)) return;
      for (size_t i = tail; i-- > 0;) {
        if (++idx[i] < q) break;
        idx[i] = 0;
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// eliminate_linear
// ---------------------------------------------------------------------------

ReducedScheme eliminate_linear(const SchemeHandle& s) {
  FieldSpecPtr spec = s.spec;
  size_t nv = s.nvars;
  std::vector<FieldForm> eqs;
  for (const auto& f : s.equations) {
    if (!f.is_zero()) eqs.push_back(f);
  }
  std::vector<FieldForm> lift;
  lift.reserve(nv);
  for (size_t i = 0; i < nv; ++i) {
    FieldForm u(spec, nv, 1);
    u.set_term(unit_mono(nv, i), FieldElement::one(spec));
    lift.push_back(u);
  }

  size_t cur = nv;
  for (;;) {
    size_t li = eqs.size();
    for (size_t i = 0; i < eqs.size(); ++i) {
      if (eqs[i].degree() == 1) { li = i; break; }
    }
    if (li == eqs.size()) break;
    FieldForm ell = eqs[li];
    if (cur == 1) {
      // A nonzero linear form in one variable cuts out the empty scheme.
      ReducedScheme out;
      out.scheme.spec = spec;
      out.scheme.nvars = 0;
      for (size_t i = 0; i < lift.size(); ++i) out.lift.push_back(FieldForm(spec, 0, 1));
      return out;
    }
    std::vector<FieldForm> images = hyperplane_images(ell, linear_pivot(ell));
    std::vector<FieldForm> neqs;
    for (size_t i = 0; i < eqs.size(); ++i) {
      if (i == li) continue;
      FieldForm g = eqs[i].substituted(images);
      if (!g.is_zero()) neqs.push_back(g);
    }
    eqs = std::move(neqs);
    for (auto& f : lift) f = f.substituted(images);
    cur -= 1;
  }

  ReducedScheme out;
  out.scheme.spec = spec;
  out.scheme.nvars = cur;
  out.scheme.equations = std::move(eqs);
  out.lift = std::move(lift);
  return out;
}

// ---------------------------------------------------------------------------
// Point enumeration over P^{m}(F_{q^k})
// ---------------------------------------------------------------------------

namespace {

// One compiled term of one equation restricted to a chart: coefficient, the
// exponent of the innermost (symbolic) variable, and the exponents of the
// free prefix variables.
struct SliceTerm {
  uint16_t coeff;
  uint8_t em;
  uint8_t npv;
  std::array<std::pair<uint8_t, uint8_t>, 8> pv;
};

struct SliceEq {
  std::vector<SliceTerm> terms;
  uint32_t max_em = 0;
};

struct CompiledEq {
  std::vector<std::pair<uint16_t, std::vector<uint8_t>>> terms;
  uint32_t degree = 0;
  size_t nterms() const { return terms.size(); }
};

CompiledEq compile_equation(const FieldForm& f, const FieldSpecPtr& ext, size_t nv) {
  CompiledEq ce;
  ce.degree = f.degree();
  for (const auto& [m, c] : f.terms()) {
    FieldElement ec = embed_in_extension(ext, c);
    std::vector<uint8_t> es(nv, 0);
    for (size_t j = 0; j < nv; ++j) es[j] = static_cast<uint8_t>(m[j]);
    ce.terms.emplace_back(static_cast<uint16_t>(ec.index()), std::move(es));
  }
  return ce;
}

// Restrict to the chart where vars < c vanish and var c = 1; vars c+1..nv-2
// are the free prefix and var nv-1 stays symbolic.
bool slice_equation(const CompiledEq& ce, size_t c, size_t nv, SliceEq& out) {
  out.terms.clear();
  out.max_em = 0;
  size_t last = nv - 1;
  for (const auto& [ci, es] : ce.terms) {
    bool dead = false;
    for (size_t j = 0; j < c; ++j) {
      if (es[j] != 0) { dead = true; break; }
    }
    if (dead) continue;
    SliceTerm st;
    st.coeff = ci;
    st.em = es[last];
    st.npv = 0;
    for (size_t j = c + 1; j + 1 < nv; ++j) {
      if (es[j] != 0) {
        if (st.npv >= st.pv.size()) throw Error("slice_equation: too many prefix factors");
        st.pv[st.npv++] = {static_cast<uint8_t>(j - (c + 1)), es[j]};
      }
    }
    out.max_em = std::max<uint32_t>(out.max_em, st.em);
    out.terms.push_back(st);
  }
  return !out.terms.empty();
}

struct ScanSink {
  int64_t count = 0;
  std::function<bool(const std::vector<uint16_t>&)> emit;  // false = stop
  bool collecting = false;
  bool stopped = false;
};

void scan_scheme(const SchemeHandle& s, int k, int64_t op_budget, ScanSink& sink) {
  size_t nv = s.nvars;
  if (nv == 0) return;
  FieldSpecPtr ext = FieldSpec::make_extension(s.spec, static_cast<uint32_t>(k));
  std::shared_ptr<const FlatField> ffp = FlatField::get(ext);
  const FlatField& ff = *ffp;
  uint32_t q = ff.order();

  std::vector<CompiledEq> eqs;
  for (const auto& f : s.equations) {
    if (!f.is_zero()) eqs.push_back(compile_equation(f, ext, nv));
  }
  std::sort(eqs.begin(), eqs.end(), [](const CompiledEq& a, const CompiledEq& b) {
    if (a.degree != b.degree) return a.degree < b.degree;
    return a.nterms() < b.nterms();
  });

  std::vector<uint16_t> coords(nv, 0);

  if (eqs.empty()) {
    for (size_t c = 0; c < nv; ++c) {
      size_t f = nv - 1 - c;
      int64_t pts = 1;
      for (size_t i = 0; i < f; ++i) pts *= q;
      if (!sink.collecting) {
        sink.count += pts;
        continue;
      }
      std::fill(coords.begin(), coords.end(), 0);
      coords[c] = 1;
      std::vector<uint16_t> suffix(f, 0);
      for (int64_t it = 0; it < pts; ++it) {
        for (size_t i = 0; i < f; ++i) coords[c + 1 + i] = suffix[i];
        ++sink.count;
        if (!sink.emit(coords)) { sink.stopped = true; return; }
        for (size_t i = f; i-- > 0;) {
          if (++suffix[i] < q) break;
          suffix[i] = 0;
        }
      }
    }
    return;
  }

  // Budget estimate: prefix lines times per-line work on the cheapest equation.
  {
    double total = 0;
    for (size_t c = 0; c < nv; ++c) {
      size_t f = nv - 1 - c;
      if (f == 0) {
        total += 4.0 * static_cast<double>(eqs.size());
        continue;
      }
      double lines = std::pow(static_cast<double>(q), static_cast<double>(f - 1));
      double per = 4.0 * static_cast<double>(eqs[0].nterms()) + 16.0;
      if (eqs[0].degree >= 3 || ext->p() == 2) per += q;
      total += lines * per;
    }
    if (total > static_cast<double>(op_budget)) {
      std::ostringstream os;
      os << "point enumeration over F_" << ext->order() << " needs ~"
         << static_cast<int64_t>(total) << " ops, budget " << op_budget;
      throw BudgetExceeded(os.str());
    }
  }

  std::vector<SliceEq> slices(eqs.size());
  std::vector<uint16_t> univ;
  std::vector<uint16_t> roots;
  std::vector<std::vector<uint16_t>> pows;
  std::vector<uint16_t> rpow;
  bool odd_char = ext->p() != 2;

  for (size_t c = 0; c < nv; ++c) {
    size_t f = nv - 1 - c;

    if (f == 0) {
      // Single candidate point (0, ..., 0, 1).
      std::fill(coords.begin(), coords.end(), 0);
      coords[c] = 1;
      bool ok = true;
      for (const auto& ce : eqs) {
        uint16_t v = 0;
        for (const auto& [ci, es] : ce.terms) {
          bool live = true;
          for (size_t j = 0; j < nv; ++j) {
            if (es[j] != 0 && j != c) { live = false; break; }
          }
          if (live) v = ff.add(v, ci);
        }
        if (v != 0) { ok = false; break; }
      }
      if (ok) {
        ++sink.count;
        if (sink.collecting && !sink.emit(coords)) { sink.stopped = true; return; }
      }
      continue;
    }

    std::vector<size_t> live;
    for (size_t i = 0; i < eqs.size(); ++i) {
      if (slice_equation(eqs[i], c, nv, slices[i])) live.push_back(i);
    }

    size_t np = f - 1;
    int64_t lines = 1;
    for (size_t i = 0; i < np; ++i) lines *= q;

    std::fill(coords.begin(), coords.end(), 0);
    coords[c] = 1;
    std::vector<uint16_t> pre(np, 0);

    if (live.empty()) {
      // Every equation vanishes identically on the whole chart.
      if (!sink.collecting) {
        sink.count += lines * q;
        continue;
      }
      for (int64_t it = 0; it < lines; ++it) {
        for (size_t i = 0; i < np; ++i) coords[c + 1 + i] = pre[i];
        for (uint32_t r = 0; r < q; ++r) {
          coords[nv - 1] = static_cast<uint16_t>(r);
          ++sink.count;
          if (!sink.emit(coords)) { sink.stopped = true; return; }
        }
        for (size_t i = np; i-- > 0;) {
          if (++pre[i] < q) break;
          pre[i] = 0;
        }
      }
      continue;
    }

    std::vector<uint32_t> maxe(np, 1);
    uint32_t max_em_all = 1;
    for (size_t i : live) {
      for (const auto& st : slices[i].terms) {
        for (uint8_t j = 0; j < st.npv; ++j) {
          maxe[st.pv[j].first] = std::max<uint32_t>(maxe[st.pv[j].first], st.pv[j].second);
        }
        max_em_all = std::max<uint32_t>(max_em_all, st.em);
      }
    }
    pows.assign(np, {});
    for (size_t i = 0; i < np; ++i) pows[i].assign(maxe[i] + 1, 1);
    rpow.assign(max_em_all + 1, 1);

    for (int64_t it = 0; it < lines; ++it) {
      for (size_t i = 0; i < np; ++i) {
        uint16_t x = pre[i];
        for (uint32_t e = 1; e <= maxe[i]; ++e) pows[i][e] = ff.mul(pows[i][e - 1], x);
      }

      size_t pivot_pos = live.size();
      for (size_t li = 0; li < live.size(); ++li) {
        const SliceEq& se = slices[live[li]];
        univ.assign(se.max_em + 1, 0);
        bool nonzero = false;
        for (const auto& st : se.terms) {
          uint16_t v = st.coeff;
          for (uint8_t j = 0; j < st.npv; ++j) v = ff.mul(v, pows[st.pv[j].first][st.pv[j].second]);
          if (v != 0) univ[st.em] = ff.add(univ[st.em], v);
        }
        for (uint16_t u : univ) {
          if (u != 0) { nonzero = true; break; }
        }
        if (nonzero) { pivot_pos = li; break; }
      }

      auto check_rest = [&](uint16_t r) -> bool {
        for (uint32_t e = 1; e <= max_em_all; ++e) rpow[e] = ff.mul(rpow[e - 1], r);
        for (size_t li = pivot_pos + 1; li < live.size(); ++li) {
          const SliceEq& se = slices[live[li]];
          uint16_t acc = 0;
          for (const auto& st : se.terms) {
            uint16_t v = st.coeff;
            for (uint8_t j = 0; j < st.npv; ++j) v = ff.mul(v, pows[st.pv[j].first][st.pv[j].second]);
            if (st.em) v = ff.mul(v, rpow[st.em]);
            acc = ff.add(acc, v);
          }
          if (acc != 0) return false;
        }
        return true;
      };

      auto emit_root = [&](uint16_t r) -> bool {
        if (!check_rest(r)) return true;
        for (size_t i = 0; i < np; ++i) coords[c + 1 + i] = pre[i];
        coords[nv - 1] = r;
        ++sink.count;
        if (sink.collecting && !sink.emit(coords)) { sink.stopped = true; return false; }
        return true;
      };

      if (pivot_pos == live.size()) {
        for (uint32_t r = 0; r < q; ++r) {
          if (!emit_root(static_cast<uint16_t>(r))) break;
        }
        if (sink.stopped) return;
      } else {
        while (!univ.empty() && univ.back() == 0) univ.pop_back();
        size_t ud = univ.size() - 1;
        roots.clear();
        if (ud == 0) {
          // nonzero constant: no roots on this line
        } else if (ud == 1) {
          roots.push_back(ff.mul(ff.neg(univ[0]), ff.inv(univ[1])));
        } else if (ud == 2 && odd_char) {
          uint16_t a = univ[2], b = univ[1], cc = univ[0];
          uint16_t b2 = ff.mul(b, b);
          uint16_t ac = ff.mul(a, cc);
          uint16_t fourac = ff.add(ff.add(ac, ac), ff.add(ac, ac));
          uint16_t disc = ff.sub(b2, fourac);
          int32_t sq = ff.sqrt_of(disc);
          if (sq >= 0) {
            uint16_t s16 = static_cast<uint16_t>(sq);
            uint16_t inv2a = ff.inv(ff.add(a, a));
            uint16_t nb = ff.neg(b);
            roots.push_back(ff.mul(ff.add(nb, s16), inv2a));
            if (s16 != 0) roots.push_back(ff.mul(ff.sub(nb, s16), inv2a));
          }
        } else {
          for (uint32_t r = 0; r < q; ++r) {
            uint16_t x = static_cast<uint16_t>(r);
            uint16_t acc = univ[ud];
            for (size_t e = ud; e-- > 0;) acc = ff.add(ff.mul(acc, x), univ[e]);
            if (acc == 0) roots.push_back(x);
          }
        }
        for (uint16_t r : roots) {
          if (!emit_root(r)) break;
        }
        if (sink.stopped) return;
      }

      for (size_t i = np; i-- > 0;) {
        if (++pre[i] < q) break;
        pre[i] = 0;
      }
    }
  }
}

}  // namespace

int64_t count_points(const SchemeHandle& s, int k, int64_t op_budget) {
  ScanSink sink;
  scan_scheme(s, k, op_budget, sink);
  return sink.count;
}

std::vector<std::vector<FieldElement>> collect_points(const SchemeHandle& s, int k, size_t cap,
                                                      int64_t op_budget) {
  FieldSpecPtr ext = FieldSpec::make_extension(s.spec, static_cast<uint32_t>(k));
  std::vector<std::vector<FieldElement>> out;
  ScanSink sink;
  sink.collecting = true;
  sink.emit = [&](const std::vector<uint16_t>& coords) {
    std::vector<FieldElement> pt;
    pt.reserve(coords.size());
    for (uint16_t ci : coords) pt.push_back(FieldElement::from_index(ext, ci));
    out.push_back(std::move(pt));
    return out.size() < cap;
  };
  scan_scheme(s, k, op_budget, sink);
  return out;
}

// ---------------------------------------------------------------------------
// dim_by_counting
// ---------------------------------------------------------------------------

namespace {

// q^e saturating just above the comparison range so oversized powers simply
// fail the lower band.
__int128 pow_sat(__int128 q, uint32_t e) {
  const __int128 cap = static_cast<__int128>(1) << 100;
  __int128 r = 1;
  for (uint32_t i = 0; i < e; ++i) {
    r *= q;
    if (r > cap) return cap;
  }
  return r;
}

}  // namespace

DimEstimate dim_by_counting(const SchemeHandle& s, int K, int64_t op_budget) {
  DimEstimate est;
  ReducedScheme red = eliminate_linear(s);
  const SchemeHandle& rs = red.scheme;

  int k_eff = 0;
  for (int k = 1; k <= K; ++k) {
    try {
      est.counts.emplace_back(k, count_points(rs, k, op_budget));
      k_eff = k;
    } catch (const BudgetExceeded& e) {
      if (k == 1) throw;
      est.note += std::string("stopped before k=") + std::to_string(k) + " (" + e.what() + "); ";
      break;
    } catch (const UnsupportedCase& e) {
      if (k == 1) throw;
      est.note += std::string("stopped before k=") + std::to_string(k) + " (" + e.what() + "); ";
      break;
    }
  }
  if (k_eff == 0) throw Error("dim_by_counting: no counts computed");

  bool all_zero = true;
  for (const auto& [k, c] : est.counts) {
    (void)k;
    if (c != 0) { all_zero = false; break; }
  }
  if (all_zero) {
    est.conclusive = true;
    est.dim = -1;
    est.note += "no points over any sampled extension";
    return est;
  }

  __int128 q = static_cast<__int128>(s.spec->order());
  int max_dim = static_cast<int>(s.nvars) - 1;
  std::vector<int> passing;
  for (int d = 0; d <= max_dim; ++d) {
    __int128 qKd = pow_sat(q, static_cast<uint32_t>(k_eff) * static_cast<uint32_t>(d));
    __int128 NK = est.counts.back().second;
    if (3 * NK < qKd) continue;
    if (NK > 3 * (d + 1) * qKd) continue;
    bool trend = true;
    __int128 qd = pow_sat(q, static_cast<uint32_t>(d));
    for (size_t i = 0; i + 1 < est.counts.size(); ++i) {
      __int128 a = est.counts[i].second;
      __int128 b = est.counts[i + 1].second;
      if (3 * b < qd * a) { trend = false; break; }
      if (b > 3 * qd * a) { trend = false; break; }
    }
    if (trend) passing.push_back(d);
  }

  if (passing.size() == 1) {
    est.conclusive = true;
    est.dim = passing[0];
  } else {
    est.conclusive = false;
    est.dim = -2;
    std::ostringstream os;
    os << "candidate dimensions {";
    for (size_t i = 0; i < passing.size(); ++i) os << (i ? "," : "") << passing[i];
    os << "} from counts (";
    for (size_t i = 0; i < est.counts.size(); ++i) os << (i ? "," : "") << est.counts[i].second;
    os << ")";
    est.note += os.str();
  }
  return est;
}

// ---------------------------------------------------------------------------
// Quadric linear algebra
// ---------------------------------------------------------------------------

Mat<FieldElement> gram_matrix(const FieldForm& q) {
  if (q.degree() != 2) throw UnsupportedCase("gram_matrix: degree must be 2");
  FieldSpecPtr spec = q.spec();
  if (spec->p() == 2) throw UnsupportedCase("gram_matrix: characteristic 2 not supported");
  size_t nv = q.nvars();
  Mat<FieldElement> a = make_mat(nv, nv, spec);
  FieldElement half = FieldElement::from_int(spec, 2).inverse();
  for (const auto& [m, c] : q.terms()) {
    size_t i = nv, j = nv;
    for (size_t v = 0; v < nv; ++v) {
      if (m[v] == 2) { i = j = v; break; }
      if (m[v] == 1) {
        if (i == nv) i = v;
        else j = v;
      }
    }
    if (i == j) {
      a[i][i] = c;
    } else {
      a[i][j] = c * half;
      a[j][i] = c * half;
    }
  }
  return a;
}

std::pair<Mat<FieldElement>, std::vector<FieldElement>> diagonalize_symmetric(
    Mat<FieldElement> a, const FieldSpecPtr& spec) {
  if (spec->p() == 2) throw UnsupportedCase("diagonalize_symmetric: characteristic 2");
  size_t n = a.size();
  Mat<FieldElement> p = make_mat(n, n, spec);
  for (size_t i = 0; i < n; ++i) p[i][i] = FieldElement::one(spec);

  // Congruence column operation col_j += s * col_i, mirrored on rows of A and
  // applied to the columns of P.
  auto add_col = [&](size_t j, size_t i, const FieldElement& s) {
    for (size_t r = 0; r < n; ++r) a[r][j] = a[r][j] + s * a[r][i];
    for (size_t r = 0; r < n; ++r) a[j][r] = a[j][r] + s * a[i][r];
    for (size_t r = 0; r < n; ++r) p[r][j] = p[r][j] + s * p[r][i];
  };
  auto swap_cols = [&](size_t i, size_t j) {
    for (size_t r = 0; r < n; ++r) std::swap(a[r][i], a[r][j]);
    for (size_t r = 0; r < n; ++r) std::swap(a[i][r], a[j][r]);
    for (size_t r = 0; r < n; ++r) std::swap(p[r][i], p[r][j]);
  };

  for (size_t col = 0; col < n; ++col) {
    if (a[col][col].is_zero()) {
      size_t pick = n;
      for (size_t j = col + 1; j < n; ++j) {
        if (!a[j][j].is_zero()) { pick = j; break; }
      }
      if (pick < n) {
        swap_cols(col, pick);
      } else {
        size_t j = n;
        for (size_t jj = col + 1; jj < n; ++jj) {
          if (!a[col][jj].is_zero()) { j = jj; break; }
        }
        if (j == n) continue;  // this row and column are already zero
        add_col(col, j, FieldElement::one(spec));  // diagonal entry becomes 2 a_cj
      }
    }
    FieldElement d = a[col][col];
    FieldElement di = d.inverse();
    for (size_t j = col + 1; j < n; ++j) {
      FieldElement s = a[col][j];
      if (!s.is_zero()) add_col(j, col, -(s * di));
    }
  }

  std::vector<FieldElement> diag;
  diag.reserve(n);
  for (size_t i = 0; i < n; ++i) diag.push_back(a[i][i]);
  return {p, diag};
}

std::vector<FieldForm> split_rank2_quadric(const FieldForm& q) {
  FieldSpecPtr spec = q.spec();
  size_t nv = q.nvars();
  Mat<FieldElement> a = gram_matrix(q);
  auto [p, diag] = diagonalize_symmetric(a, spec);
  std::vector<size_t> nz;
  for (size_t i = 0; i < nv; ++i) {
    if (!diag[i].is_zero()) nz.push_back(i);
  }
  if (nz.empty() || nz.size() > 2) throw UnsupportedCase("split_rank2_quadric: rank not 1 or 2");

  FieldSpecPtr ext = FieldSpec::make_extension(spec, 2);
  Mat<FieldElement> pinv = mat_inverse(p, spec);
  auto row_form = [&](size_t r) {
    // y_r = (P^{-1} x)_r as a linear form over the quadratic extension.
    FieldForm ell(ext, nv, 1);
    for (size_t j = 0; j < nv; ++j) {
      FieldElement c = pinv[r][j];
      if (!c.is_zero()) ell.set_term(unit_mono(nv, j), embed_in_extension(ext, c));
    }
    return ell;
  };

  std::vector<FieldForm> factors;
  if (nz.size() == 1) {
    FieldForm ell = row_form(nz[0]);
    factors.push_back(ell);
    factors.push_back(ell);
  } else {
    // d_a y^2 + d_b z^2 = d_a (y - alpha z)(y + alpha z) with
    // alpha^2 = -d_b/d_a, which has a root over the quadratic extension.
    FieldElement ratio = -(diag[nz[1]] * diag[nz[0]].inverse());
    std::optional<FieldElement> alpha = sqrt_or_none(embed_in_extension(ext, ratio));
    if (!alpha) throw Error("split_rank2_quadric: square root missing over the quadratic extension");
    FieldForm ya = row_form(nz[0]);
    FieldForm yb = row_form(nz[1]);
    factors.push_back(ya + yb.scaled(*alpha));
    factors.push_back(ya - yb.scaled(*alpha));
  }
  return factors;
}

// ---------------------------------------------------------------------------
// Binary forms attached to a pencil
// ---------------------------------------------------------------------------

namespace {

// det(lambda A + mu B) restricted to the selected rows and columns, as a
// binary form of degree |selection|, computed by Lagrange interpolation over
// an extension with enough points.
FieldForm pencil_minor_binary(const Mat<FieldElement>& a, const Mat<FieldElement>& b,
                              const std::vector<size_t>& rs, const std::vector<size_t>& cs,
                              const FieldSpecPtr& spec) {
  size_t ms = rs.size();
  uint32_t e = 1;
  uint64_t qe = spec->order();
  while (qe < ms + 2) {
    qe *= spec->order();
    ++e;
  }
  FieldSpecPtr ext = FieldSpec::make_extension(spec, e);
  size_t npts = ms + 1;

  std::vector<FieldElement> xs, ys;
  for (size_t i = 0; i < npts; ++i) {
    FieldElement x = FieldElement::from_index(ext, static_cast<uint32_t>(i));
    Mat<FieldElement> m = make_mat(ms, ms, ext);
    for (size_t r = 0; r < ms; ++r) {
      for (size_t c = 0; c < ms; ++c) {
        FieldElement av = embed_in_extension(ext, a[rs[r]][cs[c]]);
        FieldElement bv = embed_in_extension(ext, b[rs[r]][cs[c]]);
        m[r][c] = x * av + bv;
      }
    }
    xs.push_back(x);
    ys.push_back(det(m, ext));
  }

  UnivPoly acc;
  for (size_t i = 0; i < npts; ++i) {
    UnivPoly basis = {FieldElement::one(ext)};
    FieldElement denom = FieldElement::one(ext);
    for (size_t j = 0; j < npts; ++j) {
      if (j == i) continue;
      basis = univ_mul(basis, {-xs[j], FieldElement::one(ext)}, ext);
      denom = denom * (xs[i] - xs[j]);
    }
    FieldElement scale = ys[i] * denom.inverse();
    if (acc.size() < basis.size()) acc.resize(basis.size(), FieldElement::zero(ext));
    for (size_t d = 0; d < basis.size(); ++d) acc[d] = acc[d] + basis[d] * scale;
  }
  acc = univ_trim(acc);

  // Coefficients are polynomial in the matrix entries, hence rational.
  UnivPoly bc;
  for (const auto& c : acc) {
    std::optional<FieldElement> pc = project_to_base(c);
    if (!pc) throw Error("pencil interpolation: coefficient escapes the base field");
    bc.push_back(*pc);
  }
  while (bc.size() < ms + 1) bc.push_back(FieldElement::zero(spec));
  return univ_to_binary(bc, spec, static_cast<uint32_t>(ms));
}

// gcd over all minors of the given size: positive degree exactly when some
// member of the pencil has rank < size over the closure.
FieldForm pencil_minor_gcd(const Mat<FieldElement>& a, const Mat<FieldElement>& b, size_t ms,
                           const FieldSpecPtr& spec) {
  size_t nv = a.size();
  std::vector<FieldForm> minors;
  std::vector<size_t> rows_sel, cols_sel;
  std::function<void(size_t, size_t)> pick_cols = [&](size_t cstart, size_t cneed) {
    if (cneed == 0) {
      FieldForm minor = pencil_minor_binary(a, b, rows_sel, cols_sel, spec);
      if (!minor.is_zero()) minors.push_back(minor);
      return;
    }
    for (size_t j = cstart; j + cneed <= nv; ++j) {
      cols_sel.push_back(j);
      pick_cols(j + 1, cneed - 1);
      cols_sel.pop_back();
    }
  };
  std::function<void(size_t, size_t)> pick_rows = [&](size_t start, size_t need) {
    if (need == 0) {
      pick_cols(0, ms);
      return;
    }
    for (size_t i = start; i + need <= nv; ++i) {
      rows_sel.push_back(i);
      pick_rows(i + 1, need - 1);
      rows_sel.pop_back();
    }
  };
  pick_rows(0, ms);
  if (minors.empty()) return FieldForm(spec, 2, 0);  // all vanish: zero sentinel via degree-0 zero
  FieldForm g = minors[0];
  for (size_t i = 1; i < minors.size() && g.degree() > 0; ++i) g = binary_gcd(g, minors[i]);
  return g;
}

}  // namespace

FieldForm pencil_det_binary(const FieldForm& f, const FieldForm& g) {
  FieldSpecPtr spec = f.spec();
  size_t nv = f.nvars();
  Mat<FieldElement> a = gram_matrix(f);
  Mat<FieldElement> b = gram_matrix(g);
  std::vector<size_t> all;
  for (size_t i = 0; i < nv; ++i) all.push_back(i);
  return pencil_minor_binary(a, b, all, all, spec);
}

bool binary_squarefree(const FieldForm& b) {
  if (b.is_zero()) return false;
  if (b.nvars() != 2) throw UnsupportedCase("binary_squarefree: need a binary form");
  if (b.degree() == 0) return true;
  FieldForm bs = b.derivative(0);
  FieldForm bu = b.derivative(1);
  if (bs.is_zero() && bu.is_zero()) return false;  // p-th power
  FieldForm g = b;
  if (!bs.is_zero()) g = binary_gcd(g, bs);
  if (!bu.is_zero()) g = binary_gcd(g, bu);
  return g.degree() == 0;
}

// ---------------------------------------------------------------------------
// Linear factor extraction
// ---------------------------------------------------------------------------

std::optional<FieldForm> divide_by_linear(const FieldForm& f, const FieldForm& ell) {
  if (ell.degree() != 1) throw UnsupportedCase("divide_by_linear: divisor must be linear");
  if (f.degree() == 0) throw UnsupportedCase("divide_by_linear: constant dividend");
  FieldSpecPtr spec = f.spec();
  size_t nv = f.nvars();
  size_t pivot = linear_pivot(ell);

  // Coordinates w with w_0 = ell(x): T has ell as row 0, unit rows elsewhere.
  Mat<FieldElement> t = make_mat(nv, nv, spec);
  for (size_t j = 0; j < nv; ++j) t[0][j] = ell.coefficient(unit_mono(nv, j));
  size_t r = 1;
  for (size_t j = 0; j < nv; ++j) {
    if (j == pivot) continue;
    t[r][j] = FieldElement::one(spec);
    ++r;
  }
  Mat<FieldElement> tinv = mat_inverse(t, spec);
  FieldForm g = apply_linear_field(f, tinv);  // f in the w coordinates

  FieldForm h(spec, nv, f.degree() - 1);
  for (const auto& [m, c] : g.terms()) {
    if (m[0] == 0) return std::nullopt;  // a term avoids w_0: not divisible
    std::vector<uint32_t> es = m.exps();
    es[0] -= 1;
    h.add_term(Monomial(std::move(es)), c);
  }
  FieldForm quotient = apply_linear_field(h, t);
  FieldForm check = quotient * ell - f;
  if (!check.is_zero()) throw Error("divide_by_linear: internal verification failed");
  return quotient;
}

std::optional<FieldForm> rational_linear_factor(const FieldForm& f) {
  if (f.is_zero()) return std::nullopt;
  FieldSpecPtr spec = f.spec();
  size_t nv = f.nvars();

  // Flatten the form once so the per-hyperplane rejection test runs on
  // lookup tables.
  std::shared_ptr<const FlatField> ffp = FlatField::get(spec);
  const FlatField& ff = *ffp;
  std::vector<std::pair<uint16_t, std::vector<uint8_t>>> flat;
  for (const auto& [m, c] : f.terms()) {
    std::vector<uint8_t> es(nv);
    for (size_t j = 0; j < nv; ++j) es[j] = static_cast<uint8_t>(m[j]);
    flat.emplace_back(static_cast<uint16_t>(c.index()), std::move(es));
  }
  auto flat_eval = [&](const std::vector<uint16_t>& pt) -> uint16_t {
    uint16_t acc = 0;
    for (const auto& [ci, es] : flat) {
      uint16_t v = ci;
      for (size_t j = 0; j < nv; ++j) {
        for (uint8_t e = 0; e < es[j]; ++e) v = ff.mul(v, pt[j]);
      }
      acc = ff.add(acc, v);
    }
    return acc;
  };

  std::optional<FieldForm> found;
  std::vector<uint16_t> pt(nv, 0);
  for_each_hyperplane(spec, nv, [&](const FieldForm& ell) {
    // Cheap rejection first: f must vanish on a spanning point set of the
    // hyperplane.
    size_t lead = linear_pivot(ell);
    for (size_t j = 0; j < nv; ++j) {
      if (j == lead) continue;
      std::fill(pt.begin(), pt.end(), 0);
      pt[j] = 1;
      pt[lead] = static_cast<uint16_t>((-ell.coefficient(unit_mono(nv, j))).index());
      if (flat_eval(pt) != 0) return true;  // keep scanning
    }
    if (divide_by_linear(f, ell)) {
      found = ell;
      return false;
    }
    return true;
  });
  return found;
}

std::vector<std::vector<FieldElement>> vertex_kernel(const FieldForm& f) {
  FieldSpecPtr spec = f.spec();
  size_t nv = f.nvars();
  std::vector<FieldForm> partials;
  for (size_t i = 0; i < nv; ++i) partials.push_back(f.derivative(i));

  std::map<Monomial, size_t, MonomialOrder> rows;
  for (const auto& pf : partials) {
    for (const auto& [m, c] : pf.terms()) {
      (void)c;
      if (!rows.count(m)) {
        size_t id = rows.size();
        rows[m] = id;
      }
    }
  }
  if (rows.empty()) {
    std::vector<std::vector<FieldElement>> basis;
    for (size_t i = 0; i < nv; ++i) {
      std::vector<FieldElement> v(nv, FieldElement::zero(spec));
      v[i] = FieldElement::one(spec);
      basis.push_back(v);
    }
    return basis;
  }
  Mat<FieldElement> m = make_mat(rows.size(), nv, spec);
  for (size_t i = 0; i < nv; ++i) {
    for (const auto& [mono, c] : partials[i].terms()) m[rows[mono]][i] = c;
  }
  return mat_kernel(m, spec);
}

// ---------------------------------------------------------------------------
// FiberReport
// ---------------------------------------------------------------------------

void FiberReport::enforce() const {
  if (geometrically_integral && (!irreducible_over_base || !reduced)) {
    throw Error("FiberReport: geometric integrality requires irreducible and reduced");
  }
  if (vertex_space_dim >= 0 && singular_dim >= 0 && vertex_space_dim > singular_dim) {
    throw Error("FiberReport: vertex space cannot exceed the singular locus");
  }
}

// ---------------------------------------------------------------------------
// classify_quadric
// ---------------------------------------------------------------------------

namespace {

// Independent rows of the Gram matrix as linear forms: they cut out the
// kernel (the vertex of the quadric).
std::vector<FieldForm> kernel_cutting_forms(const Mat<FieldElement>& a, const FieldSpecPtr& spec) {
  size_t nv = a.size();
  size_t rank = mat_rank(a);
  std::vector<size_t> chosen;
  std::vector<std::vector<FieldElement>> rows;
  for (size_t i = 0; i < nv && chosen.size() < rank; ++i) {
    rows.push_back(a[i]);
    if (mat_rank(rows) == rows.size()) {
      chosen.push_back(i);
    } else {
      rows.pop_back();
    }
  }
  std::vector<FieldForm> forms;
  for (size_t i : chosen) {
    FieldForm ell(spec, nv, 1);
    for (size_t j = 0; j < nv; ++j) {
      if (!a[i][j].is_zero()) ell.set_term(unit_mono(nv, j), a[i][j]);
    }
    forms.push_back(normalize_linear(ell));
  }
  return forms;
}

}  // namespace

FiberReport classify_quadric(const FieldForm& q) {
  if (q.degree() != 2) throw UnsupportedCase("classify_quadric: degree must be 2");
  FieldSpecPtr spec = q.spec();
  if (spec->p() == 2) throw UnsupportedCase("classify_quadric: characteristic 2 not supported");
  if (q.is_zero()) throw UnsupportedCase("classify_quadric: zero form");
  size_t nv = q.nvars();
  int n = static_cast<int>(nv) - 1;

  Mat<FieldElement> a = gram_matrix(q);
  auto [p, diag] = diagonalize_symmetric(a, spec);
  (void)p;
  int r = 0;
  std::vector<size_t> nz;
  for (size_t i = 0; i < nv; ++i) {
    if (!diag[i].is_zero()) {
      ++r;
      nz.push_back(i);
    }
  }

  FiberReport rep;
  rep.vertex_space_dim = n - r;
  rep.singular_dim = (r == static_cast<int>(nv)) ? -1 : n - r;
  {
    std::ostringstream os;
    os << "gram rank " << r;
    rep.note(os.str());
  }

  if (r == 1) {
    rep.reduced = false;
    rep.irreducible_over_base = true;
    rep.geometrically_integral = false;
    rep.note("square of a hyperplane");
  } else if (r == 2) {
    rep.reduced = true;
    rep.geometrically_integral = false;
    // d_a y^2 + d_b z^2 splits over the base iff -d_a d_b is a square.
    FieldElement m = -(diag[nz[0]] * diag[nz[1]]);
    bool split = sqrt_or_none(m).has_value();
    rep.irreducible_over_base = !split;
    if (split) {
      rep.note("splits into two rational hyperplanes");
    } else {
      rep.conjugate_hyperplane_member =
          "two hyperplanes conjugate over the quadratic extension";
      rep.note(*rep.conjugate_hyperplane_member);
    }
  } else {
    rep.reduced = true;
    rep.irreducible_over_base = true;
    rep.geometrically_integral = true;
  }

  if (r <= 2 && n - r >= 0) {
    // Singular exactly along the vertex, which has codimension 1 in the fiber.
    rep.nonnormal_linear_component = kernel_cutting_forms(a, spec);
  }
  rep.cone_over_plane_curve = (r == 3 && n >= 3);
  rep.enforce();
  return rep;
}

// ---------------------------------------------------------------------------
// Shared pieces of the cubic / pencil classifiers
// ---------------------------------------------------------------------------

namespace {

DimEstimate dim_with_retry(const SchemeHandle& s, int K, const char* who) {
  DimEstimate de = dim_by_counting(s, K, kDefaultOpBudget);
  if (!de.conclusive) de = dim_by_counting(s, K + 1, kDefaultOpBudget);
  if (!de.conclusive) throw InconclusiveDimension(std::string(who) + ": " + de.note);
  return de;
}

// Recover the linear space along which the scheme is singular: collect
// singular points over the quadratic extension, take the span, check it is
// rational of the expected dimension, and return its cutting forms.
std::optional<std::vector<FieldForm>> linear_singular_span(const SchemeHandle& sing,
                                                           int expect_dim,
                                                           std::vector<std::string>& evidence) {
  FieldSpecPtr spec = sing.spec;
  size_t nv = sing.nvars;
  size_t want = static_cast<size_t>(expect_dim) + 1;  // vector dimension
  std::vector<std::vector<FieldElement>> pts;
  try {
    pts = collect_points(sing, 2, 800, kDefaultOpBudget);
  } catch (const BudgetExceeded&) {
    evidence.push_back("singular-point collection over the quadratic extension exceeded the budget");
    return std::nullopt;
  } catch (const UnsupportedCase&) {
    evidence.push_back("singular-point collection skipped: extension too large for tables");
    return std::nullopt;
  }
  if (pts.empty()) return std::nullopt;
  FieldSpecPtr ext = FieldSpec::make_extension(spec, 2);

  // Reduced row echelon form of the point matrix over the extension.
  Mat<FieldElement> m(pts.size(), std::vector<FieldElement>(nv, FieldElement::zero(ext)));
  for (size_t i = 0; i < pts.size(); ++i) m[i] = pts[i];
  size_t rank = 0;
  for (size_t col = 0; col < nv && rank < m.size(); ++col) {
    size_t sel = m.size();
    for (size_t i = rank; i < m.size(); ++i) {
      if (!m[i][col].is_zero()) { sel = i; break; }
    }
    if (sel == m.size()) continue;
    std::swap(m[rank], m[sel]);
    FieldElement inv = m[rank][col].inverse();
    for (size_t j = 0; j < nv; ++j) m[rank][j] = m[rank][j] * inv;
    for (size_t i = 0; i < m.size(); ++i) {
      if (i == rank) continue;
      FieldElement sc = m[i][col];
      if (sc.is_zero()) continue;
      for (size_t j = 0; j < nv; ++j) m[i][j] = m[i][j] - sc * m[rank][j];
    }
    ++rank;
  }
  if (rank != want) {
    std::ostringstream os;
    os << "singular points span vector dimension " << rank << ", expected " << want;
    evidence.push_back(os.str());
    return std::nullopt;
  }
  // A Frobenius-stable span has a rational echelon basis.
  Mat<FieldElement> span = make_mat(want, nv, spec);
  for (size_t i = 0; i < want; ++i) {
    for (size_t j = 0; j < nv; ++j) {
      std::optional<FieldElement> pj = project_to_base(m[i][j]);
      if (!pj) {
        evidence.push_back("singular-point span is not rational over the base");
        return std::nullopt;
      }
      span[i][j] = *pj;
    }
  }
  std::vector<std::vector<FieldElement>> ker = mat_kernel(span, spec);
  std::vector<FieldForm> forms;
  for (const auto& v : ker) {
    FieldForm ell(spec, nv, 1);
    for (size_t j = 0; j < nv; ++j) {
      if (!v[j].is_zero()) ell.set_term(unit_mono(nv, j), v[j]);
    }
    forms.push_back(normalize_linear(ell));
  }
  return forms;
}

}  // namespace

// ---------------------------------------------------------------------------
// classify_cubic
// ---------------------------------------------------------------------------

FiberReport classify_cubic(const FieldForm& f, int K) {
  if (f.degree() != 3) throw UnsupportedCase("classify_cubic: degree must be 3");
  FieldSpecPtr spec = f.spec();
  if (spec->p() < 5) throw UnsupportedCase("classify_cubic: characteristic must be at least 5");
  if (f.is_zero()) throw UnsupportedCase("classify_cubic: zero form");
  size_t nv = f.nvars();
  int n = static_cast<int>(nv) - 1;

  FiberReport rep;

  // Vertex directions: p with directional derivative identically zero.
  std::vector<std::vector<FieldElement>> vker = vertex_kernel(f);
  int v = static_cast<int>(vker.size()) - 1;
  rep.vertex_space_dim = v;
  size_t e = nv - vker.size();
  {
    std::ostringstream os;
    os << "vertex space of projective dimension " << v << "; " << e << " essential variables";
    rep.note(os.str());
  }
  if (e == 0) throw Error("classify_cubic: nonzero form with full vertex space");

  // Change coordinates so the vertex directions are the trailing variables;
  // the essential form lives in the leading e variables.
  FieldForm ef = f;
  if (!vker.empty()) {
    std::vector<size_t> lead = completing_units(vker, spec, nv);
    Mat<FieldElement> basis = make_mat(nv, nv, spec);  // X = basis * Y
    for (size_t k = 0; k < e; ++k) basis[lead[k]][k] = FieldElement::one(spec);
    for (size_t k = 0; k < vker.size(); ++k) {
      for (size_t i = 0; i < nv; ++i) basis[i][e + k] = vker[k][i];
    }
    FieldForm g = apply_linear_field(f, basis);
    for (const auto& [m, c] : g.terms()) {
      (void)c;
      for (size_t j = e; j < nv; ++j) {
        if (m[j] != 0) throw Error("classify_cubic: essential reduction failed");
      }
    }
    std::vector<size_t> keep;
    for (size_t j = 0; j < e; ++j) keep.push_back(j);
    ef = g.restricted(keep);
  }

  // Factorization analysis of the essential form.  Any geometric linear
  // factor of a cubic is rational, part of a conjugate pair plus a rational
  // line, or part of a conjugate triple; the pair case forces a rational
  // factor, so scanning rational hyperplanes and conjugate triples is a
  // complete reducibility test.
  std::optional<int> exact_se;
  std::optional<FieldForm> lin = rational_linear_factor(ef);
  if (lin) {
    rep.geometrically_integral = false;
    FieldForm quo = *divide_by_linear(ef, *lin);
    std::optional<FieldForm> quo2 = divide_by_linear(quo, *lin);
    int qrank = static_cast<int>(mat_rank(gram_matrix(quo)));
    if (quo2 && proportional_forms(*quo2, *lin)) {
      rep.reduced = false;
      rep.irreducible_over_base = true;
      rep.note("cube of a hyperplane");
    } else if (quo2 || qrank == 1) {
      rep.reduced = false;
      rep.irreducible_over_base = false;
      rep.note("hyperplane times the square of another hyperplane");
    } else {
      rep.reduced = true;
      rep.irreducible_over_base = false;
      if (qrank == 2) {
        rep.note("splits into a hyperplane and a rank-2 quadric");
      } else {
        rep.note("splits into a hyperplane and an irreducible quadric");
      }
    }
  } else if (e == 2 || e == 3) {
    bool conjugate_triple = false;
    if (e == 2) {
      // A binary cubic with no rational root is irreducible over the base,
      // hence a product of three conjugate linear forms.
      conjugate_triple = true;
    } else {
      // A plane cubic with no rational linear factor is either irreducible
      // over the closure or a triple of conjugate lines.  Each such line
      // meets two distinct coordinate lines in distinct points, and those
      // points are roots of the restrictions of the cubic to the coordinate
      // lines; so spans of root pairs exhaust the candidates.
      FieldSpecPtr ext3 = FieldSpec::make_extension(spec, 3);
      uint64_t q3 = ext3->order();
      if (q3 > 2000000) {
        throw UnsupportedCase("classify_cubic: cubic extension too large for the line search");
      }
      FieldForm efe = embed_form(ext3, ef);
      // Root points of the restriction to the coordinate line missing `zero`.
      auto line_roots = [&](size_t zero) {
        std::vector<size_t> keep;
        for (size_t j = 0; j < 3; ++j) {
          if (j != zero) keep.push_back(j);
        }
        FieldForm b = ef.restricted(keep);
        std::vector<std::array<FieldElement, 3>> pts;
        if (b.is_zero()) return pts;  // cannot happen without a rational factor
        UnivPoly pc = binary_to_univ(embed_form(ext3, b));
        auto add_point = [&](const FieldElement& s, const FieldElement& u) {
          std::array<FieldElement, 3> p = {FieldElement::zero(ext3), FieldElement::zero(ext3),
                                           FieldElement::zero(ext3)};
          p[keep[0]] = s;
          p[keep[1]] = u;
          pts.push_back(p);
        };
        for (uint64_t i = 0; i < q3; ++i) {
          FieldElement x = FieldElement::from_index(ext3, static_cast<uint32_t>(i));
          FieldElement acc = FieldElement::zero(ext3);
          for (size_t d = pc.size(); d-- > 0;) acc = acc * x + pc[d];
          if (acc.is_zero()) add_point(x, FieldElement::one(ext3));
        }
        if (pc.size() < 4 || pc[3].is_zero()) add_point(FieldElement::one(ext3), FieldElement::zero(ext3));
        return pts;
      };
      std::array<std::vector<std::array<FieldElement, 3>>, 3> roots = {
          line_roots(2), line_roots(1), line_roots(0)};
      auto cross = [&](const std::array<FieldElement, 3>& p, const std::array<FieldElement, 3>& q) {
        std::array<FieldElement, 3> c = {p[1] * q[2] - p[2] * q[1], p[2] * q[0] - p[0] * q[2],
                                         p[0] * q[1] - p[1] * q[0]};
        return c;
      };
      for (size_t la = 0; la < 3 && !conjugate_triple; ++la) {
        for (size_t lb = la + 1; lb < 3 && !conjugate_triple; ++lb) {
          for (const auto& p : roots[la]) {
            for (const auto& qq : roots[lb]) {
              std::array<FieldElement, 3> lc = cross(p, qq);
              if (lc[0].is_zero() && lc[1].is_zero() && lc[2].is_zero()) continue;
              FieldForm ell(ext3, 3, 1);
              for (size_t j = 0; j < 3; ++j) {
                if (!lc[j].is_zero()) ell.set_term(unit_mono(3, j), lc[j]);
              }
              FieldForm norm = ell * frobenius_form(ell, 1) * frobenius_form(ell, 2);
              if (proportional_forms(norm, efe)) {
                conjugate_triple = true;
                break;
              }
            }
            if (conjugate_triple) break;
          }
        }
      }
    }
    if (conjugate_triple) {
      rep.geometrically_integral = false;
      rep.reduced = true;
      rep.irreducible_over_base = true;  // one Galois orbit of three hyperplanes
      rep.conjugate_hyperplane_member =
          "product of three hyperplanes conjugate over the cubic extension";
      rep.note(*rep.conjugate_hyperplane_member);
      if (e == 3) {
        // Three distinct lines in the essential plane meet in points; the
        // points are conjugate, so counting over small extensions cannot see
        // them, but the dimension is known exactly.
        exact_se = 0;
        rep.note("essential singular locus: pairwise intersections of the conjugate lines");
      }
    }
  }

  // Singular locus of the essential form, joined with the vertex.
  int se;
  if (e == 1) {
    se = -1;
  } else if (exact_se) {
    se = *exact_se;
  } else {
    SchemeHandle sing = jacobian_scheme({ef});
    DimEstimate de = dim_with_retry(sing, K, "classify_cubic");
    for (const auto& [k, c] : de.counts) {
      rep.counts.emplace_back(k, c);
      std::ostringstream os;
      os << "essential singular count over extension " << k << ": " << c;
      rep.note(os.str());
    }
    se = de.dim;
  }
  rep.singular_dim = (se >= 0 || v >= 0) ? v + 1 + se : -1;
  rep.cone_over_plane_curve = (e == 3 && v >= 0);

  // Codimension-one singular locus along a linear space: recover and certify.
  if (rep.singular_dim == n - 2 && n - 2 >= 0 && rep.reduced) {
    SchemeHandle sing_full = jacobian_scheme({f});
    auto span = linear_singular_span(sing_full, n - 2, rep.evidence);
    if (span && span->size() == 2) {
      Mat<FieldElement> t = complete_to_basis(*span, spec, nv);
      FieldForm g = apply_linear_field(f, mat_inverse(t, spec));
      bool certified = true;
      for (const auto& [m, c] : g.terms()) {
        (void)c;
        if (m[0] + m[1] < 2) { certified = false; break; }
      }
      if (certified) {
        rep.nonnormal_linear_component = *span;
        rep.note("multiplicity two along a codimension-two linear space, verified symbolically");
      }
    }
  }

  rep.enforce();
  return rep;
}

// ---------------------------------------------------------------------------
// classify_pencil
// ---------------------------------------------------------------------------

FiberReport classify_pencil(const FieldForm& f, const FieldForm& g, int K) {
  if (f.degree() != 2 || g.degree() != 2) {
    throw UnsupportedCase("classify_pencil: both members must be quadrics");
  }
  FieldSpecPtr spec = f.spec();
  if (spec->p() == 2) throw UnsupportedCase("classify_pencil: characteristic 2 not supported");
  size_t nv = f.nvars();
  if (g.nvars() != nv) throw UnsupportedCase("classify_pencil: variable count mismatch");
  if (nv < 4) throw UnsupportedCase("classify_pencil: need at least four variables");
  int n = static_cast<int>(nv) - 1;

  if (f.is_zero() || g.is_zero() || proportional_forms(f, g)) {
    throw NotCompleteIntersection("classify_pencil: proportional or vanishing members");
  }

  Mat<FieldElement> a = gram_matrix(f);
  Mat<FieldElement> b = gram_matrix(g);
  size_t rank_f = mat_rank(a);
  size_t rank_g = mat_rank(b);

  // A common linear factor (only possible when both forms factor) destroys
  // the complete intersection.
  if (rank_f <= 2 && rank_g <= 2) {
    std::vector<FieldForm> ff = split_rank2_quadric(f);
    std::vector<FieldForm> gf = split_rank2_quadric(g);
    for (const auto& u : ff) {
      for (const auto& w : gf) {
        if (proportional_forms(u, w)) {
          throw NotCompleteIntersection("classify_pencil: members share a linear factor");
        }
      }
    }
  }

  FiberReport rep;

  // Vertex: common kernel of the two Gram matrices.
  {
    Mat<FieldElement> stacked = make_mat(2 * nv, nv, spec);
    for (size_t i = 0; i < nv; ++i) {
      stacked[i] = a[i];
      stacked[nv + i] = b[i];
    }
    std::vector<std::vector<FieldElement>> ker = mat_kernel(stacked, spec);
    rep.vertex_space_dim = static_cast<int>(ker.size()) - 1;
  }
  rep.cone_over_plane_curve = (rep.vertex_space_dim >= 0 && rep.vertex_space_dim == n - 4);

  // Member rank survey over the base.
  struct LowMember {
    FieldForm form;
    int rank;
    std::string where;
  };
  std::optional<LowMember> low;  // lowest-rank member seen over the base
  {
    uint64_t q = spec->order();
    std::vector<std::pair<FieldElement, FieldElement>> pts;
    for (uint64_t i = 0; i < q; ++i) {
      pts.emplace_back(FieldElement::one(spec), FieldElement::from_index(spec, static_cast<uint32_t>(i)));
    }
    pts.emplace_back(FieldElement::zero(spec), FieldElement::one(spec));
    for (const auto& [lam, mu] : pts) {
      FieldForm mem = f.scaled(lam) + g.scaled(mu);
      if (mem.is_zero()) continue;
      int rk = static_cast<int>(mat_rank(gram_matrix(mem)));
      if (rk <= 2 && (!low || rk < low->rank)) {
        std::ostringstream os;
        os << "(" << lam.describe() << ":" << mu.describe() << ")";
        low = LowMember{mem, rk, os.str()};
      }
    }
  }
  // Rank <= 2 members over the closure: the 3x3 minors of lambda A + mu B
  // must share a common binary factor.
  bool closure_low = low.has_value();
  if (!closure_low && nv >= 3) {
    FieldForm g3 = pencil_minor_gcd(a, b, 3, spec);
    if (g3.degree() > 0 || g3.is_zero()) closure_low = true;
  }

  FieldForm detb = pencil_det_binary(f, g);
  bool smooth_by_det = binary_squarefree(detb);

  if (smooth_by_det) {
    rep.reduced = true;
    rep.irreducible_over_base = true;
    rep.geometrically_integral = true;
    rep.singular_dim = -1;
    rep.note("pencil determinant form is squarefree: smooth complete intersection");
    rep.enforce();
    return rep;
  }

  if (low) {
    // Split off the low-rank member explicitly.
    rep.geometrically_integral = false;
    FieldForm other = proportional_forms(low->form, f) ? g : f;
    if (low->rank == 1) {
      // The member is c ell^2 with ell rational (any nonzero Gram row).
      Mat<FieldElement> gm = gram_matrix(low->form);
      FieldForm ell(spec, nv, 1);
      for (size_t i = 0; i < nv; ++i) {
        bool nonzero = false;
        for (size_t j = 0; j < nv; ++j) {
          if (!gm[i][j].is_zero()) { nonzero = true; break; }
        }
        if (nonzero) {
          for (size_t j = 0; j < nv; ++j) {
            if (!gm[i][j].is_zero()) ell.set_term(unit_mono(nv, j), gm[i][j]);
          }
          ell = normalize_linear(ell);
          break;
        }
      }
      FieldForm section = restrict_to_hyperplane(other, ell);
      int r1 = section.is_zero() ? 0 : static_cast<int>(mat_rank(gram_matrix(section)));
      if (r1 == 0) throw NotCompleteIntersection("classify_pencil: members share a linear factor");
      // The fiber is the doubled quadric section V(ell, other).
      rep.reduced = false;
      bool section_irred = true;
      if (r1 == 2) {
        std::vector<FieldForm> sf = split_rank2_quadric(section);
        bool rational_split = form_is_rational(normalize_linear(sf[0])) &&
                              form_is_rational(normalize_linear(sf[1]));
        section_irred = !rational_split;
      }
      rep.irreducible_over_base = section_irred;
      std::ostringstream os;
      os << "member of rank 1 at " << low->where << ": doubled hyperplane section";
      rep.note(os.str());
    } else {
      std::vector<FieldForm> factors = split_rank2_quadric(low->form);
      FieldSpecPtr ext2 = factors[0].spec();
      FieldForm other_e = embed_form(ext2, other);
      auto section_rank = [&](const FieldForm& ell) {
        FieldForm s = restrict_to_hyperplane(other_e, ell);
        return s.is_zero() ? 0 : static_cast<int>(mat_rank(gram_matrix(s)));
      };
      bool split = form_is_rational(normalize_linear(factors[0])) &&
                   form_is_rational(normalize_linear(factors[1]));
      int r1 = section_rank(factors[0]);
      int r2 = section_rank(factors[1]);
      if (r1 == 0 || r2 == 0) {
        throw NotCompleteIntersection("classify_pencil: members share a linear factor");
      }
      if (split) {
        std::ostringstream os;
        os << "member of rank 2 at " << low->where << " splits into two rational hyperplanes";
        rep.note(os.str());
      } else {
        std::ostringstream os;
        os << "member of rank 2 at " << low->where
           << " splits into conjugate hyperplanes over the quadratic extension";
        rep.conjugate_hyperplane_member = os.str();
        rep.note(*rep.conjugate_hyperplane_member);
        if (r1 != r2) throw Error("classify_pencil: conjugate sections with different ranks");
      }
      // The two hyperplanes of the rank-2 member meet in a rational
      // codimension-two space; two independent Gram rows are a rational basis
      // of its cutting forms.  If the other member vanishes on that space,
      // the fiber contains it with multiplicity at least two, because the
      // rank-2 member already vanishes doubly along it.
      Mat<FieldElement> gm = gram_matrix(low->form);
      std::vector<FieldForm> rows;
      for (size_t i = 0; i < nv && rows.size() < 2; ++i) {
        FieldForm cand(spec, nv, 1);
        for (size_t j = 0; j < nv; ++j) {
          if (!gm[i][j].is_zero()) cand.set_term(unit_mono(nv, j), gm[i][j]);
        }
        if (cand.is_zero()) continue;
        if (rows.empty() || !proportional_forms(rows[0], cand)) {
          rows.push_back(normalize_linear(cand));
        }
      }
      if (rows.size() != 2) throw Error("classify_pencil: rank-2 Gram row extraction failed");
      Mat<FieldElement> t = complete_to_basis(rows, spec, nv);
      FieldForm oc = apply_linear_field(other, mat_inverse(t, spec));
      bool shared = true;   // the other member vanishes on the intersection
      bool doubled = true;  // ... to order two, leaving nothing outside it
      for (const auto& [m, c] : oc.terms()) {
        (void)c;
        if (m[0] + m[1] == 0) shared = false;
        if (m[0] + m[1] < 2) doubled = false;
      }
      if (shared) {
        rep.reduced = false;
        rep.irreducible_over_base = doubled;
        if (doubled) {
          rep.note("fiber is supported on the rational intersection of the two "
                   "hyperplanes of the rank-2 member");
        } else {
          rep.note("the rational intersection of the two hyperplanes of the rank-2 "
                   "member lies on the fiber with multiplicity two, plus residual "
                   "components");
        }
      } else {
        rep.reduced = (r1 >= 2 && r2 >= 2);
        if (split) {
          rep.irreducible_over_base = false;
        } else if (r1 >= 3 || r1 == 1) {
          // Irreducible (or doubled) sections swap under the Galois action:
          // a single orbit, hence one base component.
          rep.irreducible_over_base = true;
        } else {
          // Rank-2 sections split into two pieces each; the four pieces form
          // one orbit or pair into two orbits, decided by whether the pieces
          // of one section are already defined over the quadratic extension.
          FieldForm sec = restrict_to_hyperplane(other_e, factors[0]);
          std::vector<FieldForm> sf2 = split_rank2_quadric(sec);
          bool over_ext2 = form_is_rational(normalize_linear(sf2[0])) &&
                           form_is_rational(normalize_linear(sf2[1]));
          rep.irreducible_over_base = !over_ext2;
          if (over_ext2) {
            rep.note("rank-2 conjugate sections split over the quadratic extension: "
                     "two conjugate pairs of components");
          } else {
            rep.note("rank-2 conjugate sections need a further quadratic extension: "
                     "one orbit of four components");
          }
        }
      }
    }
  } else if (closure_low) {
    rep.geometrically_integral = false;
    rep.note("rank <= 2 member over an extension (common factor of the 3x3 minors); "
             "base reducibility undetermined");
  }

  // Dimension of the singular locus by counting.
  SchemeHandle sing = jacobian_scheme({f, g});
  DimEstimate de = dim_with_retry(sing, K, "classify_pencil");
  for (const auto& [k, c] : de.counts) {
    rep.counts.emplace_back(k, c);
    std::ostringstream os;
    os << "singular count over extension " << k << ": " << c;
    rep.note(os.str());
  }
  rep.singular_dim = de.dim;

  if (!low && !closure_low) {
    int xdim = n - 2;
    if (rep.singular_dim <= xdim - 2) {
      // Normal (regular in codimension one, Serre's criterion holds for a
      // complete intersection) and connected, hence integral.
      rep.reduced = true;
      rep.irreducible_over_base = true;
      rep.geometrically_integral = true;
      rep.note("singular locus has codimension >= 2 in the intersection: normal");
    } else {
      // Codimension-one singular locus: look for degree-1 or degree-2
      // components visible inside rational hyperplanes.
      bool found_plane = false, found_quadric = false, rational_piece = false;
      bool nonreduced_section = false;
      for_each_hyperplane(spec, nv, [&](const FieldForm& ell) {
        FieldForm fr = restrict_to_hyperplane(f, ell);
        FieldForm gr = restrict_to_hyperplane(g, ell);
        if (fr.is_zero() || gr.is_zero()) return true;  // excluded by rank >= 3
        if (proportional_forms(fr, gr)) {
          found_quadric = true;
          rational_piece = true;
          if (mat_rank(gram_matrix(fr)) <= 1) nonreduced_section = true;
          return false;
        }
        size_t rf = mat_rank(gram_matrix(fr));
        size_t rg = mat_rank(gram_matrix(gr));
        if (rf <= 2 && rg <= 2 && rf >= 1 && rg >= 1) {
          std::vector<FieldForm> u = split_rank2_quadric(fr);
          std::vector<FieldForm> w = split_rank2_quadric(gr);
          for (const auto& uu : u) {
            for (const auto& ww : w) {
              if (proportional_forms(uu, ww)) {
                found_plane = true;
                if (form_is_rational(normalize_linear(uu))) rational_piece = true;
              }
            }
          }
          if (found_plane) return false;
        }
        return true;
      });
      if (found_quadric) {
        rep.geometrically_integral = false;
        rep.irreducible_over_base = false;
        rep.reduced = !nonreduced_section;
        rep.note("quadric component inside a rational hyperplane");
      } else if (found_plane) {
        rep.geometrically_integral = false;
        if (rational_piece) {
          rep.irreducible_over_base = false;
          rep.note("plane component inside a rational hyperplane");
        } else {
          rep.note("conjugate plane components inside a rational hyperplane; "
                   "base reducibility undetermined");
        }
      } else {
        rep.reduced = true;
        rep.irreducible_over_base = true;
        rep.geometrically_integral = true;
        rep.note("codimension-one singular locus; no member of low rank and no component "
                 "visible in rational hyperplanes");
      }
    }
  }

  // Non-normal along a linear space of dimension n-3: recover and certify.
  if (rep.singular_dim == n - 3 && n - 3 >= 0) {
    auto span = linear_singular_span(sing, n - 3, rep.evidence);
    if (span && span->size() == 3) {
      Mat<FieldElement> t = complete_to_basis(*span, spec, nv);
      Mat<FieldElement> tinv = mat_inverse(t, spec);
      FieldForm fw = apply_linear_field(f, tinv);
      FieldForm gw = apply_linear_field(g, tinv);
      auto vanishes_on_span = [&](const FieldForm& h) {
        for (const auto& [m, c] : h.terms()) {
          (void)c;
          if (m[0] + m[1] + m[2] == 0) return false;
        }
        return true;
      };
      bool certified = vanishes_on_span(fw) && vanishes_on_span(gw);
      if (certified) {
        std::vector<size_t> keep;
        for (size_t j = 3; j < nv; ++j) keep.push_back(j);
        std::vector<FieldForm> df, dg;
        for (size_t j = 0; j < nv; ++j) {
          df.push_back(fw.derivative(j).restricted(keep));
          dg.push_back(gw.derivative(j).restricted(keep));
        }
        for (size_t i = 0; i < nv && certified; ++i) {
          for (size_t j = i + 1; j < nv && certified; ++j) {
            FieldForm minor = df[i] * dg[j] - df[j] * dg[i];
            if (!minor.is_zero()) certified = false;
          }
        }
      }
      if (certified) {
        rep.nonnormal_linear_component = *span;
        rep.note("singular along a linear space of codimension one in the intersection, "
                 "verified symbolically");
      }
    }
  }

  rep.enforce();
  return rep;
}

}  // namespace ssm
