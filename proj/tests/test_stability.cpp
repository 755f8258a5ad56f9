#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "ssm/fiber.hpp"
#include "ssm/stab.hpp"

using namespace ssm;

namespace {

FieldElement fe(const FieldSpecPtr& s, int64_t v) { return FieldElement::from_int(s, v); }

Monomial mm(size_t nv, std::vector<size_t> vars) {
  std::vector<uint32_t> e(nv, 0);
  for (size_t v : vars) e[v] += 1;
  return Monomial(e);
}

// Exact polynomial coefficient c0 + c1 t + c2 t^2 + ...
Series sp(const FieldSpecPtr& s, std::vector<int64_t> c) {
  std::vector<FieldElement> v;
  for (int64_t x : c) v.push_back(fe(s, x));
  return Series::polynomial(s, std::move(v));
}

// Builder: list of (variables, coefficient-poly) pairs.
HomogForm hf(const FieldSpecPtr& s, size_t nv, uint32_t d,
             std::vector<std::pair<std::vector<size_t>, std::vector<int64_t>>> terms) {
  HomogForm f(s, nv, d);
  for (auto& [vars, c] : terms) f.add_term(mm(nv, vars), sp(s, c));
  return f;
}

std::vector<Monomial> monomials_of(size_t nv, uint32_t d) {
  std::vector<Monomial> out;
  std::vector<uint32_t> e(nv, 0);
  // odometer over exponent vectors summing to d
  auto rec = [&](auto&& self, size_t i, uint32_t left) -> void {
    if (i + 1 == nv) {
      e[i] = left;
      out.push_back(Monomial(e));
      return;
    }
    for (uint32_t k = 0; k <= left; ++k) {
      e[i] = k;
      self(self, i + 1, left - k);
    }
  };
  rec(rec, 0, d);
  return out;
}

HomogForm random_form(std::mt19937_64& rng, const FieldSpecPtr& s, size_t nv, uint32_t d,
                      int64_t max_tdeg) {
  HomogForm f(s, nv, d);
  for (const Monomial& m : monomials_of(nv, d)) {
    std::vector<FieldElement> c;
    for (int64_t i = 0; i <= max_tdeg; ++i)
      c.push_back(FieldElement::from_index(s, rng() % s->order()));
    f.add_term(m, Series::polynomial(s, std::move(c)));
  }
  return f;
}

// Independent oracle: weighted minimum and the field form it is attained on.
std::pair<int64_t, FieldForm> lowest_part(const HomogForm& f, const std::vector<int64_t>& w) {
  int64_t best = 0;
  bool have = false;
  for (const auto& [m, c] : f.terms()) {
    Valuation v = c.valuation();
    if (!v.is_finite()) continue;
    int64_t s = v.finite_value();
    const auto& e = m.exps();
    for (size_t i = 0; i < e.size(); ++i) s += static_cast<int64_t>(e[i]) * w[i];
    if (!have || s < best) best = s, have = true;
  }
  REQUIRE(have);
  FieldForm low(f.spec(), f.nvars(), f.degree());
  for (const auto& [m, c] : f.terms()) {
    Valuation v = c.valuation();
    if (!v.is_finite()) continue;
    int64_t s = v.finite_value();
    const auto& e = m.exps();
    for (size_t i = 0; i < e.size(); ++i) s += static_cast<int64_t>(e[i]) * w[i];
    if (s == best) low.add_term(m, c.coeff(v.finite_value()));
  }
  return {best, low};
}

Mat<FieldElement> random_unimodular(std::mt19937_64& rng, const FieldSpecPtr& s, size_t n) {
  while (true) {
    Mat<FieldElement> a(n, std::vector<FieldElement>(n, FieldElement::zero(s)));
    for (auto& row : a)
      for (auto& x : row) x = FieldElement::from_index(s, rng() % s->order());
    if (mat_rank(a) == n) return a;
  }
}

int64_t finite_val(const Valuation& v) {
  REQUIRE(v.is_finite());
  return v.finite_value();
}

}  // namespace

TEST_CASE("weight systems normalize and describe themselves") {
  WeightSystem w({2, 3, 2});
  CHECK(w.w == std::vector<int64_t>{0, 1, 0});
  CHECK(w.sum() == 1);
  CHECK(w.describe() == "(0,1,0)");
  CHECK(WeightSystem::zero(4).sum() == 0);
  CHECK(WeightSystem({1, 1}) == WeightSystem({5, 5}));
  CHECK_THROWS_AS(WeightSystem({-1, 0}), Error);
  CHECK_THROWS_AS(WeightSystem({}), Error);
}

TEST_CASE("weighted multiplicities match hand values") {
  FieldSpecPtr s = FieldSpec::prime_field(5);

  // X0 X1 + X2^2 at weights (1,1,0): the X2^2 term carries weight zero.
  HomogForm f = hf(s, 3, 2, {{{0, 1}, {1}}, {{2, 2}, {1}}});
  CHECK(mult_w(f, WeightSystem({1, 1, 0})) == 0);
  CHECK(mult_w(f, WeightSystem({0, 3, 1})) == 2);

  // t X0^3 + X1^3 at zero weights: valuation of the X1^3 coefficient wins.
  HomogForm g = hf(s, 2, 3, {{{0, 0, 0}, {0, 1}}, {{1, 1, 1}, {1}}});
  CHECK(mult_w(g, WeightSystem::zero(2)) == 0);
  CHECK(mult_w(g, WeightSystem({0, 1})) == 1);

  // X0 X2 + X1^2 at weights (2,1,0): both terms sit at weight two.
  HomogForm h = hf(s, 3, 2, {{{0, 2}, {1}}, {{1, 1}, {1}}});
  CHECK(mult_w(h, WeightSystem({2, 1, 0})) == 2);

  // Scaling by t raises every multiplicity by one.
  HomogForm tf = f.scaled(Series::monomial(fe(s, 1), 1));
  CHECK(mult_w(tf, WeightSystem({1, 1, 0})) == 1);
  CHECK(mult_w(tf, WeightSystem({0, 3, 1})) == 3);

  CHECK_THROWS_AS(mult_w(f, WeightSystem({1, 1})), Error);
  CHECK_THROWS_AS(mult_w(HomogForm(s, 2, 2), WeightSystem::zero(2)), Error);
}

TEST_CASE("multiplicity at zero weights survives unimodular changes") {
  std::mt19937_64 rng(711);
  FieldSpecPtr s = FieldSpec::prime_field(3);
  for (int it = 0; it < 20; ++it) {
    HomogForm f = random_form(rng, s, 3, 2, 2);
    if (f.is_zero()) continue;
    int64_t m0 = mult_w(f, WeightSystem::zero(3));
    LinearChange a = LinearChange::from_field_matrix(random_unimodular(rng, s, 3));
    CHECK(mult_w(apply_linear(f, a), WeightSystem::zero(3)) == m0);
  }
}

TEST_CASE("pencil multiplicity follows the wedge table") {
  FieldSpecPtr s = FieldSpec::prime_field(3);

  // (X0 X1, X0 X1 + t X2 X3): the only wedge entry is t X0X1 ^ X2X3.
  HomogForm f = hf(s, 4, 2, {{{0, 1}, {1}}});
  HomogForm g = hf(s, 4, 2, {{{0, 1}, {1}}, {{2, 3}, {0, 1}}});
  CHECK(mult_w_pencil(f, g, WeightSystem::zero(4)) == 1);
  CHECK(mult_w_pencil(f, g, WeightSystem({1, 0, 0, 0})) == 2);

  // Row operations leave the wedge unchanged.
  HomogForm g2 = g - f.scaled(Series::constant(fe(s, 2)));
  CHECK(mult_w_pencil(f, g2, WeightSystem::zero(4)) == 1);
  CHECK(mult_w_pencil(f, g2, WeightSystem({1, 0, 0, 0})) == 2);

  // Proportional members have an empty wedge table.
  CHECK_THROWS_AS(mult_w_pencil(f, f.scaled(Series::constant(fe(s, 2))), WeightSystem::zero(4)),
                  NotCompleteIntersection);
}

TEST_CASE("pencil multiplicity is superadditive with equality iff lowest parts differ") {
  std::mt19937_64 rng(4242);
  FieldSpecPtr s = FieldSpec::prime_field(5);
  int checked = 0;
  while (checked < 50) {
    HomogForm f = random_form(rng, s, 3, 2, 2);
    HomogForm g = random_form(rng, s, 3, 2, 2);
    if (f.is_zero() || g.is_zero()) continue;
    std::vector<int64_t> w = {static_cast<int64_t>(rng() % 3), static_cast<int64_t>(rng() % 3),
                              static_cast<int64_t>(rng() % 3)};
    if (*std::min_element(w.begin(), w.end()) != 0) w[rng() % 3] = 0;
    int64_t lhs;
    try {
      lhs = mult_w_pencil(f, g, WeightSystem(w));
    } catch (const NotCompleteIntersection&) {
      continue;  // proportional pair
    }
    auto [mf, lowf] = lowest_part(f, w);
    auto [mg, lowg] = lowest_part(g, w);
    CHECK(lhs >= mf + mg);
    bool prop = proportional_forms(lowf, lowg);
    if (prop)
      CHECK(lhs > mf + mg);
    else
      CHECK(lhs == mf + mg);
    ++checked;
  }
}

TEST_CASE("semistability checks pin thresholds and boundary flags") {
  FieldSpecPtr s = FieldSpec::prime_field(5);

  // X0 X2 + X1^2 at (2,1,0): multiplicity two equals 2*sum/3 exactly.
  HomogForm h = hf(s, 3, 2, {{{0, 2}, {1}}, {{1, 1}, {1}}});
  WeightCheck c = check_weight_single(h, WeightSystem({2, 1, 0}));
  CHECK(c.mult == 2);
  CHECK(c.threshold_num == 6);
  CHECK(c.threshold_den == 3);
  CHECK(c.pass);
  CHECK(c.boundary);
  CHECK(c.describe() == "mult 2 vs threshold 6/3: pass (boundary)");

  // X0^2 + t(X1^2 + X2^2) at (1,0,0): multiplicity one against 2/3.
  HomogForm f =
      hf(s, 3, 2, {{{0, 0}, {1}}, {{1, 1}, {0, 1}}, {{2, 2}, {0, 1}}});
  WeightCheck c2 = check_weight_single(f, WeightSystem({1, 0, 0}));
  CHECK(c2.mult == 1);
  CHECK(c2.threshold_num == 2);
  CHECK(c2.threshold_den == 3);
  CHECK_FALSE(c2.pass);
  CHECK_FALSE(c2.boundary);

  // Pencil with no weight: any positive multiplicity fails.
  HomogForm pf = hf(s, 4, 2, {{{0, 1}, {1}}});
  HomogForm pg = hf(s, 4, 2, {{{0, 1}, {1}}, {{2, 3}, {0, 1}}});
  WeightCheck c3 = check_weight_pencil(pf, pg, WeightSystem::zero(4));
  CHECK(c3.mult == 1);
  CHECK(c3.threshold_num == 0);
  CHECK_FALSE(c3.pass);
}

TEST_CASE("truncated coefficients surface as precision failures, not wrong answers") {
  FieldSpecPtr s = FieldSpec::prime_field(3);
  HomogForm f(s, 2, 2);
  f.add_term(mm(2, {0, 0}), Series::one(s));
  f.add_term(mm(2, {1, 1}), Series::zero(s, 1));  // certified only to t^1

  // Weight on X0: the truncated X1^2 coefficient could undercut the minimum.
  CHECK_THROWS_AS(mult_w(f, WeightSystem({1, 0})), PrecisionExhausted);
  // Weight on X1: the exact term already sits below any possible value.
  CHECK(mult_w(f, WeightSystem({0, 1})) == 0);
}

TEST_CASE("destabilizer witnesses refuse passing checks") {
  FieldSpecPtr s = FieldSpec::prime_field(3);
  HomogForm f = hf(s, 3, 2, {{{0, 0}, {1}}, {{1, 1}, {1}}, {{2, 2}, {1}}});
  ModelState st = ModelState::single(f);
  LinearChange id = LinearChange::identity(s, 3);
  CHECK_THROWS_AS(make_destabilizer_witness(st, id, WeightSystem::zero(3), "manual"),
                  NotDestabilizing);
  // A genuine failure constructs fine.
  HomogForm bad =
      hf(s, 3, 2, {{{0, 0}, {1}}, {{1, 1}, {0, 1}}, {{2, 2}, {0, 1}}});
  DestabilizerWitness w = make_destabilizer_witness(ModelState::single(bad), id,
                                                    WeightSystem({1, 0, 0}), "manual");
  CHECK_FALSE(w.check.pass);
  CHECK(w.check.mult == 1);
  CHECK(w.origin == "manual");
}

TEST_CASE("search clears a diagonal quadric and flags coefficient-wide division") {
  FieldSpecPtr s = FieldSpec::prime_field(3);
  HomogForm diag =
      hf(s, 4, 2, {{{0, 0}, {1}}, {{1, 1}, {1}}, {{2, 2}, {1}}, {{3, 3}, {1}}});
  StabilityVerdict v = search_destabilizer(ModelState::single(diag));
  CHECK(v.semistable_against_search);
  CHECK_FALSE(v.witness.has_value());
  CHECK_FALSE(v.searched.empty());

  // Every coefficient divisible by t: the zero weight system already fails.
  HomogForm bad =
      hf(s, 3, 2, {{{0, 0}, {0, 1}}, {{1, 1}, {0, 1}}, {{2, 2}, {0, 1}}});
  StabilityVerdict vb = search_destabilizer(ModelState::single(bad));
  REQUIRE(vb.witness.has_value());
  CHECK(vb.witness->weights == WeightSystem::zero(3));
  CHECK(vb.witness->origin == "identity");
  CHECK(vb.witness->check.mult == 1);
}

TEST_CASE("search finds coordinate-aligned and hidden quadric destabilizers") {
  FieldSpecPtr s = FieldSpec::prime_field(3);

  // Aligned: X0^2 + t(X1^2 + X2^2) fails at (1,0,0) under the identity.
  HomogForm f =
      hf(s, 3, 2, {{{0, 0}, {1}}, {{1, 1}, {0, 1}}, {{2, 2}, {0, 1}}});
  StabilityVerdict v = search_destabilizer(ModelState::single(f));
  REQUIRE(v.witness.has_value());
  CHECK(v.witness->weights == WeightSystem({1, 0, 0}));
  CHECK(v.witness->origin == "identity");
  CHECK(v.witness->check.describe() == "mult 1 vs threshold 2/3: fail");

  // Hidden: (X0+X1)^2 + t(X1^2 + X2^2) needs the Gram-kernel change first.
  HomogForm g = hf(s, 3, 2,
                   {{{0, 0}, {1}},
                    {{0, 1}, {2}},
                    {{1, 1}, {1, 1}},
                    {{2, 2}, {0, 1}}});
  StabilityVerdict vg = search_destabilizer(ModelState::single(g));
  REQUIRE(vg.witness.has_value());
  CHECK(vg.witness->origin == "Gram kernel to the trailing coordinates");
  CHECK(vg.witness->weights == WeightSystem({1, 0, 0}));

  // The witness replays: applying the change and weights must fail the check.
  WeightCheck replay =
      check_weight_single(apply_linear(g, vg.witness->change), vg.witness->weights);
  CHECK_FALSE(replay.pass);
}

TEST_CASE("search respects boundary equalities on cubic models") {
  FieldSpecPtr s = FieldSpec::prime_field(7);

  // X0^3 + t(X1^3 + X2^3): weight (1,0,0) meets the threshold exactly.
  HomogForm f = hf(s, 3, 3,
                   {{{0, 0, 0}, {1}}, {{1, 1, 1}, {0, 1}}, {{2, 2, 2}, {0, 1}}});
  StabilityVerdict v = search_destabilizer(ModelState::single(f));
  CHECK(v.semistable_against_search);

  // X0^3 + t^2(X1^3 + X2^3): the same weight now fails strictly.
  HomogForm g = hf(s, 3, 3,
                   {{{0, 0, 0}, {1}}, {{1, 1, 1}, {0, 0, 1}}, {{2, 2, 2}, {0, 0, 1}}});
  StabilityVerdict vg = search_destabilizer(ModelState::single(g));
  REQUIRE(vg.witness.has_value());
  CHECK(vg.witness->weights == WeightSystem({1, 0, 0}));
  CHECK(vg.witness->check.mult == 2);
  CHECK(vg.witness->check.threshold_num == 3);
}

TEST_CASE("search handles pencils in both directions") {
  FieldSpecPtr s = FieldSpec::prime_field(3);

  // Member with a split line pair destabilizes a six-variable pencil.
  HomogForm f = hf(s, 6, 2, {{{0, 1}, {1}}});
  HomogForm g =
      hf(s, 6, 2, {{{2, 3}, {1}}, {{4, 5}, {1}}, {{0, 5}, {0, 1}}});
  StabilityVerdict v = search_destabilizer(ModelState::pencil(f, g));
  REQUIRE(v.witness.has_value());
  CHECK(v.witness->weights == WeightSystem({0, 1, 0, 0, 0, 0}));
  CHECK(v.witness->origin == "identity");
  CHECK(v.witness->check.mult == 1);
  CHECK(v.witness->check.threshold_num == 4);
  CHECK(v.witness->check.threshold_den == 6);

  // A smooth (2,2) intersection in four variables passes the whole search.
  FieldSpecPtr s5 = FieldSpec::prime_field(5);
  HomogForm sf = hf(s5, 4, 2, {{{0, 1}, {1}}, {{2, 3}, {1}}});
  HomogForm sg = hf(s5, 4, 2,
                    {{{0, 0}, {1}}, {{1, 1}, {1}}, {{2, 2}, {-1}}, {{3, 3}, {1}}});
  StabilityVerdict vs = search_destabilizer(ModelState::pencil(sf, sg));
  CHECK(vs.semistable_against_search);

  CHECK_THROWS_AS(search_destabilizer(ModelState::pencil(sf, sg), 2), BudgetExceeded);
}

TEST_CASE("search reports precision exhaustion instead of guessing") {
  FieldSpecPtr s = FieldSpec::prime_field(3);
  HomogForm f(s, 3, 2);
  f.add_term(mm(3, {0, 0}), Series::one(s));
  f.add_term(mm(3, {1, 1}), Series::zero(s, 0));  // nothing certified
  f.add_term(mm(3, {2, 2}), Series::one(s));
  CHECK_THROWS_AS(search_destabilizer(ModelState::single(f)), PrecisionExhausted);
}

TEST_CASE("gram series and pencil determinant match direct expansion") {
  FieldSpecPtr s = FieldSpec::prime_field(7);
  // q = X0^2 + 3 X0 X1 + t X1^2
  HomogForm q = hf(s, 2, 2, {{{0, 0}, {1}}, {{0, 1}, {3}}, {{1, 1}, {0, 1}}});
  Mat<Series> a = gram_series(q);
  FieldElement half = fe(s, 2).inverse();
  CHECK(a[0][0].residue() == fe(s, 1));
  CHECK(a[0][1].residue() == fe(s, 3) * half);
  CHECK(a[1][0].residue() == fe(s, 3) * half);
  CHECK(a[1][1].coeff(1) == fe(s, 1));
  CHECK(a[1][1].coeff(0) == fe(s, 0));

  // Diagonal pencil: det(lambda A + mu B) = prod (lambda a_i + mu b_i).
  HomogForm df = hf(s, 4, 2, {{{0, 0}, {1}}, {{1, 1}, {1}}, {{2, 2}, {1}}, {{3, 3}, {1}}});
  HomogForm dg = hf(s, 4, 2, {{{0, 0}, {0, 1}}, {{2, 2}, {1}}, {{3, 3}, {2}}});
  std::vector<Series> d = pencil_det_series(df, dg);
  REQUIRE(d.size() == 5);
  // b = (t, 0, 1, 2): elementary symmetric sums give the coefficients.
  CHECK(d[4].certified_equal(sp(s, {1})));
  CHECK(d[3].certified_equal(sp(s, {3, 1})));
  CHECK(d[2].certified_equal(sp(s, {2, 3})));
  CHECK(d[1].certified_equal(sp(s, {0, 2})));
  CHECK(d[0].is_certified_zero());
}

TEST_CASE("quadric invariant valuation obeys the transformation laws") {
  FieldSpecPtr s = FieldSpec::prime_field(3);
  // diag(1, 1, t^2): determinant valuation two.
  HomogForm f = hf(s, 3, 2, {{{0, 0}, {1}}, {{1, 1}, {1}}, {{2, 2}, {0, 0, 1}}});
  CHECK(finite_val(invariant_valuation(ModelState::single(f))) == 2);

  // X2 -> t X2 adds twice the weight sum.
  CHECK(finite_val(invariant_valuation(ModelState::single(weighted_scale(f, {0, 0, 1})))) == 4);

  // F -> tF adds the variable count.
  HomogForm tf = f.scaled(Series::monomial(fe(s, 1), 1));
  CHECK(finite_val(invariant_valuation(ModelState::single(tf))) == 5);

  // Exactly degenerate quadric: infinite valuation.
  HomogForm cone = hf(s, 3, 2, {{{0, 1}, {1}}});
  CHECK(invariant_valuation(ModelState::single(cone)).is_infinite());

  std::mt19937_64 rng(99);
  for (int it = 0; it < 10; ++it) {
    LinearChange a = LinearChange::from_field_matrix(random_unimodular(rng, s, 3));
    CHECK(finite_val(invariant_valuation(ModelState::single(apply_linear(f, a)))) == 2);
  }
}

TEST_CASE("cubic invariant valuation matches the diagonal oracle") {
  FieldSpecPtr s = FieldSpec::prime_field(7);
  // Smooth Fermat cubic: unit invariant anchors the normalization.
  HomogForm fermat =
      hf(s, 3, 3, {{{0, 0, 0}, {1}}, {{1, 1, 1}, {1}}, {{2, 2, 2}, {1}}});
  CHECK(finite_val(invariant_valuation(ModelState::single(fermat))) == 0);

  // a X0^3 + b X1^3 + c X2^3 has valuation 4(val a + val b + val c).
  std::mt19937_64 rng(1234);
  for (int it = 0; it < 8; ++it) {
    int64_t va = rng() % 3, vb = rng() % 3, vc = rng() % 3;
    HomogForm f(s, 3, 3);
    f.add_term(mm(3, {0, 0, 0}), Series::monomial(fe(s, 1 + (int64_t)(rng() % 6)), va));
    f.add_term(mm(3, {1, 1, 1}), Series::monomial(fe(s, 1 + (int64_t)(rng() % 6)), vb));
    f.add_term(mm(3, {2, 2, 2}), Series::monomial(fe(s, 1 + (int64_t)(rng() % 6)), vc));
    CHECK(finite_val(invariant_valuation(ModelState::single(f))) == 4 * (va + vb + vc));
  }

  // The pinned example: X0^3 + X1^3 + t^2 X2^3 before and after X2 -> t X2.
  HomogForm g =
      hf(s, 3, 3, {{{0, 0, 0}, {1}}, {{1, 1, 1}, {1}}, {{2, 2, 2}, {0, 0, 1}}});
  CHECK(finite_val(invariant_valuation(ModelState::single(g))) == 8);
  CHECK(finite_val(invariant_valuation(ModelState::single(weighted_scale(g, {0, 0, 1})))) == 20);

  // Unimodular changes leave the valuation alone.
  for (int it = 0; it < 5; ++it) {
    LinearChange a = LinearChange::from_field_matrix(random_unimodular(rng, s, 3));
    CHECK(finite_val(invariant_valuation(ModelState::single(apply_linear(g, a)))) == 8);
  }

  // A cone (no X2 anywhere) has vanishing invariant.
  HomogForm cone = hf(s, 3, 3, {{{0, 0, 0}, {1}}, {{1, 1, 1}, {1}}, {{0, 1, 1}, {1}}});
  CHECK(invariant_valuation(ModelState::single(cone)).is_infinite());

  FieldSpecPtr s3 = FieldSpec::prime_field(3);
  HomogForm small =
      hf(s3, 3, 3, {{{0, 0, 0}, {1}}, {{1, 1, 1}, {1}}, {{2, 2, 2}, {1}}});
  CHECK_THROWS_AS(invariant_valuation(ModelState::single(small)), UnsupportedCase);
}

TEST_CASE("pencil invariant valuation handles unit and shifted leading coefficients") {
  FieldSpecPtr s = FieldSpec::prime_field(3);

  // Smooth pencil in six variables over F_3 (determinant degree divisible by
  // the characteristic): valuation zero, cross-checked squarefree.
  HomogForm f = hf(s, 6, 2, {{{0, 1}, {1}}, {{2, 3}, {1}}, {{4, 5}, {1}}});
  HomogForm g = hf(s, 6, 2,
                   {{{0, 0}, {2}},
                    {{1, 1}, {1}},
                    {{2, 2}, {1}},
                    {{3, 3}, {1}},
                    {{4, 4}, {1}},
                    {{4, 5}, {1}},
                    {{5, 5}, {2}}});
  CHECK(binary_squarefree(pencil_det_binary(residue_form(f), residue_form(g))));
  CHECK(finite_val(invariant_valuation(ModelState::pencil(f, g))) == 0);

  // Degenerating pencil whose determinant form has zero leading coefficient
  // and whose shear parameter only exists over the quadratic extension:
  // det = mu (mu^2 - lambda^2)(lambda t - mu) up to units, discriminant
  // valuation two.
  HomogForm pf = hf(s, 4, 2, {{{0, 1}, {1}}, {{2, 2}, {0, 1}}});
  HomogForm pg = hf(s, 4, 2,
                    {{{0, 0}, {1}}, {{1, 1}, {1}}, {{2, 3}, {1}}, {{3, 3}, {1}}});
  CHECK(finite_val(invariant_valuation(ModelState::pencil(pf, pg))) == 2);

  // A pencil with a repeated degenerate member has discriminant zero.
  HomogForm rf = hf(s, 4, 2, {{{0, 1}, {1}}, {{2, 2}, {0, 1}}});
  HomogForm rg = hf(s, 4, 2, {{{0, 0}, {1}}, {{1, 1}, {1}}, {{2, 3}, {1}}});
  CHECK(invariant_valuation(ModelState::pencil(rf, rg)).is_infinite());

  CHECK_THROWS_AS(invariant_valuation(ModelState::single(hf(s, 2, 4, {{{0, 0, 0, 0}, {1}}}))),
                  UnsupportedCase);
}
