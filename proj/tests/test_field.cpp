#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "ssm/field.hpp"

using namespace ssm;

namespace {

// Oracle: for degree <= 3, a monic polynomial over F_p is reducible iff it has
// a root in F_p (any factorization contains a linear factor).  This checks the
// library's modulus choice through an independent route.
bool has_root_mod_p(const std::vector<uint32_t>& f, uint32_t p) {
  for (uint32_t r = 0; r < p; ++r) {
    uint64_t acc = 0;
    for (size_t i = f.size(); i-- > 0;) acc = (acc * r + f[i]) % p;
    if (acc == 0) return true;
  }
  return false;
}

std::vector<uint32_t> oracle_lex_least_irreducible(uint32_t p, uint32_t k) {
  REQUIRE(k <= 3);
  uint64_t count = 1;
  for (uint32_t i = 0; i < k; ++i) count *= p;
  for (uint64_t v = 0; v < count; ++v) {
    std::vector<uint32_t> f(k + 1, 0);
    uint64_t w = v;
    for (uint32_t i = 0; i < k; ++i) {
      f[i] = (uint32_t)(w % p);
      w /= p;
    }
    f[k] = 1;
    if (!has_root_mod_p(f, p)) return f;
  }
  REQUIRE(false);
  return {};
}

}  // namespace

TEST_CASE("prime field arithmetic") {
  auto F3 = FieldSpec::prime_field(3);
  auto two = FieldElement::from_int(F3, 2);
  CHECK((two + two) == FieldElement::from_int(F3, 1));
  CHECK((two * two) == FieldElement::from_int(F3, 1));
  CHECK((-two) == FieldElement::from_int(F3, 1));
  CHECK(two.inverse() == two);
  CHECK(FieldElement::from_int(F3, -1) == two);

  auto F7 = FieldSpec::prime_field(7);
  for (int64_t a = 1; a < 7; ++a) {
    auto x = FieldElement::from_int(F7, a);
    CHECK((x * x.inverse()).is_one());
  }
}

TEST_CASE("modulus choice is the lex-least monic irreducible") {
  // Independently derived: first monic quadratic over F_3 without a root.
  auto oracle9 = oracle_lex_least_irreducible(3, 2);
  auto F9 = FieldSpec::make(3, 2);
  CHECK(F9->modulus() == oracle9);
  CHECK(F9->modulus() == std::vector<uint32_t>{1, 0, 1});  // x^2 + 1

  auto F25 = FieldSpec::make(5, 2);
  CHECK(F25->modulus() == oracle_lex_least_irreducible(5, 2));
  auto F49 = FieldSpec::make(7, 2);
  CHECK(F49->modulus() == oracle_lex_least_irreducible(7, 2));
  auto F27 = FieldSpec::make(3, 3);
  CHECK(F27->modulus() == oracle_lex_least_irreducible(3, 3));
  auto F343 = FieldSpec::make(7, 3);
  CHECK(F343->modulus() == oracle_lex_least_irreducible(7, 3));
}

TEST_CASE("extension field arithmetic closes and inverts") {
  for (auto [p, k] : {std::pair<uint32_t, uint32_t>{3, 2}, {3, 3}, {5, 2}, {7, 2}}) {
    auto F = FieldSpec::make(p, k);
    // multiplication table sanity on the full field (small orders only)
    for (uint64_t i = 0; i < F->order(); ++i) {
      auto x = FieldElement::from_index(F, i);
      CHECK(x.index() == i);
      if (!x.is_zero()) {
        auto y = x.inverse();
        CHECK((x * y).is_one());
      }
    }
  }
}

TEST_CASE("frobenius is the q0-power map and has the right order") {
  auto F3 = FieldSpec::prime_field(3);
  auto F9 = FieldSpec::make_extension(F3, 2);
  auto g = FieldElement::generator(F9);
  CHECK(frobenius(g, 1) == g.pow(3));
  CHECK(frobenius(g, 2) == g);  // identity at the relative degree
  CHECK(frobenius(g, -1) == frobenius(g, 1));

  // Exhaustive: fixed points of frobenius are exactly the prime subfield.
  size_t fixed = 0;
  for (uint64_t i = 0; i < F9->order(); ++i) {
    auto x = FieldElement::from_index(F9, i);
    if (frobenius(x, 1) == x) ++fixed;
  }
  CHECK(fixed == 3);
}

TEST_CASE("sqrt_or_none agrees with an exhaustive squaring oracle") {
  for (auto [p, k] : {std::pair<uint32_t, uint32_t>{3, 1}, {3, 2}, {3, 3}, {5, 1}, {5, 2}, {7, 1}, {7, 2}}) {
    auto F = FieldSpec::make(p, k);
    // Oracle: the set of squares by exhaustive squaring, with for each square
    // the smaller canonical preimage.
    std::map<uint64_t, uint64_t> least_root;
    for (uint64_t i = 0; i < F->order(); ++i) {
      auto x = FieldElement::from_index(F, i);
      uint64_t sq = (x * x).index();
      auto it = least_root.find(sq);
      if (it == least_root.end() || i < it->second) least_root[sq] = i;
    }
    size_t residues = 0;
    for (uint64_t i = 0; i < F->order(); ++i) {
      auto x = FieldElement::from_index(F, i);
      auto r = sqrt_or_none(x);
      if (least_root.count(i)) {
        REQUIRE(r.has_value());
        CHECK((*r * *r) == x);
        CHECK(r->index() == least_root[i]);
        if (i != 0) ++residues;
      } else {
        CHECK(!r.has_value());
      }
    }
    CHECK(residues == (F->order() - 1) / 2);
  }
}

TEST_CASE("sqrt of one is the canonical smaller candidate") {
  auto F7 = FieldSpec::prime_field(7);
  auto r = sqrt_or_none(FieldElement::one(F7));
  REQUIRE(r.has_value());
  CHECK(r->is_one());  // 1 beats 6 in canonical order
}

TEST_CASE("towers record embeddings compatible with the base modulus") {
  auto F9 = FieldSpec::make(3, 2);
  auto F81 = FieldSpec::make_extension(F9, 2);
  CHECK(F81->degree() == 4);
  CHECK(F81->base_order() == 9);
  CHECK(F81->relative_degree() == 2);

  // The embedded generator must satisfy the base modulus (x^2 + 1 over F_3).
  auto img = FieldElement(F81, F81->base_generator_image());
  CHECK((img * img + FieldElement::one(F81)).is_zero());

  // The embedding is a field homomorphism on all of F_9.
  for (uint64_t i = 0; i < 9; ++i) {
    for (uint64_t j = 0; j < 9; ++j) {
      auto a = FieldElement::from_index(F9, i);
      auto b = FieldElement::from_index(F9, j);
      CHECK(embed_in_extension(F81, a * b) ==
            embed_in_extension(F81, a) * embed_in_extension(F81, b));
      CHECK(embed_in_extension(F81, a + b) ==
            embed_in_extension(F81, a) + embed_in_extension(F81, b));
    }
  }

  // Relative frobenius fixes exactly the embedded copy of F_9.
  size_t fixed = 0;
  for (uint64_t i = 0; i < F81->order(); ++i) {
    auto x = FieldElement::from_index(F81, i);
    if (frobenius(x, 1) == x) {
      ++fixed;
      CHECK(in_declared_base(x));
      auto back = project_to_base(x);
      REQUIRE(back.has_value());
      CHECK(embed_in_extension(F81, *back) == x);
    }
  }
  CHECK(fixed == 9);
}

TEST_CASE("norm membership: relative norms land in the base field") {
  auto F5 = FieldSpec::prime_field(5);
  auto F25 = FieldSpec::make_extension(F5, 2);
  std::set<uint64_t> norms;
  for (uint64_t i = 1; i < F25->order(); ++i) {
    auto x = FieldElement::from_index(F25, i);
    auto n = x * frobenius(x, 1);  // N(x) = x^(1+q0)
    CHECK(in_declared_base(n));
    norms.insert(n.index());
  }
  // The norm is surjective onto F_5^*: 4 distinct nonzero values.
  CHECK(norms.size() == 4);
}

TEST_CASE("cross-spec arithmetic is rejected") {
  auto F9 = FieldSpec::make(3, 2);
  auto F27 = FieldSpec::make(3, 3);
  auto a = FieldElement::one(F9);
  auto b = FieldElement::one(F27);
  CHECK_THROWS_AS(a + b, Error);
  CHECK_THROWS_AS(FieldElement().is_zero(), Error);
}
