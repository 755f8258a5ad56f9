#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssm/model.hpp"

namespace ssm {

// Weight system w_0, ..., w_n acting by X_i -> t^{w_i} X_i.  Stored
// normalized: the minimum entry is zero (subtracting a constant from every
// weight only rescales the whole form by a power of t).
struct WeightSystem {
  std::vector<int64_t> w;

  explicit WeightSystem(std::vector<int64_t> weights);
  static WeightSystem zero(size_t n);

  size_t size() const { return w.size(); }
  int64_t sum() const;
  bool operator==(const WeightSystem& o) const { return w == o.w; }
  std::string describe() const;
};

// Minimum t-exponent of F(t^{w_0} X_0, ..., t^{w_n} X_n): the minimum over
// stored terms of valuation(coefficient) + <I, W>.  Throws PrecisionExhausted
// when truncated coefficients leave the minimum uncertified, and Error on a
// certified-zero form.
int64_t mult_w(const HomogForm& f, const WeightSystem& w);

// Pencil multiplicity: the minimum over the wedge table a_IJ = F_I G_J -
// F_J G_I of valuation(a_IJ) + <I, W> + <J, W>.  Depends only on the pencil
// spanned by F and G, not on the chosen generators.
int64_t mult_w_pencil(const HomogForm& f, const HomogForm& g, const WeightSystem& w);

// Exact semistability inequality for one weight system in the current
// coordinates.  The threshold is d sum(w) / (n+1) for a single form of
// degree d and 2 d sum(w) / (n+1) for a pencil, compared by cross
// multiplication; pass means mult <= threshold.
struct WeightCheck {
  int64_t mult = 0;
  int64_t threshold_num = 0;  // threshold = threshold_num / threshold_den
  int64_t threshold_den = 1;
  bool pass = true;
  bool boundary = false;  // equality: the move also yields a semistable family
  std::string describe() const;
};
WeightCheck check_weight_single(const HomogForm& f, const WeightSystem& w);
WeightCheck check_weight_pencil(const HomogForm& f, const HomogForm& g, const WeightSystem& w);

// A coordinate change plus weight system that strictly violates the
// semistability inequality on the given state.  The factory recomputes the
// check and refuses to construct a witness that passes.
struct DestabilizerWitness {
  LinearChange change;
  WeightSystem weights;
  WeightCheck check;
  std::string origin;  // how the candidate change was derived
};
DestabilizerWitness make_destabilizer_witness(const ModelState& state, const LinearChange& change,
                                              const WeightSystem& weights, std::string origin);

struct StabilityVerdict {
  bool semistable_against_search = true;
  std::optional<DestabilizerWitness> witness;
  std::string searched;  // description of the exhausted search space
};

// Bounded destabilizer search: every weight system with entries in
// {0, ..., d} (0/1 systems first), composed with coordinate changes that move
// the distinguished linear subspaces of the central fiber into coordinate
// position (Gram kernels, singular-locus linear components, rational linear
// factors, rational singular points).  Deterministic order; the first strict
// failure is returned.  The budget caps the number of (change, weights)
// checks.
constexpr uint64_t kDefaultSearchBudget = 200000;
StabilityVerdict search_destabilizer(const ModelState& state,
                                     uint64_t budget = kDefaultSearchBudget);

// t-adic valuation of a classical invariant of the equations:
//   - single quadric: determinant of the symmetric Gram matrix (weight n+1);
//   - pencil of quadrics: discriminant of the binary form det(lambda A + mu B)
//     (via the resultant of its partials);
//   - ternary cubic: degree-12 discriminant, the resultant of the three
//     partial quadrics (characteristic >= 5).
// Infinite valuation means the invariant vanishes identically (no semistable
// model exists).  Throws UnsupportedCase for shapes with no classical
// invariant here (cubics in more than three variables) and
// PrecisionExhausted when truncation leaves the valuation uncertified.
Valuation invariant_valuation(const ModelState& state);

// det(lambda A + mu B) for a pencil over the series ring: coefficient k is
// the coefficient of lambda^k mu^{nvars-k}, exactly (division-free).
std::vector<Series> pencil_det_series(const HomogForm& f, const HomogForm& g);

// Symmetric Gram matrix over the series ring (odd characteristic).
Mat<Series> gram_series(const HomogForm& q);

}  // namespace ssm
