#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssm/model.hpp"
#include "ssm/stab.hpp"
#include "ssm/witness.hpp"

namespace ssm {

// ---------------------------------------------------------------------------
// Valuation of a whole form: the minimum over coefficient valuations.
// Certified finite when some finite coefficient valuation is <= every lower
// bound; AtLeast when every known coefficient vanishes but some coefficient
// is truncated; Infinite for a certified-zero (or empty) form.

Valuation form_valuation(const HomogForm& f);

// The t^k coefficient of every term, as a form over the residue field.
// Throws PrecisionExhausted when a truncated coefficient leaves it unknown.
FieldForm coeff_form(const HomogForm& f, int64_t k);

// ---------------------------------------------------------------------------
// One reduction step driven by a failing weight check.
//
// Applies the witness's coordinate change, substitutes X_i -> t^{w_i} X_i,
// and divides each equation by t^{mult} so the new equations are again
// integral with nonzero residue.  For a pencil whose two residues become
// proportional (r_G = a r_F), the generators are recombined: the pair is
// ordered so the kept equation deviates from its residue at the larger
// t-order, and the other is replaced by t^{-v} (G - a F) where v is the
// certified valuation of the difference.  A difference that is certified
// zero means the wedge of the pencil vanishes identically (GITUnstable).
//
// Every substep lands on the ledger.  Throws NotDestabilizing when the
// witness's weight check passes (boundary equality included) on this state.

ModelState destabilize_step(const ModelState& state, const DestabilizerWitness& witness);

// ---------------------------------------------------------------------------
// Reduction loop: search for a destabilizer, step, repeat.

struct ReduceTraceEntry {
  std::string origin;   // how the destabilizer candidate was derived
  std::string weights;  // the failing weight system
  int64_t mult = 0;     // multiplicity of the failing check
  std::optional<Valuation> invariant_before;  // when the invariant oracle applies
  std::optional<Valuation> invariant_after;
  size_t ledger_begin = 0;  // half-open range of ledger steps this entry added
  size_t ledger_end = 0;
};

struct ReduceResult {
  ModelState state;
  std::vector<ReduceTraceEntry> trace;
  // Description of the exhausted search space certifying the final state.
  std::string certificate;
};

constexpr uint64_t kDefaultReduceBudget = 64;

// Repeatedly search for a destabilizing (change, weights) pair and apply it
// until the bounded search finds none.  Precondition: the generic fiber is
// smooth; this is probed by specializing t to every unit of the base field
// and point-counting the Jacobian scheme over small extensions (an Error
// diagnostic when no smooth specialization is found).  When the classical
// invariant of the shape exists, its t-adic valuation must strictly decrease
// every step and bounds the number of steps; an identically-zero invariant
// throws GITUnstable.  Without an invariant oracle the loop runs under the
// step budget alone.

ReduceResult reduce_to_semistable(ModelState state, uint64_t budget = kDefaultReduceBudget,
                                  uint64_t search_budget = kDefaultSearchBudget);

// ---------------------------------------------------------------------------
// Hensel lifting of a smooth central point to a section of the family.
//
// `center` must be a rational point of the central fiber at which the
// Jacobian of the residue equations has full rank (one row per equation).
// Returns projective coordinates over the series ring, exact polynomials
// agreeing with a true section modulo t^prec, with the pivot coordinate
// equal to one.

std::vector<Series> lift_section(const std::vector<HomogForm>& eqs, const ProjPoint& center,
                                 int64_t prec);

// ---------------------------------------------------------------------------
// Fiber improvement for semistable models.
//
// Both routines expect a state that the bounded destabilizer search already
// certifies (they re-run the search and throw Error otherwise), and walk the
// central fiber through a chain of explicit moves -- recorded linear
// normalizations, optional ramified base changes t = s^e, and boundary
// weight moves -- re-certifying the classifier verdict after every move.
// A fiber whose shape matches none of the supported cases throws
// CaseNotMatched carrying the classifier's verdict; moves that need a point
// of the generic fiber throw NeedsFormalSection when `section` is absent.
//
// `section` is a point of the generic fiber in projective coordinates over
// the series ring (some coordinate a unit).

// Cubic hypersurfaces, characteristic >= 5.  Terminates when the central
// fiber is geometrically integral, has singular locus of codimension >= 2,
// and is not a cone over a plane cubic.
ModelState improve_cubic_fiber(const ModelState& state,
                               const std::optional<std::vector<Series>>& section = std::nullopt);

// Pencils of quadrics in six variables, odd characteristic.  Terminates when
// the central fiber is geometrically integral and not a cone over a quartic
// curve in P^3.
ModelState improve_quadric_pencil_fiber(
    const ModelState& state,
    const std::optional<std::vector<Series>>& section = std::nullopt);

}  // namespace ssm
