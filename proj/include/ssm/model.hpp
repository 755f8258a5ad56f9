#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssm/form.hpp"

namespace ssm {

// One invertible-on-the-generic-fiber change applied to a family of
// equations.  Steps replay deterministically, so a ledger is a complete
// record of how the current equations arose from the original ones.
struct LedgerStep {
  enum class Kind { Linear, WeightedScale, Recombine, BaseChange };
  Kind kind = Kind::Linear;

  // Linear: substitute X = A * Y.
  LinearChange linear;

  // WeightedScale: substitute X_i = t^{w_i} X_i, then divide equation j by
  // t^{shifts[j]} (one entry per equation).
  std::vector<int64_t> weights;
  std::vector<int64_t> shifts;

  // Recombine (pencils): optionally swap the equations, then replace the
  // second by t^{-v} (second - a * first).
  bool swapped = false;
  Series a;
  int64_t v = 0;

  // BaseChange: substitute t = s^e in every coefficient.
  uint32_t e = 1;

  static LedgerStep linear_step(LinearChange a);
  static LedgerStep weighted_step(std::vector<int64_t> w, std::vector<int64_t> shifts);
  static LedgerStep recombine_step(bool swapped, Series a, int64_t v);
  static LedgerStep base_change_step(uint32_t e);

  std::string describe() const;
};

struct ChangeLedger {
  std::vector<LedgerStep> steps;
};

// Apply one step / the whole ledger to a list of equations.
std::vector<HomogForm> apply_step(const std::vector<HomogForm>& eqs, const LedgerStep& s);
std::vector<HomogForm> replay_ledger(std::vector<HomogForm> eqs, const ChangeLedger& ledger);

// A family of one or two homogeneous equations over the series ring,
// together with the cumulative ramification (t = s^e) and the ledger that
// produced the current equations from the originals.
struct ModelState {
  std::vector<HomogForm> equations;
  uint32_t ramification = 1;  // current parameter s satisfies t = s^ramification
  ChangeLedger ledger;

  static ModelState single(HomogForm f);
  static ModelState pencil(HomogForm f, HomogForm g);

  bool is_pencil() const { return equations.size() == 2; }
  const FieldSpecPtr& spec() const { return equations.at(0).spec(); }
  size_t nvars() const { return equations.at(0).nvars(); }
  uint32_t degree() const { return equations.at(0).degree(); }
};

}  // namespace ssm
