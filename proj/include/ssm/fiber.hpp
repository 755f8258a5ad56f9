#pragma once

#include <array>
#include <memory>
#include <optional>

#include "ssm/form.hpp"

namespace ssm {

// ---------------------------------------------------------------------------
// Lookup-table arithmetic for enumeration loops.  Elements are canonical
// indices (FieldElement::index()); tables are built once per field and cached.

class FlatField {
 public:
  static constexpr uint32_t kMaxOrder = 4096;

  static std::shared_ptr<const FlatField> get(const FieldSpecPtr& spec);

  uint32_t order() const { return q_; }
  const FieldSpecPtr& spec() const { return spec_; }

  uint16_t mul(uint16_t a, uint16_t b) const { return mul_[(size_t)a * q_ + b]; }
  uint16_t add(uint16_t a, uint16_t b) const { return add_[(size_t)a * q_ + b]; }
  uint16_t sub(uint16_t a, uint16_t b) const { return add_[(size_t)a * q_ + neg_[b]]; }
  uint16_t neg(uint16_t a) const { return neg_[a]; }
  uint16_t inv(uint16_t a) const;  // throws NotUnit on zero
  // Index of the smaller-index square root, or -1 when a is a non-residue.
  int32_t sqrt_of(uint16_t a) const { return sqrt_[a]; }
  uint16_t pow(uint16_t a, uint32_t e) const;

 private:
  explicit FlatField(const FieldSpecPtr& spec);

  FieldSpecPtr spec_;
  uint32_t q_ = 0;
  std::vector<uint16_t> mul_, add_;
  std::vector<uint16_t> neg_, inv_;
  std::vector<int32_t> sqrt_;
};

// ---------------------------------------------------------------------------
// Exact pre-processing: solve degree-1 equations and substitute them away.
// The reduced scheme has the same solution counts over every extension; the
// lift expresses each original coordinate as a linear form in the reduced
// variables.

struct ReducedScheme {
  SchemeHandle scheme;
  std::vector<FieldForm> lift;
};

ReducedScheme eliminate_linear(const SchemeHandle& s);

// ---------------------------------------------------------------------------
// Point counting over extensions.  Enumeration walks projective charts with
// the innermost coordinate handled symbolically (roots of the cheapest
// restricted equation), so the loop length is q^(dim ambient - 1) per chart.

constexpr int64_t kDefaultOpBudget = 400000000;

int64_t count_points(const SchemeHandle& s, int k, int64_t op_budget = kDefaultOpBudget);
// Collected solution coordinates over the degree-k extension (up to cap).
std::vector<std::vector<FieldElement>> collect_points(const SchemeHandle& s, int k, size_t cap,
                                                      int64_t op_budget = kDefaultOpBudget);

struct DimEstimate {
  bool conclusive = false;
  int dim = -2;
  std::vector<std::pair<int, int64_t>> counts;  // (k, N_k) actually measured
  std::string note;
};

// Dimension estimate from counts N_1..N_K: declares d when N_K lies in
// [q^{Kd}/3, 3(d+1) q^{Kd}] and every consecutive ratio N_{k+1}/N_k lies in
// [q^d/3, 3 q^d], and exactly one d passes.  All-zero counts give dim -1.
DimEstimate dim_by_counting(const SchemeHandle& s, int K, int64_t op_budget = kDefaultOpBudget);

// ---------------------------------------------------------------------------
// Classification report for a central fiber.

struct FiberReport {
  bool reduced = true;
  bool irreducible_over_base = true;
  bool geometrically_integral = true;
  int singular_dim = -1;       // projective dimension, -1 empty
  int vertex_space_dim = -1;   // projective dimension of the vertex space
  bool cone_over_plane_curve = false;
  // Cutting forms of the codimension-1 linear singular component, when one
  // was extracted and verified symbolically.
  std::optional<std::vector<FieldForm>> nonnormal_linear_component;
  // Description of a pencil member splitting into two conjugate hyperplanes.
  std::optional<std::string> conjugate_hyperplane_member;
  std::vector<std::pair<int, int64_t>> counts;
  std::vector<std::string> evidence;

  void note(std::string s) { evidence.push_back(std::move(s)); }
  // Construction-time consistency checks (throws Error on violation).
  void enforce() const;
};

// ---------------------------------------------------------------------------
// Quadric utilities (odd characteristic).

// Symmetric matrix A with x^T A x = q.
Mat<FieldElement> gram_matrix(const FieldForm& q);
// Congruence diagonalization: returns (P, d) with P^T A P = diag(d).
std::pair<Mat<FieldElement>, std::vector<FieldElement>> diagonalize_symmetric(
    Mat<FieldElement> a, const FieldSpecPtr& spec);
// The two linear factors of a quadric of Gram rank <= 2, over the quadratic
// extension (repeated factor listed twice).  Throws on rank > 2.
std::vector<FieldForm> split_rank2_quadric(const FieldForm& q);

// det(lambda A + mu B) as a binary form of degree nvars in (lambda, mu),
// computed by interpolation over a large enough extension.
FieldForm pencil_det_binary(const FieldForm& f, const FieldForm& g);
// No repeated root in P^1 over the closure (gcd with both partials trivial).
bool binary_squarefree(const FieldForm& b);

// ---------------------------------------------------------------------------
// Form factor utilities.

// Scale a nonzero form so its leading coefficient is one.
FieldForm normalize_linear(const FieldForm& ell);
// Equality up to a nonzero scalar.
bool proportional_forms(const FieldForm& a, const FieldForm& b);
// Every coefficient lies in the declared base field of the tower level.
bool form_is_rational(const FieldForm& f);
// Coordinate change matrix whose first rows are the given independent linear
// forms, completed by unit vectors.
Mat<FieldElement> complete_to_basis(const std::vector<FieldForm>& forms, const FieldSpecPtr& spec,
                                    size_t nv);

// Quotient f / ell when the linear form ell divides f exactly.
std::optional<FieldForm> divide_by_linear(const FieldForm& f, const FieldForm& ell);
// First rational linear factor found by scanning hyperplanes over the base
// field (canonical projective order), or nullopt.
std::optional<FieldForm> rational_linear_factor(const FieldForm& f);

// Basis of the space of directions p with directional derivative D_p f
// identically zero (the affine cone over the vertex of f).
std::vector<std::vector<FieldElement>> vertex_kernel(const FieldForm& f);

// ---------------------------------------------------------------------------
// Classifiers.

FiberReport classify_quadric(const FieldForm& q);
FiberReport classify_cubic(const FieldForm& f, int K = 3);
FiberReport classify_pencil(const FieldForm& f, const FieldForm& g, int K = 3);

}  // namespace ssm
