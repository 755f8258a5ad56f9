#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssm/fiber.hpp"

namespace ssm {

// ---------------------------------------------------------------------------
// Projective points.

struct ProjPoint {
  FieldSpecPtr field;
  std::vector<FieldElement> coords;  // length nvars, not all zero

  // Canonical representative: first nonzero coordinate scaled to one.
  static ProjPoint make(FieldSpecPtr field, std::vector<FieldElement> coords);
  ProjPoint canonical() const;
  size_t nvars() const { return coords.size(); }
  // Projective equality (same field arithmetic required).
  bool same_point(const ProjPoint& o) const;
  // Every coordinate lies in the declared base field of `field`.
  bool is_rational_over_base() const;
  // Rewrite over the declared base field (requires is_rational_over_base).
  ProjPoint project_to_declared_base() const;
  std::string describe() const;
};

// All equations vanish at p.  Equations over the declared base of p's field
// are embedded along the recorded tower edge first.
bool on_all(const std::vector<FieldForm>& eqs, const ProjPoint& p);
// Jacobian matrix of the equations has full rank (= eqs.size()) at p.
bool smooth_on(const std::vector<FieldForm>& eqs, const ProjPoint& p);

// ---------------------------------------------------------------------------
// Smooth rational points on cubic hypersurfaces over a finite field.
//
// Every cubic hypersurface of positive dimension over F_q (q odd) either has
// a rational point in its smooth locus or is, up to coordinates, a union of
// three conjugate hyperplanes or a triple hyperplane.  The search realizes
// that dichotomy constructively: scan for a smooth point; failing that, walk
// a double point and emit the smooth point produced by projection; failing
// that, certify the degenerate shape by exhibiting the linear factor.

enum class CubicNormalForm {
  kThreeConjugateHyperplanes,
  kTripleHyperplane,
};

struct SmoothPointResult {
  std::optional<ProjPoint> point;          // set unless tagged
  std::optional<CubicNormalForm> tag;      // set when no smooth point exists
  // Witness for the tag: a linear factor of the cubic (over the cubic
  // extension for the conjugate case, over the base field for the triple
  // hyperplane case).
  std::optional<FieldForm> hyperplane;
  std::vector<std::string> evidence;
};

SmoothPointResult smooth_point_on_cubic(const FieldForm& f);

// The projection construction in isolation: z must be a double point of the
// cubic f.  After translating z to [1,0,...,0] the cubic reads
// X_0 Q(X_1..X_n) + C(X_1..X_n); the first scanned direction y with
// Q(y) != 0 yields the point [-C(y), y_1 Q(y), ..., y_n Q(y)], which lies on
// the cubic and is smooth there (the X_0-partial equals Q(y)^3 up to the
// translation).
ProjPoint smooth_point_by_projection(const FieldForm& f, const ProjPoint& z);

// First rational point of a quadric in >= 3 variables under the canonical
// chart scan (throws NoPoint for <= 2 variables when anisotropic).  With
// require_smooth, scan for a point outside the singular locus first and fall
// back to any point when none exists.
ProjPoint quadric_point(const FieldForm& q, bool require_smooth = false);

// ---------------------------------------------------------------------------
// Galois descent of points on quadrics and intersections of two quadrics.
//
// p lives over a cubic extension of the field of the equations.  The
// Frobenius orbit of p spans a line or a plane defined over the base; the
// intersection of that span with the variety contains a rational zero-cycle
// of odd degree, from which a rational point is extracted (line in X, plane
// in X, conic section, or the rational residual point of a degree-4 cycle).
ProjPoint descend_odd(const std::vector<FieldForm>& eqs, const ProjPoint& p,
                      uint64_t seed = 0);

// p lives over a quadratic extension; f is a cubic form.  The line through p
// and its conjugate is rational; its third intersection with the cubic is a
// rational point (or the line lies in the cubic and any rational point of it
// works).
ProjPoint descend_even_cubic(const FieldForm& f, const ProjPoint& p);

// ---------------------------------------------------------------------------
// Rational curves with prescribed endpoints.

struct CurveWitness {
  BinaryCurveMap curve;
  // One line per identity verified at construction time.
  std::vector<std::string> checks;
};

constexpr int kGenericityRetries = 100;

// Degree-3 rational curve f on the cubic {y_cubic = 0} with f(0) = z and
// f(infinity) = u, where z is a double point of the cubic.  Built from the
// projection away from z; when u lies on a line through z inside the cubic,
// that line is returned as a degree-1 map.
CurveWitness r_connect_cubic(const FieldForm& y_cubic, const ProjPoint& z, const ProjPoint& u,
                             uint64_t seed = 0);

// Degree-4 rational curve f on the smooth intersection {f2 = g2 = 0} of two
// quadrics with f(0) = f(infinity) = x and f(1) = y.  Built from the tangent
// hyperplane at x through y, projection from x onto a quadric, and a conic
// through the image of y and two scanned points of the hyperplane section.
CurveWitness r_connect_ci22(const FieldForm& f2, const FieldForm& g2, const ProjPoint& x,
                            const ProjPoint& y, uint64_t seed = 0);

// ---------------------------------------------------------------------------
// The scheme of lines through a point.

struct LinesThroughPoint {
  // Forms cutting the family of lines through x inside P^{nvars-2} (the
  // graded pieces of the translated equations in the remaining variables).
  SchemeHandle scheme;
  // nvars - 2 - (sum of input degrees): the dimension for a general point.
  int expected_dim = 0;
  DimEstimate dimension;
  // Conclusive dimension strictly above expected_dim.
  bool excess = false;
  // Scheme length (points counted with multiplicity, Frobenius orbits
  // grouped); computed for the zero-dimensional two-conic shape.
  std::optional<int64_t> length;
  std::vector<std::string> evidence;
};

LinesThroughPoint lines_through_point(const std::vector<FieldForm>& eqs, const ProjPoint& x,
                                      int K = 3, uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Tangent cones and tangent-hyperplane sections.

struct TangentConeReport {
  // Substitution matrix used: X = T Y places x at [1,0,...,0].
  Mat<FieldElement> translate;
  // Graded pieces of each translated equation in the remaining variables
  // (pieces[e][k] has degree k; k = 0 entry is zero since x lies on X).
  std::vector<std::vector<FieldForm>> pieces;
  // Lowest nonzero piece of each equation: the tangent cone data.
  std::vector<FieldForm> cone;
  // Vanishing order of each equation at x (index of the lowest piece).
  std::vector<uint32_t> multiplicity;
  // Classification of the cone when it is a single quadric or cubic.
  std::optional<FiberReport> cone_report;
  // Hypersurface at a smooth point: the quadratic graded piece (second
  // fundamental data) and its Gram rank.
  std::optional<FieldForm> second_form;
  int second_rank = -1;
  // Section of the hypersurface by its tangent hyperplane at x, in
  // nvars - 1 variables with x at [1,0,...,0]; original coordinates of a
  // section point are recovered by section_chart * coords.
  std::optional<FieldForm> section;
  Mat<FieldElement> section_chart;
  // Rational singular points of the section with the Gram rank of the
  // degree-2 graded piece there (full rank in the section variables means an
  // ordinary double point).
  std::vector<std::pair<ProjPoint, int>> section_singularities;
  std::vector<std::string> evidence;
};

TangentConeReport tangent_cone(const std::vector<FieldForm>& eqs, const ProjPoint& x);

// ---------------------------------------------------------------------------
// Conic through three points of a quadric.

struct PlaneConicResult {
  // Restriction of the quadric to the plane spanned by the three points, in
  // the basis (x1, x2, x3); shape A*X1*X2 + B*X2*X0 + C*X0*X1.
  FieldForm conic;
  FiberReport verdict;  // classify_quadric on three variables
  // Rational parametrization with f(0) = x1, f(infinity) = x2, f(1) = x3
  // when the conic is smooth.
  std::optional<BinaryCurveMap> through;
  std::vector<std::string> checks;
};

PlaneConicResult plane_conic(const FieldForm& q, const ProjPoint& x1, const ProjPoint& x2,
                             const ProjPoint& x3);

}  // namespace ssm
