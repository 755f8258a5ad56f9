#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ssm/errors.hpp"

namespace ssm {

class FieldSpec;
using FieldSpecPtr = std::shared_ptr<const FieldSpec>;

// F_{p^k} presented as F_p[x]/(modulus) with modulus monic irreducible of
// degree k over the prime field.  Specs are immutable and shared.
//
// A spec remembers a declared base field: extensions built with
// make_extension record the base and the image of its generator, so towers
// come with compatible embeddings and a well-defined relative Frobenius.
class FieldSpec : public std::enable_shared_from_this<FieldSpec> {
 public:
  // F_p itself (modulus x).
  static FieldSpecPtr prime_field(uint32_t p);
  // F_{p^k} over the prime field with the lexicographically least monic
  // irreducible modulus of degree k.
  static FieldSpecPtr make(uint32_t p, uint32_t k);
  // Same but with a caller-supplied modulus (little-endian, length k+1, monic).
  static FieldSpecPtr make_with_modulus(uint32_t p, std::vector<uint32_t> modulus);
  // F_{q^degree} for q = base->order(), with deterministically chosen modulus
  // and a recorded embedding of the base.  degree == 1 returns base itself.
  static FieldSpecPtr make_extension(const FieldSpecPtr& base, uint32_t degree);

  uint32_t p() const { return p_; }
  // Degree over the prime field.
  uint32_t degree() const { return deg_; }
  uint64_t order() const { return order_; }
  // Little-endian coefficients, length degree()+1, leading coefficient 1.
  const std::vector<uint32_t>& modulus() const { return mod_; }

  // Declared base field; null for specs whose base is the prime field itself.
  const FieldSpecPtr& base() const { return base_; }
  uint64_t base_order() const;
  // Degree over the declared base.
  uint32_t relative_degree() const;
  // Coefficients (in this field) of the image of the declared base's
  // generator; empty when the base is the prime field.
  const std::vector<uint32_t>& base_generator_image() const { return base_img_; }

  // Arithmetic compatibility: same p, degree and modulus.
  bool same_arithmetic(const FieldSpec& other) const;

  std::string describe() const;

 private:
  FieldSpec(uint32_t p, uint32_t deg, std::vector<uint32_t> mod, FieldSpecPtr base,
            std::vector<uint32_t> base_img);

  uint32_t p_ = 0;
  uint32_t deg_ = 0;
  uint64_t order_ = 0;
  std::vector<uint32_t> mod_;
  FieldSpecPtr base_;
  std::vector<uint32_t> base_img_;
};

// Element of a FieldSpec: little-endian coefficient vector in the modulus
// basis, length = spec degree, entries reduced mod p.
class FieldElement {
 public:
  FieldElement() = default;  // unset; any operation throws

  FieldElement(FieldSpecPtr spec, std::vector<uint32_t> coeffs);

  static FieldElement zero(const FieldSpecPtr& spec);
  static FieldElement one(const FieldSpecPtr& spec);
  // Constant from the prime subfield.
  static FieldElement from_int(const FieldSpecPtr& spec, int64_t v);
  // Residue class of x.
  static FieldElement generator(const FieldSpecPtr& spec);
  // Canonical enumeration: index written in base p gives the coefficients.
  static FieldElement from_index(const FieldSpecPtr& spec, uint64_t index);

  bool valid() const { return spec_ != nullptr; }
  const FieldSpecPtr& spec() const { return spec_; }
  const std::vector<uint32_t>& coeffs() const { return c_; }
  uint64_t index() const;
  bool is_zero() const;
  bool is_one() const;

  FieldElement operator+(const FieldElement& o) const;
  FieldElement operator-(const FieldElement& o) const;
  FieldElement operator*(const FieldElement& o) const;
  FieldElement operator-() const;
  bool operator==(const FieldElement& o) const;
  bool operator!=(const FieldElement& o) const { return !(*this == o); }

  FieldElement inverse() const;  // throws NotUnit on zero
  FieldElement pow(uint64_t e) const;

  std::string describe() const;

 private:
  void check_compatible(const FieldElement& o) const;

  FieldSpecPtr spec_;
  std::vector<uint32_t> c_;
};

// x^(q0^power) where q0 is the order of the declared base of x's spec.
// power may be any integer; it is reduced mod the relative degree.
FieldElement frobenius(const FieldElement& x, int64_t power);

// Deterministic square root: none when x is a non-residue, otherwise the
// candidate with the smaller canonical index.  sqrt(0) = 0.
std::optional<FieldElement> sqrt_or_none(const FieldElement& x);

// True iff x lies in the image of the declared base subfield.
bool in_declared_base(const FieldElement& x);

// Embedding along the recorded base edge of ext (base element -> ext element).
FieldElement embed_in_extension(const FieldSpecPtr& ext, const FieldElement& x);

// Partial inverse of embed_in_extension; nullopt when x is outside the image.
std::optional<FieldElement> project_to_base(const FieldElement& x);

}  // namespace ssm
