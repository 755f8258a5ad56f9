#include "ssm/field.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <mutex>
#include <sstream>

namespace ssm {

namespace {

// ---- dense univariate arithmetic over F_p (little-endian, no leading zeros) ----

using Poly = std::vector<uint32_t>;

uint64_t mod_inv_scalar(uint64_t a, uint32_t p) {
  uint64_t r = 1, b = a % p, e = p - 2;
  while (e) {
    if (e & 1) r = r * b % p;
    b = b * b % p;
    e >>= 1;
  }
  return r;
}

void trim(Poly& a) {
  while (!a.empty() && a.back() == 0) a.pop_back();
}

std::pair<Poly, Poly> poly_divmod(Poly a, const Poly& b, uint32_t p) {
  trim(a);
  if (b.empty()) throw Error("polynomial division by zero");
  uint64_t inv = mod_inv_scalar(b.back(), p);
  Poly q;
  if (a.size() >= b.size()) q.assign(a.size() - b.size() + 1, 0);
  while (a.size() >= b.size() && !a.empty()) {
    uint64_t c = (uint64_t)a.back() * inv % p;
    size_t shift = a.size() - b.size();
    if (c != 0) {
      q[shift] = (uint32_t)c;
      for (size_t i = 0; i < b.size(); ++i)
        a[i + shift] = (uint32_t)((a[i + shift] + p - (uint32_t)((uint64_t)b[i] * c % p)) % p);
    }
    a.pop_back();
    trim(a);
  }
  return {q, a};
}

Poly poly_mod(Poly a, const Poly& m, uint32_t p) {
  return poly_divmod(std::move(a), m, p).second;
}

Poly poly_mul(const Poly& a, const Poly& b, uint32_t p) {
  if (a.empty() || b.empty()) return {};
  Poly r(a.size() + b.size() - 1, 0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j)
      r[i + j] = (uint32_t)((r[i + j] + (uint64_t)a[i] * b[j]) % p);
  trim(r);
  return r;
}

Poly poly_sub(Poly a, const Poly& b, uint32_t p) {
  if (a.size() < b.size()) a.resize(b.size(), 0);
  for (size_t i = 0; i < b.size(); ++i) a[i] = (a[i] + p - b[i]) % p;
  trim(a);
  return a;
}

Poly poly_gcd(Poly a, Poly b, uint32_t p) {
  trim(a);
  trim(b);
  while (!b.empty()) {
    Poly r = poly_mod(a, b, p);
    a = std::move(b);
    b = std::move(r);
  }
  return a;
}

Poly poly_powmod(Poly base, uint64_t e, const Poly& m, uint32_t p) {
  Poly r = {1};
  base = poly_mod(std::move(base), m, p);
  while (e) {
    if (e & 1) r = poly_mod(poly_mul(r, base, p), m, p);
    base = poly_mod(poly_mul(base, base, p), m, p);
    e >>= 1;
  }
  return r;
}

uint64_t ipow(uint64_t b, uint32_t e) {
  uint64_t r = 1;
  while (e--) r *= b;
  return r;
}

bool is_prime_u32(uint32_t n) {
  if (n < 2) return false;
  for (uint32_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

// Rabin's test: monic f of degree k is irreducible over F_p iff
// x^(p^k) == x mod f and gcd(x^(p^(k/r)) - x, f) == 1 for every prime r | k.
bool is_irreducible(const Poly& f, uint32_t p) {
  size_t k = f.size() - 1;
  if (k == 0) return false;
  Poly x = {0, 1};
  Poly xq = poly_powmod(x, ipow(p, (uint32_t)k), f, p);
  if (!poly_mod(poly_sub(xq, x, p), f, p).empty()) return false;
  for (uint32_t r = 2; r <= k; ++r) {
    if (k % r != 0 || !is_prime_u32(r)) continue;
    Poly xs = poly_powmod(x, ipow(p, (uint32_t)(k / r)), f, p);
    Poly g = poly_gcd(f, poly_sub(xs, x, p), p);
    if (g.size() != 1) return false;
  }
  return true;
}

// Lexicographically least monic irreducible of degree k: scan the non-leading
// coefficient vectors as base-p numbers counting upward.
Poly lex_least_irreducible(uint32_t p, uint32_t k) {
  uint64_t count = ipow(p, k);
  for (uint64_t v = 0; v < count; ++v) {
    Poly f(k + 1, 0);
    uint64_t w = v;
    for (uint32_t i = 0; i < k; ++i) {
      f[i] = (uint32_t)(w % p);
      w /= p;
    }
    f[k] = 1;
    if (is_irreducible(f, p)) return f;
  }
  throw Error("no irreducible polynomial found (impossible)");
}

// returns (g, s) with s*a == g mod m and g = gcd(a, m)
std::pair<Poly, Poly> poly_half_xgcd(Poly a, Poly m, uint32_t p) {
  Poly s0 = {1}, s1 = {};
  Poly r0 = std::move(a), r1 = std::move(m);
  trim(r0);
  trim(r1);
  while (!r1.empty()) {
    auto [q, rem] = poly_divmod(r0, r1, p);
    Poly s2 = poly_sub(s0, poly_mul(q, s1, p), p);
    r0 = std::move(r1);
    r1 = std::move(rem);
    s0 = std::move(s1);
    s1 = std::move(s2);
  }
  return {r0, s0};
}

// Function-local statics so the cache is safe to touch from global
// initializers in client code.
std::mutex& spec_cache_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::pair<uint32_t, uint32_t>, FieldSpecPtr>& prime_based_cache() {
  static std::map<std::pair<uint32_t, uint32_t>, FieldSpecPtr> c;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// FieldSpec

FieldSpec::FieldSpec(uint32_t p, uint32_t deg, std::vector<uint32_t> mod, FieldSpecPtr base,
                     std::vector<uint32_t> base_img)
    : p_(p), deg_(deg), order_(ipow(p, deg)), mod_(std::move(mod)), base_(std::move(base)),
      base_img_(std::move(base_img)) {}

FieldSpecPtr FieldSpec::prime_field(uint32_t p) {
  return make(p, 1);
}

FieldSpecPtr FieldSpec::make(uint32_t p, uint32_t k) {
  if (p < 3 || k == 0) throw UnsupportedCase("field spec needs odd p >= 3 and k >= 1");
  if (!is_prime_u32(p)) throw UnsupportedCase("field characteristic must be prime");
  std::lock_guard<std::mutex> lock(spec_cache_mutex());
  auto key = std::make_pair(p, k);
  auto& cache = prime_based_cache();
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  Poly mod = lex_least_irreducible(p, k);
  FieldSpecPtr spec(new FieldSpec(p, k, std::move(mod), nullptr, {}));
  cache[key] = spec;
  return spec;
}

FieldSpecPtr FieldSpec::make_with_modulus(uint32_t p, std::vector<uint32_t> modulus) {
  if (!is_prime_u32(p) || p < 3) throw UnsupportedCase("field characteristic must be an odd prime");
  if (modulus.size() < 2) throw ParseError("modulus must have degree >= 1");
  for (auto& c : modulus) c %= p;
  if (modulus.back() != 1) throw ParseError("modulus must be monic");
  if (!is_irreducible(modulus, p)) throw ParseError("modulus is not irreducible over F_p");
  uint32_t k = (uint32_t)modulus.size() - 1;
  return FieldSpecPtr(new FieldSpec(p, k, std::move(modulus), nullptr, {}));
}

FieldSpecPtr FieldSpec::make_extension(const FieldSpecPtr& base, uint32_t degree) {
  if (!base) throw Error("make_extension: null base");
  if (degree == 0) throw UnsupportedCase("extension degree must be >= 1");
  if (degree == 1) return base;
  uint32_t p = base->p();
  uint32_t K = base->degree() * degree;
  Poly mod = lex_least_irreducible(p, K);
  if (base->degree() == 1)
    return FieldSpecPtr(new FieldSpec(p, K, std::move(mod), base, {}));
  // Deterministic embedding: first root (canonical element order) of the base
  // modulus inside the new field.  A temporary spec provides the arithmetic.
  FieldSpecPtr tmp(new FieldSpec(p, K, mod, base, {}));
  const auto& bm = base->modulus();
  for (uint64_t idx = 0; idx < tmp->order(); ++idx) {
    FieldElement cand = FieldElement::from_index(tmp, idx);
    FieldElement acc = FieldElement::zero(tmp);
    for (size_t i = bm.size(); i-- > 0;)
      acc = acc * cand + FieldElement::from_int(tmp, bm[i]);
    if (acc.is_zero())
      return FieldSpecPtr(new FieldSpec(p, K, std::move(mod), base, cand.coeffs()));
  }
  throw Error("embedding root not found (impossible for subfield degrees)");
}

uint64_t FieldSpec::base_order() const {
  return base_ ? base_->order() : p_;
}

uint32_t FieldSpec::relative_degree() const {
  uint32_t bd = base_ ? base_->degree() : 1;
  return deg_ / bd;
}

bool FieldSpec::same_arithmetic(const FieldSpec& other) const {
  return p_ == other.p_ && deg_ == other.deg_ && mod_ == other.mod_;
}

std::string FieldSpec::describe() const {
  std::ostringstream os;
  os << "F_" << order();
  if (deg_ > 1) {
    os << " = F_" << p_ << "[x]/(";
    bool first = true;
    for (size_t i = mod_.size(); i-- > 0;) {
      if (mod_[i] == 0) continue;
      if (!first) os << "+";
      first = false;
      if (i == 0 || mod_[i] != 1) os << mod_[i];
      if (i >= 1) {
        os << "x";
        if (i > 1) os << "^" << i;
      }
    }
    os << ")";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// FieldElement

FieldElement::FieldElement(FieldSpecPtr spec, std::vector<uint32_t> coeffs)
    : spec_(std::move(spec)), c_(std::move(coeffs)) {
  if (!spec_) throw Error("field element with null spec");
  c_.resize(spec_->degree(), 0);
  for (auto& x : c_) x %= spec_->p();
}

FieldElement FieldElement::zero(const FieldSpecPtr& spec) {
  return FieldElement(spec, {});
}

FieldElement FieldElement::one(const FieldSpecPtr& spec) {
  return FieldElement(spec, {1});
}

FieldElement FieldElement::from_int(const FieldSpecPtr& spec, int64_t v) {
  int64_t p = spec->p();
  int64_t r = v % p;
  if (r < 0) r += p;
  return FieldElement(spec, {(uint32_t)r});
}

FieldElement FieldElement::generator(const FieldSpecPtr& spec) {
  if (spec->degree() < 2) return zero(spec);
  return FieldElement(spec, {0, 1});
}

FieldElement FieldElement::from_index(const FieldSpecPtr& spec, uint64_t index) {
  std::vector<uint32_t> c(spec->degree());
  uint32_t p = spec->p();
  for (uint32_t i = 0; i < spec->degree(); ++i) {
    c[i] = (uint32_t)(index % p);
    index /= p;
  }
  return FieldElement(spec, std::move(c));
}

uint64_t FieldElement::index() const {
  uint64_t r = 0;
  uint32_t p = spec_->p();
  for (size_t i = c_.size(); i-- > 0;) r = r * p + c_[i];
  return r;
}

bool FieldElement::is_zero() const {
  if (!spec_) throw Error("unset field element");
  return std::all_of(c_.begin(), c_.end(), [](uint32_t x) { return x == 0; });
}

bool FieldElement::is_one() const {
  if (!spec_) throw Error("unset field element");
  if (c_.empty() || c_[0] != 1) return false;
  for (size_t i = 1; i < c_.size(); ++i)
    if (c_[i] != 0) return false;
  return true;
}

void FieldElement::check_compatible(const FieldElement& o) const {
  if (!spec_ || !o.spec_) throw Error("unset field element");
  if (spec_.get() != o.spec_.get() && !spec_->same_arithmetic(*o.spec_))
    throw Error("field element arithmetic across incompatible specs");
}

FieldElement FieldElement::operator+(const FieldElement& o) const {
  check_compatible(o);
  std::vector<uint32_t> r(c_.size());
  uint32_t p = spec_->p();
  for (size_t i = 0; i < c_.size(); ++i) r[i] = (c_[i] + o.c_[i]) % p;
  return FieldElement(spec_, std::move(r));
}

FieldElement FieldElement::operator-(const FieldElement& o) const {
  check_compatible(o);
  std::vector<uint32_t> r(c_.size());
  uint32_t p = spec_->p();
  for (size_t i = 0; i < c_.size(); ++i) r[i] = (c_[i] + p - o.c_[i]) % p;
  return FieldElement(spec_, std::move(r));
}

FieldElement FieldElement::operator-() const {
  if (!spec_) throw Error("unset field element");
  std::vector<uint32_t> r(c_.size());
  uint32_t p = spec_->p();
  for (size_t i = 0; i < c_.size(); ++i) r[i] = (p - c_[i]) % p;
  return FieldElement(spec_, std::move(r));
}

FieldElement FieldElement::operator*(const FieldElement& o) const {
  check_compatible(o);
  uint32_t p = spec_->p();
  Poly prod = poly_mul(c_, o.c_, p);
  Poly red = poly_mod(std::move(prod), spec_->modulus(), p);
  return FieldElement(spec_, std::move(red));
}

bool FieldElement::operator==(const FieldElement& o) const {
  check_compatible(o);
  return c_ == o.c_;
}

FieldElement FieldElement::inverse() const {
  if (is_zero()) throw NotUnit("inverse of zero field element");
  uint32_t p = spec_->p();
  auto [g, s] = poly_half_xgcd(c_, spec_->modulus(), p);
  if (g.size() != 1 || g[0] == 0) throw Error("xgcd failed over field (impossible)");
  uint64_t inv = mod_inv_scalar(g[0], p);
  for (auto& c : s) c = (uint32_t)((uint64_t)c * inv % p);
  return FieldElement(spec_, std::move(s));
}

FieldElement FieldElement::pow(uint64_t e) const {
  FieldElement r = one(spec_);
  FieldElement b = *this;
  while (e) {
    if (e & 1) r = r * b;
    b = b * b;
    e >>= 1;
  }
  return r;
}

std::string FieldElement::describe() const {
  std::ostringstream os;
  if (c_.size() == 1) {
    os << c_[0];
  } else {
    os << "[";
    for (size_t i = 0; i < c_.size(); ++i) {
      if (i) os << ",";
      os << c_[i];
    }
    os << "]";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Frobenius, square roots, tower embeddings

FieldElement frobenius(const FieldElement& x, int64_t power) {
  const FieldSpecPtr& spec = x.spec();
  if (!spec) throw Error("unset field element");
  uint32_t rel = spec->relative_degree();
  int64_t pm = power % (int64_t)rel;
  if (pm < 0) pm += rel;
  if (pm == 0) return x;
  uint64_t q0 = spec->base_order();
  uint64_t e = 1;
  for (int64_t i = 0; i < pm; ++i) e *= q0;
  return x.pow(e);
}

std::optional<FieldElement> sqrt_or_none(const FieldElement& x) {
  const FieldSpecPtr& spec = x.spec();
  if (!spec) throw Error("unset field element");
  if (x.is_zero()) return x;
  uint64_t Q = spec->order();
  if (!x.pow((Q - 1) / 2).is_one()) return std::nullopt;
  uint64_t m = Q - 1;
  uint32_t s = 0;
  while (m % 2 == 0) {
    m /= 2;
    ++s;
  }
  FieldElement y = FieldElement::zero(spec);
  if (s == 1) {
    y = x.pow((Q + 1) / 4);
  } else {
    // Tonelli-Shanks with the first canonical non-residue.
    FieldElement z = FieldElement::zero(spec);
    for (uint64_t idx = 1; idx < Q; ++idx) {
      FieldElement cand = FieldElement::from_index(spec, idx);
      if (!cand.pow((Q - 1) / 2).is_one()) {
        z = cand;
        break;
      }
    }
    FieldElement c = z.pow(m);
    FieldElement t = x.pow(m);
    FieldElement r = x.pow((m + 1) / 2);
    uint32_t e = s;
    while (!t.is_one()) {
      FieldElement tt = t;
      uint32_t i = 0;
      while (!tt.is_one()) {
        tt = tt * tt;
        ++i;
        if (i == e) throw Error("sqrt: residue check inconsistent (impossible)");
      }
      FieldElement b = c;
      for (uint32_t j = 0; j + i + 1 < e; ++j) b = b * b;
      r = r * b;
      c = b * b;
      t = t * c;
      e = i;
    }
    y = r;
  }
  FieldElement ny = -y;
  return (y.index() <= ny.index()) ? y : ny;
}

bool in_declared_base(const FieldElement& x) {
  const FieldSpecPtr& spec = x.spec();
  if (!spec) throw Error("unset field element");
  if (spec->relative_degree() == 1) return true;
  return frobenius(x, 1) == x;
}

FieldElement embed_in_extension(const FieldSpecPtr& ext, const FieldElement& x) {
  if (!ext) throw Error("embed: null target spec");
  const FieldSpecPtr& from = x.spec();
  if (from->same_arithmetic(*ext)) return FieldElement(ext, x.coeffs());
  if (from->degree() == 1) return FieldElement::from_int(ext, x.coeffs()[0]);
  const FieldSpecPtr& base = ext->base();
  if (!base || !base->same_arithmetic(*from))
    throw Error("embed: element spec is not the recorded base of the extension");
  FieldElement img(ext, ext->base_generator_image());
  FieldElement acc = FieldElement::zero(ext);
  const auto& c = x.coeffs();
  for (size_t i = c.size(); i-- > 0;)
    acc = acc * img + FieldElement::from_int(ext, c[i]);
  return acc;
}

std::optional<FieldElement> project_to_base(const FieldElement& x) {
  const FieldSpecPtr& spec = x.spec();
  if (!spec) throw Error("unset field element");
  FieldSpecPtr base = spec->base();
  if (!base) base = FieldSpec::prime_field(spec->p());
  if (spec->relative_degree() == 1) return FieldElement(base, x.coeffs());
  if (!in_declared_base(x)) return std::nullopt;
  // The declared base is small in every use of this; scan it.
  for (uint64_t idx = 0; idx < base->order(); ++idx) {
    FieldElement cand = FieldElement::from_index(base, idx);
    if (embed_in_extension(spec, cand) == x) return cand;
  }
  return std::nullopt;
}

}  // namespace ssm
