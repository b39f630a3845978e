#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sucd {

// Thrown by inv(0).
struct InvOfZero : std::domain_error {
    InvOfZero() : std::domain_error("multiplicative inverse of zero") {}
};

using felem = uint64_t;

// Arithmetic in GF(2^w) (w <= 64, fixed irreducible modulus) or a prime
// field F_p (p < 2^63). Elements are canonical integers in [0, order).
// Immutable after construction; all operations are pure.
class FieldSpec {
  public:
    enum class Kind { BinaryExtension, Prime };

    static FieldSpec binary(unsigned w);                        // published default polynomial
    static FieldSpec binary(unsigned w, uint64_t modulus_poly); // custom (tests)
    static FieldSpec prime(uint64_t p);

    Kind kind() const { return kind_; }
    unsigned w() const { return w_; }
    uint64_t modulus_poly() const { return poly_; }
    uint64_t p() const { return p_; }

    // Field size. 2^64 is reported as 0; use order_at_least / log2_order
    // when the binary w = 64 case matters.
    uint64_t order() const { return kind_ == Kind::Prime ? p_ : (w_ == 64 ? 0 : (uint64_t{1} << w_)); }
    bool order_at_least(uint64_t x) const;
    double log2_order() const;

    felem zero() const { return 0; }
    felem one() const { return 1; }

    felem add(felem a, felem b) const {
        if (kind_ == Kind::BinaryExtension) return a ^ b;
        uint64_t s = a + b;
        return s >= p_ || s < a ? s - p_ : s;
    }
    felem sub(felem a, felem b) const {
        if (kind_ == Kind::BinaryExtension) return a ^ b;
        return a >= b ? a - b : a + p_ - b;
    }
    felem neg(felem a) const {
        if (kind_ == Kind::BinaryExtension) return a;
        return a == 0 ? 0 : p_ - a;
    }
    felem mul(felem a, felem b) const {
        if (kind_ == Kind::Prime) {
            using u128 = unsigned __int128;
            return static_cast<uint64_t>(u128(a) * b % p_);
        }
        return mul_binary(a, b);
    }
    felem inv(felem a) const;
    felem pow(felem a, uint64_t e) const;

    // Canonical embedding of an arbitrary integer (used when sampling).
    felem reduce(uint64_t x) const {
        if (kind_ == Kind::Prime) return x % p_;
        return w_ == 64 ? x : x & ((uint64_t{1} << w_) - 1);
    }

    bool operator==(const FieldSpec& o) const {
        return kind_ == o.kind_ && w_ == o.w_ && poly_ == o.poly_ && p_ == o.p_;
    }

  private:
    FieldSpec() = default;
    felem mul_binary(felem a, felem b) const;

    Kind kind_ = Kind::Prime;
    unsigned w_ = 0;       // binary case
    uint64_t poly_ = 0;    // binary case: low coefficients, x^w implicit
    uint64_t p_ = 2;       // prime case
};

// Montgomery trick: inverts every element with one field inversion plus
// 3(len-1) multiplies. Throws InvOfZero if any element is zero.
std::vector<felem> batch_inv(const FieldSpec& spec, const std::vector<felem>& xs);

// Deterministic Miller-Rabin, exact below 2^64.
bool is_prime_u64(uint64_t n);

// Smallest prime >= k (k >= 2).
uint64_t next_prime(uint64_t k);

// Generator of F_p^*; p prime.
felem find_primitive_root(uint64_t p);

// 64-bit factorization helper (Pollard rho), exposed for tests.
std::vector<uint64_t> prime_factors(uint64_t n);

// Table of g^{i * S^j} for 0 <= i < S, covering exponents below the group
// order with ceil(log_S(order)) digit positions. S is derived from n^epsilon.
class PowerTable {
  public:
    PowerTable(const FieldSpec& spec, felem g, uint64_t n, double epsilon = 0.25);

    felem eval(uint64_t exponent) const;  // == pow(g, exponent), O(#digits) probes
    felem generator() const { return g_; }
    uint64_t radix() const { return radix_; }
    size_t levels() const { return entries_.size(); }
    size_t entry_count() const { return entries_.empty() ? 0 : entries_.size() * radix_; }

  private:
    FieldSpec spec_;
    felem g_;
    uint64_t radix_;
    std::vector<std::vector<felem>> entries_;  // entries_[j][i] = g^{i * radix^j}
};

}  // namespace sucd
