#include "sucd/field.hpp"

#include <algorithm>
#include <cmath>

#include "sucd/rng.hpp"

namespace sucd {

namespace {

// Published low-weight irreducibles (Conway-style defaults used by common
// carryless-multiply implementations).
uint64_t default_poly(unsigned w) {
    switch (w) {
        case 8: return 0x1b;        // x^8+x^4+x^3+x+1
        case 16: return 0x2b;       // x^16+x^5+x^3+x+1
        case 32: return 0x8d;       // x^32+x^7+x^3+x^2+1
        case 64: return 0x1b;       // x^64+x^4+x^3+x+1
        default: throw std::invalid_argument("no default modulus for this degree");
    }
}

uint64_t mulmod(uint64_t a, uint64_t b, uint64_t m) {
    using u128 = unsigned __int128;
    return static_cast<uint64_t>(u128(a) * b % m);
}

uint64_t powmod(uint64_t a, uint64_t e, uint64_t m) {
    uint64_t r = 1 % m;
    a %= m;
    while (e) {
        if (e & 1) r = mulmod(r, a, m);
        a = mulmod(a, a, m);
        e >>= 1;
    }
    return r;
}

uint64_t pollard_rho(uint64_t n) {
    if ((n & 1) == 0) return 2;
    Rng rng(n, 0x9e3779b9);
    while (true) {
        uint64_t c = rng.next_below(n - 1) + 1;
        uint64_t x = rng.next_below(n), y = x, d = 1;
        auto step = [&](uint64_t v) { return (mulmod(v, v, n) + c) % n; };
        while (d == 1) {
            x = step(x);
            y = step(step(y));
            if (x == y) break;
            d = std::__gcd(x > y ? x - y : y - x, n);
        }
        if (d != 1 && d != n) return d;
    }
}

void factor_rec(uint64_t n, std::vector<uint64_t>& out) {
    if (n == 1) return;
    if (is_prime_u64(n)) {
        out.push_back(n);
        return;
    }
    uint64_t d = pollard_rho(n);
    factor_rec(d, out);
    factor_rec(n / d, out);
}

}  // namespace

FieldSpec FieldSpec::binary(unsigned w) { return binary(w, default_poly(w)); }

FieldSpec FieldSpec::binary(unsigned w, uint64_t modulus_poly) {
    if (w == 0 || w > 64) throw std::invalid_argument("degree must be in [1,64]");
    FieldSpec s;
    s.kind_ = Kind::BinaryExtension;
    s.w_ = w;
    s.poly_ = modulus_poly;
    s.p_ = 0;
    return s;
}

FieldSpec FieldSpec::prime(uint64_t p) {
    if (!is_prime_u64(p)) throw std::invalid_argument("modulus is not prime");
    if (p >= (uint64_t{1} << 63)) throw std::invalid_argument("prime modulus must be < 2^63");
    FieldSpec s;
    s.kind_ = Kind::Prime;
    s.p_ = p;
    return s;
}

bool FieldSpec::order_at_least(uint64_t x) const {
    if (kind_ == Kind::Prime) return p_ >= x;
    if (w_ == 64) return true;
    return (uint64_t{1} << w_) >= x;
}

double FieldSpec::log2_order() const {
    return kind_ == Kind::Prime ? std::log2(static_cast<double>(p_)) : static_cast<double>(w_);
}

felem FieldSpec::mul_binary(felem a, felem b) const {
    const uint64_t mask = w_ == 64 ? ~uint64_t{0} : (uint64_t{1} << w_) - 1;
    const uint64_t top = uint64_t{1} << (w_ - 1);
    felem r = 0;
    while (b) {
        if (b & 1) r ^= a;
        b >>= 1;
        bool carry = (a & top) != 0;
        a = (a << 1) & mask;
        if (carry) a ^= poly_;
    }
    return r;
}

felem FieldSpec::inv(felem a) const {
    if (a == 0) throw InvOfZero{};
    if (kind_ == Kind::Prime) return powmod(a, p_ - 2, p_);
    // Extended Euclid over GF(2)[x]; the modulus needs w+1 bits.
    using u128 = unsigned __int128;
    auto deg = [](u128 v) {
        int d = -1;
        while (v) v >>= 1, ++d;
        return d;
    };
    u128 r0 = (u128{1} << w_) | poly_, r1 = a;
    u128 s0 = 0, s1 = 1;
    while (r1) {
        int shift = deg(r0) - deg(r1);
        if (shift < 0) {
            std::swap(r0, r1);
            std::swap(s0, s1);
            continue;
        }
        r0 ^= r1 << shift;
        s0 ^= s1 << shift;
    }
    return static_cast<felem>(s0);  // r0 == 1 since the modulus is irreducible
}

felem FieldSpec::pow(felem a, uint64_t e) const {
    felem r = 1;
    while (e) {
        if (e & 1) r = mul(r, a);
        a = mul(a, a);
        e >>= 1;
    }
    return r;
}

std::vector<felem> batch_inv(const FieldSpec& spec, const std::vector<felem>& xs) {
    std::vector<felem> prefix(xs.size());
    felem acc = 1;
    for (size_t i = 0; i < xs.size(); ++i) {
        prefix[i] = acc;
        acc = spec.mul(acc, xs[i]);
    }
    felem inv_acc = spec.inv(acc);  // throws if any element is zero
    std::vector<felem> out(xs.size());
    for (size_t i = xs.size(); i-- > 0;) {
        out[i] = spec.mul(inv_acc, prefix[i]);
        inv_acc = spec.mul(inv_acc, xs[i]);
    }
    return out;
}

bool is_prime_u64(uint64_t n) {
    if (n < 2) return false;
    for (uint64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
        if (n % p == 0) return n == p;
    }
    uint64_t d = n - 1;
    int s = 0;
    while ((d & 1) == 0) d >>= 1, ++s;
    for (uint64_t a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
        uint64_t x = powmod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int i = 1; i < s; ++i) {
            x = mulmod(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

uint64_t next_prime(uint64_t k) {
    if (k <= 2) return 2;
    uint64_t c = k | 1;
    while (!is_prime_u64(c)) c += 2;
    return c;
}

std::vector<uint64_t> prime_factors(uint64_t n) {
    std::vector<uint64_t> f;
    factor_rec(n, f);
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
    return f;
}

felem find_primitive_root(uint64_t p) {
    if (p == 2) return 1;
    const auto factors = prime_factors(p - 1);
    for (uint64_t g = 2;; ++g) {
        bool ok = true;
        for (uint64_t q : factors) {
            if (powmod(g, (p - 1) / q, p) == 1) {
                ok = false;
                break;
            }
        }
        if (ok) return g;
    }
}

PowerTable::PowerTable(const FieldSpec& spec, felem g, uint64_t n, double epsilon)
    : spec_(spec), g_(g) {
    if (epsilon <= 0 || epsilon > 1) throw std::invalid_argument("epsilon in (0,1]");
    radix_ = std::max<uint64_t>(2, static_cast<uint64_t>(std::ceil(std::pow(static_cast<double>(n), epsilon))));
    // Cover every exponent below the multiplicative-order bound (< 2^64).
    double digits = 64.0 / std::log2(static_cast<double>(radix_));
    size_t levels = static_cast<size_t>(std::ceil(digits));
    entries_.resize(levels);
    felem step = g_;  // g^(radix^j)
    for (size_t j = 0; j < levels; ++j) {
        auto& row = entries_[j];
        row.resize(radix_);
        row[0] = spec_.one();
        for (uint64_t i = 1; i < radix_; ++i) row[i] = spec_.mul(row[i - 1], step);
        step = spec_.mul(row[radix_ - 1], step);  // step^radix
    }
}

felem PowerTable::eval(uint64_t exponent) const {
    felem r = spec_.one();
    size_t j = 0;
    while (exponent) {
        r = spec_.mul(r, entries_[j][exponent % radix_]);
        exponent /= radix_;
        ++j;
    }
    return r;
}

}  // namespace sucd
