#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sucd {

// Bit string stored LSB-first within 64-bit words: bit i of the string is
// bit (i % 64) of word i / 64.
class BitVec {
  public:
    BitVec() = default;

    size_t size() const { return n_; }
    size_t word_count() const { return w_.size(); }
    uint64_t word(size_t j) const { return w_[j]; }
    const std::vector<uint64_t>& words() const { return w_; }

    void append_bits(uint64_t v, unsigned count) {
        if (count > 64) throw std::invalid_argument("bit count");
        if (count < 64 && (v >> count) != 0) throw std::invalid_argument("value too wide");
        if (count == 0) return;
        const unsigned off = n_ % 64;
        if (off == 0) w_.push_back(0);
        w_.back() |= v << off;
        if (off + count > 64) w_.push_back(v >> (64 - off));
        n_ += count;
    }

    void append_mpz(const mpz_class& v, size_t count) {
        if (sgn(v) < 0 || mpz_sizeinbase(v.get_mpz_t(), 2) > std::max<size_t>(count, 1))
            throw std::invalid_argument("value too wide");
        mpz_class rest = v;
        for (size_t done = 0; done < count; done += 64) {
            const unsigned c = static_cast<unsigned>(std::min<size_t>(64, count - done));
            mpz_class lo = rest & mpz_class((mpz_class(1) << c) - 1);
            append_bits(mpz_get_ui(lo.get_mpz_t()), c);
            rest >>= c;
        }
    }

    void append_range(const BitVec& src, size_t pos, size_t count) {
        if (pos + count > src.n_) throw std::out_of_range("bit range");
        for (size_t done = 0; done < count; done += 64) {
            const unsigned c = static_cast<unsigned>(std::min<size_t>(64, count - done));
            append_bits(src.get_bits(pos + done, c), c);
        }
    }

    uint64_t get_bits(size_t pos, unsigned count) const {
        if (count > 64 || pos + count > n_) throw std::out_of_range("bit range");
        if (count == 0) return 0;
        const size_t j = pos / 64;
        const unsigned off = pos % 64;
        uint64_t v = w_[j] >> off;
        if (off + count > 64) v |= w_[j + 1] << (64 - off);
        return count == 64 ? v : v & ((uint64_t{1} << count) - 1);
    }

    mpz_class get_mpz(size_t pos, size_t count) const {
        mpz_class v = 0;
        for (size_t done = count; done > 0;) {
            const unsigned c = static_cast<unsigned>(std::min<size_t>(64, done));
            done -= c;
            v <<= c;
            v += mpz_class(get_bits(pos + done, c));
        }
        return v;
    }

    bool operator==(const BitVec& o) const {
        if (n_ != o.n_) return false;
        for (size_t i = 0; i < n_; i += 64)
            if (get_bits(i, static_cast<unsigned>(std::min<size_t>(64, n_ - i))) !=
                o.get_bits(i, static_cast<unsigned>(std::min<size_t>(64, n_ - i))))
                return false;
        return true;
    }

  private:
    std::vector<uint64_t> w_;
    size_t n_ = 0;
};

}  // namespace sucd
