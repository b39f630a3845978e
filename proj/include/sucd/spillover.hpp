#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sucd/bits.hpp"

namespace sucd {

struct SizeOutOfRange : std::out_of_range {
    SizeOutOfRange() : std::out_of_range("size not in partition") {}
};

// (m, k) with k in [K]; effective length |m| + log2 K fractional bits.
struct SpilloverRep {
    BitVec m;
    mpz_class k = 0;
    mpz_class K = 1;

    double fractional_length() const;
};

// Truncate m to whole w-bit words, folding the leftover bits into the spill.
SpilloverRep merge_leftover(const SpilloverRep& rep, unsigned w);
// Inverse, given the original spill universe.
SpilloverRep split_leftover(const SpilloverRep& rep, unsigned w, const mpz_class& orig_K,
                            size_t orig_bits);

// Partition of [2^t) into contiguous intervals T_s, one per admissible size,
// |T_s|/2^t approximating a clamped distribution p(s); intervals ordered by
// increasing width.
class SizePartition {
  public:
    // weights: per-size nonnegative weights (need not be normalized); clamped
    // to p(s) >= 1/n^3 and apportioned over 2^t by largest remainder,
    // t = 10 * max(1, ceil(log2 n)).
    static SizePartition make(uint64_t n, const std::vector<std::pair<uint64_t, mpq_class>>& weights);

    uint64_t t() const { return t_; }
    const mpz_class& total() const { return total_; }
    size_t count() const { return sizes_.size(); }
    uint64_t size_at(size_t i) const { return sizes_[i]; }
    size_t index_of(uint64_t s) const;
    const mpz_class& width(uint64_t s) const { return width_[index_of(s)]; }
    const mpz_class& start(uint64_t s) const { return start_[index_of(s)]; }
    const mpq_class& prob(uint64_t s) const { return prob_[index_of(s)]; }

    // Size owning a first-t-bits value, plus the offset within its interval.
    std::pair<uint64_t, mpz_class> locate(const mpz_class& first_t) const;

    void serialize(std::ostream& out) const;
    static SizePartition deserialize(std::istream& in);

    bool operator==(const SizePartition& o) const {
        return t_ == o.t_ && sizes_ == o.sizes_ && width_ == o.width_ && prob_ == o.prob_;
    }

  private:
    uint64_t t_ = 0;
    mpz_class total_;
    std::vector<uint64_t> sizes_;   // ordered by interval width, increasing
    std::vector<mpz_class> width_, start_;
    std::vector<mpq_class> prob_;
};

// Replace the first 2t bits of rep.m by the t-bit interval element encoding s,
// pushing the surplus into the spill.
SpilloverRep embed_size(const SpilloverRep& rep, uint64_t s, const SizePartition& part);
// Read s (and the in-interval offset) from the first t bits.
std::pair<uint64_t, mpz_class> extract_size(const BitVec& m, const SizePartition& part);
// Full inverse of embed_size.
std::pair<SpilloverRep, uint64_t> unembed_size(const SpilloverRep& rep, const SizePartition& part);

}  // namespace sucd
