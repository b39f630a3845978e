#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sucd/spillover.hpp"

namespace sucd {

struct RankOutOfRange : std::out_of_range {
    RankOutOfRange() : std::out_of_range("rank outside C(V,s)") {}
};

struct BucketInstance {
    uint64_t V = 0;
    uint64_t sigma = 1;
    std::vector<uint64_t> keys;    // sorted, distinct, < V
    std::vector<uint64_t> values;  // parallel to keys, < sigma
};

// Colexicographic combinadics: rank = sum C(key_i, i+1) over sorted keys.
mpz_class subset_rank(const std::vector<uint64_t>& keys, uint64_t V);
std::vector<uint64_t> subset_unrank(const mpz_class& r, uint64_t V, uint64_t s);

// Per-size codec parameters: the content universe D = C(V,s)*sigma^s split
// into bits and a spill, the size embedded into the first t bits.
class BucketCodecParams {
  public:
    struct SizeInfo {
        mpz_class D;        // C(V,s) * sigma^s
        uint64_t r1 = 0;    // low bits of the initial split
        mpz_class K1;       // ceil(D / 2^r1)
        mpz_class Q;        // ceil(2^{2t} / |T_s|)
        uint64_t r2 = 0;    // spill bits folded back after embedding
        mpz_class K;        // final spill universe
        uint64_t M = 0;     // final bit length of m
        bool embedded = false;
    };

    static BucketCodecParams make(uint64_t V, uint64_t B, uint64_t sigma, uint64_t n,
                                  const std::vector<std::pair<uint64_t, mpq_class>>& size_weights);

    uint64_t V() const { return V_; }
    uint64_t B() const { return B_; }
    uint64_t sigma() const { return sigma_; }
    uint64_t n() const { return n_; }
    uint64_t s_min() const { return s_min_; }
    uint64_t s_max() const { return s_max_; }
    const SizePartition& partition() const { return part_; }
    const SizeInfo& info(uint64_t s) const;
    // Words of m that suffice to recover the size.
    uint64_t peel_words() const { return (part_.t() + 63) / 64; }

  private:
    uint64_t V_ = 0, B_ = 0, sigma_ = 1, n_ = 0, s_min_ = 0, s_max_ = 0;
    SizePartition part_;
    std::map<uint64_t, SizeInfo> info_;
};

SpilloverRep encode_bucket(const BucketInstance& inst, const BucketCodecParams& params);
BucketInstance decode_bucket(const SpilloverRep& rep, const BucketCodecParams& params);

using WordReader = std::function<uint64_t(uint64_t)>;   // j-th 64-bit word of m
using SpillReader = std::function<mpz_class()>;

uint64_t bucket_size_from_words(const WordReader& words, const BucketCodecParams& params);
std::optional<uint64_t> query_bucket(const WordReader& words, const SpillReader& spill,
                                     uint64_t x, const BucketCodecParams& params);

}  // namespace sucd
