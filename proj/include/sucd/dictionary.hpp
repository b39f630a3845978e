#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sucd/blocktree.hpp"
#include "sucd/bucket.hpp"
#include "sucd/concat.hpp"

namespace sucd {

struct RetriesExhausted : std::runtime_error {
    RetriesExhausted() : std::runtime_error("no seed attempt produced an accepted build") {}
};

struct DictParams {
    uint64_t U = 0, n = 0, sigma = 1;
    uint64_t B = 0;      // bucket size target; default ceil(log2 n)^4
    uint64_t L = 0;      // n / B buckets
    uint64_t V = 0;      // U / L in-bucket universe
    uint64_t retries = 20;

    // B_override = 0 picks the default; tests pass an explicit B.
    static DictParams make(uint64_t U, uint64_t n, uint64_t sigma, uint64_t B_override = 0,
                           uint64_t retries = 20);
    // Largest g with g^3 <= B^2; accepted loads lie in [B-g, B+g].
    uint64_t load_slack() const;
    double space_budget_bits() const;  // 50 * ceil(log2 n)^3
};

// Bijection on [U]: 4-round Feistel over an even number of bits covering U,
// k-wise polynomial round functions, cycle-walking into [U].
class PermutationFamily {
  public:
    PermutationFamily() = default;
    PermutationFamily(uint64_t U, uint64_t seed);

    uint64_t forward(uint64_t x) const;
    uint64_t inverse(uint64_t y) const;
    uint64_t domain() const { return U_; }

  private:
    uint64_t step(uint64_t v) const;
    uint64_t step_back(uint64_t v) const;

    uint64_t U_ = 0;
    unsigned h_ = 0;  // half width; the Feistel domain is 2^(2h)
    std::vector<KWiseHash> rounds_;
};

// Bucket loads under the permutation derived from perm_seed.
std::vector<uint64_t> bucket_loads(const std::vector<uint64_t>& keys, const DictParams& params,
                                   uint64_t perm_seed);
bool loads_within(const std::vector<uint64_t>& loads, const DictParams& params);

struct SpaceReport {
    double opt_bits = 0;       // log2 C(U,n) + n log2 sigma, 1e-6-bit precision
    uint64_t total_bits = 0;   // serialized container size
    uint64_t main_bits = 0;    // concat regions (the structure proper)
    uint64_t table_bits = 0;   // partition / p(s) / type tables, headers
    uint64_t seed_bits = 0;    // master seed and winning attempt index

    double main_redundancy() const { return static_cast<double>(main_bits) - opt_bits; }
};

class Dictionary {
  public:
    static Dictionary build(const std::vector<uint64_t>& keys, const std::vector<uint64_t>& values,
                            const DictParams& params, uint64_t master_seed);

    std::optional<uint64_t> query(uint64_t x, unsigned* probes = nullptr) const;

    const DictParams& params() const { return params_; }
    uint64_t master_seed() const { return master_seed_; }
    uint64_t attempt() const { return attempt_; }
    const PermutationFamily& permutation() const { return perm_; }
    const BucketCodecParams& codec() const { return codec_; }
    const ConcatStore& store() const { return store_; }

    SpaceReport space_report() const;

    void serialize(std::ostream& out) const;
    static Dictionary deserialize(std::istream& in);

  private:
    DictParams params_;
    uint64_t master_seed_ = 0, attempt_ = 0;
    PermutationFamily perm_;
    BucketCodecParams codec_;
    ConcatStore store_;
};

// Mean over trials of sum_i (log2(1/p(s_i)) + log2 C(V, s_i)) with the
// realized frequencies p; trials use independently derived permutations.
double entropy_check(const std::vector<uint64_t>& keys, const DictParams& params,
                     uint64_t master_seed, uint64_t trials);

// log2 C(U,n) + n log2 sigma through exact big-integer binomials.
double opt_bits(uint64_t U, uint64_t n, uint64_t sigma);

// Key/value file formats: 8-byte magic, u64 count, u64 items, little-endian.
void write_u64_file(std::ostream& out, const char magic[8], const std::vector<uint64_t>& items);
std::vector<uint64_t> read_u64_file(std::istream& in, const char magic[8]);
inline constexpr char kKeysMagic[8] = {'S', 'U', 'C', 'D', 'K', 'E', 'Y', 'S'};
inline constexpr char kValsMagic[8] = {'S', 'U', 'C', 'D', 'V', 'A', 'L', 'S'};

}  // namespace sucd
