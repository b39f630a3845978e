#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sucd/field.hpp"

namespace sucd {

struct AllTrialsFailed : std::runtime_error {
    AllTrialsFailed() : std::runtime_error("no boosting trial produced a solvable system") {}
};

// Parameters of the augmented retrieval structure: N possible keys, n of them
// valid, m augmented field elements stored alongside. Rows are sampled with
// sparsity t_s; each key owns a group of g consecutive augmented cells.
struct RetrievalParams {
    uint64_t N = 0;
    uint64_t n = 0;
    uint64_t m = 0;
    uint64_t t_s = 0;  // 10 * ceil(log2 n), sampling sparsity
    uint64_t g = 0;    // floor(m / N), group size
    FieldSpec spec = FieldSpec::prime(2);

    static RetrievalParams make(uint64_t N, uint64_t n, uint64_t m, const FieldSpec& spec);
};

// The t_s sampled (position in [n], value) pairs of row i of the dense matrix
// B; deterministic in (i, seed). Repeated positions add up.
std::vector<std::pair<uint64_t, felem>> sample_row_B(const RetrievalParams& p, uint64_t i,
                                                     uint64_t seed);

// Nonzero entries (column in [n+m], value) of row `row` of the sparsified
// matrix A; rows [0,N) answer retrieval queries, rows [N, N+m) augmented
// queries. At most 3 entries, computed on the fly.
std::vector<std::pair<uint64_t, felem>> row_nonzeros_A(const RetrievalParams& p, uint64_t row,
                                                       uint64_t seed);

// n key-value pairs plus m augmented values stored in exactly n+m field
// cells; both query kinds are inner products with at most 3 cells.
class AugmentedRetrieval {
  public:
    static std::optional<AugmentedRetrieval> build(
        const RetrievalParams& p, const std::vector<std::pair<uint64_t, felem>>& pairs,
        const std::vector<felem>& aug, uint64_t seed);

    // Tries seeds derived from master_seed until one solves; trials = 0 means
    // the default ceil(10 * log2 N).
    static AugmentedRetrieval build_boosted(const RetrievalParams& p,
                                            const std::vector<std::pair<uint64_t, felem>>& pairs,
                                            const std::vector<felem>& aug, uint64_t master_seed,
                                            uint64_t trials = 0);

    felem query(uint64_t x, unsigned* probes = nullptr) const;
    felem query_aug(uint64_t j, unsigned* probes = nullptr) const;

    const RetrievalParams& params() const { return params_; }
    const std::vector<felem>& cells() const { return cells_; }
    uint64_t seed() const { return seed_; }
    uint64_t boost_index() const { return boost_index_; }

    void serialize(std::ostream& out) const;
    static AugmentedRetrieval deserialize(std::istream& in);

  private:
    AugmentedRetrieval(RetrievalParams p, uint64_t seed, uint64_t boost_index,
                       std::vector<felem> cells)
        : params_(std::move(p)), seed_(seed), boost_index_(boost_index), cells_(std::move(cells)) {}

    RetrievalParams params_;
    uint64_t seed_ = 0;
    uint64_t boost_index_ = 0;
    std::vector<felem> cells_;
};

}  // namespace sucd
