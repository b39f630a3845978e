#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <tuple>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sucd/field.hpp"

namespace sucd {

struct InsufficientAugmented : std::invalid_argument {
    InsufficientAugmented() : std::invalid_argument("augmented array too small for sparsification") {}
};

// Parameters of the §-tree retrieval matrix: n/B level-1 blocks (a power of
// two), h = log2(n/B)+1 levels, slack Delta_i per level.
struct BlockTreeParams {
    uint64_t N = 0;     // retrieval key universe
    uint64_t n = 0;     // valid keys
    uint64_t m = 0;     // augmented array length
    uint64_t B = 0;     // expected level-1 load
    uint64_t h = 0;     // levels
    double c = 4.0;     // concentration constant in Delta_i
    uint64_t q = 0;     // per-level sparsification budget, 8 n ceil(log2 n)
    uint64_t k = 0;     // hash independence, ceil(log2^2 n)
    uint64_t n_f = 0;   // total filler rows
    std::vector<uint64_t> delta;  // delta[i], 1-based, delta[h] = 0
    FieldSpec spec = FieldSpec::prime(2);

    // m = 0 picks the minimum: chain regions plus filler targets.
    static BlockTreeParams make(uint64_t N, uint64_t n, uint64_t B, const FieldSpec& spec,
                                double c = 4.0, uint64_t m = 0, uint64_t k = 0);

    uint64_t blocks_at(uint64_t level) const { return (n / B) >> (level - 1); }
    uint64_t supp_count(uint64_t level) const {
        return level == 1 ? B + delta[1] : 2 * delta[level];
    }
    // Nonzero columns per row of a level-i block (= chain stride).
    uint64_t stride(uint64_t level) const {
        return level == 1 ? B + delta[1] : supp_count(level) + 2 * supp_count(level - 1);
    }
    uint64_t fillers_per_block(uint64_t level) const {
        return 2 * delta[level - 1] + delta[level];
    }
    uint64_t filler_base(uint64_t level) const;       // first filler index of the level
    uint64_t chain_region(uint64_t level) const;      // first aug index of the level's chains
    uint64_t filler_target_base() const;              // aug index of the first filler target
    uint64_t min_m() const { return filler_target_base() + n_f; }
};

// Column geometry: postorder intervals per block, supplementary suffixes.
class BlockTreeLayout {
  public:
    explicit BlockTreeLayout(BlockTreeParams params);

    const BlockTreeParams& params() const { return p_; }
    uint64_t total_cols() const { return p_.n + p_.n_f; }

    uint64_t col_begin(uint64_t level, uint64_t b) const { return cols_[idx(level, b)].first; }
    uint64_t col_end(uint64_t level, uint64_t b) const { return cols_[idx(level, b)].second; }
    uint64_t supp_begin(uint64_t level, uint64_t b) const { return supp_[idx(level, b)]; }
    uint64_t supp_end(uint64_t level, uint64_t b) const { return cols_[idx(level, b)].second; }

    // t-th nonzero column (0-based) of any row in block (level, b).
    uint64_t nonzero_column(uint64_t level, uint64_t b, uint64_t t) const;

    // Block of a filler row index in [n_f].
    std::pair<uint64_t, uint64_t> filler_block(uint64_t fidx) const;

    uint64_t count_nonzeros() const;

  private:
    size_t idx(uint64_t level, uint64_t b) const { return level_off_[level - 1] + b; }

    BlockTreeParams p_;
    std::vector<size_t> level_off_;
    std::vector<std::pair<uint64_t, uint64_t>> cols_;
    std::vector<uint64_t> supp_;
};

// Exactly k-wise independent polynomial hash into [range].
struct KWiseHash {
    uint64_t p = 2;
    uint64_t range = 1;
    std::vector<uint64_t> coef;  // degree k-1, coef[0] constant term

    static KWiseHash sample(uint64_t p, uint64_t range, uint64_t k, uint64_t seed);
    uint64_t operator()(uint64_t x) const;
};

// Exponents a_1..a_h with x_i = g^{a_i}.
struct LevelSeeds {
    std::vector<uint64_t> a;  // a[i], 1-based; a[0] unused

    static LevelSeeds sample(uint64_t p, uint64_t h, uint64_t seed);
};

// Where augmented query k lands: a sparsification chain slot of some row, a
// filler target, or a plain identity cell.
struct AugAssignment {
    enum class Kind { Chain, FillerTarget, Identity } kind;
    uint64_t row = 0;      // global row index (Chain, FillerTarget)
    uint64_t ordinal = 0;  // position within the row's chain (Chain)
};

AugAssignment sparsify_assignment(const BlockTreeParams& p, uint64_t aug_index);

// Delta_i = ceil(c * sqrt(2^{i-1} * B * lgn)); zero at the root.
uint64_t level_slack(uint64_t level, uint64_t B, uint64_t lgn, double c);

// Dense row v of the matrix A: pairs (column, x_i^j / (v+j)). Test-scale
// helper; queries use the sparsified form instead.
std::vector<std::pair<uint64_t, felem>> row_nonzeros(const BlockTreeLayout& layout,
                                                     uint64_t v, const LevelSeeds& seeds,
                                                     const KWiseHash& hash,
                                                     const PowerTable& ptab);

class BlockTreeRetrieval {
  public:
    enum class Failure { None, OverflowBlock, Singular };

    // Returns false when some subtree load leaves 2^{i-1} B +- Delta_i.
    static bool loads_ok(const BlockTreeLayout& layout, const std::vector<uint64_t>& keys,
                         const KWiseHash& hash);

    static std::optional<BlockTreeRetrieval> build(
        const std::shared_ptr<const BlockTreeLayout>& layout,
        const std::vector<std::pair<uint64_t, felem>>& pairs, const std::vector<felem>& aug,
        const LevelSeeds& seeds, const KWiseHash& hash, Failure* why = nullptr);

    struct RetryStats {
        uint64_t hash_attempts = 0;
        uint64_t seed_attempts = 0;
    };
    static BlockTreeRetrieval build_retried(const std::shared_ptr<const BlockTreeLayout>& layout,
                                            const std::vector<std::pair<uint64_t, felem>>& pairs,
                                            const std::vector<felem>& aug, uint64_t master_seed,
                                            uint64_t hash_cap, uint64_t seed_cap,
                                            RetryStats* stats = nullptr);

    felem query(uint64_t x, unsigned* probes = nullptr) const;
    felem query_aug(uint64_t k, unsigned* probes = nullptr) const;

    const BlockTreeLayout& layout() const { return *layout_; }
    const LevelSeeds& seeds() const { return seeds_; }
    const KWiseHash& hash() const { return hash_; }
    const std::vector<felem>& cells() const { return cells_; }

    void serialize(std::ostream& out) const;
    static BlockTreeRetrieval deserialize(std::istream& in);

  private:
    BlockTreeRetrieval(std::shared_ptr<const BlockTreeLayout> layout, LevelSeeds seeds,
                       KWiseHash hash, std::vector<felem> cells);

    // (level, block, chain head aug index) of a row.
    std::tuple<uint64_t, uint64_t, uint64_t> locate_row(uint64_t row) const;
    uint64_t aug_cell(uint64_t k) const;  // cell position of a non-filler aug index

    std::shared_ptr<const BlockTreeLayout> layout_;
    LevelSeeds seeds_;
    KWiseHash hash_;
    std::vector<felem> cells_;
    std::unique_ptr<PowerTable> ptab_;
};

}  // namespace sucd
