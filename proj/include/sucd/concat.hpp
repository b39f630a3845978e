#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sucd/convtree.hpp"
#include "sucd/retrieval.hpp"
#include "sucd/spillover.hpp"

namespace sucd {

struct ParamViolation : std::invalid_argument {
    explicit ParamViolation(const char* what) : std::invalid_argument(what) {}
};

struct BuildFailed : std::runtime_error {
    BuildFailed() : std::runtime_error("a retrieval exhausted its boost trials") {}
};

struct IndexOutOfRange : std::out_of_range {
    IndexOutOfRange() : std::out_of_range("index outside store") {}
};

struct ConcatTypeInfo {
    uint64_t s = 0;  // size tag, recoverable from the first t bits of m
    uint64_t M = 0;  // words per structure of this type
    uint64_t K = 0;  // spill universe
    uint64_t P = 0;  // next_prime(K), filled in by ConcatParams::make
};

struct ConcatInput {
    std::vector<uint64_t> m;  // exactly M^(s) words, first t bits encode s
    uint64_t k = 0;           // spill in [K^(s)]
};

// Parameters for storing L variable-length (m_i, k_i) pairs with
// constant-probe access.  Full mode follows the storing-representations
// construction: dense prefix, a varlen retrieval over GF(2^64), and
// per-type spill pipelines whose augmented arrays are drawn from m_fix.
// Direct mode falls back to an offset table plus a fixed-width spill array
// when the full-mode word budgets don't fit.
class ConcatParams {
  public:
    enum class Mode { Full, Direct };

    static ConcatParams make(uint64_t L, const SizePartition& part,
                             std::vector<ConcatTypeInfo> types, bool allow_fallback = true);

    uint64_t L() const { return L_; }
    uint64_t S() const { return types_.size(); }
    uint64_t M_min() const { return M_min_; }
    uint64_t M_max() const { return M_max_; }
    uint64_t peel() const { return peel_; }
    Mode mode() const { return mode_; }
    const SizePartition& partition() const { return part_; }
    const std::vector<ConcatTypeInfo>& types() const { return types_; }
    size_t type_index(uint64_t s) const;
    const ConcatTypeInfo& type(uint64_t s) const { return types_[type_index(s)]; }

    // Full-mode m_fix budgets, in words.
    uint64_t varlen_aug_words() const { return a_v_; }
    uint64_t pipeline_words() const { return a_t_; }
    uint64_t consumed_words() const { return a_v_ + S() * a_t_; }

    // Inequality (1) with c1 = 1: enough m_fix words for both augmented
    // budgets.
    static bool inequality_holds(uint64_t L, uint64_t S, uint64_t M_min, uint64_t M_max);

    void serialize(std::ostream& out) const;
    static ConcatParams deserialize(std::istream& in);

  private:
    uint64_t L_ = 0, M_min_ = 0, M_max_ = 0, peel_ = 0;
    uint64_t a_v_ = 0, a_t_ = 0;
    Mode mode_ = Mode::Direct;
    SizePartition part_;
    std::vector<ConcatTypeInfo> types_;  // ascending in s
};

struct RedundancyReport {
    uint64_t total_bits = 0;
    double content_bits = 0;
    double directory_bits = 0;       // headers, offsets, residual framing
    double boost_bits = 0;           // retrieval seeds and boost indices
    double conversion_bits = 0;      // both conversions of every pipeline
    double prime_rounding_bits = 0;  // sum over spills of log2(P/K)
    double padding_bits = 0;         // direct mode: uniform spill width

    double total_redundancy() const { return static_cast<double>(total_bits) - content_bits; }
};

class ConcatStore {
  public:
    static ConcatStore build(const ConcatParams& params, const std::vector<ConcatInput>& reps,
                             uint64_t seed);

    uint64_t read_word(uint64_t i, uint64_t j, unsigned* probes = nullptr) const;
    uint64_t read_spill(uint64_t i, unsigned* probes = nullptr) const;
    uint64_t size_of(uint64_t i) const;  // s_i via the peeled words

    const ConcatParams& params() const { return params_; }
    RedundancyReport redundancy_report() const;

    // Inspection hooks for diagnostics: the varlen retrieval, and per-type
    // pipeline state (null when the variant is a raw word region).
    const AugmentedRetrieval* varlen_retrieval() const;
    const ConversionTree* pipeline_cells(size_t tau) const;
    const RetrievalParams* pipeline_rparams(size_t tau) const;
    uint64_t pipeline_seed(size_t tau) const;

    void serialize(std::ostream& out) const;
    static ConcatStore deserialize(std::istream& in);

  private:
    struct Varlen {
        bool raw = false;               // no varlen words present
        std::vector<uint64_t> words;    // raw variant: the drawn aug words
        std::optional<AugmentedRetrieval> ret;
    };
    struct Pipeline {
        bool raw = false;               // no members of this type
        std::vector<uint64_t> words;    // raw variant: the drawn m_fix words
        uint64_t seed = 0, boost = 0, n = 0, m = 0;
        std::optional<RetrievalParams> rparams;
        std::optional<ConversionTree> tree1;  // shape only; digits live in the retrieval
        std::optional<ConversionTree> tree2;  // retrieval cells in base 2^64
    };

    void derive_types_from_peel();
    uint64_t pipeline_word(size_t tau, uint64_t o, unsigned* probes) const;

    ConcatParams params_;
    uint64_t seed_ = 0;
    std::vector<uint64_t> peeled_;   // L * peel words
    std::vector<uint64_t> dense_;    // m_fix remainder (full) / unused (direct)
    std::optional<Varlen> varlen_;   // full mode, only when M_max > M_min
    std::vector<Pipeline> pipes_;    // full mode, one per type
    std::vector<uint64_t> prefix_;   // direct mode: per-i offset into varwords_
    std::vector<uint64_t> varwords_; // direct mode: words [peel, M^(s_i)) back to back
    BitVec spills_;                  // direct mode: L spills of spill_width_ bits
    uint64_t spill_width_ = 0;
    std::vector<uint32_t> type_of_;  // derived: type index per structure
};

}  // namespace sucd
