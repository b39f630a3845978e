#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace sucd {

struct PreconditionViolated : std::invalid_argument {
    explicit PreconditionViolated(const char* what) : std::invalid_argument(what) {}
};

// Base conversion of a sequence over [p] into base-q digits through a
// b-ary spillover aggregation tree: leaves pack b symbols, every node emits
// digits until its spill universe drops into [q, q^2), parents pack child
// spills, the root spill is appended as at most two digits.  Digit runs are
// stored most-significant-first, nodes in postorder.
class ConversionTree {
  public:
    static ConversionTree convert(const std::vector<uint64_t>& a, const mpz_class& p,
                                  const mpz_class& q, uint64_t b = 32);
    // Metadata only, no digits; usable for digit counting and reader access.
    static ConversionTree shape(const mpz_class& p, const mpz_class& q, uint64_t b, uint64_t n);

    uint64_t access(uint64_t i, unsigned* probes = nullptr) const;
    // Same walk with the digit array held elsewhere.
    uint64_t access(uint64_t i, const std::function<uint64_t(uint64_t)>& digit_at,
                    unsigned* probes = nullptr) const;
    std::vector<uint64_t> decode_all() const;

    uint64_t n() const { return n_; }
    const mpz_class& source_base() const { return p_; }
    const mpz_class& target_base() const { return q_; }
    uint64_t branching() const { return b_; }
    uint64_t levels() const { return static_cast<uint64_t>(levels_.size()); }
    size_t digit_count() const;  // including the root spill run
    size_t node_count() const;
    const std::vector<uint64_t>& digits() const { return digits_; }
    const mpz_class& node_spill_universe(uint64_t level, uint64_t j) const;

    void serialize(std::ostream& out) const;
    static ConversionTree deserialize(std::istream& in);

  private:
    struct Level {
        uint64_t count = 0;
        uint64_t last_count = 0;  // symbols (leaves) or children (internal) of the last node
        uint64_t d_full = 0, d_last = 0;
        mpz_class K_full, K_last;
        uint64_t sub_full = 0, sub_last = 0;  // digits in a node's whole subtree
    };

    uint64_t subtree_digits(uint64_t level, uint64_t j) const;
    void compute_levels();

    mpz_class p_, q_;
    uint64_t b_ = 0, n_ = 0;
    std::vector<Level> levels_;
    mpz_class K_root_;
    uint64_t root_spill_digits_ = 0;
    std::vector<uint64_t> digits_;
};

}  // namespace sucd
