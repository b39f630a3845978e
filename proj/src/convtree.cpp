#include "sucd/convtree.hpp"

#include <algorithm>

#include "sucd/bits.hpp"
#include "sucd/io.hpp"

namespace sucd {

namespace {

// Largest d with q^{d+1} <= P, and the clamped spill universe ceil(P/q^d).
std::pair<uint64_t, mpz_class> digits_and_universe(const mpz_class& P, const mpz_class& q) {
    uint64_t d = 0;
    mpz_class qd = 1;
    while (qd * q * q <= P) {
        qd *= q;
        ++d;
    }
    mpz_class K;
    mpz_cdiv_q(K.get_mpz_t(), P.get_mpz_t(), qd.get_mpz_t());
    if (K < q) K = q;
    return {d, K};
}

uint64_t to_u64(const mpz_class& v) { return mpz_get_ui(v.get_mpz_t()); }

}  // namespace

void ConversionTree::compute_levels() {
    levels_.clear();
    uint64_t prev_members = n_;
    mpz_class prev_K_full = p_, prev_K_last = p_;
    uint64_t level = 0;
    uint64_t count = 0;
    do {
        Level lv;
        count = (prev_members + b_ - 1) / b_;
        lv.count = count;
        const uint64_t last_members = prev_members - (count - 1) * b_;
        mpz_class P_full, P_last;
        if (level == 0) {
            mpz_pow_ui(P_full.get_mpz_t(), p_.get_mpz_t(), b_);
            mpz_pow_ui(P_last.get_mpz_t(), p_.get_mpz_t(), last_members);
        } else {
            mpz_pow_ui(P_full.get_mpz_t(), prev_K_full.get_mpz_t(), b_);
            mpz_pow_ui(P_last.get_mpz_t(), prev_K_full.get_mpz_t(), last_members - 1);
            P_last *= prev_K_last;
        }
        std::tie(lv.d_full, lv.K_full) = digits_and_universe(P_full, q_);
        std::tie(lv.d_last, lv.K_last) = digits_and_universe(P_last, q_);
        if (level == 0) {
            lv.sub_full = lv.d_full;
            lv.sub_last = lv.d_last;
        } else {
            const Level& pl = levels_.back();
            lv.sub_full = lv.d_full + b_ * pl.sub_full;
            lv.sub_last = lv.d_last + (last_members - 1) * pl.sub_full + pl.sub_last;
        }
        lv.last_count = last_members;
        levels_.push_back(lv);
        prev_members = count;
        prev_K_full = lv.K_full;
        prev_K_last = lv.K_last;
        ++level;
    } while (count > 1);
    K_root_ = levels_.back().K_last;
    root_spill_digits_ = K_root_ <= q_ ? 1 : 2;
}

uint64_t ConversionTree::subtree_digits(uint64_t level, uint64_t j) const {
    const Level& lv = levels_[level];
    return j + 1 == lv.count ? lv.sub_last : lv.sub_full;
}

const mpz_class& ConversionTree::node_spill_universe(uint64_t level, uint64_t j) const {
    const Level& lv = levels_[level];
    return j + 1 == lv.count ? lv.K_last : lv.K_full;
}

size_t ConversionTree::node_count() const {
    size_t total = 0;
    for (const Level& lv : levels_) total += lv.count;
    return total;
}

size_t ConversionTree::digit_count() const {
    size_t total = root_spill_digits_;
    for (const Level& lv : levels_) total += (lv.count - 1) * lv.d_full + lv.d_last;
    return total;
}

ConversionTree ConversionTree::shape(const mpz_class& p, const mpz_class& q, uint64_t b,
                                     uint64_t n) {
    if (p < 2 || q < 2) throw PreconditionViolated("bases must be at least 2");
    if (b < 2) throw PreconditionViolated("branching must be at least 2");
    if (n == 0) throw PreconditionViolated("empty sequence");
    ConversionTree t;
    t.p_ = p;
    t.q_ = q;
    t.b_ = b;
    t.n_ = n;
    t.compute_levels();
    return t;
}

ConversionTree ConversionTree::convert(const std::vector<uint64_t>& a, const mpz_class& p,
                                       const mpz_class& q, uint64_t b) {
    if (p < 2 || q < 2) throw PreconditionViolated("bases must be at least 2");
    if (b < 2) throw PreconditionViolated("branching must be at least 2");
    if (a.empty()) throw PreconditionViolated("empty sequence");
    for (uint64_t x : a)
        if (mpz_class(x) >= p) throw PreconditionViolated("symbol outside source base");

    ConversionTree t;
    t.p_ = p;
    t.q_ = q;
    t.b_ = b;
    t.n_ = a.size();
    t.compute_levels();

    const uint64_t top = t.levels_.size() - 1;
    auto emit = [&](auto&& self, uint64_t level, uint64_t j) -> mpz_class {
        const Level& lv = t.levels_[level];
        const bool last = j + 1 == lv.count;
        mpz_class value = 0;
        if (level == 0) {
            const uint64_t cnt = last ? lv.last_count : b;
            for (uint64_t c = 0; c < cnt; ++c) value = value * p + a[j * b + c];
        } else {
            const uint64_t nch = last ? lv.last_count : b;
            mpz_class mult = 1;
            for (uint64_t c = 0; c < nch; ++c) {
                const uint64_t child = j * b + c;
                mpz_class sp = self(self, level - 1, child);
                value += sp * mult;
                mult *= t.node_spill_universe(level - 1, child);
            }
        }
        const uint64_t d = last ? lv.d_last : lv.d_full;
        std::vector<uint64_t> run(d);
        for (uint64_t i = d; i-- > 0;) {
            mpz_class dig = value % q;
            run[i] = to_u64(dig);
            value /= q;
        }
        t.digits_.insert(t.digits_.end(), run.begin(), run.end());
        return value;
    };
    mpz_class spill = emit(emit, top, 0);
    std::vector<uint64_t> rs(t.root_spill_digits_);
    for (uint64_t i = t.root_spill_digits_; i-- > 0;) {
        mpz_class dig = spill % q;
        rs[i] = to_u64(dig);
        spill /= q;
    }
    if (spill != 0) throw std::logic_error("root spill out of range");
    t.digits_.insert(t.digits_.end(), rs.begin(), rs.end());
    if (t.digits_.size() != t.digit_count()) throw std::logic_error("digit count mismatch");
    return t;
}

uint64_t ConversionTree::access(uint64_t i, unsigned* probes) const {
    return access(i, [this](uint64_t d) { return digits_[d]; }, probes);
}

uint64_t ConversionTree::access(uint64_t i, const std::function<uint64_t(uint64_t)>& digit_at,
                                unsigned* probes) const {
    if (i >= n_) throw std::out_of_range("sequence index");
    unsigned used = 0;
    const uint64_t top = levels_.size() - 1;
    std::vector<uint64_t> path(levels_.size());
    path[0] = i / b_;
    for (uint64_t l = 1; l <= top; ++l) path[l] = path[l - 1] / b_;

    const size_t total = digit_count();
    mpz_class spill = 0;
    for (uint64_t k = 0; k < root_spill_digits_; ++k)
        spill = spill * q_ + digit_at(total - root_spill_digits_ + k);
    ++used;

    uint64_t S = 0;
    mpz_class result = 0;
    for (uint64_t l = top + 1; l-- > 0;) {
        const Level& lv = levels_[l];
        const uint64_t j = path[l];
        const bool last = j + 1 == lv.count;
        const uint64_t d = last ? lv.d_last : lv.d_full;
        const uint64_t sub = subtree_digits(l, j);
        mpz_class value = spill;
        for (uint64_t k = 0; k < d; ++k) value = value * q_ + digit_at(S + sub - d + k);
        ++used;
        if (l == 0) {
            const uint64_t cnt = last ? lv.last_count : b_;
            const uint64_t r = i - j * b_;
            mpz_class div;
            mpz_pow_ui(div.get_mpz_t(), p_.get_mpz_t(), cnt - 1 - r);
            result = (value / div) % p_;
            break;
        }
        const uint64_t c = path[l - 1] - j * b_;
        for (uint64_t cc = 0; cc < c; ++cc) {
            value /= node_spill_universe(l - 1, j * b_ + cc);
            S += subtree_digits(l - 1, j * b_ + cc);
        }
        spill = value % node_spill_universe(l - 1, j * b_ + c);
    }
    if (probes) *probes = used;
    return to_u64(result);
}

std::vector<uint64_t> ConversionTree::decode_all() const {
    std::vector<uint64_t> out(n_);
    const uint64_t top = levels_.size() - 1;
    auto walk = [&](auto&& self, uint64_t level, uint64_t j, uint64_t S, mpz_class spill) -> void {
        const Level& lv = levels_[level];
        const bool last = j + 1 == lv.count;
        const uint64_t d = last ? lv.d_last : lv.d_full;
        const uint64_t sub = subtree_digits(level, j);
        mpz_class value = std::move(spill);
        for (uint64_t k = 0; k < d; ++k) value = value * q_ + digits_[S + sub - d + k];
        if (level == 0) {
            const uint64_t cnt = last ? lv.last_count : b_;
            for (uint64_t c = cnt; c-- > 0;) {
                out[j * b_ + c] = to_u64(value % p_);
                value /= p_;
            }
            return;
        }
        const uint64_t nch = last ? lv.last_count : b_;
        uint64_t cs = S;
        for (uint64_t c = 0; c < nch; ++c) {
            const uint64_t child = j * b_ + c;
            const mpz_class& Kc = node_spill_universe(level - 1, child);
            self(self, level - 1, child, cs, value % Kc);
            value /= Kc;
            cs += subtree_digits(level - 1, child);
        }
    };
    mpz_class spill = 0;
    for (uint64_t k = 0; k < root_spill_digits_; ++k)
        spill = spill * q_ + digits_[digits_.size() - root_spill_digits_ + k];
    walk(walk, top, 0, 0, std::move(spill));
    return out;
}

void ConversionTree::serialize(std::ostream& out) const {
    write_mpz(out, p_);
    write_mpz(out, q_);
    write_u64(out, b_);
    write_u64(out, n_);
    const unsigned width = static_cast<unsigned>(mpz_sizeinbase(mpz_class(q_ - 1).get_mpz_t(), 2));
    BitVec packed;
    for (uint64_t d : digits_) packed.append_bits(d, width);
    write_u64(out, packed.word_count());
    for (size_t j = 0; j < packed.word_count(); ++j) write_u64(out, packed.word(j));
}

ConversionTree ConversionTree::deserialize(std::istream& in) {
    ConversionTree t;
    t.p_ = read_mpz(in);
    t.q_ = read_mpz(in);
    t.b_ = read_u64(in);
    t.n_ = read_u64(in);
    if (t.p_ < 2 || t.q_ < 2 || t.b_ < 2 || t.n_ == 0) throw BadFormat("bad conversion header");
    t.compute_levels();
    const unsigned width =
        static_cast<unsigned>(mpz_sizeinbase(mpz_class(t.q_ - 1).get_mpz_t(), 2));
    const uint64_t total = t.digit_count();
    const uint64_t words = read_u64(in);
    if (words != (total * width + 63) / 64) throw BadFormat("bad digit payload size");
    BitVec packed;
    for (uint64_t j = 0; j < words; ++j) packed.append_bits(read_u64(in), 64);
    t.digits_.resize(total);
    for (uint64_t i = 0; i < total; ++i) t.digits_[i] = packed.get_bits(i * width, width);
    return t;
}

}  // namespace sucd
