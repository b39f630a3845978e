#include "sucd/bucket.hpp"

#include <algorithm>

namespace sucd {

namespace {

mpz_class binom(uint64_t n, uint64_t k) {
    mpz_class r;
    if (k > n) return 0;
    mpz_bin_uiui(r.get_mpz_t(), n, k);
    return r;
}

mpz_class cdiv(const mpz_class& a, const mpz_class& b) {
    mpz_class q;
    mpz_cdiv_q(q.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
    return q;
}

// Largest r with ceil(D / 2^r) >= floor_value.
uint64_t split_bits(const mpz_class& D, const mpz_class& floor_value) {
    if (D < floor_value) return 0;
    uint64_t r = mpz_sizeinbase(D.get_mpz_t(), 2) - mpz_sizeinbase(floor_value.get_mpz_t(), 2);
    while (cdiv(D, mpz_class(1) << (r + 1)) >= floor_value) ++r;
    while (r > 0 && cdiv(D, mpz_class(1) << r) < floor_value) --r;
    return r;
}

mpz_class low_bits(const mpz_class& v, uint64_t r) {
    return v & mpz_class((mpz_class(1) << r) - 1);
}

}  // namespace

mpz_class subset_rank(const std::vector<uint64_t>& keys, uint64_t V) {
    mpz_class r = 0;
    for (size_t i = 0; i < keys.size(); ++i) {
        if (keys[i] >= V || (i > 0 && keys[i] <= keys[i - 1]))
            throw std::invalid_argument("keys must be sorted, distinct, below V");
        r += binom(keys[i], i + 1);
    }
    return r;
}

std::vector<uint64_t> subset_unrank(const mpz_class& r, uint64_t V, uint64_t s) {
    if (sgn(r) < 0 || r >= binom(V, s)) throw RankOutOfRange{};
    std::vector<uint64_t> keys(s);
    mpz_class rest = r;
    for (uint64_t i = s; i-- > 0;) {
        // largest c with C(c, i+1) <= rest
        uint64_t lo = i, hi = V - 1;
        while (lo < hi) {
            const uint64_t mid = (lo + hi + 1) / 2;
            if (binom(mid, i + 1) <= rest) lo = mid;
            else hi = mid - 1;
        }
        keys[i] = lo;
        rest -= binom(lo, i + 1);
    }
    return keys;
}

BucketCodecParams BucketCodecParams::make(
    uint64_t V, uint64_t B, uint64_t sigma, uint64_t n,
    const std::vector<std::pair<uint64_t, mpq_class>>& size_weights) {
    if (V == 0 || sigma == 0 || n == 0) throw std::invalid_argument("bad codec parameters");
    BucketCodecParams p;
    p.V_ = V;
    p.B_ = B;
    p.sigma_ = sigma;
    p.n_ = n;
    p.part_ = SizePartition::make(n, size_weights);
    p.s_min_ = ~uint64_t{0};
    p.s_max_ = 0;
    const mpz_class n3 = mpz_class(n) * n * n;
    const uint64_t t = p.part_.t();
    for (const auto& [s, wt] : size_weights) {
        if (s > V) throw std::invalid_argument("size exceeds bucket universe");
        p.s_min_ = std::min(p.s_min_, s);
        p.s_max_ = std::max(p.s_max_, s);
        SizeInfo si;
        mpz_class sig_s;
        mpz_pow_ui(sig_s.get_mpz_t(), mpz_class(sigma).get_mpz_t(), s);
        si.D = binom(V, s) * sig_s;
        si.Q = cdiv(p.part_.total() * p.part_.total(), p.part_.width(s));
        si.r1 = split_bits(si.D, n3);
        si.embedded = si.r1 >= 2 * t;
        if (si.embedded) {
            si.K1 = cdiv(si.D, mpz_class(1) << si.r1);
            const mpz_class K_big = si.K1 * si.Q;
            si.r2 = split_bits(K_big, n3);
            si.K = cdiv(K_big, mpz_class(1) << si.r2);
            si.M = si.r1 - t + si.r2;
        } else {
            // Degenerate small-content path: fold the whole rank around the
            // interval element instead of going through the 2t-bit window.
            const mpz_class D1 = cdiv(si.D, p.part_.width(s));
            si.K1 = D1;
            si.r2 = split_bits(D1, n3);
            si.K = cdiv(D1, mpz_class(1) << si.r2);
            si.M = t + si.r2;
        }
        p.info_.emplace(s, std::move(si));
    }
    return p;
}

const BucketCodecParams::SizeInfo& BucketCodecParams::info(uint64_t s) const {
    auto it = info_.find(s);
    if (it == info_.end()) throw SizeOutOfRange{};
    return it->second;
}

SpilloverRep encode_bucket(const BucketInstance& inst, const BucketCodecParams& params) {
    const uint64_t s = inst.keys.size();
    const auto& si = params.info(s);
    if (inst.V != params.V() || inst.sigma != params.sigma() || inst.values.size() != s)
        throw std::invalid_argument("instance does not match codec parameters");

    mpz_class valrank = 0;
    for (size_t i = inst.values.size(); i-- > 0;) {
        if (inst.values[i] >= inst.sigma) throw std::invalid_argument("value outside alphabet");
        valrank = valrank * inst.sigma + inst.values[i];
    }
    mpz_class sig_s;
    mpz_pow_ui(sig_s.get_mpz_t(), mpz_class(inst.sigma).get_mpz_t(), s);
    const mpz_class R = subset_rank(inst.keys, inst.V) * sig_s + valrank;

    SpilloverRep out;
    if (si.embedded) {
        SpilloverRep split;
        split.m.append_mpz(low_bits(R, si.r1), si.r1);
        split.k = R >> si.r1;
        split.K = si.K1;
        SpilloverRep e = embed_size(split, s, params.partition());
        out.m = e.m;
        out.m.append_mpz(low_bits(e.k, si.r2), si.r2);
        out.k = e.k >> si.r2;
        out.K = si.K;
    } else {
        const mpz_class& w = params.partition().width(s);
        out.m.append_mpz(params.partition().start(s) + R % w, params.partition().t());
        const mpz_class R1 = R / w;
        out.m.append_mpz(low_bits(R1, si.r2), si.r2);
        out.k = R1 >> si.r2;
        out.K = si.K;
    }
    return out;
}

BucketInstance decode_bucket(const SpilloverRep& rep, const BucketCodecParams& params) {
    const auto [s, off] = extract_size(rep.m, params.partition());
    const auto& si = params.info(s);
    if (rep.m.size() != si.M || rep.k >= si.K) throw std::invalid_argument("corrupt bucket rep");
    const uint64_t t = params.partition().t();

    mpz_class R;
    if (si.embedded) {
        SpilloverRep e;
        e.m.append_range(rep.m, 0, si.M - si.r2);
        e.k = (rep.k << si.r2) + rep.m.get_mpz(si.M - si.r2, si.r2);
        e.K = si.K1 * si.Q;
        auto [split, s2] = unembed_size(e, params.partition());
        if (s2 != s) throw std::invalid_argument("corrupt bucket rep");
        R = (split.k << si.r1) + split.m.get_mpz(0, si.r1);
    } else {
        const mpz_class R1 = (rep.k << si.r2) + rep.m.get_mpz(t, si.r2);
        R = R1 * params.partition().width(s) + off;
    }
    if (R >= si.D) throw std::invalid_argument("corrupt bucket rep");

    mpz_class sig_s;
    mpz_pow_ui(sig_s.get_mpz_t(), mpz_class(params.sigma()).get_mpz_t(), s);
    BucketInstance inst;
    inst.V = params.V();
    inst.sigma = params.sigma();
    inst.keys = subset_unrank(R / sig_s, params.V(), s);
    mpz_class valrank = R % sig_s;
    inst.values.resize(s);
    for (uint64_t i = 0; i < s; ++i) {
        inst.values[i] = mpz_get_ui(mpz_class(valrank % params.sigma()).get_mpz_t());
        valrank /= params.sigma();
    }
    return inst;
}

uint64_t bucket_size_from_words(const WordReader& words, const BucketCodecParams& params) {
    BitVec head;
    for (uint64_t j = 0; j < params.peel_words(); ++j) head.append_bits(words(j), 64);
    return extract_size(head, params.partition()).first;
}

std::optional<uint64_t> query_bucket(const WordReader& words, const SpillReader& spill,
                                     uint64_t x, const BucketCodecParams& params) {
    const uint64_t s = bucket_size_from_words(words, params);
    const auto& si = params.info(s);
    SpilloverRep rep;
    for (uint64_t j = 0; j * 64 < si.M; ++j) {
        const unsigned c = static_cast<unsigned>(std::min<uint64_t>(64, si.M - j * 64));
        const uint64_t w = words(j);
        rep.m.append_bits(c == 64 ? w : w & ((uint64_t{1} << c) - 1), c);
    }
    rep.k = spill();
    rep.K = si.K;
    const BucketInstance inst = decode_bucket(rep, params);
    const auto it = std::lower_bound(inst.keys.begin(), inst.keys.end(), x);
    if (it == inst.keys.end() || *it != x) return std::nullopt;
    return inst.values[static_cast<size_t>(it - inst.keys.begin())];
}

}  // namespace sucd
