#include "sucd/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

#include "sucd/field.hpp"
#include "sucd/io.hpp"
#include "sucd/rng.hpp"

namespace sucd {

namespace {

uint64_t ceil_log2(uint64_t v) {
    uint64_t b = 0;
    while ((uint64_t{1} << b) < v) ++b;
    return b;
}

double log2_mpz(const mpz_class& v) {
    signed long exp = 0;
    const double d = mpz_get_d_2exp(&exp, v.get_mpz_t());
    return std::log2(d) + static_cast<double>(exp);
}

// Concat serialization: 8-byte magic, the params block, seed, mode, regions.
// The regions are the structure proper; the rest is tables and framing.
uint64_t concat_frame_bytes(const ConcatParams& p) {
    std::ostringstream os;
    p.serialize(os);
    return os.str().size() + 24;
}

constexpr char kDictMagic[4] = {'S', 'U', 'C', 'D'};
constexpr uint16_t kVersion = 1;

}  // namespace

DictParams DictParams::make(uint64_t U, uint64_t n, uint64_t sigma, uint64_t B_override,
                            uint64_t retries) {
    if (n == 0 || sigma == 0 || retries == 0) throw ParamViolation("n, sigma, retries >= 1");
    if (U < 2 * n) throw ParamViolation("universe must be at least 2n");
    DictParams p;
    p.U = U;
    p.n = n;
    p.sigma = sigma;
    p.retries = retries;
    const uint64_t lg = std::max<uint64_t>(1, ceil_log2(n));
    p.B = B_override ? B_override : lg * lg * lg * lg;
    if (p.B == 0 || p.B > n || n % p.B != 0) throw ParamViolation("bucket size must divide n");
    p.L = n / p.B;
    if (U % p.L != 0) throw ParamViolation("bucket count must divide the universe");
    p.V = U / p.L;
    return p;
}

uint64_t DictParams::load_slack() const {
    uint64_t g = 1;
    while ((g + 1) * (g + 1) * (g + 1) <= B * B) ++g;
    return g;
}

double DictParams::space_budget_bits() const {
    const double lg = static_cast<double>(std::max<uint64_t>(1, ceil_log2(n)));
    return 50.0 * lg * lg * lg;
}

PermutationFamily::PermutationFamily(uint64_t U, uint64_t seed) : U_(U) {
    if (U < 2) throw ParamViolation("permutation domain too small");
    const uint64_t bits = ceil_log2(U);
    h_ = static_cast<unsigned>((bits + 1) / 2);
    const uint64_t half = uint64_t{1} << h_;
    const uint64_t p = next_prime(half);
    for (unsigned r = 0; r < 4; ++r)
        rounds_.push_back(KWiseHash::sample(p, half, 8, mix64(seed, 0xfe15, r)));
}

uint64_t PermutationFamily::step(uint64_t v) const {
    const uint64_t mask = (uint64_t{1} << h_) - 1;
    uint64_t a = v >> h_, b = v & mask;
    for (const auto& f : rounds_) {
        const uint64_t t = a ^ f(b);
        a = b;
        b = t;
    }
    return (a << h_) | b;
}

uint64_t PermutationFamily::step_back(uint64_t v) const {
    const uint64_t mask = (uint64_t{1} << h_) - 1;
    uint64_t a = v >> h_, b = v & mask;
    for (auto it = rounds_.rbegin(); it != rounds_.rend(); ++it) {
        const uint64_t t = b ^ (*it)(a);
        b = a;
        a = t;
    }
    return (a << h_) | b;
}

uint64_t PermutationFamily::forward(uint64_t x) const {
    if (x >= U_) throw IndexOutOfRange();
    do x = step(x);
    while (x >= U_);
    return x;
}

uint64_t PermutationFamily::inverse(uint64_t y) const {
    if (y >= U_) throw IndexOutOfRange();
    do y = step_back(y);
    while (y >= U_);
    return y;
}

std::vector<uint64_t> bucket_loads(const std::vector<uint64_t>& keys, const DictParams& params,
                                   uint64_t perm_seed) {
    PermutationFamily perm(params.U, perm_seed);
    std::vector<uint64_t> loads(params.L, 0);
    for (uint64_t x : keys) ++loads[perm.forward(x) / params.V];
    return loads;
}

bool loads_within(const std::vector<uint64_t>& loads, const DictParams& params) {
    const uint64_t g = params.load_slack();
    for (uint64_t s : loads)
        if (s + g < params.B || s > params.B + g) return false;
    return true;
}

Dictionary Dictionary::build(const std::vector<uint64_t>& keys, const std::vector<uint64_t>& values,
                             const DictParams& params, uint64_t master_seed) {
    if (keys.size() != params.n || values.size() != params.n)
        throw ParamViolation("need exactly n keys and values");
    {
        std::vector<uint64_t> sorted = keys;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ParamViolation("duplicate key");
        if (sorted.back() >= params.U) throw ParamViolation("key outside universe");
    }
    for (uint64_t v : values)
        if (v >= params.sigma) throw ParamViolation("value outside alphabet");

    const double budget = opt_bits(params.U, params.n, params.sigma) + params.space_budget_bits();
    for (uint64_t a = 0; a < params.retries; ++a) {
        PermutationFamily perm(params.U, mix64(master_seed, 0xd1c7, a));
        std::vector<std::vector<std::pair<uint64_t, uint64_t>>> buckets(params.L);
        for (size_t idx = 0; idx < keys.size(); ++idx) {
            const uint64_t y = perm.forward(keys[idx]);
            buckets[y / params.V].emplace_back(y % params.V, values[idx]);
        }
        std::vector<uint64_t> loads(params.L);
        for (uint64_t i = 0; i < params.L; ++i) loads[i] = buckets[i].size();
        if (!loads_within(loads, params)) continue;

        std::map<uint64_t, uint64_t> counts;
        for (uint64_t s : loads) ++counts[s];
        std::vector<std::pair<uint64_t, mpq_class>> weights;
        for (const auto& [s, c] : counts) weights.emplace_back(s, mpq_class(c));
        auto codec = BucketCodecParams::make(params.V, params.B, params.sigma, params.n, weights);

        std::vector<ConcatTypeInfo> types;
        const uint64_t floorK = params.L * params.L * params.L + 1;
        for (const auto& [s, c] : counts) {
            const auto& si = codec.info(s);
            if (!si.K.fits_ulong_p()) throw ParamViolation("spill universe too large");
            ConcatTypeInfo ti;
            ti.s = s;
            ti.M = (si.M + 63) / 64;
            ti.K = std::max<uint64_t>(si.K.get_ui(), floorK);
            types.push_back(ti);
        }
        auto cparams = ConcatParams::make(params.L, codec.partition(), types);

        std::vector<ConcatInput> inputs(params.L);
        for (uint64_t i = 0; i < params.L; ++i) {
            std::sort(buckets[i].begin(), buckets[i].end());
            BucketInstance inst;
            inst.V = params.V;
            inst.sigma = params.sigma;
            for (const auto& [kk, v] : buckets[i]) {
                inst.keys.push_back(kk);
                inst.values.push_back(v);
            }
            auto rep = encode_bucket(inst, codec);
            const uint64_t mw = cparams.type(loads[i]).M;
            for (uint64_t j = 0; j < mw; ++j) inputs[i].m.push_back(rep.m.word(j));
            inputs[i].k = rep.k.get_ui();
        }

        ConcatStore st;
        try {
            st = ConcatStore::build(cparams, inputs, mix64(master_seed, 0xcc17, a));
        } catch (const BuildFailed&) {
            continue;
        }

        std::ostringstream os;
        st.serialize(os);
        const uint64_t main_bits = (os.str().size() - concat_frame_bytes(cparams)) * 8;
        if (static_cast<double>(main_bits) > budget) continue;

        Dictionary d;
        d.params_ = params;
        d.master_seed_ = master_seed;
        d.attempt_ = a;
        d.perm_ = std::move(perm);
        d.codec_ = std::move(codec);
        d.store_ = std::move(st);
        return d;
    }
    throw RetriesExhausted();
}

std::optional<uint64_t> Dictionary::query(uint64_t x, unsigned* probes) const {
    if (x >= params_.U) throw IndexOutOfRange();
    const uint64_t y = perm_.forward(x);
    const uint64_t i = y / params_.V;
    unsigned total = 0;
    WordReader words = [&](uint64_t j) {
        unsigned pr = 0;
        const uint64_t w = store_.read_word(i, j, &pr);
        total += pr;
        return w;
    };
    SpillReader spill = [&]() {
        unsigned pr = 0;
        const mpz_class k(static_cast<unsigned long>(store_.read_spill(i, &pr)));
        total += pr;
        return k;
    };
    auto res = query_bucket(words, spill, y % params_.V, codec_);
    if (probes) *probes = total;
    return res;
}

SpaceReport Dictionary::space_report() const {
    SpaceReport rep;
    rep.opt_bits = opt_bits(params_.U, params_.n, params_.sigma);
    std::ostringstream all;
    serialize(all);
    rep.total_bits = all.str().size() * 8;
    std::ostringstream cs;
    store_.serialize(cs);
    rep.main_bits = (cs.str().size() - concat_frame_bytes(store_.params())) * 8;
    rep.seed_bits = 128;  // master seed and winning attempt index
    rep.table_bits = rep.total_bits - rep.main_bits - rep.seed_bits;
    return rep;
}

void Dictionary::serialize(std::ostream& out) const {
    out.write(kDictMagic, 4);
    write_u16(out, kVersion);
    write_u64(out, params_.U);
    write_u64(out, params_.n);
    write_u64(out, params_.sigma);
    write_u64(out, params_.B);
    write_u64(out, params_.retries);
    write_u64(out, master_seed_);
    write_u64(out, attempt_);
    store_.serialize(out);
}

Dictionary Dictionary::deserialize(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kDictMagic, 4) != 0) throw BadFormat("bad dictionary magic");
    if (read_u16(in) != kVersion) throw BadFormat("unsupported version");
    const uint64_t U = read_u64(in), n = read_u64(in), sigma = read_u64(in);
    const uint64_t B = read_u64(in), retries = read_u64(in);
    Dictionary d;
    d.params_ = DictParams::make(U, n, sigma, B, retries);
    d.master_seed_ = read_u64(in);
    d.attempt_ = read_u64(in);
    if (d.attempt_ >= retries) throw BadFormat("attempt index outside the retry budget");
    d.perm_ = PermutationFamily(U, mix64(d.master_seed_, 0xd1c7, d.attempt_));
    d.store_ = ConcatStore::deserialize(in);
    if (d.store_.params().L() != d.params_.L) throw BadFormat("bucket count mismatch");
    std::map<uint64_t, uint64_t> counts;
    for (uint64_t i = 0; i < d.params_.L; ++i) ++counts[d.store_.size_of(i)];
    std::vector<std::pair<uint64_t, mpq_class>> weights;
    for (const auto& [s, c] : counts) weights.emplace_back(s, mpq_class(c));
    d.codec_ = BucketCodecParams::make(d.params_.V, B, sigma, n, weights);
    if (!(d.codec_.partition() == d.store_.params().partition()))
        throw BadFormat("partition does not match the stored sizes");
    return d;
}

double entropy_check(const std::vector<uint64_t>& keys, const DictParams& params,
                     uint64_t master_seed, uint64_t trials) {
    if (trials == 0) throw ParamViolation("need at least one trial");
    const double lgL = std::log2(static_cast<double>(params.L));
    double acc = 0;
    for (uint64_t tr = 0; tr < trials; ++tr) {
        auto loads = bucket_loads(keys, params, mix64(master_seed, 0x117e, tr));
        std::map<uint64_t, uint64_t> counts;
        for (uint64_t s : loads) ++counts[s];
        for (const auto& [s, c] : counts) {
            mpz_class binom;
            mpz_bin_uiui(binom.get_mpz_t(), params.V, s);
            const double per = lgL - std::log2(static_cast<double>(c)) + log2_mpz(binom);
            acc += static_cast<double>(c) * per;
        }
    }
    return acc / static_cast<double>(trials);
}

double opt_bits(uint64_t U, uint64_t n, uint64_t sigma) {
    mpz_class binom;
    mpz_bin_uiui(binom.get_mpz_t(), U, n);
    return log2_mpz(binom) + static_cast<double>(n) * std::log2(static_cast<double>(sigma));
}

void write_u64_file(std::ostream& out, const char magic[8], const std::vector<uint64_t>& items) {
    out.write(magic, 8);
    write_u64(out, items.size());
    for (uint64_t v : items) write_u64(out, v);
}

std::vector<uint64_t> read_u64_file(std::istream& in, const char magic[8]) {
    char got[8];
    in.read(got, 8);
    if (!in || std::memcmp(got, magic, 8) != 0) throw BadFormat("bad file magic");
    const uint64_t count = read_u64(in);
    if (count > (uint64_t{1} << 32)) throw BadFormat("oversized item count");
    std::vector<uint64_t> items(count);
    for (auto& v : items) v = read_u64(in);
    return items;
}

}  // namespace sucd
