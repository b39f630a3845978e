#include "sucd/concat.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sucd/io.hpp"
#include "sucd/rng.hpp"

namespace sucd {

namespace {

constexpr uint64_t kMagic = 0x3154414e43435553ull;  // "SUCCAT1"
constexpr uint64_t kBranch = 64;

uint64_t ceil_log2(uint64_t n) {
    uint64_t b = 0;
    while ((uint64_t{1} << b) < n) ++b;
    return b;
}

uint64_t sparsity(uint64_t n) { return 10 * std::max<uint64_t>(1, ceil_log2(n)); }

const mpz_class& two64() {
    static const mpz_class v = mpz_class(1) << 64;
    return v;
}

// Fewest source words whose conversion to base P yields at least m_target
// digits.
uint64_t words_for_digits(uint64_t P, uint64_t m_target) {
    const double per_word = 64.0 / std::log2(static_cast<double>(P));
    uint64_t w = std::max<uint64_t>(
        1, static_cast<uint64_t>(static_cast<double>(m_target) / per_word * 0.95));
    while (ConversionTree::shape(two64(), P, kBranch, w).digit_count() < m_target) ++w;
    return w;
}

}  // namespace

bool ConcatParams::inequality_holds(uint64_t L, uint64_t S, uint64_t M_min, uint64_t M_max) {
    if (L == 0 || M_max == 0) return false;
    const double need = static_cast<double>(M_max - M_min) *
                            std::log2(static_cast<double>(L) * static_cast<double>(M_max)) +
                        static_cast<double>(S) * std::log2(static_cast<double>(std::max<uint64_t>(L, 1)));
    return static_cast<double>(M_min) >= need;
}

ConcatParams ConcatParams::make(uint64_t L, const SizePartition& part,
                                std::vector<ConcatTypeInfo> types, bool allow_fallback) {
    if (L == 0) throw ParamViolation("need at least one structure");
    if (types.empty()) throw ParamViolation("need at least one type");
    std::sort(types.begin(), types.end(),
              [](const ConcatTypeInfo& a, const ConcatTypeInfo& b) { return a.s < b.s; });

    ConcatParams p;
    p.L_ = L;
    p.part_ = part;
    p.peel_ = (part.t() + 63) / 64;
    const mpz_class L3 = mpz_class(L) * L * L;
    for (size_t i = 0; i < types.size(); ++i) {
        ConcatTypeInfo& ti = types[i];
        if (i > 0 && ti.s == types[i - 1].s) throw ParamViolation("duplicate type size");
        try {
            (void)part.width(ti.s);
        } catch (const SizeOutOfRange&) {
            throw ParamViolation("type size missing from partition");
        }
        if (ti.M < p.peel_) throw ParamViolation("type shorter than the peeled words");
        if (ti.K <= L3) throw ParamViolation("spill universe not above L^3");
        if (ti.K > (uint64_t{1} << 62)) throw ParamViolation("spill universe too large");
        ti.P = next_prime(ti.K);
    }
    p.types_ = std::move(types);
    p.M_min_ = p.types_.front().M;
    p.M_max_ = p.types_.front().M;
    for (const auto& ti : p.types_) {
        p.M_min_ = std::min(p.M_min_, ti.M);
        p.M_max_ = std::max(p.M_max_, ti.M);
    }

    // Word budgets of the full construction.
    const uint64_t N_v = L * (p.M_max_ - p.M_min_);
    p.a_v_ = N_v ? N_v * sparsity(N_v) : 0;
    const uint64_t m_target = L * sparsity(L);
    p.a_t_ = 0;
    for (const auto& ti : p.types_) p.a_t_ = std::max(p.a_t_, words_for_digits(ti.P, m_target));

    const bool feasible = p.M_min_ > p.peel_ &&
                          inequality_holds(L, p.types_.size(), p.M_min_, p.M_max_) &&
                          p.consumed_words() <= L * (p.M_min_ - p.peel_);
    if (feasible) p.mode_ = Mode::Full;
    else if (allow_fallback) p.mode_ = Mode::Direct;
    else throw ParamViolation("full construction infeasible at these parameters");
    return p;
}

size_t ConcatParams::type_index(uint64_t s) const {
    for (size_t i = 0; i < types_.size(); ++i)
        if (types_[i].s == s) return i;
    throw SizeOutOfRange{};
}

void ConcatParams::serialize(std::ostream& out) const {
    write_u64(out, L_);
    part_.serialize(out);
    write_u64(out, types_.size());
    for (const auto& ti : types_) {
        write_u64(out, ti.s);
        write_u64(out, ti.M);
        write_u64(out, ti.K);
    }
}

ConcatParams ConcatParams::deserialize(std::istream& in) {
    const uint64_t L = read_u64(in);
    SizePartition part = SizePartition::deserialize(in);
    const uint64_t count = read_u64(in);
    if (count == 0 || count > (uint64_t{1} << 20)) throw BadFormat("bad type count");
    std::vector<ConcatTypeInfo> types(count);
    for (auto& ti : types) {
        ti.s = read_u64(in);
        ti.M = read_u64(in);
        ti.K = read_u64(in);
    }
    try {
        return make(L, part, std::move(types), true);
    } catch (const ParamViolation& e) {
        throw BadFormat(e.what());
    }
}

void ConcatStore::derive_types_from_peel() {
    const uint64_t peel = params_.peel();
    type_of_.resize(params_.L());
    for (uint64_t i = 0; i < params_.L(); ++i) {
        BitVec head;
        for (uint64_t j = 0; j < peel; ++j) head.append_bits(peeled_[i * peel + j], 64);
        const uint64_t s = extract_size(head, params_.partition()).first;
        type_of_[i] = static_cast<uint32_t>(params_.type_index(s));
    }
}

ConcatStore ConcatStore::build(const ConcatParams& params, const std::vector<ConcatInput>& reps,
                               uint64_t seed) {
    if (reps.size() != params.L()) throw ParamViolation("rep count differs from L");
    const uint64_t L = params.L();
    const uint64_t peel = params.peel();

    ConcatStore st;
    st.params_ = params;
    st.seed_ = seed;
    st.type_of_.resize(L);
    st.peeled_.reserve(L * peel);
    for (uint64_t i = 0; i < L; ++i) {
        const ConcatInput& r = reps[i];
        if (r.m.size() < peel) throw ParamViolation("rep shorter than the peeled words");
        BitVec head;
        for (uint64_t j = 0; j < peel; ++j) head.append_bits(r.m[j], 64);
        uint64_t s;
        try {
            s = extract_size(head, params.partition()).first;
            st.type_of_[i] = static_cast<uint32_t>(params.type_index(s));
        } catch (const SizeOutOfRange&) {
            throw ParamViolation("rep size not among the declared types");
        }
        const ConcatTypeInfo& ti = params.types()[st.type_of_[i]];
        if (r.m.size() != ti.M) throw ParamViolation("rep length differs from its type");
        if (r.k >= ti.K) throw ParamViolation("spill outside its universe");
        for (uint64_t j = 0; j < peel; ++j) st.peeled_.push_back(r.m[j]);
    }

    if (params.mode() == ConcatParams::Mode::Direct) {
        st.prefix_.resize(L);
        uint64_t at = 0;
        for (const auto& ti : params.types()) st.spill_width_ = std::max(
            st.spill_width_, static_cast<uint64_t>(64 - __builtin_clzll(ti.K - 1)));
        for (uint64_t i = 0; i < L; ++i) {
            st.prefix_[i] = at;
            for (uint64_t j = peel; j < reps[i].m.size(); ++j) st.varwords_.push_back(reps[i].m[j]);
            at = st.varwords_.size();
            st.spills_.append_bits(reps[i].k, static_cast<unsigned>(st.spill_width_));
        }
        return st;
    }

    // m_fix in logical order: structure-major over words [peel, M_min).
    std::vector<uint64_t> mfix;
    mfix.reserve(L * (params.M_min() - peel));
    for (uint64_t i = 0; i < L; ++i)
        for (uint64_t j = peel; j < params.M_min(); ++j) mfix.push_back(reps[i].m[j]);

    const uint64_t a_v = params.varlen_aug_words();
    if (params.M_max() > params.M_min()) {
        Varlen vl;
        const uint64_t span = params.M_max() - params.M_min();
        std::vector<std::pair<uint64_t, felem>> pairs;
        for (uint64_t i = 0; i < L; ++i)
            for (uint64_t j = params.M_min(); j < reps[i].m.size(); ++j)
                pairs.emplace_back(i * span + (j - params.M_min()), reps[i].m[j]);
        std::vector<felem> aug(mfix.begin(), mfix.begin() + a_v);
        if (pairs.empty()) {
            vl.raw = true;
            vl.words.assign(aug.begin(), aug.end());
        } else {
            auto rp = RetrievalParams::make(L * span, pairs.size(), a_v, FieldSpec::binary(64));
            try {
                vl.ret = AugmentedRetrieval::build_boosted(rp, pairs, aug, mix64(seed, 0xcc01u, 0));
            } catch (const AllTrialsFailed&) {
                throw BuildFailed{};
            }
        }
        st.varlen_ = std::move(vl);
    }

    const uint64_t a_t = params.pipeline_words();
    for (size_t tau = 0; tau < params.S(); ++tau) {
        const ConcatTypeInfo& ti = params.types()[tau];
        Pipeline pl;
        const auto first = mfix.begin() + a_v + tau * a_t;
        std::vector<uint64_t> words(first, first + a_t);
        std::vector<std::pair<uint64_t, felem>> members;
        for (uint64_t i = 0; i < L; ++i)
            if (st.type_of_[i] == tau) members.emplace_back(i, reps[i].k);
        if (members.empty()) {
            pl.raw = true;
            pl.words = std::move(words);
        } else {
            ConversionTree tree1 = ConversionTree::convert(words, two64(), ti.P, kBranch);
            pl.n = members.size();
            pl.m = tree1.digit_count();
            pl.rparams = RetrievalParams::make(L, pl.n, pl.m, FieldSpec::prime(ti.P));
            AugmentedRetrieval ret = [&] {
                try {
                    return AugmentedRetrieval::build_boosted(*pl.rparams, members, tree1.digits(),
                                                             mix64(seed, 0xcc02u, tau));
                } catch (const AllTrialsFailed&) {
                    throw BuildFailed{};
                }
            }();
            pl.seed = ret.seed();
            pl.boost = ret.boost_index();
            pl.tree1 = ConversionTree::shape(two64(), ti.P, kBranch, a_t);
            pl.tree2 = ConversionTree::convert(ret.cells(), ti.P, two64(), kBranch);
        }
        st.pipes_.push_back(std::move(pl));
    }

    st.dense_.assign(mfix.begin() + params.consumed_words(), mfix.end());
    return st;
}

const AugmentedRetrieval* ConcatStore::varlen_retrieval() const {
    return varlen_ && varlen_->ret ? &*varlen_->ret : nullptr;
}

const ConversionTree* ConcatStore::pipeline_cells(size_t tau) const {
    return pipes_.at(tau).raw ? nullptr : &*pipes_[tau].tree2;
}

const RetrievalParams* ConcatStore::pipeline_rparams(size_t tau) const {
    return pipes_.at(tau).raw ? nullptr : &*pipes_[tau].rparams;
}

uint64_t ConcatStore::pipeline_seed(size_t tau) const { return pipes_.at(tau).seed; }

uint64_t ConcatStore::size_of(uint64_t i) const {
    if (i >= params_.L()) throw IndexOutOfRange{};
    return params_.types()[type_of_[i]].s;
}

uint64_t ConcatStore::pipeline_word(size_t tau, uint64_t o, unsigned* probes) const {
    const Pipeline& pl = pipes_[tau];
    if (pl.raw) {
        if (probes) *probes += 1;
        return pl.words[o];
    }
    const FieldSpec& f = pl.rparams->spec;
    const unsigned charge = 3 * (static_cast<unsigned>(pl.tree2->levels()) + 1);
    uint64_t last = ~uint64_t{0} - 1;
    auto digit_at = [&](uint64_t d) -> uint64_t {
        // A run of consecutive digits counts as a single augmented query.
        if (probes && d != last + 1) *probes += charge;
        last = d;
        felem v = 0;
        for (const auto& [col, coeff] : row_nonzeros_A(*pl.rparams, pl.rparams->N + d, pl.seed))
            v = f.add(v, f.mul(coeff, pl.tree2->access(col)));
        return v;
    };
    return pl.tree1->access(o, digit_at);
}

uint64_t ConcatStore::read_word(uint64_t i, uint64_t j, unsigned* probes) const {
    if (i >= params_.L()) throw IndexOutOfRange{};
    const ConcatTypeInfo& ti = params_.types()[type_of_[i]];
    if (j >= ti.M) throw IndexOutOfRange{};
    const uint64_t peel = params_.peel();
    unsigned used = 0;
    uint64_t out;
    if (j < peel) {
        out = peeled_[i * peel + j];
        used = 1;
    } else if (params_.mode() == ConcatParams::Mode::Direct) {
        out = varwords_[prefix_[i] + (j - peel)];
        used = 2;  // offset word, then the word itself
    } else if (j < params_.M_min()) {
        const uint64_t f = i * (params_.M_min() - peel) + (j - peel);
        const uint64_t a_v = params_.varlen_aug_words();
        if (f < a_v) {
            if (varlen_->raw) {
                out = varlen_->words[f];
                used = 1;
            } else {
                out = varlen_->ret->query_aug(f, &used);
            }
        } else if (f < params_.consumed_words()) {
            const uint64_t a_t = params_.pipeline_words();
            out = pipeline_word((f - a_v) / a_t, (f - a_v) % a_t, &used);
        } else {
            out = dense_[f - params_.consumed_words()];
            used = 1;
        }
    } else {
        const uint64_t key = i * (params_.M_max() - params_.M_min()) + (j - params_.M_min());
        out = varlen_->ret->query(key, &used);
    }
    if (probes) *probes = used;
    return out;
}

uint64_t ConcatStore::read_spill(uint64_t i, unsigned* probes) const {
    if (i >= params_.L()) throw IndexOutOfRange{};
    if (params_.mode() == ConcatParams::Mode::Direct) {
        if (probes) *probes = 1;
        return spills_.get_bits(i * spill_width_, static_cast<unsigned>(spill_width_));
    }
    const Pipeline& pl = pipes_[type_of_[i]];
    const FieldSpec& f = pl.rparams->spec;
    felem v = 0;
    unsigned cells = 0;
    for (const auto& [col, coeff] : row_nonzeros_A(*pl.rparams, i, pl.seed)) {
        v = f.add(v, f.mul(coeff, pl.tree2->access(col)));
        ++cells;
    }
    if (probes) *probes = cells * (static_cast<unsigned>(pl.tree2->levels()) + 1);
    return v;
}

void ConcatStore::serialize(std::ostream& out) const {
    write_u64(out, kMagic);
    params_.serialize(out);
    write_u64(out, seed_);
    write_u64(out, params_.mode() == ConcatParams::Mode::Full ? 0 : 1);
    for (uint64_t w : peeled_) write_u64(out, w);
    if (params_.mode() == ConcatParams::Mode::Direct) {
        for (uint64_t v : prefix_) write_u64(out, v);
        write_u64(out, varwords_.size());
        for (uint64_t w : varwords_) write_u64(out, w);
        write_u64(out, spill_width_);
        write_u64(out, spills_.word_count());
        for (size_t j = 0; j < spills_.word_count(); ++j) write_u64(out, spills_.word(j));
        return;
    }
    if (params_.M_max() > params_.M_min()) {
        write_u64(out, varlen_->raw ? 1 : 2);
        if (varlen_->raw)
            for (uint64_t w : varlen_->words) write_u64(out, w);
        else
            varlen_->ret->serialize(out);
    } else {
        write_u64(out, 0);
    }
    for (const Pipeline& pl : pipes_) {
        write_u64(out, pl.raw ? 0 : 1);
        if (pl.raw) {
            for (uint64_t w : pl.words) write_u64(out, w);
        } else {
            write_u64(out, pl.seed);
            write_u64(out, pl.boost);
            write_u64(out, pl.n);
            pl.tree2->serialize(out);
        }
    }
    write_u64(out, dense_.size());
    for (uint64_t w : dense_) write_u64(out, w);
}

ConcatStore ConcatStore::deserialize(std::istream& in) {
    if (read_u64(in) != kMagic) throw BadFormat("bad concat magic");
    ConcatStore st;
    st.params_ = ConcatParams::deserialize(in);
    st.seed_ = read_u64(in);
    const uint64_t mode = read_u64(in);
    if (mode != (st.params_.mode() == ConcatParams::Mode::Full ? 0u : 1u))
        throw BadFormat("stored mode differs from the derived one");
    st.peeled_.resize(st.params_.L() * st.params_.peel());
    for (auto& w : st.peeled_) w = read_u64(in);
    st.derive_types_from_peel();

    if (st.params_.mode() == ConcatParams::Mode::Direct) {
        st.prefix_.resize(st.params_.L());
        for (auto& v : st.prefix_) v = read_u64(in);
        const uint64_t nv = read_u64(in);
        uint64_t expected = 0;
        for (uint64_t i = 0; i < st.params_.L(); ++i)
            expected += st.params_.types()[st.type_of_[i]].M - st.params_.peel();
        if (nv != expected) throw BadFormat("bad varlen region size");
        st.varwords_.resize(nv);
        for (auto& w : st.varwords_) w = read_u64(in);
        st.spill_width_ = read_u64(in);
        if (st.spill_width_ == 0 || st.spill_width_ > 63) throw BadFormat("bad spill width");
        const uint64_t words = read_u64(in);
        if (words != (st.params_.L() * st.spill_width_ + 63) / 64)
            throw BadFormat("bad spill region size");
        for (uint64_t j = 0; j < words; ++j) st.spills_.append_bits(read_u64(in), 64);
        return st;
    }

    const uint64_t vflag = read_u64(in);
    if (st.params_.M_max() > st.params_.M_min()) {
        Varlen vl;
        if (vflag == 1) {
            vl.raw = true;
            vl.words.resize(st.params_.varlen_aug_words());
            for (auto& w : vl.words) w = read_u64(in);
        } else if (vflag == 2) {
            vl.ret = AugmentedRetrieval::deserialize(in);
        } else {
            throw BadFormat("bad varlen flag");
        }
        st.varlen_ = std::move(vl);
    } else if (vflag != 0) {
        throw BadFormat("bad varlen flag");
    }
    for (size_t tau = 0; tau < st.params_.S(); ++tau) {
        const ConcatTypeInfo& ti = st.params_.types()[tau];
        Pipeline pl;
        const uint64_t flag = read_u64(in);
        uint64_t count = 0;
        for (uint64_t i = 0; i < st.params_.L(); ++i)
            if (st.type_of_[i] == tau) ++count;
        if (flag == 0) {
            if (count != 0) throw BadFormat("raw pipeline with members");
            pl.raw = true;
            pl.words.resize(st.params_.pipeline_words());
            for (auto& w : pl.words) w = read_u64(in);
        } else if (flag == 1) {
            pl.seed = read_u64(in);
            pl.boost = read_u64(in);
            pl.n = read_u64(in);
            if (pl.n != count) throw BadFormat("pipeline member count mismatch");
            pl.tree1 = ConversionTree::shape(two64(), ti.P, kBranch, st.params_.pipeline_words());
            pl.m = pl.tree1->digit_count();
            pl.rparams = RetrievalParams::make(st.params_.L(), pl.n, pl.m, FieldSpec::prime(ti.P));
            pl.tree2 = ConversionTree::deserialize(in);
            if (pl.tree2->n() != pl.n + pl.m) throw BadFormat("pipeline cell count mismatch");
        } else {
            throw BadFormat("bad pipeline flag");
        }
        st.pipes_.push_back(std::move(pl));
    }
    const uint64_t dn = read_u64(in);
    const uint64_t have = st.params_.L() * (st.params_.M_min() - st.params_.peel());
    if (dn != have - st.params_.consumed_words()) throw BadFormat("bad dense region size");
    st.dense_.resize(dn);
    for (auto& w : st.dense_) w = read_u64(in);
    return st;
}

RedundancyReport ConcatStore::redundancy_report() const {
    RedundancyReport rep;
    std::ostringstream os;
    serialize(os);
    rep.total_bits = static_cast<uint64_t>(os.str().size()) * 8;

    for (uint64_t i = 0; i < params_.L(); ++i) {
        const ConcatTypeInfo& ti = params_.types()[type_of_[i]];
        rep.content_bits += static_cast<double>(ti.M) * 64 +
                            std::log2(static_cast<double>(ti.K));
    }

    if (params_.mode() == ConcatParams::Mode::Direct) {
        for (uint64_t i = 0; i < params_.L(); ++i) {
            const ConcatTypeInfo& ti = params_.types()[type_of_[i]];
            rep.padding_bits += static_cast<double>(spill_width_) -
                                std::log2(static_cast<double>(ti.K));
        }
    } else {
        if (varlen_ && !varlen_->raw) rep.boost_bits += 128;
        const double a_t_bits = static_cast<double>(params_.pipeline_words()) * 64;
        for (size_t tau = 0; tau < pipes_.size(); ++tau) {
            const Pipeline& pl = pipes_[tau];
            if (pl.raw) continue;
            const ConcatTypeInfo& ti = params_.types()[tau];
            const double lgP = std::log2(static_cast<double>(ti.P));
            rep.boost_bits += 128;
            rep.conversion_bits +=
                static_cast<double>(pl.tree2->digit_count()) * 64 -
                static_cast<double>(pl.n + pl.m) * lgP +
                (static_cast<double>(pl.m) * lgP - a_t_bits);
            rep.prime_rounding_bits += static_cast<double>(pl.n) *
                                       (lgP - std::log2(static_cast<double>(ti.K)));
        }
    }
    rep.directory_bits = static_cast<double>(rep.total_bits) - rep.content_bits -
                         rep.boost_bits - rep.conversion_bits - rep.prime_rounding_bits -
                         rep.padding_bits;
    return rep;
}

}  // namespace sucd
