#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "sucd/concat.hpp"
#include "sucd/rng.hpp"

using sucd::ConcatInput;
using sucd::ConcatParams;
using sucd::ConcatStore;
using sucd::ConcatTypeInfo;
using sucd::SizePartition;

namespace {

SizePartition uniform_partition(uint64_t n, const std::vector<uint64_t>& sizes) {
    std::vector<std::pair<uint64_t, mpq_class>> w;
    for (uint64_t s : sizes) w.emplace_back(s, mpq_class(1));
    return SizePartition::make(n, w);
}

mpz_class random_below(sucd::Rng& rng, const mpz_class& bound) {
    mpz_class r = (mpz_class(rng.next()) << 64) | mpz_class(rng.next());
    return r % bound;
}

// M random words whose first t bits land in T_s.
ConcatInput random_input(sucd::Rng& rng, const SizePartition& part, uint64_t s, uint64_t M,
                         uint64_t K) {
    sucd::BitVec v;
    v.append_mpz(part.start(s) + random_below(rng, part.width(s)), part.t());
    while (v.size() < M * 64) v.append_bits(rng.next(), 64);
    ConcatInput in;
    for (uint64_t j = 0; j < M; ++j) in.m.push_back(v.word(j));
    in.k = rng.next() % K;
    return in;
}

}  // namespace

TEST_CASE("parameter validation") {
    auto part = uniform_partition(256, {3, 5, 9});
    std::vector<ConcatTypeInfo> types = {{3, 3, 1000, 0}, {5, 4, 1500, 0}, {9, 6, 2000, 0}};
    auto p = ConcatParams::make(8, part, types);
    CHECK(p.mode() == ConcatParams::Mode::Direct);
    CHECK(p.peel() == 2);
    CHECK(p.M_min() == 3);
    CHECK(p.M_max() == 6);
    CHECK(p.type(5).P == 1511);
    CHECK_THROWS_AS(ConcatParams::make(8, part, types, false), sucd::ParamViolation);

    // spill universe must exceed L^3
    std::vector<ConcatTypeInfo> bad = {{3, 3, 512, 0}, {5, 4, 1500, 0}, {9, 6, 2000, 0}};
    CHECK_THROWS_AS(ConcatParams::make(8, part, bad), sucd::ParamViolation);
    // a type absent from the partition
    std::vector<ConcatTypeInfo> off = {{4, 3, 1000, 0}};
    CHECK_THROWS_AS(ConcatParams::make(8, part, off), sucd::ParamViolation);
}

TEST_CASE("direct mode store") {
    auto part = uniform_partition(256, {3, 5, 9});
    std::vector<ConcatTypeInfo> types = {{3, 3, 1000, 0}, {5, 4, 1500, 0}, {9, 6, 2000, 0}};
    auto p = ConcatParams::make(8, part, types);
    REQUIRE(p.mode() == ConcatParams::Mode::Direct);

    sucd::Rng rng(41, 1);
    std::vector<ConcatInput> reps;
    const uint64_t svals[8] = {3, 9, 5, 3, 9, 9, 5, 3};
    for (uint64_t i = 0; i < 8; ++i)
        reps.push_back(random_input(rng, part, svals[i], p.type(svals[i]).M, p.type(svals[i]).K));
    auto st = ConcatStore::build(p, reps, 7);

    for (uint64_t i = 0; i < 8; ++i) {
        CHECK(st.size_of(i) == svals[i]);
        for (uint64_t j = 0; j < reps[i].m.size(); ++j) {
            unsigned probes = 0;
            CHECK(st.read_word(i, j, &probes) == reps[i].m[j]);
            CHECK(probes <= 2);
        }
        unsigned probes = 0;
        CHECK(st.read_spill(i, &probes) == reps[i].k);
        CHECK(probes == 1);
        CHECK_THROWS_AS(st.read_word(i, reps[i].m.size()), sucd::IndexOutOfRange);
    }

    auto rep = st.redundancy_report();
    CHECK(rep.padding_bits >= 0);
    CHECK(rep.boost_bits == 0);
    CHECK(rep.conversion_bits == 0);
    CHECK(rep.total_redundancy() ==
          doctest::Approx(rep.directory_bits + rep.padding_bits).epsilon(1e-9));

    std::ostringstream os;
    st.serialize(os);
    CHECK(os.str().size() * 8 == rep.total_bits);
    std::istringstream is(os.str());
    auto back = ConcatStore::deserialize(is);
    for (uint64_t i = 0; i < 8; ++i) {
        for (uint64_t j = 0; j < reps[i].m.size(); ++j)
            CHECK(back.read_word(i, j) == reps[i].m[j]);
        CHECK(back.read_spill(i) == reps[i].k);
    }

    // wrong rep length rejected
    auto badrep = reps;
    badrep[0].m.push_back(0);
    CHECK_THROWS_AS(ConcatStore::build(p, badrep, 7), sucd::ParamViolation);
}

TEST_CASE("single structure full mode") {
    auto part = uniform_partition(16, {3});
    auto p = ConcatParams::make(1, part, {{3, 10, 12345, 0}});
    REQUIRE(p.mode() == ConcatParams::Mode::Full);
    CHECK(ConcatParams::inequality_holds(1, 1, 10, 10));

    sucd::Rng rng(42, 2);
    auto in = random_input(rng, part, 3, 10, 12345);
    auto st = ConcatStore::build(p, {in}, 11);
    for (uint64_t j = 0; j < 10; ++j) {
        unsigned probes = 0;
        CHECK(st.read_word(0, j, &probes) == in.m[j]);
        CHECK(probes <= 40);
    }
    CHECK(st.read_spill(0) == in.k);

    // zero spill is a valid spill
    auto zero = in;
    zero.k = 0;
    auto st0 = ConcatStore::build(p, {zero}, 11);
    CHECK(st0.read_spill(0) == 0);

    auto rep = st.redundancy_report();
    CHECK(rep.prime_rounding_bits <= 1.0);
    CHECK(rep.total_redundancy() > 0);
}

TEST_CASE("full pipeline store") {
    const uint64_t L = 64;
    auto part = uniform_partition(4096, {48, 64, 80});
    const uint64_t base = uint64_t{1} << 36;
    std::vector<ConcatTypeInfo> types = {
        {48, 520, base + 9, 0}, {64, 522, base + 101, 0}, {80, 524, base + 333, 0}};
    auto p = ConcatParams::make(L, part, types);
    REQUIRE(p.mode() == ConcatParams::Mode::Full);
    CHECK(ConcatParams::inequality_holds(L, 3, p.M_min(), p.M_max()));
    CHECK(p.consumed_words() <= L * (p.M_min() - p.peel()));
    for (const auto& ti : p.types()) CHECK(ti.P > ti.K);

    sucd::Rng rng(43, 3);
    std::vector<ConcatInput> reps;
    std::vector<uint64_t> svec;
    for (uint64_t i = 0; i < L; ++i) {
        const uint64_t s = p.types()[rng.next_below(3)].s;
        svec.push_back(s);
        reps.push_back(random_input(rng, part, s, p.type(s).M, p.type(s).K));
    }
    auto st = ConcatStore::build(p, reps, 99);

    // m_fix in the store's logical order
    std::vector<uint64_t> mfix;
    for (uint64_t i = 0; i < L; ++i)
        for (uint64_t j = p.peel(); j < p.M_min(); ++j) mfix.push_back(reps[i].m[j]);

    // every word outside the pipeline-consumed range, through the API
    const uint64_t a_v = p.varlen_aug_words();
    unsigned max_probes = 0;
    for (uint64_t i = 0; i < L; ++i) {
        CHECK(st.size_of(i) == svec[i]);
        for (uint64_t j = 0; j < reps[i].m.size(); ++j) {
            if (j >= p.peel() && j < p.M_min()) {
                const uint64_t f = i * (p.M_min() - p.peel()) + (j - p.peel());
                if (f >= a_v && f < p.consumed_words()) continue;
            }
            unsigned probes = 0;
            REQUIRE(st.read_word(i, j, &probes) == reps[i].m[j]);
            max_probes = std::max(max_probes, probes);
        }
    }

    // pipeline-consumed words in bulk: the augmented digits recovered from
    // the stored cells must equal the conversion of the drawn m_fix words
    for (size_t tau = 0; tau < 3; ++tau) {
        const auto* rp = st.pipeline_rparams(tau);
        REQUIRE(rp != nullptr);
        auto cells = st.pipeline_cells(tau)->decode_all();
        REQUIRE(cells.size() == rp->n + rp->m);
        std::vector<uint64_t> digits(rp->m);
        for (uint64_t d = 0; d < rp->m; ++d) {
            sucd::felem v = 0;
            for (const auto& [col, coeff] :
                 sucd::row_nonzeros_A(*rp, rp->N + d, st.pipeline_seed(tau)))
                v = rp->spec.add(v, rp->spec.mul(coeff, cells[col]));
            digits[d] = v;
        }
        std::vector<uint64_t> drawn(mfix.begin() + a_v + tau * p.pipeline_words(),
                                    mfix.begin() + a_v + (tau + 1) * p.pipeline_words());
        auto expect = sucd::ConversionTree::convert(drawn, mpz_class(1) << 64,
                                                    p.types()[tau].P, 64);
        REQUIRE(digits == expect.digits());
    }

    // and a sample of them through the instrumented API
    for (int trial = 0; trial < 60; ++trial) {
        const uint64_t f = a_v + rng.next_below(p.consumed_words() - a_v);
        const uint64_t i = f / (p.M_min() - p.peel());
        const uint64_t j = p.peel() + f % (p.M_min() - p.peel());
        unsigned probes = 0;
        REQUIRE(st.read_word(i, j, &probes) == reps[i].m[j]);
        max_probes = std::max(max_probes, probes);
    }
    CHECK(max_probes <= 40);

    // spills: exact, probe count identical within a type
    std::set<uint64_t> stypes;
    std::vector<std::set<unsigned>> per_type(3);
    for (uint64_t i = 0; i < L; ++i) {
        unsigned probes = 0;
        REQUIRE(st.read_spill(i, &probes) == reps[i].k);
        CHECK(probes <= 40);
        per_type[p.type_index(st.size_of(i))].insert(probes);
    }
    for (const auto& s : per_type)
        if (!s.empty()) CHECK(s.size() == 1);

    auto rep = st.redundancy_report();
    CHECK(rep.prime_rounding_bits <= 1.0);
    CHECK(rep.conversion_bits >= 0);
    // c2 = 16 words per (type, log2 L) covers the measured overhead
    const double budget = 16.0 * 3 * std::log2(double(L)) * 64;
    CHECK(rep.total_redundancy() <= budget);
    CHECK(rep.total_redundancy() ==
          doctest::Approx(rep.directory_bits + rep.boost_bits + rep.conversion_bits +
                          rep.prime_rounding_bits).epsilon(1e-9));

    std::ostringstream os;
    st.serialize(os);
    CHECK(os.str().size() * 8 == rep.total_bits);
    std::istringstream is(os.str());
    auto back = ConcatStore::deserialize(is);
    for (int trial = 0; trial < 40; ++trial) {
        const uint64_t i = rng.next_below(L);
        const uint64_t j = rng.next_below(reps[i].m.size());
        REQUIRE(back.read_word(i, j) == reps[i].m[j]);
    }
    for (uint64_t i = 0; i < L; ++i) REQUIRE(back.read_spill(i) == reps[i].k);
}
