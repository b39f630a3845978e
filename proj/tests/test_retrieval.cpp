#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "oracle/oracle.hpp"
#include "sucd/linalg.hpp"
#include "sucd/retrieval.hpp"
#include "sucd/rng.hpp"

using sucd::AugmentedRetrieval;
using sucd::felem;
using sucd::FieldSpec;
using sucd::RetrievalParams;

namespace {

std::vector<std::pair<uint64_t, felem>> random_instance(const RetrievalParams& p, uint64_t seed,
                                                        std::vector<felem>* aug) {
    sucd::Rng rng(seed, 0xfeed);
    std::set<uint64_t> keys;
    while (keys.size() < p.n) keys.insert(rng.next_below(p.N));
    std::vector<std::pair<uint64_t, felem>> pairs;
    for (uint64_t k : keys) pairs.emplace_back(k, rng.next_below(p.spec.order()));
    aug->resize(p.m);
    for (auto& a : *aug) a = rng.next_below(p.spec.order());
    return pairs;
}

}  // namespace

TEST_CASE("sample_row_B shape and determinism") {
    auto p = RetrievalParams::make(2048, 1024, 2048 * 100, FieldSpec::prime(2053));
    CHECK(p.t_s == 100);
    auto a = sucd::sample_row_B(p, 7, 123);
    auto b = sucd::sample_row_B(p, 7, 123);
    CHECK(a.size() == 100);
    CHECK(a == b);
    CHECK(sucd::sample_row_B(p, 8, 123) != a);
    CHECK(sucd::sample_row_B(p, 7, 124) != a);
    for (const auto& [pos, val] : a) {
        CHECK(pos < p.n);
        CHECK(val < 2053);
    }
}

TEST_CASE("sample positions uniform within 5 sigma") {
    const uint64_t n = 64;
    auto p = RetrievalParams::make(4096, n, 4096 * 60, FieldSpec::prime(131));
    std::vector<uint64_t> freq(n, 0);
    uint64_t total = 0;
    for (uint64_t i = 0; total < 100000; ++i) {
        for (const auto& [pos, val] : sucd::sample_row_B(p, i, 99)) {
            ++freq[pos];
            ++total;
            if (total == 100000) break;
        }
    }
    const double mean = 100000.0 / n;
    const double sigma = std::sqrt(100000.0 * (1.0 / n) * (1.0 - 1.0 / n));
    for (uint64_t c = 0; c < n; ++c)
        REQUIRE(std::abs(static_cast<double>(freq[c]) - mean) <= 5.0 * sigma);
}

TEST_CASE("row_nonzeros_A sparsity pattern") {
    auto p = RetrievalParams::make(16, 8, 16 * 40, FieldSpec::prime(17));
    REQUIRE(p.t_s == 30);
    REQUIRE(p.g == 40);
    const uint64_t seed = 5;

    for (uint64_t i = 0; i < p.N; ++i) {
        auto r = sucd::row_nonzeros_A(p, i, seed);
        REQUIRE(r.size() == 1);
        CHECK(r[0].first == p.n + i * p.g);
        CHECK(r[0].second == p.spec.neg(1));
    }
    uint64_t max_nnz = 0;
    for (uint64_t k = 0; k < p.m; ++k) {
        auto r = sucd::row_nonzeros_A(p, p.N + k, seed);
        max_nnz = std::max<uint64_t>(max_nnz, r.size());
        REQUIRE(r.size() <= 3);
        const uint64_t j = k % p.g + 1;
        if (j == p.t_s) CHECK(r.size() <= 2);   // no -1 chain term
        if (j > p.t_s) {
            REQUIRE(r.size() == 1);
            CHECK(r[0] == std::pair<uint64_t, felem>{p.n + k, 1});
        }
    }
    CHECK(max_nnz == 3);
}

TEST_CASE("group rows telescope to the B row") {
    auto p = RetrievalParams::make(6, 4, 6 * 20, FieldSpec::prime(11));
    const uint64_t seed = 42;
    const auto& f = p.spec;
    for (uint64_t i = 0; i < p.N; ++i) {
        std::map<uint64_t, felem> sum;
        auto addrow = [&](uint64_t row) {
            for (const auto& [c, v] : sucd::row_nonzeros_A(p, row, seed))
                sum[c] = f.add(sum[c], v);
        };
        addrow(i);
        for (uint64_t j = 1; j <= p.t_s; ++j) addrow(p.N + i * p.g + j - 1);
        std::map<uint64_t, felem> expect;
        for (const auto& [pos, val] : sucd::sample_row_B(p, i, seed))
            expect[pos] = f.add(expect[pos], val);
        for (const auto& [c, v] : sum) {
            if (v == 0) continue;
            REQUIRE(c < p.n);
            REQUIRE(expect[c] == v);
        }
        for (const auto& [c, v] : expect) REQUIRE(sum[c] == v);
    }
}

TEST_CASE("build single key and all-zero instances") {
    auto f = FieldSpec::prime(101);
    auto p = RetrievalParams::make(1, 1, 10, f);
    std::vector<felem> aug(p.m, 0);
    auto r = AugmentedRetrieval::build(p, {{0, 42}}, aug, 3);
    REQUIRE(r.has_value());
    CHECK(r->query(0) == 42);
    for (uint64_t j = 0; j < p.m; ++j) CHECK(r->query_aug(j) == 0);

    auto p2 = RetrievalParams::make(8, 4, 8 * 20, f);
    std::vector<felem> aug2(p2.m, 0);
    auto r2 = AugmentedRetrieval::build(p2, {{0, 0}, {2, 0}, {5, 0}, {7, 0}}, aug2, 1);
    REQUIRE(r2.has_value());
    for (felem c : r2->cells()) CHECK(c == 0);
}

TEST_CASE("exhaustive correctness on random instances") {
    auto p = RetrievalParams::make(96, 64, 96 * 60, FieldSpec::prime(131));
    for (uint64_t seed = 0; seed < 5; ++seed) {
        std::vector<felem> aug;
        auto pairs = random_instance(p, seed, &aug);
        auto r = AugmentedRetrieval::build(p, pairs, aug, seed * 7 + 1);
        if (!r) continue;
        CHECK(r->cells().size() == p.n + p.m);
        for (const auto& [k, v] : pairs) {
            unsigned probes = 99;
            REQUIRE(r->query(k, &probes) == v);
            REQUIRE(probes <= 3);
        }
        for (uint64_t j = 0; j < p.m; ++j) {
            unsigned probes = 99;
            REQUIRE(r->query_aug(j, &probes) == aug[j]);
            REQUIRE(probes <= 3);
            if (j % p.g + 1 > p.t_s) REQUIRE(probes == 1);
        }
    }
}

TEST_CASE("boosting succeeds and records the winning trial") {
    auto p = RetrievalParams::make(32, 32, 32 * 50, FieldSpec::prime(67));
    std::vector<felem> aug;
    auto pairs = random_instance(p, 11, &aug);
    auto r = AugmentedRetrieval::build_boosted(p, pairs, aug, 77);
    CHECK(r.boost_index() < 50);
    // If trial 0 solves, boost_index must be 0.
    if (AugmentedRetrieval::build(p, pairs, aug, sucd::mix64(77, 0xb005u, 0)).has_value())
        CHECK(r.boost_index() == 0);
}

TEST_CASE("boosting on a field of order exactly 2n") {
    auto f = FieldSpec::binary(6, 0x3);  // GF(64), x^6+x+1
    auto p = RetrievalParams::make(32, 32, 32 * 50, f);
    for (uint64_t rep = 0; rep < 100; ++rep) {
        sucd::Rng rng(rep, 0xab);
        std::vector<std::pair<uint64_t, felem>> pairs;
        for (uint64_t k = 0; k < 32; ++k) pairs.emplace_back(k, f.reduce(rng.next()));
        std::vector<felem> aug(p.m);
        for (auto& a : aug) a = f.reduce(rng.next());
        AugmentedRetrieval r = AugmentedRetrieval::build_boosted(p, pairs, aug, rep);
        for (const auto& [k, v] : pairs) REQUIRE(r.query(k) == v);
    }
}

TEST_CASE("empirical build success rate at least half") {
    for (uint64_t n : {32u, 64u, 128u}) {
        auto f = FieldSpec::prime(sucd::next_prime(2 * n));
        auto p = RetrievalParams::make(n, n, n * 10 * static_cast<uint64_t>(std::ceil(std::log2(n))), f);
        std::vector<felem> aug;
        auto pairs = random_instance(p, n, &aug);
        int ok = 0;
        for (uint64_t seed = 0; seed < 200; ++seed)
            ok += AugmentedRetrieval::build(p, pairs, aug, seed).has_value();
        CHECK(ok >= 100);
    }
}

TEST_CASE("rank of A on valid rows tracks rank of B") {
    int checked = 0, singular = 0;
    for (uint64_t inst = 0; inst < 200; ++inst) {
        const uint64_t n = 4;
        const uint64_t N = 6;
        auto f = FieldSpec::binary(4, 0x3);  // small field makes singulars likely
        auto p = RetrievalParams::make(N, n, N * 20, f);
        const uint64_t seed = inst * 31 + 7;
        sucd::Rng rng(inst, 0xc);
        std::set<uint64_t> keys;
        while (keys.size() < n) keys.insert(rng.next_below(N));

        sucd::SparseMatrix B(N, n, f);
        for (uint64_t i = 0; i < N; ++i) {
            std::vector<sucd::SparseMatrix::Entry> row;
            for (auto& e : sucd::sample_row_B(p, i, seed)) row.push_back(e);
            B.set_row(i, std::move(row));
        }
        sucd::SparseMatrix A(N + p.m, n + p.m, f);
        for (uint64_t r = 0; r < N + p.m; ++r) {
            std::vector<sucd::SparseMatrix::Entry> row;
            for (auto& e : sucd::row_nonzeros_A(p, r, seed)) row.push_back(e);
            A.set_row(r, std::move(row));
        }
        sucd::RowSet sb(keys.begin(), keys.end());
        sucd::RowSet sa = sb;
        for (uint64_t r = N; r < N + p.m; ++r) sa.push_back(r);
        bool fullB = sucd::rank(B, sb) == n;
        bool fullA = sucd::rank(A, sa) == n + p.m;
        REQUIRE(fullA == fullB);
        ++checked;
        singular += !fullB;
    }
    CHECK(checked == 200);
}

TEST_CASE("serialization round trip") {
    auto p = RetrievalParams::make(16, 8, 16 * 40, FieldSpec::prime(1031));
    std::vector<felem> aug;
    auto pairs = random_instance(p, 4, &aug);
    auto r = AugmentedRetrieval::build_boosted(p, pairs, aug, 9);
    std::ostringstream os;
    r.serialize(os);
    // Header: N,n,m + field(3 words) + seed + boost = 8 u64; cells 2 bytes each.
    CHECK(os.str().size() == 8 * 8 + (p.n + p.m) * 2);
    std::istringstream is(os.str());
    auto d = AugmentedRetrieval::deserialize(is);
    CHECK(d.boost_index() == r.boost_index());
    CHECK(d.seed() == r.seed());
    CHECK(d.cells() == r.cells());
    for (const auto& [k, v] : pairs) CHECK(d.query(k) == v);
    for (uint64_t j = 0; j < p.m; ++j) CHECK(d.query_aug(j) == aug[j]);
}
