#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "oracle/oracle.hpp"
#include "sucd/linalg.hpp"
#include "sucd/rng.hpp"

using sucd::felem;
using sucd::FieldSpec;
using sucd::RowSet;
using sucd::SparseMatrix;

namespace {

SparseMatrix from_dense(const std::vector<std::vector<felem>>& d, const FieldSpec& f) {
    SparseMatrix m(d.size(), d.empty() ? 0 : d[0].size(), f);
    for (size_t i = 0; i < d.size(); ++i) {
        std::vector<SparseMatrix::Entry> row;
        for (size_t j = 0; j < d[i].size(); ++j)
            if (d[i][j] != 0) row.emplace_back(j, d[i][j]);
        m.set_row(i, std::move(row));
    }
    return m;
}

RowSet all_rows(size_t n) {
    RowSet r(n);
    std::iota(r.begin(), r.end(), 0);
    return r;
}

std::vector<std::vector<felem>> random_dense(size_t n, size_t c, uint64_t p, uint64_t seed) {
    sucd::Rng rng(seed, 42);
    std::vector<std::vector<felem>> d(n, std::vector<felem>(c));
    for (auto& row : d)
        for (auto& v : row) v = rng.next_below(p);
    return d;
}

}  // namespace

TEST_CASE("rank basics") {
    auto f = FieldSpec::prime(7);
    SparseMatrix id(5, 5, f);
    for (size_t i = 0; i < 5; ++i) id.set_row(i, {{i, 1}});
    CHECK(sucd::rank(id, all_rows(5)) == 5);

    SparseMatrix dup(2, 3, f);
    dup.set_row(0, {{0, 2}, {2, 3}});
    dup.set_row(1, {{0, 2}, {2, 3}});
    CHECK(sucd::rank(dup, all_rows(2)) == 1);
    CHECK(sucd::rank(dup, {0}) == 1);
    CHECK(sucd::rank(dup, {}) == 0);
}

TEST_CASE("rank matches independent elimination") {
    for (uint64_t seed = 0; seed < 30; ++seed) {
        auto d = random_dense(8, 8, 17, seed);
        auto m = from_dense(d, FieldSpec::prime(17));
        CHECK(sucd::rank(m, all_rows(8)) == oracle::rank_mod_p(d, 17));
    }
    // Rectangular and deliberately rank-deficient shapes.
    for (uint64_t seed = 100; seed < 110; ++seed) {
        auto d = random_dense(10, 6, 101, seed);
        d[7] = d[2];
        d[9] = d[0];
        auto m = from_dense(d, FieldSpec::prime(101));
        CHECK(sucd::rank(m, all_rows(10)) == oracle::rank_mod_p(d, 101));
    }
}

TEST_CASE("rank metamorphic invariances") {
    auto f = FieldSpec::prime(101);
    sucd::Rng rng(3, 3);
    for (int trial = 0; trial < 20; ++trial) {
        auto d = random_dense(9, 7, 101, 500 + trial);
        auto base = sucd::rank(from_dense(d, f), all_rows(9));

        auto perm = d;
        for (size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[rng.next_below(i)]);
        CHECK(sucd::rank(from_dense(perm, f), all_rows(9)) == base);

        auto mixed = d;
        size_t a = rng.next_below(9), b = rng.next_below(9);
        if (a != b) {
            felem k = rng.next_below(101);
            for (size_t j = 0; j < 7; ++j) mixed[a][j] = f.add(mixed[a][j], f.mul(k, mixed[b][j]));
            CHECK(sucd::rank(from_dense(mixed, f), all_rows(9)) == base);
        }
    }
}

TEST_CASE("solve_rows identity and singular cases") {
    auto f = FieldSpec::prime(7);
    SparseMatrix id(4, 4, f);
    for (size_t i = 0; i < 4; ++i) id.set_row(i, {{i, 1}});
    auto c = sucd::solve_rows(id, all_rows(4), {3, 1, 4, 5});
    REQUIRE(c.has_value());
    CHECK(*c == std::vector<felem>{3, 1, 4, 5});

    SparseMatrix sing(2, 2, f);
    sing.set_row(0, {{0, 1}, {1, 1}});
    sing.set_row(1, {{0, 2}, {1, 2}});
    CHECK_FALSE(sucd::solve_rows(sing, all_rows(2), {1, 3}).has_value());
    // Consistent dependent targets do have a solution.
    auto ok = sucd::solve_rows(sing, all_rows(2), {1, 2});
    REQUIRE(ok.has_value());
    CHECK(sing.dot(0, *ok) == 1);
    CHECK(sing.dot(1, *ok) == 2);
}

TEST_CASE("solve_rows substitution on random full-rank systems") {
    auto f = FieldSpec::prime(101);
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto d = random_dense(16, 16, 101, 900 + seed);
        auto m = from_dense(d, f);
        if (sucd::rank(m, all_rows(16)) < 16) continue;
        std::vector<felem> t(16);
        sucd::Rng rng(seed, 9);
        for (auto& v : t) v = rng.next_below(101);
        auto c = sucd::solve_rows(m, all_rows(16), t);
        REQUIRE(c.has_value());
        for (size_t i = 0; i < 16; ++i) REQUIRE(m.dot(i, *c) == t[i]);
        auto ref = oracle::solve_mod_p(d, t, 101);
        REQUIRE(ref.has_value());
        CHECK(*c == *ref);
    }
}

TEST_CASE("solve_rows underdetermined and subset rows") {
    auto f = FieldSpec::prime(1031);
    auto d = random_dense(6, 12, 1031, 77);
    auto m = from_dense(d, f);
    RowSet rows = {0, 2, 5};
    std::vector<felem> t = {10, 20, 30};
    auto c = sucd::solve_rows(m, rows, t);
    REQUIRE(c.has_value());
    for (size_t k = 0; k < rows.size(); ++k) REQUIRE(m.dot(rows[k], *c) == t[k]);
}

TEST_CASE("sparse path agrees with dense path") {
    // Wide matrix forces the sparse eliminator; embed a small dense system at
    // scattered columns and compare with the dense result on the compacted
    // matrix.
    auto f = FieldSpec::prime(101);
    auto d = random_dense(12, 12, 101, 1234);
    std::vector<size_t> cols(12);
    for (size_t j = 0; j < 12; ++j) cols[j] = 1000 * (j + 1);
    SparseMatrix wide(12, 20000, f);
    for (size_t i = 0; i < 12; ++i) {
        std::vector<SparseMatrix::Entry> row;
        for (size_t j = 0; j < 12; ++j)
            if (d[i][j] != 0) row.emplace_back(cols[j], d[i][j]);
        wide.set_row(i, std::move(row));
    }
    auto compact = from_dense(d, f);
    CHECK(sucd::rank(wide, all_rows(12)) == sucd::rank(compact, all_rows(12)));
    std::vector<felem> t(12);
    sucd::Rng rng(8, 8);
    for (auto& v : t) v = rng.next_below(101);
    auto cw = sucd::solve_rows(wide, all_rows(12), t);
    auto cc = sucd::solve_rows(compact, all_rows(12), t);
    REQUIRE(cw.has_value() == cc.has_value());
    if (cw) {
        for (size_t i = 0; i < 12; ++i) REQUIRE(wide.dot(i, *cw) == t[i]);
        for (size_t j = 0; j < 12; ++j) CHECK((*cw)[cols[j]] == (*cc)[j]);
    }
}

TEST_CASE("elimination over binary extension fields") {
    auto f = FieldSpec::binary(16);
    sucd::Rng rng(11, 0);
    std::vector<std::vector<felem>> d(10, std::vector<felem>(10));
    for (auto& row : d)
        for (auto& v : row) v = f.reduce(rng.next());
    auto m = from_dense(d, f);
    std::vector<felem> t(10);
    for (auto& v : t) v = f.reduce(rng.next());
    auto c = sucd::solve_rows(m, all_rows(10), t);
    if (c)
        for (size_t i = 0; i < 10; ++i) REQUIRE(m.dot(i, *c) == t[i]);
    CHECK(sucd::rank(m, all_rows(10)) <= 10);
}

TEST_CASE("cauchy worked examples") {
    auto f = FieldSpec::prime(7);
    auto m = sucd::cauchy({1, 2}, {6, 5}, f);
    CHECK(m == std::vector<std::vector<felem>>{{4, 5}, {5, 2}});
    // det = 4*2 - 5*5 = 8 - 25 = -17 = 4 mod 7, nonzero
    auto one = sucd::cauchy({1}, {2}, f);
    CHECK(one == std::vector<std::vector<felem>>{{6}});

    CHECK_THROWS_AS(sucd::cauchy({1, 1}, {2, 3}, f), sucd::DegenerateParameters);
    CHECK_THROWS_AS(sucd::cauchy({1, 2}, {2, 3}, f), sucd::DegenerateParameters);
}

TEST_CASE("cauchy all square submatrices nonsingular") {
    auto f = FieldSpec::prime(1009);
    sucd::Rng rng(21, 5);
    std::vector<felem> a, b;
    while (a.size() < 6) {
        felem v = rng.next_below(1009);
        if (std::find(a.begin(), a.end(), v) == a.end()) a.push_back(v);
    }
    while (b.size() < 6) {
        felem v = rng.next_below(1009);
        if (std::find(a.begin(), a.end(), v) == a.end() &&
            std::find(b.begin(), b.end(), v) == b.end())
            b.push_back(v);
    }
    auto m = sucd::cauchy(a, b, f);
    for (unsigned rs = 1; rs < 64; ++rs) {
        std::vector<size_t> ri;
        for (unsigned i = 0; i < 6; ++i)
            if (rs >> i & 1) ri.push_back(i);
        for (unsigned cs = 1; cs < 64; ++cs) {
            std::vector<size_t> ci;
            for (unsigned j = 0; j < 6; ++j)
                if (cs >> j & 1) ci.push_back(j);
            if (ri.size() != ci.size()) continue;
            std::vector<std::vector<felem>> sub(ri.size(), std::vector<felem>(ci.size()));
            for (size_t i = 0; i < ri.size(); ++i)
                for (size_t j = 0; j < ci.size(); ++j) sub[i][j] = m[ri[i]][ci[j]];
            REQUIRE(oracle::rank_mod_p(sub, 1009) == ri.size());
        }
    }
}
