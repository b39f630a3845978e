#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "sucd/dictionary.hpp"
#include "sucd/io.hpp"
#include "sucd/rng.hpp"

using sucd::DictParams;
using sucd::Dictionary;
using sucd::PermutationFamily;

namespace {

// n distinct keys below U with values below sigma.
std::pair<std::vector<uint64_t>, std::vector<uint64_t>> random_instance(sucd::Rng& rng, uint64_t U,
                                                                        uint64_t n,
                                                                        uint64_t sigma) {
    std::set<uint64_t> ks;
    while (ks.size() < n) ks.insert(rng.next_below(U));
    std::vector<uint64_t> keys(ks.begin(), ks.end());
    std::vector<uint64_t> values;
    for (uint64_t i = 0; i < n; ++i) values.push_back(rng.next_below(sigma));
    return {keys, values};
}

}  // namespace

TEST_CASE("permutation family is a bijection") {
    for (uint64_t U : {2ull, 8ull, 100ull, 1000ull}) {
        PermutationFamily perm(U, 77);
        std::set<uint64_t> image;
        for (uint64_t x = 0; x < U; ++x) {
            const uint64_t y = perm.forward(x);
            CHECK(y < U);
            image.insert(y);
            CHECK(perm.inverse(y) == x);
        }
        CHECK(image.size() == U);
    }
    // different seeds give different maps
    PermutationFamily a(1000, 1), b(1000, 2);
    bool differ = false;
    for (uint64_t x = 0; x < 1000 && !differ; ++x) differ = a.forward(x) != b.forward(x);
    CHECK(differ);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(DictParams::make(8, 8, 1, 2), sucd::ParamViolation);   // U < 2n
    CHECK_THROWS_AS(DictParams::make(64, 16, 1, 5), sucd::ParamViolation); // B does not divide n
    CHECK_THROWS_AS(DictParams::make(70, 16, 1, 4), sucd::ParamViolation); // L does not divide U
    auto p = DictParams::make(64, 16, 4, 4);
    CHECK(p.L == 4);
    CHECK(p.V == 16);
    CHECK(p.load_slack() == 2);
    CHECK(DictParams::make(1u << 16, 1u << 12, 16, 64).load_slack() == 16);

    std::vector<uint64_t> keys = {3, 6}, values = {0, 0};
    auto tiny = DictParams::make(8, 2, 1, 2);
    CHECK_THROWS_AS(Dictionary::build({3, 3}, values, tiny, 1), sucd::ParamViolation);
    CHECK_THROWS_AS(Dictionary::build({3, 9}, values, tiny, 1), sucd::ParamViolation);
    CHECK_THROWS_AS(Dictionary::build(keys, {0, 1}, tiny, 1), sucd::ParamViolation);
    CHECK_THROWS_AS(Dictionary::build(keys, {0}, tiny, 1), sucd::ParamViolation);
}

TEST_CASE("trivial dictionary") {
    // below n = 8 the constant serialization overhead exceeds the
    // 50 ceil(log2 n)^3 acceptance budget, so this is the smallest
    // workable membership instance
    auto params = DictParams::make(32, 8, 1, 2);
    const std::set<uint64_t> members = {1, 3, 6, 9, 12, 20, 25, 31};
    std::vector<uint64_t> keys(members.begin(), members.end());
    auto d = Dictionary::build(keys, std::vector<uint64_t>(8, 0), params, 5);
    for (uint64_t x = 0; x < 32; ++x) {
        unsigned probes = 0;
        auto r = d.query(x, &probes);
        CHECK(probes <= 40);
        if (members.count(x)) {
            REQUIRE(r.has_value());
            CHECK(*r == 0);
        } else {
            CHECK(!r.has_value());
        }
    }
    CHECK_THROWS_AS(d.query(32), sucd::IndexOutOfRange);
}

TEST_CASE("exhaustive correctness over a small universe") {
    auto params = DictParams::make(64, 16, 4, 4);
    sucd::Rng rng(12, 0);
    auto [keys, values] = random_instance(rng, 64, 16, 4);
    auto d = Dictionary::build(keys, values, params, 31);
    CHECK(d.attempt() < params.retries);
    unsigned max_probes = 0;
    for (uint64_t x = 0; x < 64; ++x) {
        unsigned probes = 0;
        auto r = d.query(x, &probes);
        max_probes = std::max(max_probes, probes);
        auto it = std::find(keys.begin(), keys.end(), x);
        if (it != keys.end()) {
            REQUIRE(r.has_value());
            CHECK(*r == values[size_t(it - keys.begin())]);
        } else {
            CHECK(!r.has_value());
        }
    }
    CHECK(max_probes <= 40);
}

TEST_CASE("determinism and serialization") {
    auto params = DictParams::make(64, 16, 4, 4);
    sucd::Rng rng(13, 0);
    auto [keys, values] = random_instance(rng, 64, 16, 4);
    auto d1 = Dictionary::build(keys, values, params, 9);
    auto d2 = Dictionary::build(keys, values, params, 9);
    std::ostringstream o1, o2;
    d1.serialize(o1);
    d2.serialize(o2);
    CHECK(o1.str() == o2.str());

    std::istringstream in(o1.str());
    auto back = Dictionary::deserialize(in);
    CHECK(back.attempt() == d1.attempt());
    for (uint64_t x = 0; x < 64; ++x) CHECK(back.query(x) == d1.query(x));

    auto r1 = d1.space_report();
    auto r2 = back.space_report();
    CHECK(r1.main_bits == r2.main_bits);
    CHECK(r1.total_bits == o1.str().size() * 8);
}

TEST_CASE("space report") {
    CHECK(sucd::opt_bits(16, 8, 1) == doctest::Approx(std::log2(12870.0)).epsilon(1e-9));
    CHECK(sucd::opt_bits(8, 2, 4) == doctest::Approx(std::log2(28.0) + 4.0).epsilon(1e-9));

    auto params = DictParams::make(64, 16, 4, 4);
    sucd::Rng rng(14, 0);
    auto [keys, values] = random_instance(rng, 64, 16, 4);
    auto d = Dictionary::build(keys, values, params, 2);
    auto rep = d.space_report();
    CHECK(rep.opt_bits > 0);
    CHECK(rep.main_bits + rep.table_bits + rep.seed_bits == rep.total_bits);
    CHECK(rep.main_redundancy() >= 0);
    CHECK(rep.main_redundancy() <= params.space_budget_bits());
}

TEST_CASE("load helpers and entropy") {
    auto params = DictParams::make(64, 16, 1, 4);
    sucd::Rng rng(15, 0);
    auto [keys, values] = random_instance(rng, 64, 16, 1);
    auto loads = sucd::bucket_loads(keys, params, 123);
    CHECK(loads.size() == 4);
    uint64_t sum = 0;
    for (uint64_t s : loads) sum += s;
    CHECK(sum == 16);
    CHECK(sucd::loads_within({2, 6, 4, 4}, params));
    CHECK(!sucd::loads_within({1, 7, 4, 4}, params));

    const double mean = sucd::entropy_check(keys, params, 99, 20);
    CHECK(mean > 0);
    CHECK(mean <= sucd::opt_bits(64, 16, 1) + 10.0 * std::log2(16.0));
}

TEST_CASE("retries exhausted") {
    auto params = DictParams::make(64, 16, 1, 4, 1);
    sucd::Rng rng(16, 0);
    auto [keys, values] = random_instance(rng, 64, 16, 1);
    bool found = false;
    for (uint64_t master = 0; master < 2000 && !found; ++master) {
        auto loads = sucd::bucket_loads(keys, params, sucd::mix64(master, 0xd1c7, 0));
        if (!sucd::loads_within(loads, params)) {
            CHECK_THROWS_AS(Dictionary::build(keys, values, params, master),
                            sucd::RetriesExhausted);
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("key and value files") {
    std::vector<uint64_t> items = {5, 1, 99, 1u << 20};
    std::ostringstream os;
    sucd::write_u64_file(os, sucd::kKeysMagic, items);
    std::istringstream is(os.str());
    CHECK(sucd::read_u64_file(is, sucd::kKeysMagic) == items);
    std::istringstream wrong(os.str());
    CHECK_THROWS_AS(sucd::read_u64_file(wrong, sucd::kValsMagic), sucd::BadFormat);
}
