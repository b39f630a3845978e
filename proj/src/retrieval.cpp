#include "sucd/retrieval.hpp"

#include <cmath>

#include "sucd/io.hpp"
#include "sucd/linalg.hpp"
#include "sucd/rng.hpp"

namespace sucd {

namespace {

uint64_t ceil_log2(uint64_t n) {
    uint64_t b = 0;
    while ((uint64_t{1} << b) < n) ++b;
    return b;
}

// j-th sampled (position, value) of row i, 1-based j.
std::pair<uint64_t, felem> sample_one(const RetrievalParams& p, uint64_t i, uint64_t j,
                                      uint64_t seed) {
    uint64_t pos = draw_below(mix64(seed, 2 * i, j), p.n);
    felem val;
    if (p.spec.kind() == FieldSpec::Kind::Prime)
        val = draw_below(mix64(seed, 2 * i + 1, j), p.spec.p());
    else
        val = p.spec.reduce(mix64(seed, 2 * i + 1, j));
    return {pos, val};
}

uint64_t derived_seed(uint64_t master, uint64_t trial) { return mix64(master, 0xb005u, trial); }

}  // namespace

RetrievalParams RetrievalParams::make(uint64_t N, uint64_t n, uint64_t m, const FieldSpec& spec) {
    if (n == 0 || N < n) throw std::invalid_argument("need 0 < n <= N");
    RetrievalParams p;
    p.N = N;
    p.n = n;
    p.m = m;
    p.t_s = 10 * std::max<uint64_t>(1, ceil_log2(n));
    p.g = N ? m / N : 0;
    p.spec = spec;
    if (m < N * p.t_s) throw std::invalid_argument("m below N * t_s");
    if (!spec.order_at_least(2 * n)) throw std::invalid_argument("field order below 2n");
    return p;
}

std::vector<std::pair<uint64_t, felem>> sample_row_B(const RetrievalParams& p, uint64_t i,
                                                     uint64_t seed) {
    std::vector<std::pair<uint64_t, felem>> out;
    out.reserve(p.t_s);
    for (uint64_t j = 1; j <= p.t_s; ++j) out.push_back(sample_one(p, i, j, seed));
    return out;
}

std::vector<std::pair<uint64_t, felem>> row_nonzeros_A(const RetrievalParams& p, uint64_t row,
                                                       uint64_t seed) {
    const FieldSpec& f = p.spec;
    const felem minus_one = f.neg(1);
    if (row < p.N) {
        // Retrieval row: -1 at the first augmented column of its group.
        return {{p.n + row * p.g, minus_one}};
    }
    const uint64_t k = row - p.N;  // augmented index in [m]
    if (k >= p.N * p.g) return {{p.n + k, 1}};  // leftover cells, identity rows
    const uint64_t i = k / p.g;
    const uint64_t j = k % p.g + 1;  // 1-based offset within the group
    const uint64_t e_j = p.n + k;
    if (j > p.t_s) return {{e_j, 1}};
    auto [pos, val] = sample_one(p, i, j, seed);
    std::vector<std::pair<uint64_t, felem>> out;
    if (val != 0) out.emplace_back(pos, val);
    out.emplace_back(e_j, 1);
    if (j < p.t_s) out.emplace_back(e_j + 1, minus_one);
    return out;
}

std::optional<AugmentedRetrieval> AugmentedRetrieval::build(
    const RetrievalParams& p, const std::vector<std::pair<uint64_t, felem>>& pairs,
    const std::vector<felem>& aug, uint64_t seed) {
    const FieldSpec& f = p.spec;
    if (pairs.size() != p.n || aug.size() != p.m) throw std::invalid_argument("shape mismatch");

    // Reduced system over the first n cells: B_S . c = y with
    // y_i = value_i + sum of the group's first t_s augmented targets.
    SparseMatrix bs(p.n, p.n, f);
    std::vector<felem> y(p.n);
    for (size_t r = 0; r < pairs.size(); ++r) {
        const auto [key, value] = pairs[r];
        if (key >= p.N) throw std::invalid_argument("key outside universe");
        std::vector<SparseMatrix::Entry> entries;
        entries.reserve(p.t_s);
        for (uint64_t j = 1; j <= p.t_s; ++j) entries.push_back(sample_one(p, key, j, seed));
        bs.set_row(r, std::move(entries));
        felem t = value;
        for (uint64_t j = 1; j <= p.t_s; ++j) t = f.add(t, aug[key * p.g + j - 1]);
        y[r] = t;
    }
    RowSet rows(p.n);
    for (size_t r = 0; r < rows.size(); ++r) rows[r] = r;
    auto sol = solve_rows(bs, rows, y);
    if (!sol) return std::nullopt;

    std::vector<felem> cells(p.n + p.m, 0);
    for (uint64_t c = 0; c < p.n; ++c) cells[c] = (*sol)[c];
    // Downward recurrence fills each group's augmented cells.
    for (uint64_t i = 0; i < p.N; ++i) {
        const uint64_t base = p.n + i * p.g;
        for (uint64_t j = p.g; j >= 1; --j) {
            const felem a = aug[i * p.g + j - 1];
            if (j > p.t_s) {
                cells[base + j - 1] = a;
                continue;
            }
            auto [pos, val] = sample_one(p, i, j, seed);
            felem v = f.sub(a, f.mul(val, cells[pos]));
            if (j < p.t_s) v = f.add(v, cells[base + j]);
            cells[base + j - 1] = v;
        }
    }
    for (uint64_t k = p.N * p.g; k < p.m; ++k) cells[p.n + k] = aug[k];
    return AugmentedRetrieval(p, seed, 0, std::move(cells));
}

AugmentedRetrieval AugmentedRetrieval::build_boosted(
    const RetrievalParams& p, const std::vector<std::pair<uint64_t, felem>>& pairs,
    const std::vector<felem>& aug, uint64_t master_seed, uint64_t trials) {
    if (trials == 0)
        trials = static_cast<uint64_t>(std::ceil(10.0 * std::log2(static_cast<double>(std::max<uint64_t>(2, p.N)))));
    for (uint64_t t = 0; t < trials; ++t) {
        auto r = build(p, pairs, aug, derived_seed(master_seed, t));
        if (r) {
            r->boost_index_ = t;
            return std::move(*r);
        }
    }
    throw AllTrialsFailed{};
}

felem AugmentedRetrieval::query(uint64_t x, unsigned* probes) const {
    auto row = row_nonzeros_A(params_, x, seed_);
    const FieldSpec& f = params_.spec;
    felem acc = 0;
    for (const auto& [c, v] : row) acc = f.add(acc, f.mul(v, cells_[c]));
    if (probes) *probes = static_cast<unsigned>(row.size());
    return acc;
}

felem AugmentedRetrieval::query_aug(uint64_t j, unsigned* probes) const {
    return query(params_.N + j, probes);
}

void AugmentedRetrieval::serialize(std::ostream& out) const {
    write_u64(out, params_.N);
    write_u64(out, params_.n);
    write_u64(out, params_.m);
    write_field_spec(out, params_.spec);
    write_u64(out, seed_);
    write_u64(out, boost_index_);
    const unsigned nb = cell_bytes(params_.spec);
    for (felem c : cells_) write_cell(out, c, nb);
}

AugmentedRetrieval AugmentedRetrieval::deserialize(std::istream& in) {
    uint64_t N = read_u64(in), n = read_u64(in), m = read_u64(in);
    FieldSpec spec = read_field_spec(in);
    auto p = RetrievalParams::make(N, n, m, spec);
    uint64_t seed = read_u64(in);
    uint64_t boost = read_u64(in);
    const unsigned nb = cell_bytes(spec);
    std::vector<felem> cells(n + m);
    for (auto& c : cells) c = read_cell(in, nb);
    return AugmentedRetrieval(std::move(p), seed, boost, std::move(cells));
}

}  // namespace sucd
