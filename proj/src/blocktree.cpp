#include "sucd/blocktree.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <tuple>

#include "sucd/io.hpp"
#include "sucd/linalg.hpp"
#include "sucd/retrieval.hpp"  // AllTrialsFailed
#include "sucd/rng.hpp"

namespace sucd {

namespace {

uint64_t ceil_log2(uint64_t n) {
    uint64_t b = 0;
    while ((uint64_t{1} << b) < n) ++b;
    return b;
}

uint64_t mulmod_u64(uint64_t a, uint64_t b, uint64_t m) {
    using u128 = unsigned __int128;
    return static_cast<uint64_t>(u128(a) * b % m);
}

// n^6 with saturation at 2^63.
uint64_t pow6_sat(uint64_t n) {
    uint64_t r = 1;
    for (int i = 0; i < 6; ++i) {
        if (r > (uint64_t{1} << 63) / std::max<uint64_t>(n, 1)) return uint64_t{1} << 63;
        r *= n;
    }
    return r;
}

}  // namespace

BlockTreeParams BlockTreeParams::make(uint64_t N, uint64_t n, uint64_t B, const FieldSpec& spec,
                                      double c, uint64_t m, uint64_t k) {
    if (n == 0 || B == 0 || n % B != 0) throw std::invalid_argument("n must be a multiple of B");
    const uint64_t leaves = n / B;
    if (leaves & (leaves - 1)) throw std::invalid_argument("n/B must be a power of two");
    if (N < n) throw std::invalid_argument("N below n");
    if (spec.kind() != FieldSpec::Kind::Prime) throw std::invalid_argument("prime field required");

    BlockTreeParams p;
    p.N = N;
    p.n = n;
    p.B = B;
    p.c = c;
    p.h = ceil_log2(leaves) + 1;
    const uint64_t lg = std::max<uint64_t>(1, ceil_log2(n));
    p.q = 8 * n * lg;
    p.k = k ? k : lg * lg;
    p.spec = spec;

    p.delta.assign(p.h + 1, 0);
    for (uint64_t i = 1; i < p.h; ++i) p.delta[i] = level_slack(i, B, lg, c);
    p.delta[p.h] = 0;

    p.n_f = 0;
    for (uint64_t i = 2; i <= p.h; ++i) p.n_f += p.blocks_at(i) * p.fillers_per_block(i);

    if (!spec.order_at_least(std::max(pow6_sat(n), N + n * n)))
        throw std::invalid_argument("field order below max(n^6, N+n^2)");
    if (!spec.order_at_least(N + n + 2 * p.n_f + 3))
        throw std::invalid_argument("field too small for distinct Cauchy parameters");

    for (uint64_t i = 2; i <= p.h; ++i)
        if (p.blocks_at(i) * p.fillers_per_block(i) * p.stride(i) > p.q)
            throw InsufficientAugmented{};

    p.m = m ? m : p.min_m();
    if (p.m < p.min_m()) throw InsufficientAugmented{};
    return p;
}

uint64_t BlockTreeParams::filler_base(uint64_t level) const {
    uint64_t base = 0;
    for (uint64_t i = 2; i < level; ++i) base += blocks_at(i) * fillers_per_block(i);
    return base;
}

uint64_t BlockTreeParams::chain_region(uint64_t level) const {
    if (level == 1) return 0;
    return N * stride(1) + (level - 2) * q;
}

uint64_t BlockTreeParams::filler_target_base() const {
    return h == 1 ? N * stride(1) : N * stride(1) + (h - 1) * q;
}

BlockTreeLayout::BlockTreeLayout(BlockTreeParams params) : p_(std::move(params)) {
    level_off_.resize(p_.h);
    size_t total_blocks = 0;
    for (uint64_t i = 1; i <= p_.h; ++i) {
        level_off_[i - 1] = total_blocks;
        total_blocks += p_.blocks_at(i);
    }
    cols_.resize(total_blocks);
    supp_.resize(total_blocks);

    uint64_t next_col = 0;
    auto visit = [&](auto&& self, uint64_t level, uint64_t b) -> void {
        if (level == 1) {
            cols_[idx(1, b)] = {next_col, next_col + p_.supp_count(1)};
            supp_[idx(1, b)] = next_col;
            next_col += p_.supp_count(1);
            return;
        }
        self(self, level - 1, 2 * b);
        self(self, level - 1, 2 * b + 1);
        const uint64_t begin = cols_[idx(level - 1, 2 * b)].first;
        supp_[idx(level, b)] = next_col;
        next_col += p_.supp_count(level);
        cols_[idx(level, b)] = {begin, next_col};
    };
    visit(visit, p_.h, 0);
    if (next_col != total_cols()) throw std::logic_error("column layout mismatch");
}

uint64_t BlockTreeLayout::nonzero_column(uint64_t level, uint64_t b, uint64_t t) const {
    if (level == 1) return col_begin(1, b) + t;
    const uint64_t sc = p_.supp_count(level - 1);
    if (t < sc) return supp_begin(level - 1, 2 * b) + t;
    if (t < 2 * sc) return supp_begin(level - 1, 2 * b + 1) + (t - sc);
    return supp_begin(level, b) + (t - 2 * sc);
}

std::pair<uint64_t, uint64_t> BlockTreeLayout::filler_block(uint64_t fidx) const {
    for (uint64_t i = 2; i <= p_.h; ++i) {
        const uint64_t span = p_.blocks_at(i) * p_.fillers_per_block(i);
        const uint64_t base = p_.filler_base(i);
        if (fidx < base + span) return {i, (fidx - base) / p_.fillers_per_block(i)};
    }
    throw std::out_of_range("filler index");
}

uint64_t BlockTreeLayout::count_nonzeros() const {
    uint64_t total = p_.N * p_.stride(1);
    for (uint64_t i = 2; i <= p_.h; ++i)
        total += p_.blocks_at(i) * p_.fillers_per_block(i) * p_.stride(i);
    return total;
}

KWiseHash KWiseHash::sample(uint64_t p, uint64_t range, uint64_t k, uint64_t seed) {
    KWiseHash h;
    h.p = p;
    h.range = range;
    h.coef.resize(k);
    Rng rng(seed, 0x4a57);
    for (auto& c : h.coef) c = rng.next_below(p);
    return h;
}

uint64_t KWiseHash::operator()(uint64_t x) const {
    uint64_t acc = 0;
    x %= p;
    for (size_t t = coef.size(); t-- > 0;) acc = (mulmod_u64(acc, x, p) + coef[t]) % p;
    return acc % range;
}

LevelSeeds LevelSeeds::sample(uint64_t p, uint64_t h, uint64_t seed) {
    LevelSeeds s;
    s.a.resize(h + 1, 0);
    Rng rng(seed, 0x5eed);
    for (uint64_t i = 1; i <= h; ++i) s.a[i] = rng.next_below(p - 1) + 1;
    return s;
}

uint64_t level_slack(uint64_t level, uint64_t B, uint64_t lgn, double c) {
    const double v = c * std::sqrt(static_cast<double>((uint64_t{1} << (level - 1)) * B * lgn));
    return static_cast<uint64_t>(std::ceil(v));
}

AugAssignment sparsify_assignment(const BlockTreeParams& p, uint64_t aug_index) {
    if (aug_index >= p.m) throw std::out_of_range("aug index");
    const uint64_t s1_end = p.N * p.stride(1);
    if (aug_index < s1_end)
        return {AugAssignment::Kind::Chain, aug_index / p.stride(1), aug_index % p.stride(1)};
    const uint64_t ft = p.filler_target_base();
    if (aug_index < ft) {
        const uint64_t level = 2 + (aug_index - s1_end) / p.q;
        const uint64_t off = (aug_index - s1_end) % p.q;
        const uint64_t rows = p.blocks_at(level) * p.fillers_per_block(level);
        const uint64_t r = off / p.stride(level);
        if (r >= rows) return {AugAssignment::Kind::Identity, 0, 0};
        return {AugAssignment::Kind::Chain, p.N + p.filler_base(level) + r,
                off % p.stride(level)};
    }
    if (aug_index < ft + p.n_f)
        return {AugAssignment::Kind::FillerTarget, p.N + (aug_index - ft), 0};
    return {AugAssignment::Kind::Identity, 0, 0};
}

namespace {

// (level, block) of a global row.
std::pair<uint64_t, uint64_t> row_block(const BlockTreeLayout& layout, uint64_t v,
                                        const KWiseHash& hash) {
    const auto& p = layout.params();
    if (v < p.N) return {1, hash(v)};
    return layout.filler_block(v - p.N);
}

// Chain head aug index of a global row.
uint64_t chain_head(const BlockTreeParams& p, uint64_t v, uint64_t level) {
    if (v < p.N) return v * p.stride(1);
    const uint64_t r = v - p.N - p.filler_base(level);
    return p.chain_region(level) + r * p.stride(level);
}

}  // namespace

std::vector<std::pair<uint64_t, felem>> row_nonzeros(const BlockTreeLayout& layout, uint64_t v,
                                                     const LevelSeeds& seeds,
                                                     const KWiseHash& hash,
                                                     const PowerTable& ptab) {
    const auto& p = layout.params();
    const FieldSpec& f = p.spec;
    const auto [level, b] = row_block(layout, v, hash);
    const uint64_t d = p.stride(level);
    std::vector<std::pair<uint64_t, felem>> out;
    out.reserve(d);
    for (uint64_t t = 0; t < d; ++t) {
        const uint64_t col = layout.nonzero_column(level, b, t);
        const uint64_t j = col + 1;
        const felem xi_j = ptab.eval(mulmod_u64(seeds.a[level], j, f.p() - 1));
        out.emplace_back(col, f.mul(xi_j, f.inv((v + 1 + j) % f.p())));
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool BlockTreeRetrieval::loads_ok(const BlockTreeLayout& layout, const std::vector<uint64_t>& keys,
                                  const KWiseHash& hash) {
    const auto& p = layout.params();
    std::vector<uint64_t> load(p.blocks_at(1), 0);
    for (uint64_t x : keys) ++load[hash(x)];
    for (uint64_t i = 1; i < p.h; ++i) {
        const uint64_t target = (uint64_t{1} << (i - 1)) * p.B;
        for (uint64_t b = 0; b < p.blocks_at(i); ++b) {
            const uint64_t l = load[b];
            if (l + p.delta[i] < target || l > target + p.delta[i]) return false;
        }
        for (uint64_t b = 0; b < p.blocks_at(i + 1); ++b) load[b] = load[2 * b] + load[2 * b + 1];
        load.resize(p.blocks_at(i + 1));
    }
    return true;
}

BlockTreeRetrieval::BlockTreeRetrieval(std::shared_ptr<const BlockTreeLayout> layout,
                                       LevelSeeds seeds, KWiseHash hash, std::vector<felem> cells)
    : layout_(std::move(layout)),
      seeds_(std::move(seeds)),
      hash_(std::move(hash)),
      cells_(std::move(cells)) {
    const FieldSpec& f = layout_->params().spec;
    ptab_ = std::make_unique<PowerTable>(f, find_primitive_root(f.p()), layout_->params().n);
}

std::tuple<uint64_t, uint64_t, uint64_t> BlockTreeRetrieval::locate_row(uint64_t row) const {
    const auto [level, b] = row_block(*layout_, row, hash_);
    return {level, b, chain_head(layout_->params(), row, level)};
}

uint64_t BlockTreeRetrieval::aug_cell(uint64_t k) const {
    const auto& p = layout_->params();
    const uint64_t ft = p.filler_target_base();
    if (k < ft) return p.n + p.n_f + k;
    if (k >= ft + p.n_f) return p.n + k;
    throw std::logic_error("filler target has no own cell");
}

std::optional<BlockTreeRetrieval> BlockTreeRetrieval::build(
    const std::shared_ptr<const BlockTreeLayout>& layout,
    const std::vector<std::pair<uint64_t, felem>>& pairs, const std::vector<felem>& aug,
    const LevelSeeds& seeds, const KWiseHash& hash, Failure* why) {
    const auto& p = layout->params();
    const FieldSpec& f = p.spec;
    if (pairs.size() != p.n || aug.size() != p.m) throw std::invalid_argument("shape mismatch");
    auto fail = [&](Failure r) {
        if (why) *why = r;
        return std::nullopt;
    };

    std::vector<uint64_t> keys;
    keys.reserve(pairs.size());
    for (const auto& [k, v] : pairs) {
        if (k >= p.N) throw std::invalid_argument("key outside universe");
        keys.push_back(k);
    }
    if (!loads_ok(*layout, keys, hash)) return fail(Failure::OverflowBlock);

    PowerTable ptab(f, find_primitive_root(f.p()), p.n);
    const uint64_t pm1 = f.p() - 1;

    // Reduced system over the n + n_f columns: one equation per valid row
    // (valid retrieval rows plus every filler row), entries x_i^j / (v+j),
    // target = row answer plus the sum of its chain's augmented targets.
    const uint64_t nrows = p.n + p.n_f;
    struct RowPlan {
        uint64_t v, level, b;
        felem answer;
    };
    std::vector<RowPlan> plan;
    plan.reserve(nrows);
    for (const auto& [key, value] : pairs) plan.push_back({key, 1, hash(key), value});
    const uint64_t ft = p.filler_target_base();
    for (uint64_t fidx = 0; fidx < p.n_f; ++fidx) {
        const auto [level, b] = layout->filler_block(fidx);
        plan.push_back({p.N + fidx, level, b, aug[ft + fidx]});
    }

    std::vector<felem> denoms;
    for (const auto& r : plan) {
        const uint64_t d = p.stride(r.level);
        for (uint64_t t = 0; t < d; ++t)
            denoms.push_back((r.v + 1 + layout->nonzero_column(r.level, r.b, t) + 1) % f.p());
    }
    const std::vector<felem> invs = batch_inv(f, denoms);

    SparseMatrix M(nrows, layout->total_cols(), f);
    std::vector<felem> y(nrows);
    size_t pos = 0;
    for (size_t r = 0; r < plan.size(); ++r) {
        const auto& rp = plan[r];
        const uint64_t d = p.stride(rp.level);
        std::vector<SparseMatrix::Entry> row;
        row.reserve(d);
        for (uint64_t t = 0; t < d; ++t, ++pos) {
            const uint64_t col = layout->nonzero_column(rp.level, rp.b, t);
            const felem xi_j = ptab.eval(mulmod_u64(seeds.a[rp.level], col + 1, pm1));
            row.emplace_back(col, f.mul(xi_j, invs[pos]));
        }
        M.set_row(r, std::move(row));
        felem t_sum = rp.answer;
        const uint64_t head = chain_head(p, rp.v, rp.level);
        for (uint64_t t = 0; t < d; ++t) t_sum = f.add(t_sum, aug[head + t]);
        y[r] = t_sum;
    }

    RowSet rows(nrows);
    for (size_t r = 0; r < nrows; ++r) rows[r] = r;
    size_t rk = 0;
    auto sol = solve_rows(M, rows, y, &rk);
    if (!sol || rk < nrows) return fail(Failure::Singular);

    std::vector<felem> cells(p.n + p.m, 0);
    for (uint64_t c = 0; c < layout->total_cols(); ++c) cells[c] = (*sol)[c];
    // Identity defaults for every augmented cell, chains overwrite below.
    for (uint64_t k = 0; k < ft; ++k) cells[p.n + p.n_f + k] = aug[k];
    for (uint64_t k = ft + p.n_f; k < p.m; ++k) cells[p.n + k] = aug[k];

    // Chain fill for every row, valid or not, level by level.
    std::vector<felem> all_denoms;
    all_denoms.reserve(layout->count_nonzeros());
    auto for_each_row = [&](auto&& fn) {
        for (uint64_t v = 0; v < p.N; ++v) fn(v, uint64_t{1}, hash(v));
        for (uint64_t fidx = 0; fidx < p.n_f; ++fidx) {
            const auto [level, b] = layout->filler_block(fidx);
            fn(p.N + fidx, level, b);
        }
    };
    for_each_row([&](uint64_t v, uint64_t level, uint64_t b) {
        const uint64_t d = p.stride(level);
        for (uint64_t t = 0; t < d; ++t)
            all_denoms.push_back((v + 1 + layout->nonzero_column(level, b, t) + 1) % f.p());
    });
    const std::vector<felem> all_invs = batch_inv(f, all_denoms);
    size_t ipos = 0;
    for_each_row([&](uint64_t v, uint64_t level, uint64_t b) {
        const uint64_t d = p.stride(level);
        const uint64_t head = chain_head(p, v, level);
        const size_t base = ipos;
        ipos += d;
        for (uint64_t t = d; t-- > 0;) {
            const uint64_t col = layout->nonzero_column(level, b, t);
            const felem xi_j = ptab.eval(mulmod_u64(seeds.a[level], col + 1, pm1));
            const felem a_vt = f.mul(xi_j, all_invs[base + t]);
            felem val = f.sub(aug[head + t], f.mul(a_vt, cells[col]));
            if (t + 1 < d) val = f.add(val, cells[p.n + p.n_f + head + t + 1]);
            cells[p.n + p.n_f + head + t] = val;
        }
    });

    if (why) *why = Failure::None;
    return BlockTreeRetrieval(layout, seeds, hash, std::move(cells));
}

BlockTreeRetrieval BlockTreeRetrieval::build_retried(
    const std::shared_ptr<const BlockTreeLayout>& layout,
    const std::vector<std::pair<uint64_t, felem>>& pairs, const std::vector<felem>& aug,
    uint64_t master_seed, uint64_t hash_cap, uint64_t seed_cap, RetryStats* stats) {
    const auto& p = layout->params();
    std::vector<uint64_t> keys;
    for (const auto& [k, v] : pairs) keys.push_back(k);

    KWiseHash hash;
    bool found = false;
    uint64_t ha = 0;
    for (; ha < hash_cap; ++ha) {
        hash = KWiseHash::sample(p.spec.p(), p.blocks_at(1), p.k, mix64(master_seed, 0x6a5b, ha));
        if (loads_ok(*layout, keys, hash)) {
            found = true;
            ++ha;
            break;
        }
    }
    if (stats) stats->hash_attempts = ha;
    if (!found) throw AllTrialsFailed{};

    for (uint64_t sa = 0; sa < seed_cap; ++sa) {
        auto seeds = LevelSeeds::sample(p.spec.p(), p.h, mix64(master_seed, 0x5a3d, sa));
        auto r = build(layout, pairs, aug, seeds, hash);
        if (r) {
            if (stats) stats->seed_attempts = sa + 1;
            return std::move(*r);
        }
    }
    if (stats) stats->seed_attempts = seed_cap;
    throw AllTrialsFailed{};
}

felem BlockTreeRetrieval::query(uint64_t x, unsigned* probes) const {
    const auto& p = layout_->params();
    const felem head_cell = cells_[p.n + p.n_f + x * p.stride(1)];
    if (probes) *probes = 1;
    return p.spec.neg(head_cell);
}

felem BlockTreeRetrieval::query_aug(uint64_t k, unsigned* probes) const {
    const auto& p = layout_->params();
    const FieldSpec& f = p.spec;
    const auto asg = sparsify_assignment(p, k);
    switch (asg.kind) {
        case AugAssignment::Kind::Identity:
            if (probes) *probes = 1;
            return cells_[aug_cell(k)];
        case AugAssignment::Kind::FillerTarget: {
            const auto [level, b, head] = locate_row(asg.row);
            (void)b;
            if (probes) *probes = 1;
            return f.neg(cells_[p.n + p.n_f + head]);
        }
        case AugAssignment::Kind::Chain:
            break;
    }
    const auto [level, b, head] = locate_row(asg.row);
    const uint64_t t = asg.ordinal;
    const uint64_t col = layout_->nonzero_column(level, b, t);
    const felem denom = (asg.row + 1 + col + 1) % f.p();
    const felem xi_j = ptab_->eval(mulmod_u64(seeds_.a[level], col + 1, f.p() - 1));
    // The stored chain row is the (v+j)-scaled form; undo the scaling here.
    felem acc = f.mul(f.mul(xi_j, f.inv(denom)), cells_[col]);
    acc = f.add(acc, cells_[p.n + p.n_f + head + t]);
    unsigned used = 2;
    if (t + 1 < p.stride(level)) {
        acc = f.sub(acc, cells_[p.n + p.n_f + head + t + 1]);
        ++used;
    }
    if (probes) *probes = used;
    return acc;
}

void BlockTreeRetrieval::serialize(std::ostream& out) const {
    const auto& p = layout_->params();
    write_u64(out, p.N);
    write_u64(out, p.n);
    write_u64(out, p.m);
    write_u64(out, p.B);
    write_u64(out, p.k);
    uint64_t cbits;
    static_assert(sizeof(double) == sizeof(uint64_t));
    std::memcpy(&cbits, &p.c, 8);
    write_u64(out, cbits);
    write_field_spec(out, p.spec);
    for (uint64_t i = 1; i <= p.h; ++i) write_u64(out, seeds_.a[i]);
    write_u64(out, hash_.range);
    for (uint64_t c : hash_.coef) write_u64(out, c);
    const unsigned nb = cell_bytes(p.spec);
    for (felem c : cells_) write_cell(out, c, nb);
}

BlockTreeRetrieval BlockTreeRetrieval::deserialize(std::istream& in) {
    const uint64_t N = read_u64(in), n = read_u64(in), m = read_u64(in), B = read_u64(in),
                   k = read_u64(in);
    const uint64_t cbits = read_u64(in);
    double c;
    std::memcpy(&c, &cbits, 8);
    FieldSpec spec = read_field_spec(in);
    auto params = BlockTreeParams::make(N, n, B, spec, c, m, k);
    auto layout = std::make_shared<const BlockTreeLayout>(params);
    LevelSeeds seeds;
    seeds.a.resize(params.h + 1, 0);
    for (uint64_t i = 1; i <= params.h; ++i) seeds.a[i] = read_u64(in);
    KWiseHash hash;
    hash.p = spec.p();
    hash.range = read_u64(in);
    hash.coef.resize(params.k);
    for (auto& co : hash.coef) co = read_u64(in);
    const unsigned nb = cell_bytes(spec);
    std::vector<felem> cells(n + m);
    for (auto& cl : cells) cl = read_cell(in, nb);
    return BlockTreeRetrieval(std::move(layout), std::move(seeds), std::move(hash),
                              std::move(cells));
}

}  // namespace sucd
