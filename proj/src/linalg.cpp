#include "sucd/linalg.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace sucd {

void SparseMatrix::set_row(size_t i, std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const Entry& x, const Entry& y) { return x.first < y.first; });
    std::vector<Entry> out;
    out.reserve(entries.size());
    for (const auto& e : entries) {
        if (e.first >= ncols_) throw std::out_of_range("column index");
        if (!out.empty() && out.back().first == e.first) {
            out.back().second = spec_.add(out.back().second, e.second);
            if (out.back().second == 0) out.pop_back();
        } else if (e.second != 0) {
            out.push_back(e);
        }
    }
    rows_[i] = std::move(out);
}

felem SparseMatrix::dot(size_t i, const std::vector<felem>& x) const {
    felem acc = 0;
    for (const auto& [c, v] : rows_[i]) acc = spec_.add(acc, spec_.mul(v, x[c]));
    return acc;
}

namespace {

using Row = std::vector<SparseMatrix::Entry>;

// r -= factor * p, merging sorted entry lists; target follows along.
void axpy(const FieldSpec& f, Row& r, felem& rt, const Row& p, felem pt, felem factor) {
    Row out;
    out.reserve(r.size() + p.size());
    size_t i = 0, j = 0;
    while (i < r.size() || j < p.size()) {
        if (j == p.size() || (i < r.size() && r[i].first < p[j].first)) {
            out.push_back(r[i++]);
        } else if (i == r.size() || p[j].first < r[i].first) {
            out.emplace_back(p[j].first, f.neg(f.mul(factor, p[j].second)));
            ++j;
        } else {
            felem v = f.sub(r[i].second, f.mul(factor, p[j].second));
            if (v != 0) out.emplace_back(r[i].first, v);
            ++i, ++j;
        }
    }
    r = std::move(out);
    rt = f.sub(rt, f.mul(factor, pt));
}

struct Eliminator {
    const FieldSpec& f;
    std::map<uint64_t, std::pair<Row, felem>> pivots;  // leading column -> (unit row, target)
    bool inconsistent = false;

    explicit Eliminator(const FieldSpec& spec) : f(spec) {}

    void feed(Row r, felem t) {
        while (!r.empty()) {
            auto it = pivots.find(r.front().first);
            if (it == pivots.end()) break;
            axpy(f, r, t, it->second.first, it->second.second, r.front().second);
        }
        if (r.empty()) {
            if (t != 0) inconsistent = true;
            return;
        }
        felem inv_lead = f.inv(r.front().second);
        for (auto& e : r) e.second = f.mul(e.second, inv_lead);
        t = f.mul(t, inv_lead);
        const uint64_t lead_col = r.front().first;
        pivots.emplace(lead_col, std::make_pair(std::move(r), t));
    }
};

// Same pivot rule on flat arrays; used when the selected submatrix is small
// enough that O(rows * ncols) storage is cheap.
struct DenseEliminator {
    const FieldSpec& f;
    size_t ncols;
    std::map<uint64_t, std::pair<std::vector<felem>, felem>> pivots;
    bool inconsistent = false;

    DenseEliminator(const FieldSpec& spec, size_t cols) : f(spec), ncols(cols) {}

    void feed(const Row& sparse, felem t) {
        std::vector<felem> r(ncols, 0);
        for (const auto& [c, v] : sparse) r[c] = v;
        size_t lead = 0;
        while (true) {
            while (lead < ncols && r[lead] == 0) ++lead;
            if (lead == ncols) {
                if (t != 0) inconsistent = true;
                return;
            }
            auto it = pivots.find(lead);
            if (it == pivots.end()) break;
            const felem factor = r[lead];
            const auto& [p, pt] = it->second;
            for (size_t j = lead; j < ncols; ++j)
                if (p[j] != 0) r[j] = f.sub(r[j], f.mul(factor, p[j]));
            t = f.sub(t, f.mul(factor, pt));
        }
        const felem inv_lead = f.inv(r[lead]);
        for (size_t j = lead; j < ncols; ++j) r[j] = f.mul(r[j], inv_lead);
        t = f.mul(t, inv_lead);
        pivots.emplace(lead, std::make_pair(std::move(r), t));
    }
};

constexpr size_t kDenseRowLimit = 2048;
constexpr size_t kDenseColLimit = 8192;

bool use_dense(const RowSet& rows, const SparseMatrix& m) {
    return rows.size() <= kDenseRowLimit && m.ncols() <= kDenseColLimit;
}

}  // namespace

size_t rank(const SparseMatrix& m, const RowSet& rows) {
    if (use_dense(rows, m)) {
        DenseEliminator e(m.spec(), m.ncols());
        for (uint64_t i : rows) e.feed(m.row(i), 0);
        return e.pivots.size();
    }
    Eliminator e(m.spec());
    for (uint64_t i : rows) e.feed(m.row(i), 0);
    return e.pivots.size();
}

std::optional<std::vector<felem>> solve_rows(const SparseMatrix& m, const RowSet& rows,
                                             const std::vector<felem>& targets,
                                             size_t* rank_out) {
    if (rows.size() > m.ncols() || targets.size() != rows.size())
        throw std::invalid_argument("solve_rows shape");
    const FieldSpec& f = m.spec();
    std::vector<felem> c(m.ncols(), 0);
    // Back-substitute in decreasing leading-column order: every non-leading
    // entry refers either to a later pivot (already solved) or a free
    // variable (zero).
    if (use_dense(rows, m)) {
        DenseEliminator e(f, m.ncols());
        for (size_t k = 0; k < rows.size(); ++k) {
            e.feed(m.row(rows[k]), targets[k]);
            if (e.inconsistent) {
                if (rank_out) *rank_out = e.pivots.size();
                return std::nullopt;
            }
        }
        if (rank_out) *rank_out = e.pivots.size();
        for (auto it = e.pivots.rbegin(); it != e.pivots.rend(); ++it) {
            const auto& [row, t] = it->second;
            felem v = t;
            for (size_t j = it->first + 1; j < m.ncols(); ++j)
                if (row[j] != 0) v = f.sub(v, f.mul(row[j], c[j]));
            c[it->first] = v;
        }
        return c;
    }
    Eliminator e(f);
    for (size_t k = 0; k < rows.size(); ++k) {
        e.feed(m.row(rows[k]), targets[k]);
        if (e.inconsistent) {
            if (rank_out) *rank_out = e.pivots.size();
            return std::nullopt;
        }
    }
    if (rank_out) *rank_out = e.pivots.size();
    for (auto it = e.pivots.rbegin(); it != e.pivots.rend(); ++it) {
        const auto& [row, t] = it->second;
        felem v = t;
        for (size_t j = 1; j < row.size(); ++j)
            v = f.sub(v, f.mul(row[j].second, c[row[j].first]));
        c[it->first] = v;
    }
    return c;
}

std::vector<std::vector<felem>> cauchy(const std::vector<felem>& a,
                                       const std::vector<felem>& b, const FieldSpec& spec) {
    std::set<felem> seen(a.begin(), a.end());
    if (seen.size() != a.size()) throw DegenerateParameters{};
    for (felem x : b)
        if (!seen.insert(x).second) throw DegenerateParameters{};
    std::vector<std::vector<felem>> m(a.size(), std::vector<felem>(b.size()));
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) m[i][j] = spec.inv(spec.sub(a[i], b[j]));
    return m;
}

}  // namespace sucd
