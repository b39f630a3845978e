#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sucd/field.hpp"

namespace sucd {

// Thrown by cauchy() when the parameter lists are not pairwise distinct.
struct DegenerateParameters : std::invalid_argument {
    DegenerateParameters() : std::invalid_argument("cauchy parameters not distinct") {}
};

// Row-major sparse matrix; each row holds (column, value) pairs with strictly
// increasing columns and no explicit zeros. Immutable once built.
class SparseMatrix {
  public:
    using Entry = std::pair<uint64_t, felem>;

    SparseMatrix(size_t nrows, size_t ncols, const FieldSpec& spec)
        : nrows_(nrows), ncols_(ncols), spec_(spec), rows_(nrows) {}

    size_t nrows() const { return nrows_; }
    size_t ncols() const { return ncols_; }
    const FieldSpec& spec() const { return spec_; }
    const std::vector<Entry>& row(size_t i) const { return rows_[i]; }

    // Sorts, merges duplicate columns by field addition, drops zeros.
    void set_row(size_t i, std::vector<Entry> entries);

    felem dot(size_t i, const std::vector<felem>& x) const;

  private:
    size_t nrows_, ncols_;
    FieldSpec spec_;
    std::vector<std::vector<Entry>> rows_;
};

// Sorted, distinct row indices selecting a submatrix.
using RowSet = std::vector<uint64_t>;

// Rank of the selected submatrix. Deterministic: pivot on the first nonzero
// column, rows processed in index order.
size_t rank(const SparseMatrix& m, const RowSet& rows);

// Finds c (length ncols) with row_i . c = targets[k] for the k-th selected
// row; free variables are set to zero. Empty optional when the selected rows
// are dependent in a way inconsistent with the targets. rank_out, when
// given, receives the pivot count at return; it equals the submatrix rank on
// success and is strictly below |rows| whenever the solve fails.
std::optional<std::vector<felem>> solve_rows(const SparseMatrix& m, const RowSet& rows,
                                             const std::vector<felem>& targets,
                                             size_t* rank_out = nullptr);

// Dense Cauchy matrix: entry (i,j) = inv(a_i - b_j).
std::vector<std::vector<felem>> cauchy(const std::vector<felem>& a,
                                       const std::vector<felem>& b, const FieldSpec& spec);

}  // namespace sucd
