#pragma once

#include <cstdint>
#include <vector>

#include "olar/linalg.hpp"

namespace olar {

/// Sparse sign JL matrix whose columns are generated on demand from
/// hash(seed, column). Column c always comes out the same, so growing the
/// matrix by a column never touches earlier ones.
class SparseJL {
 public:
  /// Throws InvalidShape unless m >= 1 and 1 <= s <= m.
  SparseJL(Index m, Index s, std::uint64_t seed);

  /// m = 64 ln(n/delta), s = 8 ln(n/delta) clamped to m.
  static SparseJL constant_factor(std::size_t n, double delta, std::uint64_t seed);

  Index rows() const { return m_; }
  Index nnz_per_column() const { return s_; }
  Index cols() const { return cols_; }
  std::uint64_t seed() const { return seed_; }

  struct Column {
    std::vector<Index> positions;  // distinct, ascending
    std::vector<double> values;    // +-1/sqrt(s)
  };
  /// Pure: does not depend on how many columns have been appended.
  Column column(Index c) const;

  /// Registers one more column and returns it.
  Column append_column();

  /// First `cols` columns as a dense m x cols matrix.
  Matrix dense(Index cols) const;

  /// J x for a vector of length cols.
  Vector apply(const VectorRef& x) const;

 private:
  Index m_;
  Index s_;
  std::uint64_t seed_;
  Index cols_ = 0;
};

/// F <- F + J_{:,k} row^T where the sketch has grown from k to `new_count`
/// = k + 1 rows. Throws Inconsistency unless J.cols() == new_count - 1.
void jl_apply_append(Matrix& f, SparseJL& j, Index new_count, const VectorRef& row);

/// ||H v||_2^2
double jl_norm_estimate(const MatrixRef& h, const VectorRef& v);

}  // namespace olar
