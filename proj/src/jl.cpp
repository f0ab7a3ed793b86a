#include "olar/jl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "olar/sampling.hpp"

namespace olar {

SparseJL::SparseJL(Index m, Index s, std::uint64_t seed) : m_(m), s_(s), seed_(seed) {
  if (m < 1 || s < 1 || s > m) fail(ErrorCode::InvalidShape, "JL needs m >= 1 and 1 <= s <= m");
}

SparseJL SparseJL::constant_factor(std::size_t n, double delta, std::uint64_t seed) {
  const double l = std::log(static_cast<double>(std::max<std::size_t>(n, 2)) / delta);
  const Index m = std::max<Index>(1, static_cast<Index>(std::ceil(64.0 * l)));
  const Index s = std::clamp<Index>(static_cast<Index>(std::ceil(8.0 * l)), 1, m);
  return SparseJL(m, s, seed);
}

SparseJL::Column SparseJL::column(Index c) const {
  const CounterRng rng(seed_);
  const auto stream = stream_id(StreamId::Jl);
  Column col;
  col.positions.reserve(static_cast<std::size_t>(s_));
  // rejection draws for s distinct rows; the k-th draw of column c sits at
  // counter position (c << 20) + k
  std::uint64_t k = 0;
  const std::uint64_t base = static_cast<std::uint64_t>(c) << 20;
  if (s_ == m_) {
    for (Index i = 0; i < m_; ++i) col.positions.push_back(i);
  } else {
    while (static_cast<Index>(col.positions.size()) < s_) {
      const Index pos = static_cast<Index>(rng.bits(stream, base + k++) % static_cast<std::uint64_t>(m_));
      if (std::find(col.positions.begin(), col.positions.end(), pos) == col.positions.end())
        col.positions.push_back(pos);
    }
    std::sort(col.positions.begin(), col.positions.end());
  }
  const double v = 1.0 / std::sqrt(static_cast<double>(s_));
  const std::uint64_t sign_base = base + (std::uint64_t{1} << 19);
  for (std::size_t i = 0; i < col.positions.size(); ++i)
    col.values.push_back((rng.bits(stream, sign_base + i) >> 63) ? -v : v);
  return col;
}

SparseJL::Column SparseJL::append_column() { return column(cols_++); }

Matrix SparseJL::dense(Index cols) const {
  Matrix out = Matrix::Zero(m_, cols);
  for (Index c = 0; c < cols; ++c) {
    const Column col = column(c);
    for (std::size_t i = 0; i < col.positions.size(); ++i) out(col.positions[i], c) = col.values[i];
  }
  return out;
}

Vector SparseJL::apply(const VectorRef& x) const {
  Vector y = Vector::Zero(m_);
  for (Index c = 0; c < x.size(); ++c) {
    if (x[c] == 0.0) continue;
    const Column col = column(c);
    for (std::size_t i = 0; i < col.positions.size(); ++i) y[col.positions[i]] += col.values[i] * x[c];
  }
  return y;
}

void jl_apply_append(Matrix& f, SparseJL& j, Index new_count, const VectorRef& row) {
  if (j.cols() != new_count - 1)
    fail(ErrorCode::Inconsistency, "JL has " + std::to_string(j.cols()) + " columns, sketch grows to " +
                                       std::to_string(new_count));
  if (f.rows() != j.rows() || f.cols() != row.size())
    fail(ErrorCode::DimensionMismatch, "F must be m x d");
  const SparseJL::Column col = j.append_column();
  for (std::size_t i = 0; i < col.positions.size(); ++i) f.row(col.positions[i]) += col.values[i] * row.transpose();
}

double jl_norm_estimate(const MatrixRef& h, const VectorRef& v) {
  if (h.cols() != v.size()) fail(ErrorCode::DimensionMismatch, "H columns must equal len(v)");
  return (h * v).squaredNorm();
}

}  // namespace olar
