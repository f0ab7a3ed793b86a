#include "olar/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace olar::kernels {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr double kParallelWork = 2.0e5;

void check_weights(const MatrixRef& a, std::span<const double> w) {
  if (!w.empty() && static_cast<Index>(w.size()) != a.rows())
    fail(ErrorCode::DimensionMismatch, "weight count must equal row count");
}

void chunk_gram(const MatrixRef& a, std::span<const double> w, Index begin, Index end, Square& out) {
  const Index d = a.cols();
  out.setZero(d, d);
  if (w.empty()) {
    out.selfadjointView<Eigen::Lower>().rankUpdate(a.middleRows(begin, end - begin).transpose());
  } else {
    Matrix scaled(end - begin, d);
    for (Index i = begin; i < end; ++i) scaled.row(i - begin) = std::sqrt(w[i]) * a.row(i);
    out.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
  }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Square weighted_gram(const MatrixRef& a, std::span<const double> w) {
  check_weights(a, w);
  const Index n = a.rows();
  const Index d = a.cols();
  const Index chunks = (n + kChunkRows - 1) / kChunkRows;
  Square g = Square::Zero(d, d);
  if (chunks <= 1) {
    if (n > 0) chunk_gram(a, w, 0, n, g);
  } else {
    std::vector<Square> partial(static_cast<std::size_t>(chunks));
    const bool parallel = static_cast<double>(n) * d * d > kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
    for (Index c = 0; c < chunks; ++c) {
      const Index begin = c * kChunkRows;
      const Index end = std::min(n, begin + kChunkRows);
      chunk_gram(a, w, begin, end, partial[static_cast<std::size_t>(c)]);
    }
    for (const Square& p : partial) g += p;
  }
  g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

void row_quadratic_forms(const MatrixRef& a, const Square& m, std::span<double> out) {
  if (m.rows() != a.cols() || m.cols() != a.cols())
    fail(ErrorCode::DimensionMismatch, "quadratic form matrix shape");
  if (static_cast<Index>(out.size()) != a.rows())
    fail(ErrorCode::DimensionMismatch, "quadratic form output length");
  const Index n = a.rows();
  const Index chunks = (n + kChunkRows - 1) / kChunkRows;
  const bool parallel = chunks > 1 && static_cast<double>(n) * a.cols() * a.cols() > kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (Index c = 0; c < chunks; ++c) {
    const Index begin = c * kChunkRows;
    const Index rows = std::min(n, begin + kChunkRows) - begin;
    const Matrix y = a.middleRows(begin, rows) * m;
    for (Index i = 0; i < rows; ++i) out[begin + i] = y.row(i).dot(a.row(begin + i));
  }
}

namespace serial {

Square weighted_gram(const MatrixRef& a, std::span<const double> w) {
  check_weights(a, w);
  const Index d = a.cols();
  Square g = Square::Zero(d, d);
  for (Index i = 0; i < a.rows(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    for (Index j = 0; j < d; ++j) {
      const double aij = wi * a(i, j);
      for (Index k = 0; k <= j; ++k) g(j, k) += aij * a(i, k);
    }
  }
  for (Index j = 0; j < d; ++j)
    for (Index k = 0; k < j; ++k) g(k, j) = g(j, k);
  return g;
}

void row_quadratic_forms(const MatrixRef& a, const Square& m, std::span<double> out) {
  if (m.rows() != a.cols() || m.cols() != a.cols())
    fail(ErrorCode::DimensionMismatch, "quadratic form matrix shape");
  if (static_cast<Index>(out.size()) != a.rows())
    fail(ErrorCode::DimensionMismatch, "quadratic form output length");
  const Index d = a.cols();
  for (Index i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (Index j = 0; j < d; ++j) {
      double mj = 0.0;
      for (Index k = 0; k < d; ++k) mj += m(j, k) * a(i, k);
      s += a(i, j) * mj;
    }
    out[i] = s;
  }
}

}  // namespace serial
}  // namespace olar::kernels
