#pragma once

// Row-parallel kernels behind the Lewis-weight iteration and the Gram
// builds. The OpenMP versions split rows into fixed-size chunks and reduce
// partial results in chunk order, so the output does not depend on the
// thread count. The serial versions are the plain-loop references the
// tests and the benchmark compare against.

#include <span>

#include "olar/linalg.hpp"

namespace olar::kernels {

inline constexpr Index kChunkRows = 256;

/// sum_i w_i a_i a_i^T; an empty weight span means unit weights.
Square weighted_gram(const MatrixRef& a, std::span<const double> w = {});

/// out_i = a_i^T M a_i for every row a_i.
void row_quadratic_forms(const MatrixRef& a, const Square& m, std::span<double> out);

/// Number of OpenMP threads the kernels will use (1 without OpenMP).
int max_threads();

namespace serial {

Square weighted_gram(const MatrixRef& a, std::span<const double> w = {});

void row_quadratic_forms(const MatrixRef& a, const Square& m, std::span<double> out);

}  // namespace serial

}  // namespace olar::kernels
