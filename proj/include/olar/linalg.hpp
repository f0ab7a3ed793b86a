#pragma once

#include <Eigen/Dense>

#include <cstddef>

#include "olar/error.hpp"

namespace olar {

/// Stream rows are stored row-major so that appending a row is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
/// d x d matrices (Gram matrices and their inverses).
using Square = Eigen::MatrixXd;
using Index = Eigen::Index;

using MatrixRef = Eigen::Ref<const Matrix>;
using VectorRef = Eigen::Ref<const Vector>;

inline constexpr double kDefaultPinvTol = 1e-10;

/// (A^T A)^{-1} or a pseudo-inverse of a Gram matrix. Construction
/// symmetrizes; the invariants (symmetric, PSD) are the producer's job.
class SymmetricInverse {
 public:
  SymmetricInverse() = default;
  explicit SymmetricInverse(Square m);

  Index dim() const { return m_.rows(); }
  const Square& matrix() const { return m_; }
  Square& mutable_matrix() { return m_; }

  /// a^T G a
  double quadratic_form(const VectorRef& a) const;

 private:
  Square m_;
};

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// M^T M (d x d, symmetric PSD).
Square gram(const MatrixRef& m);

/// Moore-Penrose inverse of a symmetric PSD matrix via its eigendecomposition.
/// Eigenvalues at or below rel_tol * lambda_max are treated as zero; an
/// all-zero input yields the zero matrix.
SymmetricInverse pseudo_inverse(const Square& g, double rel_tol = kDefaultPinvTol);

/// argmin ||Ax - b||_2; the minimum-norm solution when A is rank deficient.
Vector least_squares(const MatrixRef& a, const VectorRef& b);

/// (G + a a^T / p_t)^{-1} from G^{-1} by Sherman-Morrison. Throws
/// NumericBreakdown when 1 + a^T G^{-1} a / p_t <= 1e-14.
SymmetricInverse rank_one_inverse_update(const SymmetricInverse& g_inv, const VectorRef& a,
                                         double p_t);

/// In-place variant for the streaming hot path.
void rank_one_inverse_update_inplace(Square& g_inv, const VectorRef& a, double p_t);

/// Numerical rank via the eigenvalues of the Gram matrix.
Index numerical_rank(const MatrixRef& m, double rel_tol = 1e-10);

double relative_frobenius(const Square& approx, const Square& exact);

/// ||v||_p for p >= 1.
double lp_norm(const VectorRef& v, double p);

/// ||v||_p^p
double lp_norm_pow(const VectorRef& v, double p);

}  // namespace olar
