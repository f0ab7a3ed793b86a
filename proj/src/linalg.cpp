#include "olar/linalg.hpp"

#include <cmath>
#include <span>

#include "olar/kernels.hpp"

namespace olar {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NumericBreakdown: return "NumericBreakdown";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::CapacityOverflow: return "CapacityOverflow";
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::Inconsistency: return "Inconsistency";
    case ErrorCode::ZeroOptimum: return "ZeroOptimum";
    case ErrorCode::RankDeficientPrefix: return "RankDeficientPrefix";
    case ErrorCode::SingularPrefix: return "SingularPrefix";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::UnexpectedEof: return "UnexpectedEof";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumeric: return "NonNumeric";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

SymmetricInverse::SymmetricInverse(Square m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) fail(ErrorCode::DimensionMismatch, "symmetric matrix must be square");
  m_ = 0.5 * (m_ + m_.transpose()).eval();
}

double SymmetricInverse::quadratic_form(const VectorRef& a) const {
  if (a.size() != m_.rows()) fail(ErrorCode::DimensionMismatch, "quadratic form length");
  return a.dot(m_ * a);
}


Square gram(const MatrixRef& m) {
  if (m.rows() == 0) fail(ErrorCode::InvalidArgument, "gram of an empty matrix");
  if (!m.allFinite()) fail(ErrorCode::NonFinite, "gram input");
  return kernels::weighted_gram(m);
}

SymmetricInverse pseudo_inverse(const Square& g, double rel_tol) {
  if (g.rows() != g.cols()) fail(ErrorCode::DimensionMismatch, "pseudo_inverse needs a square matrix");
  if (!g.allFinite()) fail(ErrorCode::NonFinite, "pseudo_inverse input");
  const Index d = g.rows();
  if (d == 0) return SymmetricInverse(Square(0, 0));

  Eigen::SelfAdjointEigenSolver<Square> eig(0.5 * (g + g.transpose()));
  const Vector& lambda = eig.eigenvalues();
  const double lambda_max = lambda.cwiseAbs().maxCoeff();
  if (lambda_max == 0.0) return SymmetricInverse(Square::Zero(d, d));

  const double cutoff = rel_tol * lambda_max;
  Vector inv = Vector::Zero(d);
  for (Index i = 0; i < d; ++i) {
    if (lambda(i) > cutoff) inv(i) = 1.0 / lambda(i);
  }
  const Square& v = eig.eigenvectors();
  return SymmetricInverse(v * inv.asDiagonal() * v.transpose());
}

Vector least_squares(const MatrixRef& a, const VectorRef& b) {
  if (a.rows() != b.size()) fail(ErrorCode::DimensionMismatch, "least_squares: rows(A) != len(b)");
  if (!a.allFinite() || !b.allFinite()) fail(ErrorCode::NonFinite, "least_squares input");
  if (a.rows() == 0) return Vector::Zero(a.cols());
  // Column-major copy: the orthogonal decomposition works on columns.
  Eigen::MatrixXd ac = a;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(ac);
  return cod.solve(b);
}

void rank_one_inverse_update_inplace(Square& g_inv, const VectorRef& a, double p_t) {
  if (!(p_t > 0.0 && p_t <= 1.0)) fail(ErrorCode::InvalidProbability, "rank-one update needs p_t in (0,1]");
  if (a.size() != g_inv.rows()) fail(ErrorCode::DimensionMismatch, "rank-one update length");
  if (!a.allFinite()) fail(ErrorCode::NonFinite, "rank-one update vector");
  const Vector u = g_inv * a;
  const double g = a.dot(u) / p_t;
  if (1.0 + g <= 1e-14) fail(ErrorCode::NumericBreakdown, "1 + g <= 1e-14 in rank-one update");
  g_inv.noalias() -= (u * u.transpose()) / (p_t * (1.0 + g));
  g_inv = 0.5 * (g_inv + g_inv.transpose()).eval();
}

SymmetricInverse rank_one_inverse_update(const SymmetricInverse& g_inv, const VectorRef& a,
                                         double p_t) {
  Square m = g_inv.matrix();
  rank_one_inverse_update_inplace(m, a, p_t);
  return SymmetricInverse(std::move(m));
}

Index numerical_rank(const MatrixRef& m, double rel_tol) {
  if (m.rows() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Square> eig(kernels::weighted_gram(m), Eigen::EigenvaluesOnly);
  const Vector& lambda = eig.eigenvalues();
  const double lambda_max = lambda.cwiseAbs().maxCoeff();
  if (lambda_max == 0.0) return 0;
  Index r = 0;
  for (Index i = 0; i < lambda.size(); ++i) r += lambda(i) > rel_tol * lambda_max ? 1 : 0;
  return r;
}

double relative_frobenius(const Square& approx, const Square& exact) {
  const double denom = exact.norm();
  const double diff = (approx - exact).norm();
  return denom == 0.0 ? diff : diff / denom;
}

double lp_norm_pow(const VectorRef& v, double p) {
  if (p == 2.0) return v.squaredNorm();
  if (p == 1.0) return v.cwiseAbs().sum();
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v(i)), p);
  return s;
}

double lp_norm(const VectorRef& v, double p) {
  if (p == 2.0) return v.norm();
  if (p == 1.0) return v.cwiseAbs().sum();
  // Scale first so large residuals do not overflow |r|^p.
  const double m = v.cwiseAbs().maxCoeff();
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += std::pow(std::abs(v(i)) / m, p);
  return m * std::pow(s, 1.0 / p);
}

}  // namespace olar
