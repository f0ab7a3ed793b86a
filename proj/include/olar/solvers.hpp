#pragma once

#include <optional>
#include <vector>

#include "olar/linalg.hpp"

namespace olar {

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 500;
  /// mu = mu_scale * (1 + ||b||_inf)
  double mu_scale = 1e-8;
  /// Divide mu by 10 every 20 iterations (floor 1e-12) instead of holding it.
  bool anneal = false;
  /// Record every iterate's smoothed objective (tests only).
  bool trace = false;
};

struct RegressionSolution {
  Vector x;
  /// ||Ax - b||_p at x.
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Smoothed objective sum (r_i^2 + mu^2)^{p/2} per iterate, when traced.
  std::vector<double> smoothed_trace;

  /// Throws NotConverged.
  const RegressionSolution& require_converged() const;
};

/// argmin_x ||Ax - b||_p. p = 2 is a direct least-squares solve; p < 2 runs
/// smoothed IRLS from the least-squares point (or `x0`) and returns the best
/// iterate seen.
RegressionSolution solve(const MatrixRef& a, const VectorRef& b, double p, const SolverOptions& opt = {},
                         const std::optional<Vector>& x0 = std::nullopt);

/// ||Ax - b||_p
double objective(const MatrixRef& a, const VectorRef& b, double p, const VectorRef& x);

/// ||A^T (sign(r)|r|^{p-1})||_inf / (max column norm * || |r|^{p-1} ||_2),
/// r = Ax - b. Scale-free first-order residual for p in (1,2].
double gradient_residual(const MatrixRef& a, const VectorRef& b, double p, const VectorRef& x);

/// Certified relative gap (obj - lower)/obj from a dual point built from the
/// residual and projected onto null(A^T). Works for p = 1 too, where the
/// near-zero residuals are filled in by a small solve.
double optimality_gap(const MatrixRef& a, const VectorRef& b, double p, const VectorRef& x);

/// (err - opt) / opt. Throws ZeroOptimum when opt <= 1e-12 * ||b||_p.
double relative_error(double err, double opt, double b_norm);
double relative_error(const MatrixRef& a, const VectorRef& b, double p, const VectorRef& x);

}  // namespace olar
