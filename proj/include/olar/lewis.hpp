#pragma once

#include <optional>
#include <span>
#include <vector>

#include "olar/linalg.hpp"

namespace olar {

struct LewisOptions {
  double tol = 1e-8;
  int max_iter = 200;
  double pinv_tol = kDefaultPinvTol;
};

/// l_p Lewis weights of a matrix. `converged == false` means max_iter was
/// hit; `weights` then holds the last iterate, which callers may still use
/// as a constant-factor approximation.
struct LewisWeights {
  double p = 2.0;
  std::vector<double> weights;
  bool converged = false;
  int iterations = 0;

  double last() const { return weights.back(); }
  double sum() const;
  /// Throws NotConverged (the message carries the iteration count).
  const LewisWeights& require_converged() const;
};

/// Fixed-point iteration w_i <- (a_i^T (A^T W^{1-2/p} A)^+ a_i)^{p/2} from
/// W = I (or from `warm_start` when given). Exactly-zero rows get weight 0
/// and are left out of the weighted Gram.
LewisWeights lewis_weights(const MatrixRef& a, double p, const LewisOptions& opt = {},
                           std::span<const double> warm_start = {});

/// a_i^T (A^T A)^+ a_i clamped to [0, 1]; no iteration.
LewisWeights leverage_scores(const MatrixRef& a);

/// w_i(A^{(i)}) for every prefix, each recomputed from scratch. This is the
/// brute-force reference path: O(n) full Lewis-weight solves.
struct OnlineLewisWeights {
  std::vector<double> weights;
  bool all_converged = true;
};
OnlineLewisWeights online_lewis_weights_exact(const MatrixRef& a, double p, const LewisOptions& opt = {});

/// Residual of the fixed-point equation at `w`, relative per nonzero row.
double lewis_fixed_point_residual(const MatrixRef& a, double p, std::span<const double> w);

}  // namespace olar
