#include "olar/lewis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "olar/kernels.hpp"

namespace olar {
namespace {

constexpr double kTinyWeight = 1e-12;

void check_p(double p) {
  if (!(p >= 1.0 && p <= 2.0)) fail(ErrorCode::InvalidArgument, "Lewis weights need p in [1,2]");
}

// One application of the fixed-point map. Zero rows keep weight 0 and get a
// zero multiplier in the Gram.
void lewis_step(const MatrixRef& a, double p, const std::vector<char>& zero_row, double pinv_tol,
                std::span<const double> w, std::vector<double>& gram_w, std::vector<double>& q,
                std::vector<double>& next) {
  const Index n = a.rows();
  const double expo = 1.0 - 2.0 / p;
  for (Index i = 0; i < n; ++i) {
    if (zero_row[i]) {
      gram_w[i] = 0.0;
    } else if (expo == 0.0) {
      gram_w[i] = 1.0;
    } else {
      gram_w[i] = std::pow(std::max(w[i], kTinyWeight * 1e-6), expo);
    }
  }
  const Square k = kernels::weighted_gram(a, gram_w);
  const SymmetricInverse k_pinv = pseudo_inverse(k, pinv_tol);
  kernels::row_quadratic_forms(a, k_pinv.matrix(), q);
  const double half_p = 0.5 * p;
  for (Index i = 0; i < n; ++i) {
    if (zero_row[i]) {
      next[i] = 0.0;
    } else {
      const double qi = std::max(q[i], 0.0);
      next[i] = half_p == 1.0 ? qi : std::pow(qi, half_p);
    }
  }
}

}  // namespace

double LewisWeights::sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

const LewisWeights& LewisWeights::require_converged() const {
  if (!converged)
    fail(ErrorCode::NotConverged, "Lewis iteration stopped after " + std::to_string(iterations) + " iterations");
  return *this;
}

LewisWeights lewis_weights(const MatrixRef& a, double p, const LewisOptions& opt,
                           std::span<const double> warm_start) {
  check_p(p);
  if (a.rows() < 1) fail(ErrorCode::InvalidArgument, "Lewis weights of an empty matrix");
  if (!a.allFinite()) fail(ErrorCode::NonFinite, "Lewis weights input");
  const Index n = a.rows();
  if (!warm_start.empty() && static_cast<Index>(warm_start.size()) != n)
    fail(ErrorCode::DimensionMismatch, "warm start length");

  std::vector<char> zero_row(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) zero_row[i] = a.row(i).isZero(0.0) ? 1 : 0;

  LewisWeights out;
  out.p = p;
  std::vector<double> w(static_cast<std::size_t>(n), 1.0);
  if (!warm_start.empty()) {
    for (Index i = 0; i < n; ++i) w[i] = warm_start[i] > 0.0 ? warm_start[i] : 1.0;
  }
  for (Index i = 0; i < n; ++i)
    if (zero_row[i]) w[i] = 0.0;

  std::vector<double> gram_w(w.size()), q(w.size()), next(w.size());
  for (int it = 1; it <= opt.max_iter; ++it) {
    lewis_step(a, p, zero_row, opt.pinv_tol, w, gram_w, q, next);
    double change = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double diff = std::abs(next[i] - w[i]);
      change = std::max(change, next[i] > kTinyWeight ? diff / next[i] : diff);
    }
    w.swap(next);
    out.iterations = it;
    if (change < opt.tol) {
      out.converged = true;
      break;
    }
  }
  out.weights = std::move(w);
  return out;
}

LewisWeights leverage_scores(const MatrixRef& a) {
  if (a.rows() < 1) fail(ErrorCode::InvalidArgument, "leverage scores of an empty matrix");
  if (!a.allFinite()) fail(ErrorCode::NonFinite, "leverage score input");
  LewisWeights out;
  out.p = 2.0;
  out.converged = true;
  out.weights.resize(static_cast<std::size_t>(a.rows()));
  const SymmetricInverse g = pseudo_inverse(kernels::weighted_gram(a));
  kernels::row_quadratic_forms(a, g.matrix(), out.weights);
  for (double& w : out.weights) w = std::clamp(w, 0.0, 1.0);
  return out;
}

OnlineLewisWeights online_lewis_weights_exact(const MatrixRef& a, double p, const LewisOptions& opt) {
  check_p(p);
  OnlineLewisWeights out;
  out.weights.reserve(static_cast<std::size_t>(a.rows()));
  for (Index i = 0; i < a.rows(); ++i) {
    const LewisWeights lw = lewis_weights(a.topRows(i + 1), p, opt);
    out.all_converged = out.all_converged && lw.converged;
    out.weights.push_back(lw.last());
  }
  return out;
}

double lewis_fixed_point_residual(const MatrixRef& a, double p, std::span<const double> w) {
  check_p(p);
  const Index n = a.rows();
  if (static_cast<Index>(w.size()) != n) fail(ErrorCode::DimensionMismatch, "weight count");
  std::vector<char> zero_row(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) zero_row[i] = a.row(i).isZero(0.0) ? 1 : 0;
  std::vector<double> gram_w(w.size()), q(w.size()), next(w.size());
  lewis_step(a, p, zero_row, kDefaultPinvTol, w, gram_w, q, next);
  double worst = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (zero_row[i] || w[i] <= kTinyWeight) continue;
    worst = std::max(worst, std::abs(next[i] - w[i]) / w[i]);
  }
  return worst;
}

}  // namespace olar
