#include "olar/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace olar {
namespace {

void check(const MatrixRef& a, const VectorRef& b, double p) {
  if (a.rows() != b.size()) fail(ErrorCode::DimensionMismatch, "rows(A) must equal len(b)");
  if (!(p >= 1.0 && p <= 2.0)) fail(ErrorCode::InvalidArgument, "solver needs p in [1,2]");
  if (!a.allFinite() || !b.allFinite()) fail(ErrorCode::NonFinite, "solver input");
}

double smoothed(const Vector& r, double p, double mu) {
  double s = 0.0;
  for (Index i = 0; i < r.size(); ++i) s += std::pow(r[i] * r[i] + mu * mu, 0.5 * p);
  return s;
}

// Exact descent over vertices for p = 1, started from the IRLS point. A
// vertex interpolates d rows (the basis Z). The dual g_Z solves
// A_Z^T g_Z = -sum_{i not in Z} sign(r_i) a_i; the vertex is optimal iff
// |g_Z| <= 1. Otherwise row k with |g_k| > 1 leaves Z along a descent edge
// and the exact line search (a weighted median of the breakpoints) picks
// the row that enters.
Vector l1_vertex_descent(const MatrixRef& a, const VectorRef& b, Vector x, int max_steps) {
  const Index n = a.rows(), d = a.cols();
  if (n <= d) return x;
  Vector r = a * x - b;
  std::vector<Index> basis(static_cast<std::size_t>(n));
  std::iota(basis.begin(), basis.end(), Index{0});
  std::partial_sort(basis.begin(), basis.begin() + d, basis.end(),
                    [&](Index i, Index j) { return std::abs(r[i]) < std::abs(r[j]); });
  basis.resize(static_cast<std::size_t>(d));
  Matrix az(d, d);
  Vector bz(d);
  for (Index t = 0; t < d; ++t) {
    az.row(t) = a.row(basis[static_cast<std::size_t>(t)]);
    bz[t] = b[basis[static_cast<std::size_t>(t)]];
  }
  Eigen::PartialPivLU<Square> lu(az);
  if (!(lu.rcond() > 1e-12)) return x;
  Vector xv = lu.solve(bz);
  // this vertex can be a little worse than the IRLS point; descent from it
  // still ends at an optimal vertex
  if (!xv.allFinite()) return x;
  x = xv;
  r = a * x - b;

  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  for (Index i : basis) in_basis[static_cast<std::size_t>(i)] = 1;
  std::vector<std::pair<double, double>> breaks;
  for (int step = 0; step < max_steps; ++step) {
    Vector rest = Vector::Zero(d);
    for (Index i = 0; i < n; ++i)
      if (!in_basis[static_cast<std::size_t>(i)] && r[i] != 0.0) rest += (r[i] > 0 ? 1.0 : -1.0) * a.row(i).transpose();
    const Vector gz = lu.transpose().solve(Vector(-rest));
    Index k = 0;
    const double worst = gz.cwiseAbs().maxCoeff(&k);
    if (worst <= 1.0 + 1e-10) break;
    const double sigma = gz[k] > 0 ? 1.0 : -1.0;
    const Vector v = lu.solve(Vector(sigma * Vector::Unit(d, k)));
    const Vector c = a * v;
    // slope of sum |r_i + t c_i| just right of t = 0
    double slope = 1.0 - worst;
    breaks.clear();
    for (Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)] || c[i] == 0.0) continue;
      const double t = -r[i] / c[i];
      if (t > 0.0) breaks.emplace_back(t, static_cast<double>(i));
    }
    std::sort(breaks.begin(), breaks.end());
    Index enter = -1;
    double tstar = 0.0;
    for (const auto& [t, idx] : breaks) {
      slope += 2.0 * std::abs(c[static_cast<Index>(idx)]);
      if (slope >= 0.0) {
        enter = static_cast<Index>(idx);
        tstar = t;
        break;
      }
    }
    if (enter < 0) break;
    const Vector xn = x + tstar * v;
    const Vector rn = a * xn - b;
    if (lp_norm(rn, 1.0) > lp_norm(r, 1.0)) break;
    x = xn;
    r = rn;
    in_basis[static_cast<std::size_t>(basis[static_cast<std::size_t>(k)])] = 0;
    in_basis[static_cast<std::size_t>(enter)] = 1;
    basis[static_cast<std::size_t>(k)] = enter;
    az.row(k) = a.row(enter);
    lu.compute(az);
  }
  return x;
}

}  // namespace

const RegressionSolution& RegressionSolution::require_converged() const {
  if (!converged) fail(ErrorCode::NotConverged, "IRLS stopped after " + std::to_string(iterations) + " iterations");
  return *this;
}

double objective(const MatrixRef& a, const VectorRef& b, double p, const VectorRef& x) {
  if (a.cols() != x.size()) fail(ErrorCode::DimensionMismatch, "cols(A) must equal len(x)");
  if (a.rows() != b.size()) fail(ErrorCode::DimensionMismatch, "rows(A) must equal len(b)");
  if (a.rows() == 0) return 0.0;
  return lp_norm(a * x - b, p);
}

RegressionSolution solve(const MatrixRef& a, const VectorRef& b, double p, const SolverOptions& opt,
                         const std::optional<Vector>& x0) {
  check(a, b, p);
  RegressionSolution out;
  if (x0 && x0->size() != a.cols()) fail(ErrorCode::DimensionMismatch, "start point length");
  if (a.rows() == 0) {
    out.x = x0 ? *x0 : Vector::Zero(a.cols());
    out.converged = true;
    return out;
  }
  if (p == 2.0) {
    out.x = least_squares(a, b);
    out.objective = objective(a, b, p, out.x);
    out.converged = true;
    return out;
  }

  Vector x = x0 ? *x0 : least_squares(a, b);
  double obj = objective(a, b, p, x);
  out.x = x;
  out.objective = obj;
  if (obj == 0.0) {
    out.converged = true;
    return out;
  }

  const double bmax = b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
  double mu = opt.mu_scale * (1.0 + bmax);
  const double mu_floor = std::min(mu, 1e-12);
  Vector r = a * x - b;
  Matrix scaled(a.rows(), a.cols());
  Vector rhs(b.size());
  double prev = obj;
  for (int it = 1; it <= opt.max_iter; ++it) {
    for (Index i = 0; i < a.rows(); ++i) {
      const double w = std::pow(r[i] * r[i] + mu * mu, 0.5 * (p - 2.0));
      const double s = std::sqrt(w);
      scaled.row(i) = s * a.row(i);
      rhs[i] = s * b[i];
    }
    const Vector step = x;
    x = least_squares(scaled, rhs);
    const double moved = (x - step).norm();
    r = a * x - b;
    if (opt.trace) out.smoothed_trace.push_back(smoothed(r, p, mu));
    obj = lp_norm(r, p);
    out.iterations = it;
    if (obj < out.objective) {
      out.objective = obj;
      out.x = x;
    }
    // the objective is flat near the optimum, so also wait for x to settle
    const bool settled = moved <= std::sqrt(opt.tol) * 1e-2 * std::max(x.norm(), 1.0);
    if (obj == 0.0 || (std::abs(prev - obj) <= opt.tol * std::max(obj, 1e-300) && settled)) {
      out.converged = true;
      if (!opt.anneal || mu <= mu_floor) break;
    }
    prev = obj;
    if (opt.anneal && it % 20 == 0) mu = std::max(mu / 10.0, mu_floor);
  }
  if (p == 1.0 && out.objective > 0.0) {
    const Vector xv = l1_vertex_descent(a, b, out.x, 10 * static_cast<int>(a.rows()));
    const double ov = objective(a, b, p, xv);
    if (ov <= (1.0 + 1e-9) * out.objective) {
      out.x = xv;
      out.objective = ov;
    }
  }
  return out;
}

double gradient_residual(const MatrixRef& a, const VectorRef& b, double p, const VectorRef& x) {
  check(a, b, p);
  const Vector r = a * x - b;
  Vector g(r.size());
  for (Index i = 0; i < r.size(); ++i) {
    const double m = std::abs(r[i]);
    g[i] = m == 0.0 ? 0.0 : std::copysign(std::pow(m, p - 1.0), r[i]);
  }
  const double gn = g.norm();
  if (gn == 0.0) return 0.0;
  const double cn = a.colwise().norm().maxCoeff();
  if (cn == 0.0) return 0.0;
  return (a.transpose() * g).cwiseAbs().maxCoeff() / (cn * gn);
}

double optimality_gap(const MatrixRef& a, const VectorRef& b, double p, const VectorRef& x) {
  check(a, b, p);
  const double obj = objective(a, b, p, x);
  if (obj == 0.0) return 0.0;
  const Vector res = b - a * x;
  const Index n = res.size();
  Vector g(n);
  if (p > 1.0) {
    for (Index i = 0; i < n; ++i) {
      const double m = std::abs(res[i]);
      g[i] = m == 0.0 ? 0.0 : std::copysign(std::pow(m, p - 1.0), res[i]);
    }
  } else {
    // sign pattern off the (near-)interpolated rows; those d rows absorb
    // A^T g = 0 through a small least-squares fill-in
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    const Index k = std::min<Index>(a.cols(), n);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](Index i, Index j) { return std::abs(res[i]) < std::abs(res[j]); });
    std::vector<char> active(static_cast<std::size_t>(n), 0);
    for (Index t = 0; t < k; ++t) active[order[t]] = 1;
    Vector rest = Vector::Zero(a.cols());
    for (Index i = 0; i < n; ++i) {
      g[i] = active[i] ? 0.0 : (res[i] > 0 ? 1.0 : (res[i] < 0 ? -1.0 : 0.0));
      if (!active[i]) rest += g[i] * a.row(i).transpose();
    }
    Matrix az(k, a.cols());
    for (Index t = 0; t < k; ++t) az.row(t) = a.row(order[t]);
    const Vector gz = least_squares(az.transpose(), -rest);
    for (Index t = 0; t < k; ++t) g[order[t]] = std::clamp(gz[t], -1.0, 1.0);
  }
  // project onto null(A^T)
  g -= a * least_squares(a, g);
  const double q = p > 1.0 ? p / (p - 1.0) : 0.0;
  const double gq = p > 1.0 ? lp_norm(g, q) : g.cwiseAbs().maxCoeff();
  if (gq == 0.0) return 1.0;
  const double lower = std::abs(g.dot(b)) / gq;
  return std::max(0.0, (obj - lower) / obj);
}

double relative_error(double err, double opt, double b_norm) {
  if (!(opt > 1e-12 * b_norm)) fail(ErrorCode::ZeroOptimum, "optimum is zero; report absolute error");
  return (err - opt) / opt;
}

double relative_error(const MatrixRef& a, const VectorRef& b, double p, const VectorRef& x) {
  const RegressionSolution best = solve(a, b, p);
  return relative_error(objective(a, b, p, x), best.objective, lp_norm(b, p));
}

}  // namespace olar
