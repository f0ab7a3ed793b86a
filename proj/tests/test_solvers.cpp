#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>

#include "olar/error.hpp"
#include "olar/solvers.hpp"
#include "test_util.hpp"

using namespace olar;
using namespace olar::testing;

namespace {

double fpow(const Matrix& a, const Vector& b, double p, const Vector& x) { return lp_norm_pow(a * x - b, p); }

double golden(const std::function<double(double)>& f, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

// Line searches through the current point along each coordinate and along
// the gradient, then a long run of small normalized gradient steps that only
// accepts improvements.
Vector independent_minimizer(const Matrix& a, const Vector& b, double p, Vector x) {
  const Index d = a.cols();
  auto grad = [&](const Vector& z) {
    const Vector r = a * z - b;
    Vector g(r.size());
    for (Index i = 0; i < r.size(); ++i) g[i] = p * (r[i] > 0 ? 1.0 : -1.0) * std::pow(std::abs(r[i]), p - 1.0);
    return Vector(a.transpose() * g);
  };
  for (int round = 0; round < 60; ++round) {
    for (Index j = 0; j <= d; ++j) {
      Vector dir = j < d ? Vector(Vector::Unit(d, j)) : grad(x);
      if (dir.norm() == 0.0) continue;
      dir /= dir.norm();
      const double t = golden([&](double s) { return fpow(a, b, p, x + s * dir); }, -1.0, 1.0);
      if (fpow(a, b, p, x + t * dir) < fpow(a, b, p, x)) x += t * dir;
    }
  }
  double step = 1e-3;
  double fx = fpow(a, b, p, x);
  for (int it = 0; it < 100000; ++it) {
    Vector g = grad(x);
    if (g.norm() == 0.0) break;
    const Vector cand = x - step * g / g.norm();
    const double fc = fpow(a, b, p, cand);
    if (fc < fx) {
      x = cand;
      fx = fc;
      step *= 1.2;
    } else {
      step *= 0.5;
      if (step < 1e-16) step = 1e-6;
    }
  }
  return x;
}

}  // namespace

TEST_CASE("median line for p = 1") {
  const Matrix a = Matrix::Ones(3, 1);
  const RegressionSolution s = solve(a, vec({0, 1, 10}), 1.0);
  CHECK(s.objective == doctest::Approx(10.0).epsilon(1e-6));
}

TEST_CASE("identity design is solved exactly") {
  const Vector b = vec({2.5, -1.0});
  for (double p : {1.0, 1.5, 2.0}) {
    const RegressionSolution s = solve(Matrix::Identity(2, 2), b, p);
    CHECK((s.x - b).norm() < 1e-9);
    CHECK(s.objective < 1e-9);
  }
}

TEST_CASE("p = 1.5 matches an independent minimizer") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 3; ++trial) {
    const Matrix a = gaussian_matrix(50, 4, gen);
    const Vector b = gaussian_vector(50, gen);
    const RegressionSolution s = solve(a, b, 1.5);
    const Vector xo = independent_minimizer(a, b, 1.5, least_squares(a, b));
    const double fo = lp_norm(a * xo - b, 1.5);
    CHECK(s.objective <= fo * (1.0 + 1e-4));
    CHECK(std::abs(s.objective - fo) <= 1e-4 * fo);
    CHECK(gradient_residual(a, b, 1.5, s.x) <= 1e-5);
  }
}

TEST_CASE("first order optimality") {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = gaussian_matrix(80, 5, gen);
    const Vector b = gaussian_vector(80, gen);
    const RegressionSolution s2 = solve(a, b, 2.0);
    const double scale = a.cwiseAbs().colwise().sum().maxCoeff() * b.cwiseAbs().maxCoeff();
    CHECK((a.transpose() * (a * s2.x - b)).cwiseAbs().maxCoeff() <= 1e-8 * scale);
    for (double p : {1.2, 1.5, 1.8}) {
      const RegressionSolution s = solve(a, b, p);
      CHECK(s.converged);
      CHECK(gradient_residual(a, b, p, s.x) <= 1e-5);
      CHECK(optimality_gap(a, b, p, s.x) <= 1e-5);
    }
  }
}

TEST_CASE("p = 1 duality gap with annealing") {
  std::mt19937_64 gen(3);
  const Matrix a = gaussian_matrix(60, 3, gen);
  const Vector b = gaussian_vector(60, gen);
  SolverOptions opt;
  opt.anneal = true;
  const RegressionSolution s = solve(a, b, 1.0, opt);
  CHECK(optimality_gap(a, b, 1.0, s.x) <= 1e-5);
}

TEST_CASE("p = 1 lands on the best interpolating vertex") {
  // some l1 optimum interpolates d rows; enumerate all of them
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 11, d = 3;
    const Matrix a = gaussian_matrix(n, d, gen);
    const Vector b = gaussian_vector(n, gen);
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j)
        for (Index k = j + 1; k < n; ++k) {
          Square m(d, d);
          m << a.row(i), a.row(j), a.row(k);
          const Vector x = m.fullPivLu().solve(Vector(vec({b[i], b[j], b[k]})));
          best = std::min(best, lp_norm(a * x - b, 1.0));
        }
    const RegressionSolution s = solve(a, b, 1.0);
    CHECK(s.objective == doctest::Approx(best).epsilon(1e-12));
    CHECK(optimality_gap(a, b, 1.0, s.x) <= 1e-12);
  }
  const Matrix big = gaussian_matrix(2000, 10, gen);
  const Vector bb = gaussian_vector(2000, gen);
  CHECK(optimality_gap(big, bb, 1.0, solve(big, bb, 1.0).x) <= 1e-10);
}

TEST_CASE("smoothed objective never increases") {
  std::mt19937_64 gen(4);
  SolverOptions opt;
  opt.trace = true;
  for (double p : {1.0, 1.3, 1.7}) {
    const Matrix a = gaussian_matrix(60, 4, gen);
    const Vector b = gaussian_vector(60, gen);
    const RegressionSolution s = solve(a, b, p, opt);
    REQUIRE(s.smoothed_trace.size() >= 2);
    for (std::size_t i = 1; i < s.smoothed_trace.size(); ++i)
      CHECK(s.smoothed_trace[i] <= s.smoothed_trace[i - 1] * (1.0 + 1e-12));
  }
}

TEST_CASE("stored objective matches recomputation") {
  std::mt19937_64 gen(5);
  const Matrix a = gaussian_matrix(30, 3, gen);
  const Vector b = gaussian_vector(30, gen);
  for (double p : {1.0, 1.5, 2.0}) {
    const RegressionSolution s = solve(a, b, p);
    CHECK(s.objective == doctest::Approx(objective(a, b, p, s.x)).epsilon(1e-10));
    CHECK(s.objective >= 0.0);
  }
}

TEST_CASE("minimizer does not depend on the start for p > 1") {
  std::mt19937_64 gen(6);
  for (double p : {1.3, 1.6}) {
    const Matrix a = gaussian_matrix(60, 4, gen);
    const Vector b = gaussian_vector(60, gen);
    const RegressionSolution s = solve(a, b, p);
    const Vector start = s.x + gaussian_vector(4, gen);
    const RegressionSolution s2 = solve(a, b, p, {}, start);
    CHECK((s2.x - s.x).norm() <= 1e-4 * s.x.norm());
  }
}

TEST_CASE("relative error") {
  std::mt19937_64 gen(7);
  const Matrix a = gaussian_matrix(40, 3, gen);
  const Vector x_star = gaussian_vector(3, gen);
  const Vector b = a * x_star + gaussian_vector(40, gen);
  for (double p : {1.0, 1.5, 2.0}) {
    const RegressionSolution s = solve(a, b, p);
    CHECK(std::abs(relative_error(a, b, p, s.x)) < 1e-6);
    const double re = relative_error(a, b, p, x_star);
    CHECK(std::isfinite(re));
    CHECK(re >= -1e-9);
    CHECK(relative_error(a, b, p, Vector::Zero(3)) > 0.0);
  }
  CHECK_THROWS_AS(relative_error(a, a * x_star, 2.0, x_star), Error);
  CHECK(relative_error(3.0, 2.0, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("shape errors") {
  CHECK_THROWS_AS(solve(Matrix::Ones(3, 2), Vector::Ones(4), 1.5), Error);
  CHECK_THROWS_AS(solve(Matrix::Ones(3, 2), Vector::Ones(3), 2.5), Error);
}
