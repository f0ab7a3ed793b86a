#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "olar/error.hpp"
#include "olar/kernels.hpp"
#include "olar/linalg.hpp"
#include "test_util.hpp"

using namespace olar;
using namespace olar::testing;

TEST_CASE("gram of small matrices") {
  CHECK(gram(rows({{1, 0}, {0, 1}})).isApprox(Square::Identity(2, 2)));
  Square expect(2, 2);
  expect << 2, 1, 1, 2;
  CHECK(gram(rows({{1, 0}, {0, 1}, {1, 1}})).isApprox(expect));
  expect << 9, 12, 12, 16;
  CHECK(gram(rows({{3, 4}})).isApprox(expect));
}

TEST_CASE("pseudo inverse examples") {
  Square g = Square::Zero(2, 2);
  g(0, 0) = 2;
  Square expect = Square::Zero(2, 2);
  expect(0, 0) = 0.5;
  CHECK(pseudo_inverse(g).matrix().isApprox(expect));

  g << 2, 1, 1, 2;
  expect << 2, -1, -1, 2;
  expect /= 3.0;
  CHECK((pseudo_inverse(g).matrix() - expect).norm() < 1e-14);

  const Square z = Square::Zero(2, 2);
  CHECK(pseudo_inverse(z).matrix().norm() == 0.0);
}

TEST_CASE("pseudo inverse properties on rank deficient gram") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    // rank 3 in dimension 5
    const Matrix m = gaussian_matrix(8, 3, gen) * gaussian_matrix(3, 5, gen);
    const Square g = m.transpose() * m;
    const Square gi = pseudo_inverse(g).matrix();
    CHECK(relative_frobenius(g * gi * g, g) < 1e-8);
    CHECK(relative_frobenius(pseudo_inverse(gi).matrix(), g) < 1e-8);
    CHECK((gi - gi.transpose()).norm() <= 1e-12 * gi.norm());
    Eigen::SelfAdjointEigenSolver<Square> es(gi);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());
  }
}

TEST_CASE("least squares examples") {
  CHECK(least_squares(rows({{1}, {1}}), vec({0, 2}))[0] == doctest::Approx(1.0));
  CHECK(least_squares(Matrix::Identity(2, 2), vec({3, -4})).isApprox(vec({3, -4})));
  const Vector x = least_squares(rows({{1, 0}, {0, 1}, {1, 1}}), vec({1, 1, 2}));
  CHECK((x - vec({1, 1})).norm() < 1e-12);
  CHECK_THROWS_AS(least_squares(rows({{1, 0}}), vec({1, 2})), Error);
}

TEST_CASE("least squares residual is orthogonal to the column space") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix a = gaussian_matrix(40, 6, gen);
    const Vector b = gaussian_vector(40, gen);
    const Vector x = least_squares(a, b);
    const double scale = a.transpose().cwiseAbs().rowwise().sum().maxCoeff() * b.norm();
    CHECK((a.transpose() * (a * x - b)).cwiseAbs().maxCoeff() <= 1e-8 * scale);
  }
}

TEST_CASE("least squares returns the min-norm solution when rank deficient") {
  const Matrix a = rows({{1, 1}, {2, 2}});
  const Vector x = least_squares(a, vec({2, 4}));
  CHECK((x - vec({1, 1})).norm() < 1e-12);
}

TEST_CASE("rank one inverse update examples") {
  Square out = rank_one_inverse_update(SymmetricInverse(Square::Identity(2, 2)), vec({1, 0}), 1.0).matrix();
  Square expect = Square::Zero(2, 2);
  expect(0, 0) = 0.5;
  expect(1, 1) = 1.0;
  CHECK((out - expect).norm() < 1e-15);

  out = rank_one_inverse_update(SymmetricInverse(Square::Identity(2, 2)), vec({0, 0}), 1.0).matrix();
  CHECK(out.isApprox(Square::Identity(2, 2)));

  CHECK_THROWS_AS(rank_one_inverse_update(SymmetricInverse(Square::Identity(2, 2)), vec({1, 0}), 0.0), Error);
  CHECK_THROWS_AS(rank_one_inverse_update(SymmetricInverse(Square::Identity(2, 2)), vec({1, 0}), 1.5), Error);
}

TEST_CASE("rank one update matches brute force re-inversion") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Square g = random_spd(5, gen);
    const Vector a = gaussian_vector(5, gen);
    const Square direct = (g + a * a.transpose() / 0.3).inverse();
    const Square upd = rank_one_inverse_update(SymmetricInverse(g.inverse()), a, 0.3).matrix();
    CHECK(relative_frobenius(upd, direct) < 1e-10);
  }
}

TEST_CASE("negative definite update reports breakdown") {
  // g = -1 so 1 + g = 0
  Square gi = -Square::Identity(2, 2);
  CHECK_THROWS_AS(rank_one_inverse_update_inplace(gi, vec({1, 0}), 1.0), Error);
}

TEST_CASE("composed rank one updates track the accumulated gram") {
  std::mt19937_64 gen(17);
  const Index d = 20;
  Square g = random_spd(d, gen);
  Square gi = g.inverse();
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int k = 0; k < 10000; ++k) {
    const Vector a = gaussian_vector(d, gen);
    const double pt = u(gen);
    g += a * a.transpose() / pt;
    rank_one_inverse_update_inplace(gi, a, pt);
  }
  CHECK(relative_frobenius(gi, pseudo_inverse(g).matrix()) < 1e-8);
}

TEST_CASE("numerical rank and norms") {
  CHECK(numerical_rank(rows({{1, 1}, {2, 2}, {3, 3}})) == 1);
  CHECK(numerical_rank(Matrix::Identity(4, 4)) == 4);
  CHECK(lp_norm(vec({3, -4}), 2.0) == doctest::Approx(5.0));
  CHECK(lp_norm(vec({3, -4}), 1.0) == doctest::Approx(7.0));
  CHECK(lp_norm_pow(vec({3, -4}), 2.0) == doctest::Approx(25.0));
  CHECK(all_finite(vec({1, 2})));
  CHECK_FALSE(all_finite(vec({1, std::nan("")})));
}

TEST_CASE("parallel kernels agree with the serial reference") {
  std::mt19937_64 gen(23);
  for (Index n : {1, 255, 256, 257, 3000}) {
    const Matrix a = gaussian_matrix(n, 12, gen);
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& x : w) x = std::abs(gaussian_vector(1, gen)[0]);
    const Square par = kernels::weighted_gram(a, w);
    const Square ser = kernels::serial::weighted_gram(a, w);
    CHECK(relative_frobenius(par, ser) < 1e-13);
    CHECK(relative_frobenius(kernels::weighted_gram(a), gram(a)) < 1e-13);

    const Square m = random_spd(12, gen);
    std::vector<double> q1(w.size()), q2(w.size());
    kernels::row_quadratic_forms(a, m, q1);
    kernels::serial::row_quadratic_forms(a, m, q2);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(q1[i] == doctest::Approx(q2[i]).epsilon(1e-12));
  }
}
