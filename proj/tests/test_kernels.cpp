#include "switchsafe/kernels.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace switchsafe;
using testutil::random_kernel;

namespace {

VectorXd v(std::initializer_list<double> xs) {
  VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out(i++) = x;
  return out;
}

CompositeKernel unit_kernel(int d, int m) {
  CompositeKernel k;
  for (int i = 0; i <= m; ++i) k.base.push_back(make_se(VectorXd::Ones(d), 1.0));
  return k;
}

} // namespace

TEST_CASE("base_eval closed form") {
  CHECK(base_eval(make_se(v({1}), 1.0), v({0}), v({0})) == 1.0);
  CHECK(base_eval(make_se(v({1}), 1.0), v({0}), v({1})) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(base_eval(make_se(v({2}), 4.0), v({0}), v({2})) == doctest::Approx(4.0 * std::exp(-0.5)).epsilon(1e-14));
  // ARD: each dimension scaled by its own lengthscale.
  const double expect = 2.5 * std::exp(-0.5 * ((1.0 / 0.5) * (1.0 / 0.5) + (3.0 / 3.0) * (3.0 / 3.0)));
  CHECK(base_eval(make_se(v({0.5, 3.0}), 2.5), v({1, 0}), v({0, 3})) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("base_eval rejects bad input") {
  CHECK_THROWS_AS(base_eval(make_se(v({1}), 1.0), v({0, 1}), v({0})), std::invalid_argument);
  CHECK_THROWS_AS(make_se(v({-1}), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_se(v({1}), 0.0), std::invalid_argument);
  CompositeKernel bad;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("base_eval at coincident points equals the signal variance exactly") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto k = random_kernel(rng, 3, 0);
    const VectorXd x = testutil::uniform(rng, 3, 1, -5, 5);
    CHECK(base_eval(k.base[0], x, x) == k.base[0].signal_variance);
  }
}

TEST_CASE("composite_eval with selectors and hand expansion") {
  const CompositeKernel k = unit_kernel(1, 1);
  const VectorXd x = v({0.3});
  CHECK(composite_eval(k, x, v({1, 0}), x, v({1, 0})) == doctest::Approx(1.0));
  CHECK(composite_eval(k, x, v({1, 0}), x, v({0, 1})) == 0.0);
  CHECK(composite_eval(k, x, v({1, 2}), x, v({1, 3})) == doctest::Approx(7.0));
  CHECK_THROWS_AS(composite_eval(k, x, v({1, 2, 3}), x, v({1, 3})), std::invalid_argument);
}

TEST_CASE("composite_eval symmetry and selector reproduction") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const auto k = random_kernel(rng, 2, 2);
    const VectorXd x = testutil::uniform(rng, 2, 1, -3, 3), xp = testutil::uniform(rng, 2, 1, -3, 3);
    const VectorXd y = testutil::uniform(rng, 3, 1, -5, 5), yp = testutil::uniform(rng, 3, 1, -5, 5);
    CHECK(composite_eval(k, x, y, xp, yp) == doctest::Approx(composite_eval(k, xp, yp, x, y)).epsilon(1e-14));
    for (int i = 0; i < 3; ++i) {
      const VectorXd e = VectorXd::Unit(3, i);
      CHECK(std::abs(composite_eval(k, x, e, xp, e) - base_eval(k.base[i], x, xp)) <= 1e-12);
    }
  }
}

TEST_CASE("augment prepends exactly one") {
  const VectorXd y = augment(v({-4.5, 2.0}));
  CHECK(y.size() == 3);
  CHECK(y(0) == 1.0);
  CHECK(y(1) == -4.5);
  CHECK(y(2) == 2.0);
}

TEST_CASE("gram is symmetric and matches pointwise evaluation") {
  std::mt19937_64 rng(5);
  const auto k = random_kernel(rng, 2, 1);
  const MatrixXd X = testutil::uniform(rng, 2, 30, -2, 2);
  const MatrixXd Y = testutil::augmented(rng, 1, 30, -3, 3);
  const MatrixXd K = gram(k, X, Y);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 30; i += 7)
    for (int j = 0; j < 30; j += 5)
      CHECK(K(i, j) == doctest::Approx(composite_eval(k, X.col(i), Y.col(i), X.col(j), Y.col(j))).epsilon(1e-15));

  const MatrixXd K1 = gram(k, X.leftCols(1), Y.leftCols(1));
  REQUIRE(K1.rows() == 1);
  CHECK(K1(0, 0) == doctest::Approx(composite_eval(k, X.col(0), Y.col(0), X.col(0), Y.col(0))));
  CHECK_THROWS_AS(gram(k, X, Y.leftCols(3)), std::invalid_argument);
}

TEST_CASE("gram on ACC-range points is positive semidefinite") {
  std::mt19937_64 rng(21);
  for (int seed = 0; seed < 20; ++seed) {
    CompositeKernel k;
    k.base.push_back(make_se(v({testutil::draw(rng, 5, 100), testutil::draw(rng, 1, 10)}), testutil::draw(rng, 0.1, 10)));
    k.base.push_back(make_se(v({testutil::draw(rng, 5, 100), testutil::draw(rng, 1, 10)}), testutil::draw(rng, 1e-8, 1e-6)));
    MatrixXd X(2, 100);
    X.row(0) = testutil::uniform(rng, 1, 100, 0, 700);
    X.row(1) = testutil::uniform(rng, 1, 100, 0, 30);
    const MatrixXd Y = testutil::augmented(rng, 1, 100, -2e4, 2e4);
    const MatrixXd K = gram(k, X, Y);
    const double lmin = Eigen::SelfAdjointEigenSolver<MatrixXd>(K, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    CHECK(lmin >= -1e-8 * K.trace() / 100.0);
  }
}

TEST_CASE("cross_matrix columns") {
  const CompositeKernel k = unit_kernel(1, 1);
  MatrixXd X(1, 2);
  X << 0.0, 1.0;
  MatrixXd Y(2, 2);
  Y << 1.0, 1.0,
       0.0, 1.0;
  const MatrixXd Kb = cross_matrix(k, v({1.0}), X, Y);
  REQUIRE(Kb.rows() == 2);
  REQUIRE(Kb.cols() == 2);
  CHECK(Kb(0, 0) == doctest::Approx(std::exp(-0.5)));
  CHECK(Kb(1, 0) == 0.0);
  CHECK(Kb(0, 1) == doctest::Approx(1.0));
  CHECK(Kb(1, 1) == doctest::Approx(1.0));

  const MatrixXd empty = cross_matrix(k, v({1.0}), MatrixXd(1, 0), MatrixXd(2, 0));
  CHECK(empty.rows() == 2);
  CHECK(empty.cols() == 0);
  CHECK_THROWS_AS(cross_matrix(k, v({1.0, 2.0}), X, Y), std::invalid_argument);
}
