#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "isvd/baseline.hpp"

#include <Eigen/Eigenvalues>

#include "helpers.hpp"

namespace {

// Independent oracle: the largest singular value is the square root of the
// top eigenvalue of the Gram matrix.
double gramTopSingularValue(const Eigen::MatrixXd& M) {
  const Eigen::MatrixXd gram =
      M.rows() <= M.cols() ? Eigen::MatrixXd(M * M.transpose()) : Eigen::MatrixXd(M.transpose() * M);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

}  // namespace

TEST_CASE("largest singular value on known matrices") {
  CHECK(isvd::largestSingularValue(Eigen::MatrixXd::Zero(3, 5)) == 0.0);

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(4, 3);
  M(0, 0) = 3.0;
  M(1, 1) = 1.0;
  CHECK(isvd::largestSingularValue(M) == doctest::Approx(3.0).epsilon(1e-14));

  // Rank one: singular value is the product of the factor norms.
  const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(6, 1.0, 6.0);
  const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(4, -2.0, 1.0);
  CHECK(isvd::largestSingularValue(a * b.transpose()) ==
        doctest::Approx(a.norm() * b.norm()).epsilon(1e-12));

  CHECK_THROWS_AS(isvd::largestSingularValue(Eigen::MatrixXd(0, 3)), std::invalid_argument);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(isvd::largestSingularValue(bad), std::invalid_argument);
}

TEST_CASE("largest singular value agrees with a Gram eigenvalue oracle") {
  std::mt19937_64 eng(404);
  for (int rep = 0; rep < 40; ++rep) {
    // Cover both code paths: small dimensions use Jacobi, larger ones BDC.
    const Eigen::Index rows = 2 + static_cast<Eigen::Index>(eng() % 40);
    const Eigen::Index cols = 2 + static_cast<Eigen::Index>(eng() % 40);
    const Eigen::MatrixXd M = testutil::randomMatrix(rows, cols, eng);
    const double want = gramTopSingularValue(M);
    CHECK(isvd::largestSingularValue(M) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("dense chart first step from a cold start") {
  // D_1 = (1-lambda) * 0 + (lambda/m) X Y^T - lambda Sigma0.
  const double lambda = 0.5;
  Eigen::MatrixXd sigma0 = Eigen::MatrixXd::Zero(3, 4);

  isvd::DenseChart chart(sigma0, lambda, 1.0);
  isvd::Subgroup g;
  g.t = 1;
  g.x = Eigen::MatrixXd::Zero(3, 1);
  g.y = Eigen::MatrixXd::Zero(4, 1);
  g.x(0, 0) = 2.0;
  g.y(1, 0) = 3.0;

  const isvd::ChartPoint point = chart.step(g);
  CHECK(point.t == 1);
  CHECK(point.statistic == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(point.alarm);
  CHECK(chart.D()(0, 1) == doctest::Approx(3.0).epsilon(1e-14));

  // Nonzero sigma0 enters with weight lambda.
  Eigen::MatrixXd sigma1 = Eigen::MatrixXd::Constant(3, 4, 0.25);
  isvd::DenseChart chart2(sigma1, lambda, 100.0);
  const isvd::ChartPoint p2 = chart2.step(g);
  const Eigen::MatrixXd want =
      lambda * (g.x * g.y.transpose()) - lambda * sigma1;
  CHECK(testutil::relFrob(chart2.D(), want) < 1e-14);
  CHECK_FALSE(p2.alarm);
}

TEST_CASE("dense chart recursion matches a hand-rolled loop") {
  std::mt19937_64 eng(512);
  const Eigen::Index p = 5, q = 7, m = 3;
  const double lambda = 0.2;
  const Eigen::MatrixXd sigma0 = testutil::randomMatrix(p, q, eng);

  isvd::DenseChart chart(sigma0, lambda, 10.0);
  Eigen::MatrixXd manual = Eigen::MatrixXd::Zero(p, q);
  for (long t = 1; t <= 30; ++t) {
    isvd::Subgroup g;
    g.t = t;
    g.x = testutil::randomMatrix(p, m, eng);
    g.y = testutil::randomMatrix(q, m, eng);
    chart.step(g);
    manual = (1.0 - lambda) * manual +
             lambda * ((g.x * g.y.transpose()) / double(m) - sigma0);
    CHECK(testutil::relFrob(chart.D(), manual) < 1e-13);
    CHECK(chart.statistic() == doctest::Approx(gramTopSingularValue(manual)).epsilon(1e-10));
  }
  CHECK(chart.t() == 30);
}

TEST_CASE("dense chart validates construction and subgroups") {
  Eigen::MatrixXd sigma0 = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(isvd::DenseChart(sigma0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(isvd::DenseChart(sigma0, 1.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(isvd::DenseChart(sigma0, 0.5, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(isvd::DenseChart(Eigen::MatrixXd(0, 2), 0.5, 1.0), std::invalid_argument);

  isvd::DenseChart chart(sigma0, 0.5, 1.0);
  isvd::Subgroup g;
  g.x = Eigen::MatrixXd::Zero(3, 1);  // wrong p
  g.y = Eigen::MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(chart.step(g), std::invalid_argument);
  g.x = Eigen::MatrixXd::Zero(2, 2);  // mismatched m
  CHECK_THROWS_AS(chart.step(g), std::invalid_argument);
}

TEST_CASE("alarm fires exactly above H") {
  Eigen::MatrixXd sigma0 = Eigen::MatrixXd::Zero(2, 2);
  isvd::DenseChart chart(sigma0, 1.0, 6.0 + 1e-9);
  isvd::Subgroup g;
  g.t = 1;
  g.x = Eigen::MatrixXd::Zero(2, 1);
  g.y = Eigen::MatrixXd::Zero(2, 1);
  g.x(0, 0) = 2.0;
  g.y(0, 0) = 3.0;
  // The statistic is 6; the alarm rule is strictly greater than H.
  CHECK_FALSE(chart.step(g).alarm);

  isvd::DenseChart tight(sigma0, 1.0, 5.9999);
  CHECK(tight.step(g).alarm);
}
