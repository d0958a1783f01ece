#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <random>

#include "isvd/factored_matrix.hpp"

// Shared test utilities: dense reference decompositions and seeded random
// inputs. Everything here is independent of the incremental code paths it
// checks.
namespace testutil {

struct DenseSvd {
  Eigen::VectorXd S;
  Eigen::MatrixXd U, V;
};

inline DenseSvd denseSvd(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.singularValues(), svd.matrixU(), svd.matrixV()};
}

inline double relFrob(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  return (got - want).norm() / std::max(want.norm(), 1.0);
}

inline Eigen::MatrixXd randomMatrix(Eigen::Index p, Eigen::Index q, std::mt19937_64& eng) {
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd M(p, q);
  for (Eigen::Index j = 0; j < q; ++j)
    for (Eigen::Index i = 0; i < p; ++i) M(i, j) = gauss(eng);
  return M;
}

inline Eigen::VectorXd randomVector(Eigen::Index n, std::mt19937_64& eng) {
  std::normal_distribution<double> gauss;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = gauss(eng);
  return v;
}

// Exact factored form of a dense matrix, with the same floor and sign
// conventions the incremental code maintains.
inline isvd::FactoredMatrix<double> fromDense(const Eigen::MatrixXd& M) {
  DenseSvd ref = denseSvd(M);
  const double floor = isvd::kSingularValueFloor * std::max(ref.S.size() ? ref.S(0) : 0.0, 1.0);
  Eigen::Index k = 0;
  while (k < ref.S.size() && ref.S(k) > floor) ++k;
  isvd::FactoredMatrix<double> F;
  F.U = ref.U.leftCols(k);
  F.S = ref.S.head(k);
  F.V = ref.V.leftCols(k);
  isvd::detail::applySignConvention(F.U, F.V);
  return F;
}

// Largest deviation from the chart invariants: orthonormal factors, a
// nonincreasing positive spectrum, and the U-column sign convention.
inline bool invariantsHold(const isvd::FactoredMatrix<double>& F, double driftTol = 1e-10) {
  if (isvd::orthogonalityDrift(F) > driftTol) return false;
  for (Eigen::Index i = 0; i < F.rank(); ++i) {
    if (!(F.S(i) > 0)) return false;
    if (i > 0 && F.S(i) > F.S(i - 1)) return false;
  }
  for (Eigen::Index j = 0; j < F.U.cols(); ++j) {
    for (Eigen::Index i = 0; i < F.U.rows(); ++i) {
      if (F.U(i, j) == 0) continue;
      if (F.U(i, j) < 0) return false;
      break;
    }
  }
  return true;
}

}  // namespace testutil
