#pragma once

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <type_traits>
#include <utility>

namespace isvd {

// Residual components below this fraction of the update vector's norm are
// treated as lying inside the current column space.
inline constexpr double kResidualRelTol = 1e-12;

// Singular values at or below kSingularValueFloor * max(S[0], 1) are dropped.
inline constexpr double kSingularValueFloor = 1e-14;

// Orthogonality drift above this triggers an immediate renormalization.
inline constexpr double kDriftTol = 1e-10;

// Rank-one updates between scheduled renormalization passes.
inline constexpr int kRenormCadence = 128;

// Thin SVD triple U * diag(S) * V^T of a p-by-q matrix of rank k <= min(p, q).
// Invariants: U and V have orthonormal columns, S is positive and
// nonincreasing, and the first nonzero entry of each U column is nonnegative.
// Rank zero is a valid state and stands for the zero matrix.
template <typename Scalar>
struct FactoredMatrix {
  static_assert(std::is_floating_point_v<Scalar>);
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix U;  // p x k
  Vector S;  // k, nonincreasing
  Matrix V;  // q x k
  int updatesSinceRenorm = 0;

  Eigen::Index rows() const { return U.rows(); }
  Eigen::Index cols() const { return V.rows(); }
  Eigen::Index rank() const { return S.size(); }

  static FactoredMatrix Zero(Eigen::Index p, Eigen::Index q) {
    if (p < 1 || q < 1)
      throw std::invalid_argument("FactoredMatrix::Zero: dimensions must be positive");
    FactoredMatrix F;
    F.U.resize(p, 0);
    F.S.resize(0);
    F.V.resize(q, 0);
    return F;
  }
};

// The small system whose dense SVD carries one rank-one update. With
// k = rank(F), K is (k+1)x(k+1):
//   K = [diag(S) 0; 0 0] + [projA; etaNorm] * [projB; xiNorm]^T
// where eta = a - U*projA and xi = b - V*projB are the residuals of the
// update pair against the current column spaces. Norms below the residual
// tolerance are zeroed along with the corresponding residual vector.
template <typename Scalar>
struct UpdateCore {
  using Matrix = typename FactoredMatrix<Scalar>::Matrix;
  using Vector = typename FactoredMatrix<Scalar>::Vector;

  Vector a, b;
  Vector projA, projB;  // U^T a and V^T b as used in K
  Vector eta, xi;       // residuals; zeroed when their norm is below tolerance
  Scalar etaNorm = 0, xiNorm = 0;
  Matrix K;
};

namespace detail {

template <typename Scalar>
void checkUpdatePair(const FactoredMatrix<Scalar>& F,
                     const typename FactoredMatrix<Scalar>::Vector& a,
                     const typename FactoredMatrix<Scalar>::Vector& b,
                     const char* who) {
  if (a.size() != F.rows() || b.size() != F.cols())
    throw std::invalid_argument(std::string(who) + ": update pair has wrong dimensions");
  if (!a.allFinite() || !b.allFinite())
    throw std::invalid_argument(std::string(who) + ": update pair has non-finite entries");
}

// Flip column signs so the first nonzero entry of each U column is
// nonnegative; V follows so the product is unchanged.
template <typename Matrix>
void applySignConvention(Matrix& U, Matrix& V) {
  for (Eigen::Index j = 0; j < U.cols(); ++j) {
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
      if (U(i, j) == 0) continue;
      if (U(i, j) < 0) {
        U.col(j) = -U.col(j);
        V.col(j) = -V.col(j);
      }
      break;
    }
  }
}

// Number of leading singular values kept after flooring, capped at maxRank.
template <typename Vector>
Eigen::Index keptRank(const Vector& sv, Eigen::Index maxRank) {
  using Scalar = typename Vector::Scalar;
  if (sv.size() == 0) return 0;
  const Scalar floor = Scalar(kSingularValueFloor) * std::max<Scalar>(sv(0), Scalar(1));
  Eigen::Index k = 0;
  while (k < sv.size() && sv(k) > floor) ++k;
  return std::min(k, maxRank);
}

}  // namespace detail

template <typename Scalar>
UpdateCore<Scalar> makeUpdateCore(const FactoredMatrix<Scalar>& F,
                                  const typename FactoredMatrix<Scalar>::Vector& a,
                                  const typename FactoredMatrix<Scalar>::Vector& b) {
  detail::checkUpdatePair(F, a, b, "makeUpdateCore");
  const Eigen::Index k = F.rank();

  UpdateCore<Scalar> core;
  core.a = a;
  core.b = b;

  // Two projection passes keep the residual orthogonal to the column space
  // even when the factors carry mild drift; the correction folds back into
  // the projection so a = U*projA + eta holds to rounding.
  core.projA = F.U.transpose() * a;
  core.eta = a - F.U * core.projA;
  if (k > 0) {
    typename FactoredMatrix<Scalar>::Vector fix = F.U.transpose() * core.eta;
    core.eta -= F.U * fix;
    core.projA += fix;
  }
  core.etaNorm = core.eta.norm();
  if (core.etaNorm <= Scalar(kResidualRelTol) * a.norm()) {
    core.etaNorm = 0;
    core.eta.setZero();
  }

  core.projB = F.V.transpose() * b;
  core.xi = b - F.V * core.projB;
  if (k > 0) {
    typename FactoredMatrix<Scalar>::Vector fix = F.V.transpose() * core.xi;
    core.xi -= F.V * fix;
    core.projB += fix;
  }
  core.xiNorm = core.xi.norm();
  if (core.xiNorm <= Scalar(kResidualRelTol) * b.norm()) {
    core.xiNorm = 0;
    core.xi.setZero();
  }

  core.K.setZero(k + 1, k + 1);
  core.K.diagonal().head(k) = F.S;
  typename FactoredMatrix<Scalar>::Vector lhs(k + 1), rhs(k + 1);
  lhs << core.projA, core.etaNorm;
  rhs << core.projB, core.xiNorm;
  core.K.noalias() += lhs * rhs.transpose();
  return core;
}

template <typename Scalar>
FactoredMatrix<Scalar> reorthonormalized(FactoredMatrix<Scalar> F);

// F + a * b^T, restored to thin-SVD form. Zero a or b is a no-op. The rank
// grows by at most one and never exceeds min(p, q); singular values below
// the floor are dropped.
template <typename Scalar>
FactoredMatrix<Scalar> rankOneUpdate(FactoredMatrix<Scalar> F,
                                     const typename FactoredMatrix<Scalar>::Vector& a,
                                     const typename FactoredMatrix<Scalar>::Vector& b) {
  using Matrix = typename FactoredMatrix<Scalar>::Matrix;
  detail::checkUpdatePair(F, a, b, "rankOneUpdate");
  if (a.isZero(0) || b.isZero(0)) return F;

  const Eigen::Index k = F.rank();
  const UpdateCore<Scalar> core = makeUpdateCore(F, a, b);

  Eigen::JacobiSVD<Matrix> svd(core.K, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Eigen::Index kept = detail::keptRank(sv, std::min(F.rows(), F.cols()));

  Matrix Unew(F.rows(), kept);
  Unew.noalias() = F.U * svd.matrixU().topLeftCorner(k, kept);
  if (core.etaNorm > 0)
    Unew.noalias() += (core.eta / core.etaNorm) * svd.matrixU().bottomRows(1).leftCols(kept);

  Matrix Vnew(F.cols(), kept);
  Vnew.noalias() = F.V * svd.matrixV().topLeftCorner(k, kept);
  if (core.xiNorm > 0)
    Vnew.noalias() += (core.xi / core.xiNorm) * svd.matrixV().bottomRows(1).leftCols(kept);

  detail::applySignConvention(Unew, Vnew);
  F.U = std::move(Unew);
  F.S = sv.head(kept);
  F.V = std::move(Vnew);

  if (++F.updatesSinceRenorm >= kRenormCadence) F = reorthonormalized(std::move(F));
  return F;
}

// Multiplies the represented matrix by c > 0; only S changes.
template <typename Scalar>
FactoredMatrix<Scalar> scaled(FactoredMatrix<Scalar> F, Scalar c) {
  if (!(c > 0) || !std::isfinite(c))
    throw std::invalid_argument("scaled: factor must be positive and finite");
  F.S *= c;
  return F;
}

// Keeps at most the r leading components.
template <typename Scalar>
FactoredMatrix<Scalar> truncated(FactoredMatrix<Scalar> F, Eigen::Index r) {
  if (r < 1) throw std::invalid_argument("truncated: rank bound must be positive");
  if (F.rank() > r) {
    F.U.conservativeResize(Eigen::NoChange, r);
    F.S.conservativeResize(r);
    F.V.conservativeResize(Eigen::NoChange, r);
  }
  return F;
}

template <typename Scalar>
typename FactoredMatrix<Scalar>::Matrix reconstruct(const FactoredMatrix<Scalar>& F) {
  if (F.rank() == 0)
    return FactoredMatrix<Scalar>::Matrix::Zero(F.rows(), F.cols());
  return F.U * F.S.asDiagonal() * F.V.transpose();
}

// Max deviation of U^T U and V^T V from the identity.
template <typename Scalar>
Scalar orthogonalityDrift(const FactoredMatrix<Scalar>& F) {
  if (F.rank() == 0) return 0;
  const Eigen::Index k = F.rank();
  using Matrix = typename FactoredMatrix<Scalar>::Matrix;
  const Matrix I = Matrix::Identity(k, k);
  const Scalar du = (F.U.transpose() * F.U - I).cwiseAbs().maxCoeff();
  const Scalar dv = (F.V.transpose() * F.V - I).cwiseAbs().maxCoeff();
  return std::max(du, dv);
}

// Restores orthonormality after accumulated drift: QR of both factors and a
// dense SVD of the k-by-k middle term. Resets the renormalization counter.
template <typename Scalar>
FactoredMatrix<Scalar> reorthonormalized(FactoredMatrix<Scalar> F) {
  using Matrix = typename FactoredMatrix<Scalar>::Matrix;
  const Eigen::Index k = F.rank();
  F.updatesSinceRenorm = 0;
  if (k == 0) return F;

  Eigen::HouseholderQR<Matrix> qrU(F.U);
  Eigen::HouseholderQR<Matrix> qrV(F.V);
  const Matrix Qu = qrU.householderQ() * Matrix::Identity(F.rows(), k);
  const Matrix Qv = qrV.householderQ() * Matrix::Identity(F.cols(), k);
  const Matrix Ru = qrU.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  const Matrix Rv = qrV.matrixQR().topRows(k).template triangularView<Eigen::Upper>();

  const Matrix C = Ru * F.S.asDiagonal() * Rv.transpose();
  Eigen::JacobiSVD<Matrix> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Eigen::Index kept = detail::keptRank(sv, k);

  Matrix Unew = Qu * svd.matrixU().leftCols(kept);
  Matrix Vnew = Qv * svd.matrixV().leftCols(kept);
  detail::applySignConvention(Unew, Vnew);
  F.U = std::move(Unew);
  F.S = sv.head(kept);
  F.V = std::move(Vnew);
  return F;
}

}  // namespace isvd
