#include "isvd/baseline.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace isvd {

double largestSingularValue(const Eigen::MatrixXd& M) {
  if (M.rows() == 0 || M.cols() == 0)
    throw std::invalid_argument("largestSingularValue: matrix is empty");
  if (!M.allFinite())
    throw std::invalid_argument("largestSingularValue: matrix has non-finite entries");
  if (std::min(M.rows(), M.cols()) <= 16) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
    return svd.singularValues()(0);
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
  return svd.singularValues()(0);
}

DenseChart::DenseChart(Eigen::MatrixXd sigma0, double lambda, double H)
    : sigma0_(std::move(sigma0)), lambda_(lambda), H_(H) {
  if (sigma0_.rows() < 1 || sigma0_.cols() < 1)
    throw std::invalid_argument("DenseChart: sigma0 must be nonempty");
  if (!sigma0_.allFinite())
    throw std::invalid_argument("DenseChart: sigma0 has non-finite entries");
  if (!(lambda_ > 0) || !(lambda_ <= 1))
    throw std::invalid_argument("DenseChart: lambda must lie in (0, 1]");
  if (std::isnan(H_) || H_ < 0)
    throw std::invalid_argument("DenseChart: H must be >= 0");
  D_ = Eigen::MatrixXd::Zero(sigma0_.rows(), sigma0_.cols());
}

ChartPoint DenseChart::step(const Subgroup& g) {
  if (g.x.rows() != D_.rows() || g.y.rows() != D_.cols())
    throw std::invalid_argument("DenseChart::step: subgroup dimensions do not match");
  if (g.x.cols() != g.y.cols() || g.x.cols() < 1)
    throw std::invalid_argument("DenseChart::step: paired streams must have equal, positive size");
  if (!g.x.allFinite() || !g.y.allFinite())
    throw std::invalid_argument("DenseChart::step: subgroup has non-finite entries");

  const double m = static_cast<double>(g.x.cols());
  D_ = (1.0 - lambda_) * D_ + (lambda_ / m) * (g.x * g.y.transpose()) - lambda_ * sigma0_;
  stat_ = largestSingularValue(D_);
  ++t_;
  return {t_, stat_, stat_ > H_};
}

}  // namespace isvd
