#pragma once

#include <Eigen/Core>

#include "isvd/model.hpp"
#include "isvd/monitor.hpp"

namespace isvd {

// Largest singular value via a dense SVD; 0 for an all-zero matrix.
double largestSingularValue(const Eigen::MatrixXd& M);

// Reference chart: the same EWMA recursion kept as an explicit dense matrix,
// with the statistic read off a full SVD each step. Exact but O(pq min(p,q))
// per step, so it is the correctness oracle and the timing baseline.
class DenseChart {
 public:
  DenseChart(Eigen::MatrixXd sigma0, double lambda, double H);

  ChartPoint step(const Subgroup& g);

  double statistic() const { return stat_; }
  long t() const { return t_; }
  const Eigen::MatrixXd& D() const { return D_; }

 private:
  Eigen::MatrixXd sigma0_, D_;
  double lambda_, H_;
  double stat_ = 0.0;
  long t_ = 0;
};

}  // namespace isvd
