#pragma once

#include <Eigen/Core>

#include <vector>

#include "isvd/factored_matrix.hpp"
#include "isvd/model.hpp"

namespace isvd {

// Chart parameters. lambda is the EWMA weight on the newest subgroup, r the
// maximal retained rank, H the control limit (may be +inf while simulating
// paths), m the nominal subgroup size.
struct MonitorConfig {
  double lambda = 0.02;
  int r = 5;
  double H = 0.0;
  int m = 5;

  void validate() const;
};

// In-control cross-covariance in factored form: sum_j weight_j * u_j v_j^T
// with positive weights and unit-norm patterns. The components need not be
// mutually orthogonal; any rank-one decomposition works.
struct Sigma0Component {
  double weight = 1.0;
  Eigen::VectorXd u, v;
};

struct Sigma0Factors {
  std::vector<Sigma0Component> components;

  Eigen::Index count() const { return static_cast<Eigen::Index>(components.size()); }
  void validate(Eigen::Index p, Eigen::Index q) const;
};

// Dense sum of the components.
Eigen::MatrixXd sigma0Dense(const Sigma0Factors& sigma0, Eigen::Index p, Eigen::Index q);

// The model's own factors reused as the subtraction components.
Sigma0Factors sigma0FromModel(const ProcessModel& model);

struct ChartPoint {
  long t = 0;
  double statistic = 0.0;
  bool alarm = false;
};

// EWMA chart on the cross-covariance shift, maintained in factored thin-SVD
// form. Each step folds the new subgroup and the in-control subtraction into
// the factors through rank-one updates, rescales, truncates to rank r, and
// reads the largest singular value as the chart statistic.
class Monitor {
 public:
  Monitor(Sigma0Factors sigma0, MonitorConfig config, Eigen::Index p, Eigen::Index q);

  // Restores a snapshot; used by serialization.
  Monitor(Sigma0Factors sigma0, MonitorConfig config, FactoredMatrix<double> state, long t);

  ChartPoint step(const Subgroup& g);

  double statistic() const { return D_.rank() ? D_.S(0) : 0.0; }
  long t() const { return t_; }

  // Rank-one updates folded in since the last reorthonormalization pass.
  int updateCount() const { return D_.updatesSinceRenorm; }
  Eigen::Index p() const { return D_.rows(); }
  Eigen::Index q() const { return D_.cols(); }
  const FactoredMatrix<double>& factored() const { return D_; }
  const MonitorConfig& config() const { return config_; }
  const Sigma0Factors& sigma0() const { return sigma0_; }

 private:
  void cacheSubtraction();

  FactoredMatrix<double> D_;
  MonitorConfig config_;
  Sigma0Factors sigma0_;
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> subtraction_;
  long t_ = 0;
};

}  // namespace isvd
