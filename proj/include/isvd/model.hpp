#pragma once

#include <Eigen/Core>

#include <limits>
#include <optional>
#include <vector>

#include "isvd/rng.hpp"

namespace isvd {

// Sentinel for "the change never arrives".
inline constexpr long kNever = std::numeric_limits<long>::max();

// One shared latent factor: scale is the standard deviation of the factor
// score, u and v are the unit-norm patterns it imprints on the two streams.
struct LatentFactor {
  double scale = 1.0;
  Eigen::VectorXd u, v;
};

// Paired-stream generative model. Each observation pair is
//   x = meanX + sum_j z_j u_j + (z * u if the change is active) + noiseSdX * epsX
//   y = meanY + sum_j z_j v_j + (z * v if the change is active) + noiseSdY * epsY
// with z_j ~ N(0, scale_j^2), z ~ N(0, change.scale^2), and standard normal
// noise. The change becomes active at subgroup index changeTime.
struct ProcessModel {
  Eigen::Index p = 0, q = 0;
  Eigen::VectorXd meanX, meanY;  // empty means zero
  std::vector<LatentFactor> factors;
  double noiseSdX = 1.0, noiseSdY = 1.0;
  std::optional<LatentFactor> change;
  long changeTime = kNever;

  void validate() const;
};

// One time step worth of paired observations; column i of x pairs with
// column i of y.
struct Subgroup {
  long t = 0;
  Eigen::MatrixXd x;  // p x m
  Eigen::MatrixXd y;  // q x m
  Eigen::Index m() const { return x.cols(); }
};

// Uniform draw from the unit sphere in R^dim.
Eigen::VectorXd sampleUnitSphere(Eigen::Index dim, Seed seed);

// Unit vector orthogonal to w (dim >= 2), uniform on the orthogonal sphere.
Eigen::VectorXd makePerpendicular(const Eigen::VectorXd& w, Seed seed);

// m paired observations at subgroup index t. Draw order per pair: the factor
// scores, the change score (drawn whenever a change is configured, active or
// not, so pre- and post-change streams share noise), then the two noise
// vectors. Deterministic in (model, t, m, seed).
Subgroup sampleSubgroup(const ProcessModel& model, long t, Eigen::Index m, Seed seed);

// E[(x - meanX)(y - meanY)^T], with the change term included when
// postChange is set. Throws if postChange is set but no change is configured.
Eigen::MatrixXd trueCrossCovariance(const ProcessModel& model, bool postChange);

// Subgroup generator with per-step child seeds derived from one parent seed.
class ModelStream {
 public:
  ModelStream(ProcessModel model, Eigen::Index m, Seed seed);
  Subgroup operator()(long t) const;

 private:
  ProcessModel model_;
  Eigen::Index m_;
  Seed seed_;
};

}  // namespace isvd
