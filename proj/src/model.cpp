#include "isvd/model.hpp"

#include <cmath>
#include <stdexcept>

namespace isvd {

namespace {

void checkFactor(const LatentFactor& f, Eigen::Index p, Eigen::Index q, const char* what) {
  if (f.u.size() != p || f.v.size() != q)
    throw std::invalid_argument(std::string(what) + ": pattern dimensions do not match the model");
  if (!(f.scale > 0) || !std::isfinite(f.scale))
    throw std::invalid_argument(std::string(what) + ": scale must be positive and finite");
  if (std::abs(f.u.norm() - 1.0) > 1e-12 || std::abs(f.v.norm() - 1.0) > 1e-12)
    throw std::invalid_argument(std::string(what) + ": patterns must have unit norm");
}

}  // namespace

void ProcessModel::validate() const {
  if (p < 1 || q < 1)
    throw std::invalid_argument("ProcessModel: dimensions must be positive");
  if (meanX.size() != 0 && meanX.size() != p)
    throw std::invalid_argument("ProcessModel: meanX has wrong dimension");
  if (meanY.size() != 0 && meanY.size() != q)
    throw std::invalid_argument("ProcessModel: meanY has wrong dimension");
  if (!(noiseSdX >= 0) || !(noiseSdY >= 0) || !std::isfinite(noiseSdX) || !std::isfinite(noiseSdY))
    throw std::invalid_argument("ProcessModel: noise levels must be nonnegative and finite");
  for (const auto& f : factors) checkFactor(f, p, q, "ProcessModel factor");
  if (change) checkFactor(*change, p, q, "ProcessModel change");
  if (changeTime < 1)
    throw std::invalid_argument("ProcessModel: changeTime must be >= 1");
}

Eigen::VectorXd sampleUnitSphere(Eigen::Index dim, Seed seed) {
  if (dim < 1) throw std::invalid_argument("sampleUnitSphere: dim must be positive");
  auto eng = makeEngine(seed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd w(dim);
  double norm = 0;
  // Redraw on (astronomically unlikely) underflow of the norm.
  do {
    for (Eigen::Index i = 0; i < dim; ++i) w(i) = gauss(eng);
    norm = w.norm();
  } while (norm < 1e-150);
  return w / norm;
}

Eigen::VectorXd makePerpendicular(const Eigen::VectorXd& w, Seed seed) {
  const Eigen::Index dim = w.size();
  if (dim < 2)
    throw std::invalid_argument("makePerpendicular: need dimension >= 2");
  if (std::abs(w.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("makePerpendicular: w must have unit norm");
  Eigen::VectorXd g;
  double norm = 0;
  for (Seed attempt = 0;; ++attempt) {
    g = sampleUnitSphere(dim, deriveSeed(seed, "perp", attempt));
    g -= w.dot(g) * w;
    norm = g.norm();
    if (norm > 1e-8) break;
  }
  return g / norm;
}

Subgroup sampleSubgroup(const ProcessModel& model, long t, Eigen::Index m, Seed seed) {
  model.validate();
  if (m < 1) throw std::invalid_argument("sampleSubgroup: subgroup size must be positive");
  if (t < 1) throw std::invalid_argument("sampleSubgroup: subgroup index must be >= 1");

  auto eng = makeEngine(seed);
  std::normal_distribution<double> gauss;
  const bool active = model.change.has_value() && t >= model.changeTime;

  Subgroup g;
  g.t = t;
  g.x.resize(model.p, m);
  g.y.resize(model.q, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    auto x = g.x.col(i);
    auto y = g.y.col(i);
    x.setZero();
    y.setZero();
    if (model.meanX.size()) x = model.meanX;
    if (model.meanY.size()) y = model.meanY;
    for (const auto& f : model.factors) {
      const double z = f.scale * gauss(eng);
      x += z * f.u;
      y += z * f.v;
    }
    if (model.change) {
      const double z = model.change->scale * gauss(eng);
      if (active) {
        x += z * model.change->u;
        y += z * model.change->v;
      }
    }
    for (Eigen::Index j = 0; j < model.p; ++j) x(j) += model.noiseSdX * gauss(eng);
    for (Eigen::Index j = 0; j < model.q; ++j) y(j) += model.noiseSdY * gauss(eng);
  }
  return g;
}

Eigen::MatrixXd trueCrossCovariance(const ProcessModel& model, bool postChange) {
  model.validate();
  if (postChange && !model.change)
    throw std::invalid_argument("trueCrossCovariance: model has no change configured");
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(model.p, model.q);
  for (const auto& f : model.factors)
    sigma.noalias() += (f.scale * f.scale) * f.u * f.v.transpose();
  if (postChange)
    sigma.noalias() += (model.change->scale * model.change->scale) *
                       model.change->u * model.change->v.transpose();
  return sigma;
}

ModelStream::ModelStream(ProcessModel model, Eigen::Index m, Seed seed)
    : model_(std::move(model)), m_(m), seed_(seed) {
  model_.validate();
  if (m_ < 1) throw std::invalid_argument("ModelStream: subgroup size must be positive");
}

Subgroup ModelStream::operator()(long t) const {
  return sampleSubgroup(model_, t, m_, deriveSeed(seed_, "subgroup", static_cast<Seed>(t)));
}

}  // namespace isvd
