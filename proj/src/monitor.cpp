#include "isvd/monitor.hpp"

#include <cmath>
#include <stdexcept>

namespace isvd {

void MonitorConfig::validate() const {
  if (!(lambda > 0) || !(lambda <= 1) || !std::isfinite(lambda))
    throw std::invalid_argument("MonitorConfig: lambda must lie in (0, 1]");
  if (r < 1) throw std::invalid_argument("MonitorConfig: r must be >= 1");
  if (m < 1) throw std::invalid_argument("MonitorConfig: m must be >= 1");
  if (std::isnan(H) || H < 0)
    throw std::invalid_argument("MonitorConfig: H must be >= 0");
}

void Sigma0Factors::validate(Eigen::Index p, Eigen::Index q) const {
  for (const auto& c : components) {
    if (c.u.size() != p || c.v.size() != q)
      throw std::invalid_argument("Sigma0Factors: component dimensions do not match");
    if (!(c.weight > 0) || !std::isfinite(c.weight))
      throw std::invalid_argument("Sigma0Factors: weights must be positive and finite");
    if (std::abs(c.u.norm() - 1.0) > 1e-12 || std::abs(c.v.norm() - 1.0) > 1e-12)
      throw std::invalid_argument("Sigma0Factors: patterns must have unit norm");
  }
}

Eigen::MatrixXd sigma0Dense(const Sigma0Factors& sigma0, Eigen::Index p, Eigen::Index q) {
  sigma0.validate(p, q);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, q);
  for (const auto& c : sigma0.components) out.noalias() += c.weight * c.u * c.v.transpose();
  return out;
}

Sigma0Factors sigma0FromModel(const ProcessModel& model) {
  model.validate();
  Sigma0Factors out;
  out.components.reserve(model.factors.size());
  for (const auto& f : model.factors)
    out.components.push_back({f.scale * f.scale, f.u, f.v});
  return out;
}

Monitor::Monitor(Sigma0Factors sigma0, MonitorConfig config, Eigen::Index p, Eigen::Index q)
    : D_(FactoredMatrix<double>::Zero(p, q)),
      config_(config),
      sigma0_(std::move(sigma0)) {
  config_.validate();
  sigma0_.validate(p, q);
  cacheSubtraction();
}

Monitor::Monitor(Sigma0Factors sigma0, MonitorConfig config, FactoredMatrix<double> state, long t)
    : D_(std::move(state)), config_(config), sigma0_(std::move(sigma0)), t_(t) {
  config_.validate();
  sigma0_.validate(D_.rows(), D_.cols());
  if (t_ < 0) throw std::invalid_argument("Monitor: subgroup counter must be nonnegative");
  cacheSubtraction();
}

void Monitor::cacheSubtraction() {
  subtraction_.clear();
  subtraction_.reserve(sigma0_.components.size());
  for (const auto& c : sigma0_.components) {
    const double s = std::sqrt(c.weight);
    subtraction_.emplace_back(s * c.u, -s * c.v);
  }
}

ChartPoint Monitor::step(const Subgroup& g) {
  if (g.x.rows() != p() || g.y.rows() != q())
    throw std::invalid_argument("Monitor::step: subgroup dimensions do not match");
  if (g.x.cols() != g.y.cols() || g.x.cols() < 1)
    throw std::invalid_argument("Monitor::step: paired streams must have equal, positive size");
  if (!g.x.allFinite() || !g.y.allFinite())
    throw std::invalid_argument("Monitor::step: subgroup has non-finite entries");

  const double lam = config_.lambda;
  const Eigen::Index m = g.x.cols();

  // Pre-scale so that after the raw updates and the 1/m rescale, the old
  // state carries weight (1 - lambda)/lambda; the final scale by lambda
  // restores the EWMA recursion. lambda = 1 degenerates to a fresh start.
  if (lam == 1.0)
    D_ = FactoredMatrix<double>::Zero(p(), q());
  else
    D_ = scaled(std::move(D_), static_cast<double>(m) * (1.0 - lam) / lam);

  for (Eigen::Index i = 0; i < m; ++i)
    D_ = rankOneUpdate(std::move(D_), g.x.col(i), g.y.col(i));
  D_ = scaled(std::move(D_), 1.0 / static_cast<double>(m));
  for (const auto& [a, b] : subtraction_)
    D_ = rankOneUpdate(std::move(D_), a, b);
  D_ = truncated(scaled(std::move(D_), lam), config_.r);
  if (orthogonalityDrift(D_) > kDriftTol) D_ = reorthonormalized(std::move(D_));

  ++t_;
  const double T = statistic();
  return {t_, T, T > config_.H};
}

}  // namespace isvd
