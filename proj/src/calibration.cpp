#include "isvd/calibration.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace isvd {

const char* methodName(ChartMethod method) {
  return method == ChartMethod::Isvd ? "isvd" : "baseline";
}

long CalibrationSpec::effectiveMaxRunLength() const {
  if (maxRunLength > 0) return maxRunLength;
  return static_cast<long>(std::ceil(10.0 * targetArl0));
}

void CalibrationSpec::validate() const {
  if (!(targetArl0 > 1) || !std::isfinite(targetArl0))
    throw std::invalid_argument("CalibrationSpec: targetArl0 must exceed 1");
  if (!(tolerance > 0) || !std::isfinite(tolerance))
    throw std::invalid_argument("CalibrationSpec: tolerance must be positive");
  if (replications < 2)
    throw std::invalid_argument("CalibrationSpec: need at least two replications");
  if (maxRunLength != 0 && maxRunLength < static_cast<long>(std::ceil(2.0 * targetArl0)))
    throw std::invalid_argument("CalibrationSpec: maxRunLength must be at least twice the target");
}

RunLength runLengthFromPath(const std::vector<double>& path, double H) {
  if (path.empty()) throw std::invalid_argument("runLengthFromPath: empty path");
  for (std::size_t i = 0; i < path.size(); ++i)
    if (path[i] > H) return {static_cast<long>(i) + 1, false};
  return {static_cast<long>(path.size()), true};
}

namespace {

ArlEstimate summarize(const std::vector<long>& lengths, long censored) {
  const int n = static_cast<int>(lengths.size());
  double mean = 0;
  for (long l : lengths) mean += static_cast<double>(l);
  mean /= n;
  double var = 0;
  for (long l : lengths) {
    const double d = static_cast<double>(l) - mean;
    var += d * d;
  }
  var = n > 1 ? var / (n - 1) : 0.0;
  return {mean, std::sqrt(var / n), static_cast<double>(censored) / n, n};
}

template <typename MakeChart>
ArlEstimate estimateArlWith(const ProcessModel& model, const MonitorConfig& config,
                            const CalibrationSpec& spec, MakeChart makeChart) {
  const long maxLen = spec.effectiveMaxRunLength();
  std::vector<long> lengths(spec.replications);
  long censored = 0;
  for (int rep = 0; rep < spec.replications; ++rep) {
    ModelStream stream(model, config.m, deriveSeed(spec.seed, "arl-rep", rep));
    const RunLength rl = runLength(makeChart(), stream, maxLen);
    lengths[rep] = rl.length;
    censored += rl.censored ? 1 : 0;
  }
  return summarize(lengths, censored);
}

template <typename MakeChart>
std::vector<std::vector<double>> simulatePathsWith(const ProcessModel& model,
                                                   const MonitorConfig& config,
                                                   const CalibrationSpec& spec,
                                                   MakeChart makeChart) {
  const long maxLen = spec.effectiveMaxRunLength();
  std::vector<std::vector<double>> paths(spec.replications);
  for (int rep = 0; rep < spec.replications; ++rep) {
    ModelStream stream(model, config.m, deriveSeed(spec.seed, "calibration-path", rep));
    auto chart = makeChart();
    auto& path = paths[rep];
    path.resize(maxLen);
    for (long t = 1; t <= maxLen; ++t) path[t - 1] = chart.step(stream(t)).statistic;
  }
  return paths;
}

}  // namespace

std::vector<std::vector<double>> simulateStatisticPaths(const ProcessModel& model,
                                                        const MonitorConfig& config,
                                                        const CalibrationSpec& spec,
                                                        ChartMethod method) {
  spec.validate();
  config.validate();
  ProcessModel ic = model;
  ic.change.reset();
  ic.changeTime = kNever;
  ic.validate();

  MonitorConfig open = config;
  open.H = std::numeric_limits<double>::infinity();
  if (method == ChartMethod::Isvd) {
    const Sigma0Factors sigma0 = sigma0FromModel(ic);
    return simulatePathsWith(ic, open, spec, [&] { return Monitor(sigma0, open, ic.p, ic.q); });
  }
  const Eigen::MatrixXd sigma0 = trueCrossCovariance(ic, false);
  return simulatePathsWith(ic, open, spec, [&] {
    return DenseChart(sigma0, open.lambda, open.H);
  });
}

ArlEstimate arlFromPaths(const std::vector<std::vector<double>>& paths, double H) {
  if (paths.empty()) throw std::invalid_argument("arlFromPaths: no paths");
  std::vector<long> lengths(paths.size());
  long censored = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const RunLength rl = runLengthFromPath(paths[i], H);
    lengths[i] = rl.length;
    censored += rl.censored ? 1 : 0;
  }
  return summarize(lengths, censored);
}

ArlEstimate estimateArl(const ProcessModel& model, const MonitorConfig& config,
                        const CalibrationSpec& spec, ChartMethod method) {
  model.validate();
  config.validate();
  spec.validate();
  if (method == ChartMethod::Isvd) {
    const Sigma0Factors sigma0 = sigma0FromModel(model);
    return estimateArlWith(model, config, spec,
                           [&] { return Monitor(sigma0, config, model.p, model.q); });
  }
  const Eigen::MatrixXd sigma0 = trueCrossCovariance(model, false);
  return estimateArlWith(model, config, spec,
                         [&] { return DenseChart(sigma0, config.lambda, config.H); });
}

ControlLimitResult findControlLimit(const ProcessModel& model, const MonitorConfig& config,
                                    const CalibrationSpec& spec, ChartMethod method) {
  spec.validate();
  config.validate();
  const double target = spec.targetArl0;
  const auto paths = simulateStatisticPaths(model, config, spec, method);

  double hmax = 0;
  for (const auto& path : paths)
    hmax = std::max(hmax, *std::max_element(path.begin(), path.end()));

  const ArlEstimate atZero = arlFromPaths(paths, 0.0);
  if (atZero.mean > target) {
    std::ostringstream msg;
    msg << "findControlLimit: target in-control ARL " << target
        << " is below the minimum attainable " << atZero.mean;
    throw CalibrationError(msg.str());
  }

  // Every path's run length is nondecreasing in H, so the estimated ARL is a
  // monotone step function of H; bisect the bracket [0, hmax] down to
  // machine width and keep the closest uncensored candidate.
  double lo = 0.0, hi = hmax;
  double bestH = std::numeric_limits<double>::quiet_NaN();
  double bestGap = std::numeric_limits<double>::infinity();
  ArlEstimate best;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hmax); ++it) {
    const double mid = 0.5 * (lo + hi);
    const ArlEstimate est = arlFromPaths(paths, mid);
    if (est.censorFraction <= 0.01) {
      const double gap = std::abs(est.mean - target);
      if (gap < bestGap) {
        bestGap = gap;
        bestH = mid;
        best = est;
      }
    }
    if (est.censorFraction > 0.01 || est.mean > target)
      hi = mid;
    else
      lo = mid;
  }

  if (!(bestGap <= spec.tolerance * target)) {
    std::ostringstream msg;
    msg << "findControlLimit: no limit reached the target ARL " << target << " within "
        << 100 * spec.tolerance << "% (closest achieved "
        << (std::isfinite(bestGap) ? best.mean : -1.0) << " at H = " << bestH << ", "
        << paths.size() << " paths, horizon " << spec.effectiveMaxRunLength() << ")";
    throw CalibrationError(msg.str());
  }
  return {bestH, best, target, spec.seed};
}

Sigma0Factors estimateSigma0(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys,
                             int componentCount, double energyThreshold) {
  const Eigen::Index p = xs.rows(), q = ys.rows(), n = xs.cols();
  if (p < 1 || q < 1)
    throw std::invalid_argument("estimateSigma0: empty streams");
  if (ys.cols() != n)
    throw std::invalid_argument("estimateSigma0: histories are not paired");
  if (!xs.allFinite() || !ys.allFinite())
    throw std::invalid_argument("estimateSigma0: history has non-finite entries");
  if (n < 2)
    throw std::invalid_argument("estimateSigma0: need at least two observations");
  if (componentCount > std::min(p, q))
    throw std::invalid_argument("estimateSigma0: componentCount exceeds min(p, q)");
  if (componentCount < 0 && n < 8)
    throw std::invalid_argument("estimateSigma0: history too short for automatic selection");
  if (componentCount < 0 && !(energyThreshold > 0 && energyThreshold <= 1))
    throw std::invalid_argument("estimateSigma0: energyThreshold must lie in (0, 1]");

  const Eigen::MatrixXd xc = xs.colwise() - xs.rowwise().mean();
  const Eigen::MatrixXd yc = ys.colwise() - ys.rowwise().mean();
  const Eigen::MatrixXd C = xc * yc.transpose() / static_cast<double>(n - 1);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();

  Eigen::Index keep;
  if (componentCount >= 0) {
    keep = componentCount;
  } else {
    // Re-pair the streams with a half-rotation: the marginals survive but
    // genuine cross-correlation is destroyed, giving a noise floor for the
    // spectrum. The energy rule then picks the dominant components above it.
    const Eigen::Index shift = n / 2;
    Eigen::MatrixXd yperm(q, n);
    for (Eigen::Index i = 0; i < n; ++i) yperm.col(i) = yc.col((i + shift) % n);
    const Eigen::MatrixXd C0 = xc * yperm.transpose() / static_cast<double>(n - 1);
    const double floor = 1.5 * largestSingularValue(C0);

    Eigen::Index above = 0;
    while (above < sv.size() && sv(above) > floor) ++above;
    double total = sv.head(above).sum();
    keep = 0;
    double cum = 0;
    while (keep < above && cum < energyThreshold * total - 1e-15) cum += sv(keep++);
  }

  Sigma0Factors out;
  for (Eigen::Index j = 0; j < keep; ++j) {
    if (!(sv(j) > 0)) break;
    Eigen::VectorXd u = svd.matrixU().col(j);
    Eigen::VectorXd v = svd.matrixV().col(j);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if (u(i) == 0) continue;
      if (u(i) < 0) {
        u = -u;
        v = -v;
      }
      break;
    }
    out.components.push_back({sv(j), std::move(u), std::move(v)});
  }
  return out;
}

double estimateNoiseSd(const Eigen::MatrixXd& data, double factorVariance) {
  const Eigen::Index p = data.rows(), n = data.cols();
  if (p < 1 || n < 2)
    throw std::invalid_argument("estimateNoiseSd: need at least two observations");
  if (!(factorVariance >= 0))
    throw std::invalid_argument("estimateNoiseSd: factorVariance must be nonnegative");
  const Eigen::MatrixXd centered = data.colwise() - data.rowwise().mean();
  const double totalVar = centered.squaredNorm() / static_cast<double>(n - 1);
  const double perCoord = std::max(totalVar - factorVariance, 0.0) / static_cast<double>(p);
  return std::sqrt(std::max(perCoord, 1e-12));
}

}  // namespace isvd
