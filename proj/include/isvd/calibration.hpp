#pragma once

#include <stdexcept>
#include <vector>

#include "isvd/baseline.hpp"
#include "isvd/model.hpp"
#include "isvd/monitor.hpp"

namespace isvd {

// Raised when a control limit meeting the target cannot be found.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ChartMethod { Isvd, Baseline };

const char* methodName(ChartMethod method);

// Monte Carlo budget for ARL estimation and limit search. maxRunLength = 0
// means 10 * targetArl0; runs still in control at the horizon are censored
// there.
struct CalibrationSpec {
  double targetArl0 = 200.0;
  double tolerance = 0.02;
  int replications = 2000;
  long maxRunLength = 0;
  Seed seed = 1;

  long effectiveMaxRunLength() const;
  void validate() const;
};

struct RunLength {
  long length = 0;
  bool censored = false;
};

struct ArlEstimate {
  double mean = 0.0;
  double stdError = 0.0;
  double censorFraction = 0.0;
  int replications = 0;
};

struct ControlLimitResult {
  double H = 0.0;
  ArlEstimate achieved;
  double targetArl0 = 0.0;
  Seed seed = 0;
};

// First passage of a chart over its configured limit; censored at maxLen.
// Chart is consumed by value so repeated calls start fresh.
template <typename Chart, typename Stream>
RunLength runLength(Chart chart, Stream&& stream, long maxLen) {
  if (maxLen < 1) throw std::invalid_argument("runLength: horizon must be positive");
  for (long t = 1; t <= maxLen; ++t)
    if (chart.step(stream(t)).alarm) return {t, false};
  return {maxLen, true};
}

// First passage of a stored statistic path over H.
RunLength runLengthFromPath(const std::vector<double>& path, double H);

// In-control statistic paths, one per replication, simulated once and reused
// across candidate limits. Any configured change in the model is ignored.
std::vector<std::vector<double>> simulateStatisticPaths(const ProcessModel& model,
                                                        const MonitorConfig& config,
                                                        const CalibrationSpec& spec,
                                                        ChartMethod method);

ArlEstimate arlFromPaths(const std::vector<std::vector<double>>& paths, double H);

// Fresh-stream ARL estimate for the model as given (change included once it
// activates), independent of the path-reuse machinery.
ArlEstimate estimateArl(const ProcessModel& model, const MonitorConfig& config,
                        const CalibrationSpec& spec, ChartMethod method);

// Bisection for H on reused paths. The run length of every path is
// nondecreasing in H, so the achieved ARL is monotone and the bracket is
// exact. Candidates with more than 1% censored runs are treated as too high.
ControlLimitResult findControlLimit(const ProcessModel& model, const MonitorConfig& config,
                                    const CalibrationSpec& spec, ChartMethod method);

// Factored in-control cross-covariance estimated from paired history
// (columns are observations). Data are centered by their sample means, the
// sample cross-covariance is formed with 1/(N-1), and the leading SVD
// components are kept. componentCount < 0 selects the count automatically:
// components must clear a re-pairing noise floor and together carry
// energyThreshold of the above-floor spectral energy.
Sigma0Factors estimateSigma0(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys,
                             int componentCount = -1, double energyThreshold = 0.95);

// Residual noise level for one stream: total variance not explained by the
// factor weights, spread over the coordinates.
double estimateNoiseSd(const Eigen::MatrixXd& data, double factorVariance);

}  // namespace isvd
