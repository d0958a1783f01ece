#include "isvd/experiments.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "isvd/format.hpp"

namespace isvd {

const char* geometryName(OcGeometry geometry) {
  switch (geometry) {
    case OcGeometry::None: return "none";
    case OcGeometry::Parallel: return "parallel";
    case OcGeometry::Perpendicular: return "perpendicular";
  }
  return "none";
}

void SetupSpec::validate() const {
  if (id < 1) throw std::invalid_argument("SetupSpec: id must be positive");
  if (J < 0 || J > 1) throw std::invalid_argument("SetupSpec: J must be 0 or 1");
  if (J >= 1 && (!(s01 > 0) || !std::isfinite(s01)))
    throw std::invalid_argument("SetupSpec: s01 must be positive when J >= 1");
  if (J == 0 && geometry != OcGeometry::None)
    throw std::invalid_argument("SetupSpec: parallel/perpendicular geometry needs J >= 1");
  if (!(lambda > 0) || !(lambda <= 1))
    throw std::invalid_argument("SetupSpec: lambda must lie in (0, 1]");
  if (r < 1 || m < 1 || p < 1 || q < 1)
    throw std::invalid_argument("SetupSpec: r, m, p, q must be positive");
  if (sSqGrid.empty())
    throw std::invalid_argument("SetupSpec: shift grid must be nonempty");
  for (double s : sSqGrid)
    if (!(s > 0) || !std::isfinite(s))
      throw std::invalid_argument("SetupSpec: shift sizes must be positive");
}

std::vector<SetupSpec> table1Setups() {
  std::vector<SetupSpec> out(9);
  for (int i = 0; i < 9; ++i) out[i].id = i + 1;
  out[1].lambda = 0.01;
  out[2].lambda = 0.05;
  out[3].r = 2;
  out[4].r = 10;
  out[5] = SetupSpec{6, 1, 0.5, OcGeometry::Parallel};
  out[6] = SetupSpec{7, 1, 1.0, OcGeometry::Parallel};
  out[7] = SetupSpec{8, 1, 0.5, OcGeometry::Perpendicular};
  out[8] = SetupSpec{9, 1, 1.0, OcGeometry::Perpendicular};
  for (const auto& s : out) s.validate();
  return out;
}

namespace {

Seed icPatternSeed(const SetupSpec& setup, Seed parentSeed) {
  const Seed byCount = deriveSeed(parentSeed, "ic-pattern", static_cast<Seed>(setup.J));
  return deriveSeed(byCount, "scale", std::bit_cast<Seed>(setup.s01));
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

ProcessModel inControlModel(const SetupSpec& setup, Seed parentSeed) {
  setup.validate();
  ProcessModel model;
  model.p = setup.p;
  model.q = setup.q;
  const Seed patternSeed = icPatternSeed(setup, parentSeed);
  for (int j = 0; j < setup.J; ++j) {
    LatentFactor f;
    f.scale = setup.s01;
    f.u = sampleUnitSphere(setup.p, deriveSeed(patternSeed, "u0", j));
    f.v = sampleUnitSphere(setup.q, deriveSeed(patternSeed, "v0", j));
    model.factors.push_back(std::move(f));
  }
  return model;
}

MonitorConfig setupConfig(const SetupSpec& setup) {
  MonitorConfig config;
  config.lambda = setup.lambda;
  config.r = setup.r;
  config.m = setup.m;
  config.H = 0.0;
  return config;
}

ControlLimitResult calibrateSetup(const SetupSpec& setup, ChartMethod method,
                                  const CalibrationSpec& spec) {
  const ProcessModel ic = inControlModel(setup, spec.seed);
  return findControlLimit(ic, setupConfig(setup), spec, method);
}

const ControlLimitResult& CalibrationCache::get(const SetupSpec& setup, ChartMethod method,
                                                const CalibrationSpec& spec) {
  // The chart during calibration is fully described by the in-control model
  // family (J, s01), the chart knobs, and the Monte Carlo budget; the rank
  // budget only matters for the factored method.
  std::ostringstream key;
  key << methodName(method) << '|' << setup.J << '|' << formatDouble(setup.s01) << '|'
      << formatDouble(setup.lambda) << '|' << (method == ChartMethod::Isvd ? setup.r : 0) << '|'
      << setup.m << '|' << setup.p << 'x' << setup.q << '|' << formatDouble(spec.targetArl0)
      << '|' << spec.replications << '|' << spec.effectiveMaxRunLength() << '|' << spec.seed;
  const auto it = results_.find(key.str());
  if (it != results_.end()) return it->second;
  return results_.emplace(key.str(), calibrateSetup(setup, method, spec)).first->second;
}

namespace {

ProcessModel outOfControlModel(const SetupSpec& setup, const ProcessModel& ic, double sSq,
                               Seed repSeed) {
  ProcessModel model = ic;
  LatentFactor change;
  change.scale = std::sqrt(sSq);
  switch (setup.geometry) {
    case OcGeometry::None:
      change.u = sampleUnitSphere(setup.p, deriveSeed(repSeed, "u"));
      change.v = sampleUnitSphere(setup.q, deriveSeed(repSeed, "v"));
      break;
    case OcGeometry::Parallel:
      change.u = ic.factors.at(0).u;
      change.v = ic.factors.at(0).v;
      break;
    case OcGeometry::Perpendicular:
      change.u = makePerpendicular(ic.factors.at(0).u, deriveSeed(repSeed, "u"));
      change.v = makePerpendicular(ic.factors.at(0).v, deriveSeed(repSeed, "v"));
      break;
  }
  model.change = std::move(change);
  model.changeTime = 1;
  return model;
}

}  // namespace

ExperimentResult ocArlPoint(const SetupSpec& setup, ChartMethod method, double H, double sSq,
                            const CalibrationSpec& spec) {
  setup.validate();
  spec.validate();
  if (!(sSq > 0) || !std::isfinite(sSq))
    throw std::invalid_argument("ocArlPoint: shift size must be positive");
  if (std::isnan(H) || H < 0)
    throw std::invalid_argument("ocArlPoint: H must be >= 0");

  MonitorConfig config = setupConfig(setup);
  config.H = H;
  const ProcessModel ic = inControlModel(setup, spec.seed);
  const long maxLen = spec.effectiveMaxRunLength();
  const Seed shiftSeed = deriveSeed(spec.seed, "oc-s2", std::bit_cast<Seed>(sSq));

  std::vector<long> lengths(spec.replications);
  long censored = 0;
  for (int rep = 0; rep < spec.replications; ++rep) {
    const Seed repSeed = deriveSeed(shiftSeed, "rep", rep);
    const ProcessModel model = outOfControlModel(setup, ic, sSq, repSeed);
    ModelStream stream(model, setup.m, deriveSeed(repSeed, "stream"));
    RunLength rl;
    if (method == ChartMethod::Isvd) {
      rl = runLength(Monitor(sigma0FromModel(model), config, setup.p, setup.q), stream, maxLen);
    } else {
      rl = runLength(DenseChart(trueCrossCovariance(model, false), config.lambda, config.H),
                     stream, maxLen);
    }
    lengths[rep] = rl.length;
    censored += rl.censored ? 1 : 0;
  }

  double mean = 0;
  for (long l : lengths) mean += static_cast<double>(l);
  mean /= spec.replications;
  double var = 0;
  for (long l : lengths) {
    const double d = static_cast<double>(l) - mean;
    var += d * d;
  }
  var = spec.replications > 1 ? var / (spec.replications - 1) : 0.0;

  ExperimentResult out;
  out.setupId = setup.id;
  out.method = method;
  out.sSq = sSq;
  out.ocArl = mean;
  out.stdError = std::sqrt(var / spec.replications);
  out.censorFraction = static_cast<double>(censored) / spec.replications;
  out.H = H;
  out.replications = spec.replications;
  out.seed = spec.seed;
  return out;
}

std::vector<ExperimentResult> ocArlCurve(const SetupSpec& setup, ChartMethod method,
                                         const CalibrationSpec& spec, std::optional<double> H) {
  const double limit = H ? *H : calibrateSetup(setup, method, spec).H;
  std::vector<ExperimentResult> out;
  out.reserve(setup.sSqGrid.size());
  for (double sSq : setup.sSqGrid) out.push_back(ocArlPoint(setup, method, limit, sSq, spec));
  return out;
}

void writeExperimentsCsv(std::ostream& out, const std::vector<ExperimentResult>& results) {
  out << "setup_id,method,s_sq,oc_arl,std_error,H,replications,seed\n";
  for (const auto& r : results)
    out << r.setupId << ',' << methodName(r.method) << ',' << formatDouble(r.sSq) << ','
        << formatDouble(r.ocArl) << ',' << formatDouble(r.stdError) << ',' << formatDouble(r.H)
        << ',' << r.replications << ',' << r.seed << '\n';
}

std::vector<TimingRow> timingBenchmark(
    const std::vector<std::pair<Eigen::Index, Eigen::Index>>& dims, int r, int m, int J,
    long steps, Seed seed) {
  if (steps < 1) throw std::invalid_argument("timingBenchmark: steps must be positive");
  if (r < 1 || m < 1 || J < 0)
    throw std::invalid_argument("timingBenchmark: bad chart parameters");

  using Clock = std::chrono::steady_clock;
  std::vector<TimingRow> rows;
  rows.reserve(dims.size());
  for (std::size_t d = 0; d < dims.size(); ++d) {
    const auto [p, q] = dims[d];
    SetupSpec setup;
    setup.id = static_cast<int>(d) + 1;
    setup.J = J;
    setup.p = p;
    setup.q = q;
    setup.m = m;
    setup.r = r;
    const ProcessModel model = inControlModel(setup, deriveSeed(seed, "bench", d));
    ModelStream stream(model, m, deriveSeed(seed, "bench-stream", d));

    std::vector<Subgroup> subgroups;
    subgroups.reserve(steps);
    for (long t = 1; t <= steps; ++t) subgroups.push_back(stream(t));

    MonitorConfig config = setupConfig(setup);
    config.H = std::numeric_limits<double>::infinity();

    TimingRow row;
    row.p = p;
    row.q = q;
    row.steps = steps;

    {
      Monitor chart(sigma0FromModel(model), config, p, q);
      std::vector<double> times(steps);
      for (long t = 0; t < steps; ++t) {
        const auto t0 = Clock::now();
        chart.step(subgroups[t]);
        times[t] = std::chrono::duration<double>(Clock::now() - t0).count();
      }
      row.isvdStepSeconds = median(std::move(times));
    }
    {
      DenseChart chart(trueCrossCovariance(model, false), config.lambda, config.H);
      std::vector<double> times(steps);
      for (long t = 0; t < steps; ++t) {
        const auto t0 = Clock::now();
        chart.step(subgroups[t]);
        times[t] = std::chrono::duration<double>(Clock::now() - t0).count();
      }
      row.baselineStepSeconds = median(std::move(times));
    }
    row.ratio = row.baselineStepSeconds / row.isvdStepSeconds;
    rows.push_back(std::move(row));
  }
  return rows;
}

void writeTimingCsv(std::ostream& out, const std::vector<TimingRow>& rows) {
  out << "p,q,isvd_step_seconds,baseline_step_seconds,ratio,steps\n";
  for (const auto& r : rows)
    out << r.p << ',' << r.q << ',' << formatDouble(r.isvdStepSeconds) << ','
        << formatDouble(r.baselineStepSeconds) << ',' << formatDouble(r.ratio) << ',' << r.steps
        << '\n';
}

ProcessModel caseStudyModel(double sSq, long tau) {
  if (!(sSq > 0) || !std::isfinite(sSq))
    throw std::invalid_argument("caseStudyModel: shift size must be positive");
  if (tau < 0) throw std::invalid_argument("caseStudyModel: tau must be nonnegative");

  constexpr Eigen::Index kOverlaySites = 25;
  constexpr Eigen::Index kThicknessSites = 20;
  const Eigen::Index p = 2 * kOverlaySites;

  // Overlay stream stacks the x-error components of the 25 sites first, then
  // the y-errors. A pure x-translation moves every x-component equally.
  Eigen::VectorXd u = Eigen::VectorXd::Zero(p);
  u.head(kOverlaySites).setConstant(1.0);
  u.normalize();

  // Thickness sites on a 5x4 grid inside the unit disc; the coupled response
  // is a planar slope along a fixed direction.
  Eigen::VectorXd v(kThicknessSites);
  const double dir = M_PI / 6.0;
  for (Eigen::Index ix = 0; ix < 5; ++ix) {
    for (Eigen::Index iy = 0; iy < 4; ++iy) {
      const double sx = -0.72 + 0.36 * static_cast<double>(ix);
      const double sy = -0.6 + 0.4 * static_cast<double>(iy);
      v(4 * ix + iy) = std::cos(dir) * sx + std::sin(dir) * sy;
    }
  }
  v.normalize();

  ProcessModel model;
  model.p = p;
  model.q = kThicknessSites;
  model.change = LatentFactor{std::sqrt(sSq), std::move(u), std::move(v)};
  model.changeTime = tau == kNever ? kNever : tau + 1;
  return model;
}

CaseStudyReport caseStudyTestbed(const CaseStudyConfig& config) {
  if (config.tau < 1 || config.replications < 1 || config.postChangeHorizon < 1)
    throw std::invalid_argument("caseStudyTestbed: bad run configuration");
  if (!(config.sSqFactor > 0))
    throw std::invalid_argument("caseStudyTestbed: sSqFactor must be positive");

  CalibrationSpec cal;
  cal.targetArl0 = config.targetArl0;
  cal.tolerance = config.calibrationTolerance;
  cal.replications = config.calibrationReplications;
  cal.seed = deriveSeed(config.seed, "calibration");

  MonitorConfig chart;
  chart.lambda = config.lambda;
  chart.r = config.r;
  chart.m = config.m;

  const ProcessModel icShape = caseStudyModel(1.0, kNever);
  const ControlLimitResult limit = findControlLimit(icShape, chart, cal, ChartMethod::Isvd);
  chart.H = limit.H;

  const double sSq = config.sSqFactor * limit.H;
  const ProcessModel model = caseStudyModel(sSq, config.tau);
  const long horizon = config.tau + config.postChangeHorizon;

  CaseStudyReport report;
  report.p = model.p;
  report.q = model.q;
  report.H = limit.H;
  report.sSq = sSq;
  report.targetArl0 = config.targetArl0;
  report.achievedArl0 = limit.achieved.mean;
  report.tau = config.tau;
  report.replications = config.replications;
  report.runLengths.resize(config.replications);

  std::vector<double> delays;
  long preTau = 0;
  double delaySum = 0;
  for (int rep = 0; rep < config.replications; ++rep) {
    ModelStream stream(model, config.m, deriveSeed(config.seed, "run", rep));
    const RunLength rl =
        runLength(Monitor(sigma0FromModel(model), chart, model.p, model.q), stream, horizon);
    report.runLengths[rep] = rl.length;
    if (rl.censored) {
      ++report.censored;
    } else if (rl.length <= config.tau) {
      ++preTau;
    } else {
      const double delay = static_cast<double>(rl.length - config.tau);
      delays.push_back(delay);
      delaySum += delay;
    }
  }
  report.detected = static_cast<long>(delays.size());
  report.preTauAlarmFraction = static_cast<double>(preTau) / config.replications;
  report.medianDelay = median(std::move(delays));
  report.meanDelay = report.detected ? delaySum / static_cast<double>(report.detected)
                                     : std::numeric_limits<double>::quiet_NaN();
  return report;
}

}  // namespace isvd
