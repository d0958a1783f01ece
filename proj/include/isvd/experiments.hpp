#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isvd/calibration.hpp"

namespace isvd {

enum class OcGeometry { None, Parallel, Perpendicular };

const char* geometryName(OcGeometry geometry);

// One row of the simulation grid: in-control factor count and strength, how
// the emerging pattern relates to the in-control one, and the chart knobs.
struct SetupSpec {
  int id = 1;
  int J = 0;
  double s01 = 1.0;  // in-control factor strength, used when J >= 1
  OcGeometry geometry = OcGeometry::None;
  double lambda = 0.02;
  int r = 5;
  std::vector<double> sSqGrid{0.5, 1.0, 2.0};
  Eigen::Index p = 10, q = 20;
  int m = 5;

  void validate() const;
};

// The nine-row grid: a plain chart (1), slow and fast EWMA variants (2, 3),
// tight and loose rank budgets (4, 5), then one existing correlated factor
// at two strengths with the emerging pattern parallel (6, 7) or
// perpendicular (8, 9) to it.
std::vector<SetupSpec> table1Setups();

struct ExperimentResult {
  int setupId = 0;
  ChartMethod method = ChartMethod::Isvd;
  double sSq = 0.0;
  double ocArl = 0.0;
  double stdError = 0.0;
  double censorFraction = 0.0;
  double H = 0.0;
  int replications = 0;
  Seed seed = 0;
};

// In-control model for a setup. The factor patterns are fixed per setup
// family: the seed is derived from (J, s01) only, so setups sharing an
// in-control description share patterns, calibration paths, and H exactly.
ProcessModel inControlModel(const SetupSpec& setup, Seed parentSeed);

MonitorConfig setupConfig(const SetupSpec& setup);

ControlLimitResult calibrateSetup(const SetupSpec& setup, ChartMethod method,
                                  const CalibrationSpec& spec);

// Caches calibrations across grid points that resolve to the same chart.
class CalibrationCache {
 public:
  const ControlLimitResult& get(const SetupSpec& setup, ChartMethod method,
                                const CalibrationSpec& spec);

 private:
  std::map<std::string, ControlLimitResult> results_;
};

// Out-of-control ARL at one shift size. Replication seeds depend only on the
// generative model, never on the chart, so methods and rank budgets facing
// the same process see identical streams. The emerging pattern is redrawn
// per replication where the geometry leaves it free.
ExperimentResult ocArlPoint(const SetupSpec& setup, ChartMethod method, double H,
                            double sSq, const CalibrationSpec& spec);

// One result per grid shift size; calibrates first unless H is supplied.
std::vector<ExperimentResult> ocArlCurve(const SetupSpec& setup, ChartMethod method,
                                         const CalibrationSpec& spec,
                                         std::optional<double> H = std::nullopt);

void writeExperimentsCsv(std::ostream& out, const std::vector<ExperimentResult>& results);

struct TimingRow {
  Eigen::Index p = 0, q = 0;
  double isvdStepSeconds = 0.0;      // median over steps
  double baselineStepSeconds = 0.0;  // median over steps
  double ratio = 0.0;                // baseline / isvd
  long steps = 0;
};

// Median per-step wall time of both charts on the same pregenerated stream.
std::vector<TimingRow> timingBenchmark(const std::vector<std::pair<Eigen::Index, Eigen::Index>>& dims,
                                       int r, int m, int J, long steps, Seed seed);

void writeTimingCsv(std::ostream& out, const std::vector<TimingRow>& rows);

// Synthetic wafer-line testbed: 25 overlay sites (x and y error components,
// p = 50) against 20 film-thickness sites (q = 20). In control the streams
// are independent; from subgroup tau + 1 on, the x-translation pattern of
// the overlay map couples to a planar thickness slope.
struct CaseStudyConfig {
  long tau = 100;
  int replications = 500;
  double targetArl0 = 600.0;
  double lambda = 0.02;
  int r = 5;
  int m = 1;
  double sSqFactor = 2.2;  // emerging variance as a multiple of the calibrated H
  long postChangeHorizon = 2000;
  int calibrationReplications = 1000;
  double calibrationTolerance = 0.02;
  Seed seed = 2026;
};

struct CaseStudyReport {
  Eigen::Index p = 0, q = 0;
  double H = 0.0;
  double sSq = 0.0;
  double targetArl0 = 0.0;
  double achievedArl0 = 0.0;
  long tau = 0;
  int replications = 0;
  double medianDelay = 0.0;
  double meanDelay = 0.0;
  double preTauAlarmFraction = 0.0;
  long detected = 0;
  long censored = 0;
  std::vector<long> runLengths;  // first-alarm subgroup per replication, horizon-censored
};

// The testbed's generative model; the change couples u (overlay x-translation)
// to v (thickness slope) with variance sSq starting at subgroup tau + 1.
ProcessModel caseStudyModel(double sSq, long tau);

CaseStudyReport caseStudyTestbed(const CaseStudyConfig& config);

}  // namespace isvd
