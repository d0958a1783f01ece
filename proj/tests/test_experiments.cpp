#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "isvd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "helpers.hpp"

using isvd::CalibrationSpec;
using isvd::ChartMethod;
using isvd::OcGeometry;
using isvd::SetupSpec;

namespace {

// Shrunk analogue of the correlated setups, cheap enough for unit tests.
SetupSpec smallSetup(int id, OcGeometry geometry) {
  SetupSpec setup;
  setup.id = id;
  setup.J = 1;
  setup.s01 = 1.0;
  setup.geometry = geometry;
  setup.lambda = 0.05;
  setup.r = 2;
  setup.sSqGrid = {1.0};
  setup.p = 6;
  setup.q = 8;
  setup.m = 2;
  return setup;
}

CalibrationSpec smallSpec(double target, int replications, isvd::Seed seed = 3) {
  CalibrationSpec spec;
  spec.targetArl0 = target;
  spec.tolerance = 0.05;
  spec.replications = replications;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("the nine-setup grid is pinned") {
  const auto grid = isvd::table1Setups();
  REQUIRE(grid.size() == 9);
  const double lambdas[9] = {0.02, 0.01, 0.05, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02};
  const int ranks[9] = {5, 5, 5, 2, 10, 5, 5, 5, 5};
  for (int i = 0; i < 9; ++i) {
    const SetupSpec& s = grid[i];
    CHECK(s.id == i + 1);
    CHECK(s.lambda == lambdas[i]);
    CHECK(s.r == ranks[i]);
    CHECK(s.p == 10);
    CHECK(s.q == 20);
    CHECK(s.m == 5);
    REQUIRE(s.sSqGrid.size() == 3);
    CHECK(s.sSqGrid[0] == 0.5);
    CHECK(s.sSqGrid[1] == 1.0);
    CHECK(s.sSqGrid[2] == 2.0);
    CHECK(s.J == (i >= 5 ? 1 : 0));
    CHECK_NOTHROW(s.validate());
  }
  CHECK(grid[5].s01 == 0.5);
  CHECK(grid[6].s01 == 1.0);
  CHECK(grid[7].s01 == 0.5);
  CHECK(grid[8].s01 == 1.0);
  CHECK(grid[5].geometry == OcGeometry::Parallel);
  CHECK(grid[6].geometry == OcGeometry::Parallel);
  CHECK(grid[7].geometry == OcGeometry::Perpendicular);
  CHECK(grid[8].geometry == OcGeometry::Perpendicular);
  for (int i = 0; i < 5; ++i) CHECK(grid[i].geometry == OcGeometry::None);
}

TEST_CASE("setup validation rejects inconsistent rows") {
  SetupSpec setup = smallSetup(1, OcGeometry::Parallel);
  CHECK_NOTHROW(setup.validate());
  setup.J = 0;  // geometry without an in-control factor
  CHECK_THROWS_AS(setup.validate(), std::invalid_argument);
  setup = smallSetup(1, OcGeometry::Parallel);
  setup.s01 = 0.0;
  CHECK_THROWS_AS(setup.validate(), std::invalid_argument);
  setup = smallSetup(1, OcGeometry::Parallel);
  setup.sSqGrid = {1.0, -2.0};
  CHECK_THROWS_AS(setup.validate(), std::invalid_argument);
  setup = smallSetup(1, OcGeometry::Parallel);
  setup.J = 2;
  CHECK_THROWS_AS(setup.validate(), std::invalid_argument);
}

TEST_CASE("in-control models share patterns within a setup family") {
  const auto grid = isvd::table1Setups();
  CHECK(isvd::inControlModel(grid[0], 7).factors.empty());

  const isvd::ProcessModel m6 = isvd::inControlModel(grid[5], 7);
  REQUIRE(m6.factors.size() == 1);
  CHECK(m6.factors[0].scale == 0.5);
  CHECK(std::abs(m6.factors[0].u.norm() - 1.0) < 1e-12);
  CHECK(m6.factors[0].u.size() == 10);
  CHECK(m6.factors[0].v.size() == 20);

  // Setups 7 and 9 describe the same in-control process, so they must see
  // identical factor patterns; setup 6 has a different strength and draws
  // its own.
  const isvd::ProcessModel m7 = isvd::inControlModel(grid[6], 7);
  const isvd::ProcessModel m9 = isvd::inControlModel(grid[8], 7);
  CHECK(m7.factors[0].u == m9.factors[0].u);
  CHECK(m7.factors[0].v == m9.factors[0].v);
  CHECK(m7.factors[0].u != m6.factors[0].u);

  // Different parent seeds give different patterns.
  CHECK(isvd::inControlModel(grid[6], 8).factors[0].u != m7.factors[0].u);
}

TEST_CASE("setup config carries the chart knobs") {
  const SetupSpec setup = smallSetup(4, OcGeometry::Perpendicular);
  const isvd::MonitorConfig config = isvd::setupConfig(setup);
  CHECK(config.lambda == 0.05);
  CHECK(config.r == 2);
  CHECK(config.m == 2);
  CHECK(config.H == 0.0);
}

TEST_CASE("setups with equal in-control charts share a control limit") {
  const SetupSpec parallel = smallSetup(7, OcGeometry::Parallel);
  const SetupSpec perpendicular = smallSetup(9, OcGeometry::Perpendicular);
  const CalibrationSpec spec = smallSpec(20, 120);

  const isvd::ControlLimitResult a = isvd::calibrateSetup(parallel, ChartMethod::Isvd, spec);
  const isvd::ControlLimitResult b = isvd::calibrateSetup(perpendicular, ChartMethod::Isvd, spec);
  CHECK(a.H == b.H);
  CHECK(std::abs(a.achieved.mean - 20.0) <= spec.tolerance * 20.0);

  isvd::CalibrationCache cache;
  const isvd::ControlLimitResult& fromCache = cache.get(parallel, ChartMethod::Isvd, spec);
  CHECK(fromCache.H == a.H);
  // The perpendicular setup resolves to the same cache entry.
  CHECK(&cache.get(perpendicular, ChartMethod::Isvd, spec) == &fromCache);
  // The baseline chart has no rank budget, so it keys differently.
  const isvd::ControlLimitResult& baseline = cache.get(parallel, ChartMethod::Baseline, spec);
  CHECK(baseline.H != fromCache.H);
}

TEST_CASE("out-of-control runs shorten as the shift grows") {
  const SetupSpec setup = smallSetup(7, OcGeometry::Parallel);
  const CalibrationSpec spec = smallSpec(20, 150);
  const double H = isvd::calibrateSetup(setup, ChartMethod::Isvd, spec).H;

  const isvd::ExperimentResult weak = isvd::ocArlPoint(setup, ChartMethod::Isvd, H, 0.5, spec);
  const isvd::ExperimentResult strong = isvd::ocArlPoint(setup, ChartMethod::Isvd, H, 4.0, spec);
  CHECK(weak.ocArl > strong.ocArl);
  CHECK(strong.ocArl < 20.0);
  CHECK(strong.censorFraction == 0.0);
  CHECK(strong.setupId == 7);
  CHECK(strong.method == ChartMethod::Isvd);
  CHECK(strong.sSq == 4.0);
  CHECK(strong.H == H);
  CHECK(strong.replications == 150);
  CHECK(strong.seed == spec.seed);

  const isvd::ExperimentResult repeat = isvd::ocArlPoint(setup, ChartMethod::Isvd, H, 4.0, spec);
  CHECK(repeat.ocArl == strong.ocArl);
  CHECK(repeat.stdError == strong.stdError);

  CHECK_THROWS_AS(isvd::ocArlPoint(setup, ChartMethod::Isvd, H, -1.0, spec),
                  std::invalid_argument);
  CHECK_THROWS_AS(isvd::ocArlPoint(setup, ChartMethod::Isvd, -2.0, 1.0, spec),
                  std::invalid_argument);
}

TEST_CASE("oc curves follow the shift grid") {
  SetupSpec setup = smallSetup(8, OcGeometry::Perpendicular);
  setup.sSqGrid = {0.5, 4.0};
  const CalibrationSpec spec = smallSpec(15, 100);

  const auto curve = isvd::ocArlCurve(setup, ChartMethod::Isvd, spec);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].sSq == 0.5);
  CHECK(curve[1].sSq == 4.0);
  CHECK(curve[0].H == curve[1].H);
  CHECK(curve[0].H == isvd::calibrateSetup(setup, ChartMethod::Isvd, spec).H);

  const auto pinned = isvd::ocArlCurve(setup, ChartMethod::Isvd, spec, 1.25);
  CHECK(pinned[0].H == 1.25);
  CHECK(pinned[1].H == 1.25);
}

TEST_CASE("experiments CSV is deterministic") {
  std::vector<isvd::ExperimentResult> results(2);
  results[0].setupId = 1;
  results[0].method = ChartMethod::Isvd;
  results[0].sSq = 0.5;
  results[0].ocArl = 12.25;
  results[0].stdError = 0.125;
  results[0].H = 1.5;
  results[0].replications = 100;
  results[0].seed = 42;
  results[1].setupId = 9;
  results[1].method = ChartMethod::Baseline;
  results[1].sSq = 2.0;
  results[1].ocArl = 7.0;
  results[1].stdError = 0.0625;
  results[1].H = 1.5;
  results[1].replications = 100;
  results[1].seed = 42;

  std::ostringstream out;
  isvd::writeExperimentsCsv(out, results);
  CHECK(out.str() ==
        "setup_id,method,s_sq,oc_arl,std_error,H,replications,seed\n"
        "1,isvd,0.5,12.25,0.125,1.5,100,42\n"
        "9,baseline,2,7,0.0625,1.5,100,42\n");
}

TEST_CASE("timing benchmark produces sane rows") {
  const std::vector<std::pair<Eigen::Index, Eigen::Index>> dims{{24, 16}};
  const auto rows = isvd::timingBenchmark(dims, 3, 2, 1, 8, 5);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].p == 24);
  CHECK(rows[0].q == 16);
  CHECK(rows[0].steps == 8);
  CHECK(rows[0].isvdStepSeconds > 0.0);
  CHECK(rows[0].baselineStepSeconds > 0.0);
  CHECK(rows[0].ratio ==
        doctest::Approx(rows[0].baselineStepSeconds / rows[0].isvdStepSeconds));

  std::ostringstream out;
  isvd::writeTimingCsv(out, rows);
  const std::string csv = out.str();
  CHECK(csv.rfind("p,q,isvd_step_seconds,baseline_step_seconds,ratio,steps\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

  CHECK_THROWS_AS(isvd::timingBenchmark(dims, 3, 2, 1, 0, 5), std::invalid_argument);
  CHECK_THROWS_AS(isvd::timingBenchmark(dims, 0, 2, 1, 8, 5), std::invalid_argument);
}

TEST_CASE("the testbed model couples translation to a thickness slope") {
  const isvd::ProcessModel model = isvd::caseStudyModel(2.0, 100);
  CHECK(model.p == 50);
  CHECK(model.q == 20);
  CHECK(model.factors.empty());
  CHECK(model.changeTime == 101);
  REQUIRE(model.change.has_value());

  const Eigen::VectorXd& u = model.change->u;
  CHECK(std::abs(u.norm() - 1.0) < 1e-12);
  for (Eigen::Index i = 0; i < 25; ++i) CHECK(u(i) == doctest::Approx(0.2).epsilon(1e-12));
  for (Eigen::Index i = 25; i < 50; ++i) CHECK(u(i) == 0.0);

  const Eigen::VectorXd& v = model.change->v;
  CHECK(std::abs(v.norm() - 1.0) < 1e-12);
  Eigen::VectorXd raw(20);
  for (Eigen::Index ix = 0; ix < 5; ++ix)
    for (Eigen::Index iy = 0; iy < 4; ++iy)
      raw(4 * ix + iy) = std::cos(M_PI / 6.0) * (-0.72 + 0.36 * double(ix)) +
                         std::sin(M_PI / 6.0) * (-0.6 + 0.4 * double(iy));
  CHECK(v.isApprox(raw.normalized(), 1e-12));

  CHECK(testutil::relFrob(isvd::trueCrossCovariance(model, true),
                          2.0 * u * v.transpose()) < 1e-14);
  CHECK(isvd::caseStudyModel(1.0, isvd::kNever).changeTime == isvd::kNever);
  CHECK_THROWS_AS(isvd::caseStudyModel(0.0, 100), std::invalid_argument);
}

TEST_CASE("a shrunk testbed run detects the coupling after tau") {
  isvd::CaseStudyConfig config;
  config.tau = 20;
  config.replications = 25;
  config.targetArl0 = 50.0;
  config.lambda = 0.05;
  config.r = 3;
  config.m = 1;
  config.sSqFactor = 3.0;
  config.postChangeHorizon = 200;
  config.calibrationReplications = 150;
  config.calibrationTolerance = 0.05;
  config.seed = 99;

  const isvd::CaseStudyReport report = isvd::caseStudyTestbed(config);
  CHECK(report.p == 50);
  CHECK(report.q == 20);
  CHECK(report.H > 0.0);
  CHECK(std::abs(report.achievedArl0 - 50.0) <= 0.05 * 50.0);
  CHECK(report.sSq == doctest::Approx(3.0 * report.H));
  CHECK(report.runLengths.size() == 25);
  CHECK(report.detected + report.censored <= 25);
  CHECK(report.detected > 0);
  CHECK(report.medianDelay >= 1.0);
  CHECK(report.medianDelay < 200.0);
  CHECK(report.meanDelay >= 1.0);
  CHECK(report.preTauAlarmFraction >= 0.0);
  CHECK(report.preTauAlarmFraction <= 1.0);
  CHECK(report.tau == 20);
}
