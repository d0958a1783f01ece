// isvdmon: calibrate, monitor, simulate, and benchmark a streaming
// cross-covariance chart maintained in factored thin-SVD form.
//
// Exit codes: 0 success, 2 malformed input/config, 3 calibration failure,
// 4 stream inconsistent with the calibration (message names the record t).

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "isvd/calibration.hpp"
#include "isvd/experiments.hpp"
#include "isvd/format.hpp"
#include "isvd/serialization.hpp"

namespace {

using isvd::InputError;
using isvd::Json;

Json parseJsonFile(const std::string& path, const std::string& context) {
  std::ifstream in(path);
  if (!in) throw InputError(context + ": cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  Json j = Json::parse(buffer.str(), nullptr, false);
  if (j.is_discarded()) throw InputError(context + ": '" + path + "' is not valid JSON");
  return j;
}

void writeTextFile(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw InputError("failed writing '" + path + "'");
}

bool blankLine(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

long getOptionalInteger(const Json& j, const char* key, long fallback, const std::string& context) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number_integer())
    throw InputError(context + ": key '" + key + "' must be an integer");
  return v.get<long>();
}

double getOptionalNumber(const Json& j, const char* key, double fallback,
                         const std::string& context) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number()) throw InputError(context + ": key '" + key + "' must be a number");
  return v.get<double>();
}

isvd::CalibrationSpec calibrationSpecFromJson(const Json& j, const std::string& context) {
  isvd::CalibrationSpec spec;
  spec.targetArl0 = getOptionalNumber(j, "target_arl0", spec.targetArl0, context);
  spec.tolerance = getOptionalNumber(j, "tolerance", spec.tolerance, context);
  spec.replications =
      static_cast<int>(getOptionalInteger(j, "replications", spec.replications, context));
  spec.maxRunLength = getOptionalInteger(j, "max_run_length", spec.maxRunLength, context);
  spec.seed = static_cast<isvd::Seed>(getOptionalInteger(j, "seed", 1, context));
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(context + ": " + e.what());
  }
  return spec;
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateArgs {
  std::string configPath, dataPath, outputPath;
};

int cmdCalibrate(const CalibrateArgs& args) {
  const Json cfg = parseJsonFile(args.configPath, "config");
  isvd::requireKeys(cfg, {"lambda", "r", "m", "target_arl0"},
                    {"replications", "tolerance", "max_run_length", "seed", "components",
                     "energy_threshold", "subtract_means"},
                    "config");

  isvd::MonitorConfig chart;
  chart.lambda = getOptionalNumber(cfg, "lambda", 0.0, "config");
  chart.r = static_cast<int>(getOptionalInteger(cfg, "r", 0, "config"));
  chart.m = static_cast<int>(getOptionalInteger(cfg, "m", 0, "config"));
  chart.H = 0.0;
  try {
    chart.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  const isvd::CalibrationSpec spec = calibrationSpecFromJson(cfg, "config");
  const int components =
      static_cast<int>(getOptionalInteger(cfg, "components", -1, "config"));
  const double energyThreshold = getOptionalNumber(cfg, "energy_threshold", 0.95, "config");
  const bool subtractMeans = cfg.contains("subtract_means") && cfg.at("subtract_means").is_boolean()
                                 ? cfg.at("subtract_means").get<bool>()
                                 : false;
  if (cfg.contains("subtract_means") && !cfg.at("subtract_means").is_boolean())
    throw InputError("config: key 'subtract_means' must be a boolean");

  // Pool the historical subgroups into paired observation columns.
  std::ifstream in(args.dataPath);
  if (!in) throw InputError("cannot open '" + args.dataPath + "'");
  std::vector<isvd::Subgroup> records;
  Eigen::Index n = 0;
  std::string line;
  long lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (blankLine(line)) continue;
    isvd::Subgroup g = isvd::parseStreamRecordLine(line, lineNo);
    if (!records.empty() &&
        (g.x.rows() != records.front().x.rows() || g.y.rows() != records.front().y.rows()))
      throw InputError("line " + std::to_string(lineNo) +
                       ": observation dimensions changed mid-file");
    n += g.m();
    records.push_back(std::move(g));
  }
  if (records.empty()) throw InputError("historical data file has no records");

  const Eigen::Index p = records.front().x.rows(), q = records.front().y.rows();
  Eigen::MatrixXd xs(p, n), ys(q, n);
  Eigen::Index at = 0;
  for (const auto& g : records) {
    xs.middleCols(at, g.m()) = g.x;
    ys.middleCols(at, g.m()) = g.y;
    at += g.m();
  }

  isvd::Sigma0Factors sigma0;
  try {
    sigma0 = isvd::estimateSigma0(xs, ys, components, energyThreshold);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("historical data: ") + e.what());
  }

  // Plug-in generative model for the control-limit search: the estimated
  // factors plus whatever per-coordinate variance they leave unexplained.
  double totalWeight = 0;
  isvd::ProcessModel model;
  model.p = p;
  model.q = q;
  for (const auto& c : sigma0.components) {
    model.factors.push_back({std::sqrt(c.weight), c.u, c.v});
    totalWeight += c.weight;
  }
  model.noiseSdX = isvd::estimateNoiseSd(xs, totalWeight);
  model.noiseSdY = isvd::estimateNoiseSd(ys, totalWeight);

  const isvd::ControlLimitResult limit =
      isvd::findControlLimit(model, chart, spec, isvd::ChartMethod::Isvd);

  isvd::CalibrationFile out;
  out.p = p;
  out.q = q;
  out.sigma0 = std::move(sigma0);
  out.H = limit.H;
  out.lambda = chart.lambda;
  out.r = chart.r;
  out.m = chart.m;
  out.targetArl0 = spec.targetArl0;
  out.achievedArl = limit.achieved.mean;
  out.seed = spec.seed;
  if (subtractMeans) {
    out.meanX = xs.rowwise().mean();
    out.meanY = ys.rowwise().mean();
  }
  writeTextFile(args.outputPath, isvd::toJson(out).dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// monitor

struct MonitorArgs {
  std::string calibrationPath, resumePath, inputPath, outputPath;
  std::string alarmSummaryPath, saveStatePath;
  bool subtractMeans = false;
  bool haltOnAlarm = false;
};

int cmdMonitor(const MonitorArgs& args) {
  if (args.calibrationPath.empty() == args.resumePath.empty())
    throw InputError("monitor needs exactly one of --calibration or --resume");

  std::optional<isvd::Monitor> monitor;
  Eigen::VectorXd meanX, meanY;
  bool centering = args.subtractMeans;
  if (!args.calibrationPath.empty()) {
    const isvd::CalibrationFile cal =
        isvd::calibrationFileFromJson(parseJsonFile(args.calibrationPath, "calibration"));
    monitor.emplace(cal.sigma0, cal.config(), cal.p, cal.q);
    meanX = cal.meanX;
    meanY = cal.meanY;
  } else {
    const Json snap = parseJsonFile(args.resumePath, "snapshot");
    monitor.emplace(isvd::monitorFromSnapshot(snap));
    // A snapshot saved from a centering run carries the means, so the
    // resumed chart keeps the original preprocessing without extra flags.
    if (snap.contains("mean_x") || snap.contains("mean_y")) {
      if (!snap.contains("mean_x") || !snap.contains("mean_y"))
        throw InputError("snapshot: mean_x and mean_y must appear together");
      meanX = isvd::vectorFromJson(snap.at("mean_x"), "snapshot.mean_x");
      meanY = isvd::vectorFromJson(snap.at("mean_y"), "snapshot.mean_y");
      centering = true;
    }
  }
  if (centering && (meanX.size() == 0 || meanY.size() == 0))
    throw InputError("--subtract-means requires stored means (calibrate with subtract_means)");

  std::ifstream fileIn;
  std::istream* in = &std::cin;
  if (!args.inputPath.empty()) {
    fileIn.open(args.inputPath);
    if (!fileIn) throw InputError("cannot open '" + args.inputPath + "'");
    in = &fileIn;
  }
  std::ofstream fileOut;
  std::ostream* out = &std::cout;
  if (!args.outputPath.empty()) {
    fileOut.open(args.outputPath);
    if (!fileOut) throw InputError("cannot open '" + args.outputPath + "' for writing");
    out = &fileOut;
  }

  const Eigen::Index p = monitor->p(), q = monitor->q();
  if (centering && (meanX.size() != p || meanY.size() != q))
    throw InputError("stored means do not match the chart dimensions");
  const double H = monitor->config().H;
  const std::string hText = isvd::formatDouble(H);

  *out << "t,statistic,H,alarm\n";
  std::string line;
  long lineNo = 0, lastT = 0;
  bool alarmSummaryWritten = false;
  while (std::getline(*in, line)) {
    ++lineNo;
    if (blankLine(line)) continue;
    isvd::Subgroup g = isvd::parseStreamRecordLine(line, lineNo);
    if (g.t <= lastT)
      throw isvd::StreamError(g.t, "subgroup indices must be strictly increasing");
    lastT = g.t;
    if (g.x.rows() != p || g.y.rows() != q) {
      std::ostringstream msg;
      msg << "expected dimensions " << p << "/" << q << ", got " << g.x.rows() << "/"
          << g.y.rows();
      throw isvd::StreamError(g.t, msg.str());
    }
    if (centering) {
      g.x.colwise() -= meanX;
      g.y.colwise() -= meanY;
    }
    isvd::ChartPoint point;
    try {
      point = monitor->step(g);
    } catch (const std::invalid_argument& e) {
      throw isvd::StreamError(g.t, e.what());
    }
    *out << g.t << ',' << isvd::formatDouble(point.statistic) << ',' << hText << ','
         << (point.alarm ? 1 : 0) << '\n';

    if (point.alarm && !alarmSummaryWritten) {
      alarmSummaryWritten = true;
      const auto& F = monitor->factored();
      Json summary{{"t", g.t},
                   {"statistic", point.statistic},
                   {"H", H},
                   {"u", isvd::toJson(F.U.col(0).eval())},
                   {"v", isvd::toJson(F.V.col(0).eval())}};
      if (args.alarmSummaryPath.empty())
        std::cerr << summary.dump() << "\n";
      else
        writeTextFile(args.alarmSummaryPath, summary.dump(2) + "\n");
    }
    if (point.alarm && args.haltOnAlarm) break;
  }

  if (!args.saveStatePath.empty()) {
    Json snap = isvd::snapshotToJson(*monitor);
    if (centering) {
      snap["mean_x"] = isvd::toJson(meanX);
      snap["mean_y"] = isvd::toJson(meanY);
    }
    writeTextFile(args.saveStatePath, snap.dump(2) + "\n");
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string configPath, outputDir;
};

isvd::SetupSpec setupFromJson(const Json& j) {
  const std::string context = "setup";
  isvd::requireKeys(j, {"id"},
                    {"J", "s01", "oc_geometry", "lambda", "r", "s_sq_grid", "p", "q", "m"},
                    context);
  isvd::SetupSpec setup;
  setup.id = static_cast<int>(getOptionalInteger(j, "id", 0, context));
  setup.J = static_cast<int>(getOptionalInteger(j, "J", setup.J, context));
  setup.s01 = getOptionalNumber(j, "s01", setup.s01, context);
  if (j.contains("oc_geometry")) {
    const Json& g = j.at("oc_geometry");
    if (!g.is_string()) throw InputError("setup: 'oc_geometry' must be a string");
    const std::string name = g.get<std::string>();
    if (name == "none")
      setup.geometry = isvd::OcGeometry::None;
    else if (name == "parallel")
      setup.geometry = isvd::OcGeometry::Parallel;
    else if (name == "perpendicular")
      setup.geometry = isvd::OcGeometry::Perpendicular;
    else
      throw InputError("setup: unknown oc_geometry '" + name + "'");
  }
  setup.lambda = getOptionalNumber(j, "lambda", setup.lambda, context);
  setup.r = static_cast<int>(getOptionalInteger(j, "r", setup.r, context));
  setup.p = getOptionalInteger(j, "p", setup.p, context);
  setup.q = getOptionalInteger(j, "q", setup.q, context);
  setup.m = static_cast<int>(getOptionalInteger(j, "m", setup.m, context));
  if (j.contains("s_sq_grid")) {
    const Eigen::VectorXd grid = isvd::vectorFromJson(j.at("s_sq_grid"), "setup.s_sq_grid");
    setup.sSqGrid.assign(grid.data(), grid.data() + grid.size());
  }
  try {
    setup.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("setup: ") + e.what());
  }
  return setup;
}

int cmdSimulate(const SimulateArgs& args) {
  // Fail on an unwritable destination before the simulation runs, not after.
  std::error_code ec;
  std::filesystem::create_directories(args.outputDir, ec);
  if (ec) throw InputError("cannot create output directory '" + args.outputDir + "'");

  const Json cfg = parseJsonFile(args.configPath, "config");
  isvd::requireKeys(cfg, {},
                    {"setups", "methods", "replications", "target_arl0", "tolerance",
                     "max_run_length", "seed"},
                    "config");
  isvd::CalibrationSpec spec = calibrationSpecFromJson(cfg, "config");

  const std::vector<isvd::SetupSpec> grid = isvd::table1Setups();
  std::vector<isvd::SetupSpec> setups;
  if (cfg.contains("setups")) {
    const Json& sj = cfg.at("setups");
    if (!sj.is_array() || sj.empty())
      throw InputError("config: 'setups' must be a nonempty array");
    for (const Json& item : sj) {
      if (item.is_number_integer()) {
        const long id = item.get<long>();
        const auto it = std::find_if(grid.begin(), grid.end(),
                                     [&](const isvd::SetupSpec& s) { return s.id == id; });
        if (it == grid.end())
          throw InputError("config: unknown setup id " + std::to_string(id));
        setups.push_back(*it);
      } else if (item.is_object()) {
        setups.push_back(setupFromJson(item));
      } else {
        throw InputError("config: 'setups' entries must be ids or setup objects");
      }
    }
  } else {
    setups = grid;
  }

  std::vector<isvd::ChartMethod> methods{isvd::ChartMethod::Isvd};
  if (cfg.contains("methods")) {
    methods.clear();
    const Json& mj = cfg.at("methods");
    if (!mj.is_array() || mj.empty())
      throw InputError("config: 'methods' must be a nonempty array");
    for (const Json& item : mj) {
      if (!item.is_string()) throw InputError("config: 'methods' entries must be strings");
      const std::string name = item.get<std::string>();
      if (name == "isvd")
        methods.push_back(isvd::ChartMethod::Isvd);
      else if (name == "baseline")
        methods.push_back(isvd::ChartMethod::Baseline);
      else
        throw InputError("config: unknown method '" + name + "'");
    }
  }

  isvd::CalibrationCache cache;
  std::vector<isvd::ExperimentResult> results;
  Json calibrations = Json::array();
  for (const auto& setup : setups) {
    for (const auto method : methods) {
      const isvd::ControlLimitResult& limit = cache.get(setup, method, spec);
      calibrations.push_back(Json{{"setup_id", setup.id},
                                  {"method", isvd::methodName(method)},
                                  {"H", limit.H},
                                  {"target_arl0", limit.targetArl0},
                                  {"achieved_arl0", limit.achieved.mean},
                                  {"std_error", limit.achieved.stdError},
                                  {"replications", limit.achieved.replications}});
      const auto curve = isvd::ocArlCurve(setup, method, spec, limit.H);
      results.insert(results.end(), curve.begin(), curve.end());
    }
  }

  std::ostringstream csv;
  isvd::writeExperimentsCsv(csv, results);
  writeTextFile(args.outputDir + "/results.csv", csv.str());

  Json rows = Json::array();
  for (const auto& r : results)
    rows.push_back(Json{{"setup_id", r.setupId},
                        {"method", isvd::methodName(r.method)},
                        {"s_sq", r.sSq},
                        {"oc_arl", r.ocArl},
                        {"std_error", r.stdError},
                        {"censor_fraction", r.censorFraction},
                        {"H", r.H},
                        {"replications", r.replications},
                        {"seed", r.seed}});
  Json summary{{"calibrations", std::move(calibrations)}, {"results", std::move(rows)}};
  writeTextFile(args.outputDir + "/summary.json", summary.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string dims = "128x128,256x256";
  std::string outputPath;
  int r = 5, m = 5, J = 1;
  long steps = 200;
  long seed = 7;
};

int cmdBench(const BenchArgs& args) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> dims;
  std::stringstream ss(args.dims);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const auto split = token.find('x');
    if (split == std::string::npos)
      throw InputError("bad --dims entry '" + token + "' (expected PxQ)");
    try {
      dims.emplace_back(std::stol(token.substr(0, split)), std::stol(token.substr(split + 1)));
    } catch (const std::exception&) {
      throw InputError("bad --dims entry '" + token + "' (expected PxQ)");
    }
  }
  if (dims.empty()) throw InputError("--dims is empty");

  const auto rows = isvd::timingBenchmark(dims, args.r, args.m, args.J, args.steps,
                                          static_cast<isvd::Seed>(args.seed));
  std::ostringstream csv;
  isvd::writeTimingCsv(csv, rows);
  if (args.outputPath.empty())
    std::cout << csv.str();
  else
    writeTextFile(args.outputPath, csv.str());
  return 0;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string modelPath, outputPath;
  long steps = 100;
  int m = 5;
  long seed = 1;
};

int cmdGenerate(const GenerateArgs& args) {
  if (args.steps < 1) throw InputError("--steps must be positive");
  const isvd::ProcessModel model =
      isvd::modelFromJson(parseJsonFile(args.modelPath, "model"));
  isvd::ModelStream stream(model, args.m, static_cast<isvd::Seed>(args.seed));

  std::ofstream fileOut;
  std::ostream* out = &std::cout;
  if (!args.outputPath.empty()) {
    fileOut.open(args.outputPath);
    if (!fileOut) throw InputError("cannot open '" + args.outputPath + "' for writing");
    out = &fileOut;
  }
  for (long t = 1; t <= args.steps; ++t) *out << isvd::toJson(stream(t)).dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming cross-covariance monitoring with an incremental-SVD EWMA chart"};
  app.require_subcommand(1);

  CalibrateArgs calArgs;
  auto* cal = app.add_subcommand("calibrate", "Estimate Sigma0 from history and search H");
  cal->add_option("--config", calArgs.configPath, "Chart/calibration config JSON")->required();
  cal->add_option("--data", calArgs.dataPath, "Historical stream (JSON lines)")->required();
  cal->add_option("--output", calArgs.outputPath, "Calibration JSON to write")->required();

  MonitorArgs monArgs;
  auto* mon = app.add_subcommand("monitor", "Run the chart over a stream, emit CSV");
  mon->add_option("--calibration", monArgs.calibrationPath, "Calibration JSON");
  mon->add_option("--resume", monArgs.resumePath, "Monitor snapshot JSON to resume from");
  mon->add_option("--input", monArgs.inputPath, "Stream file (default: stdin)");
  mon->add_option("--output", monArgs.outputPath, "CSV output (default: stdout)");
  mon->add_option("--alarm-summary", monArgs.alarmSummaryPath,
                  "First-alarm summary JSON path (default: stderr)");
  mon->add_option("--save-state", monArgs.saveStatePath, "Snapshot JSON to write at end");
  mon->add_flag("--subtract-means", monArgs.subtractMeans,
                "Subtract the calibration file's stored means");
  mon->add_flag("--halt-on-alarm", monArgs.haltOnAlarm, "Stop after the first alarm");

  SimulateArgs simArgs;
  auto* sim = app.add_subcommand("simulate", "Run simulation setups, write CSV/JSON");
  sim->add_option("--config", simArgs.configPath, "Experiment config JSON")->required();
  sim->add_option("--output-dir", simArgs.outputDir, "Directory for results")->required();

  BenchArgs benchArgs;
  auto* bench = app.add_subcommand("bench", "Per-step timing of both chart variants");
  bench->add_option("--dims", benchArgs.dims, "Comma-separated PxQ list");
  bench->add_option("--r", benchArgs.r, "Rank budget");
  bench->add_option("--m", benchArgs.m, "Subgroup size");
  bench->add_option("--J", benchArgs.J, "In-control factor count");
  bench->add_option("--steps", benchArgs.steps, "Steps per dimension");
  bench->add_option("--seed", benchArgs.seed, "Stream seed");
  bench->add_option("--output", benchArgs.outputPath, "CSV output (default: stdout)");

  GenerateArgs genArgs;
  auto* gen = app.add_subcommand("generate", "Sample a stream from a model JSON");
  gen->add_option("--model", genArgs.modelPath, "Process model JSON")->required();
  gen->add_option("--steps", genArgs.steps, "Number of subgroups");
  gen->add_option("--m", genArgs.m, "Subgroup size");
  gen->add_option("--seed", genArgs.seed, "Stream seed");
  gen->add_option("--output", genArgs.outputPath, "JSONL output (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(cal)) return cmdCalibrate(calArgs);
    if (app.got_subcommand(mon)) return cmdMonitor(monArgs);
    if (app.got_subcommand(sim)) return cmdSimulate(simArgs);
    if (app.got_subcommand(bench)) return cmdBench(benchArgs);
    if (app.got_subcommand(gen)) return cmdGenerate(genArgs);
  } catch (const isvd::StreamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const isvd::CalibrationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
