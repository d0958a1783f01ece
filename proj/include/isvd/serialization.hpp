#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

#include "isvd/calibration.hpp"
#include "isvd/model.hpp"
#include "isvd/monitor.hpp"

namespace isvd {

using Json = nlohmann::json;

// Malformed configuration or data (CLI exit 2).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stream inconsistent with the calibration or with itself (CLI exit 4).
class StreamError : public std::runtime_error {
 public:
  StreamError(long t, const std::string& message);
  long t() const { return t_; }

 private:
  long t_;
};

// Fail-fast key policy: every key must be either required or optional, and
// all required keys must be present.
void requireKeys(const Json& j, std::initializer_list<const char*> required,
                 std::initializer_list<const char*> optional, const std::string& context);

Json toJson(const Eigen::VectorXd& v);
Eigen::VectorXd vectorFromJson(const Json& j, const std::string& context);
Json toJson(const Eigen::MatrixXd& M);  // array of rows
Eigen::MatrixXd matrixFromJson(const Json& j, const std::string& context);

// Calibration document: the factored in-control cross-covariance, the chart
// parameters, and the achieved calibration. mean_x / mean_y appear only when
// the calibration estimated means for later subtraction.
struct CalibrationFile {
  Eigen::Index p = 0, q = 0;
  Sigma0Factors sigma0;
  double H = 0.0;
  double lambda = 0.02;
  int r = 5;
  int m = 5;
  double targetArl0 = 0.0;
  double achievedArl = 0.0;
  Seed seed = 0;
  Eigen::VectorXd meanX, meanY;  // empty when means are taken as zero

  MonitorConfig config() const;
  void validate() const;
};

Json toJson(const CalibrationFile& file);
CalibrationFile calibrationFileFromJson(const Json& j);

// Monitor snapshot (t, U, S, V, config, sigma0) for stop/resume.
Json snapshotToJson(const Monitor& monitor);
Monitor monitorFromSnapshot(const Json& j);

// Stream records: {"t": ..., "x": m arrays of p reals, "y": m arrays of q reals}.
Json toJson(const Subgroup& g);
Subgroup subgroupFromJson(const Json& j, const std::string& context);
Subgroup parseStreamRecordLine(const std::string& line, long lineNo);

// Declarative process models for the simulate/generate commands.
Json toJson(const ProcessModel& model);
ProcessModel modelFromJson(const Json& j);

}  // namespace isvd
