#include "isvd/serialization.hpp"

#include <algorithm>
#include <cmath>

namespace isvd {

StreamError::StreamError(long t, const std::string& message)
    : std::runtime_error("record t=" + std::to_string(t) + ": " + message), t_(t) {}

namespace {

[[noreturn]] void fail(const std::string& context, const std::string& what) {
  throw InputError(context + ": " + what);
}

const Json& member(const Json& j, const char* key, const std::string& context) {
  if (!j.is_object()) fail(context, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) fail(context, std::string("missing key '") + key + "'");
  return *it;
}

double getNumber(const Json& j, const char* key, const std::string& context) {
  const Json& v = member(j, key, context);
  if (!v.is_number()) fail(context, std::string("key '") + key + "' must be a number");
  return v.get<double>();
}

long getInteger(const Json& j, const char* key, const std::string& context) {
  const Json& v = member(j, key, context);
  if (!v.is_number_integer())
    fail(context, std::string("key '") + key + "' must be an integer");
  return v.get<long>();
}

Seed getSeed(const Json& j, const char* key, const std::string& context) {
  const Json& v = member(j, key, context);
  if (v.is_number_unsigned()) return v.get<Seed>();
  if (v.is_number_integer() && v.get<long long>() >= 0)
    return static_cast<Seed>(v.get<long long>());
  fail(context, std::string("key '") + key + "' must be a nonnegative integer");
}

}  // namespace

void requireKeys(const Json& j, std::initializer_list<const char*> required,
                 std::initializer_list<const char*> optional, const std::string& context) {
  if (!j.is_object()) fail(context, "expected an object");
  for (const char* key : required)
    if (!j.contains(key)) fail(context, std::string("missing key '") + key + "'");
  for (const auto& item : j.items()) {
    const auto matches = [&](const char* key) { return item.key() == key; };
    if (!std::any_of(required.begin(), required.end(), matches) &&
        !std::any_of(optional.begin(), optional.end(), matches))
      fail(context, "unknown key '" + item.key() + "'");
  }
}

Json toJson(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vectorFromJson(const Json& j, const std::string& context) {
  if (!j.is_array()) fail(context, "expected an array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const Json& v = j[static_cast<std::size_t>(i)];
    if (!v.is_number()) fail(context, "expected an array of numbers");
    out(i) = v.get<double>();
  }
  return out;
}

Json toJson(const Eigen::MatrixXd& M) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd matrixFromJson(const Json& j, const std::string& context) {
  if (!j.is_array() || j.empty()) fail(context, "expected a nonempty array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) fail(context, "expected rows to be arrays");
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      fail(context, "rows have inconsistent lengths");
    for (Eigen::Index k = 0; k < cols; ++k) {
      const Json& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) fail(context, "expected numeric entries");
      out(i, k) = v.get<double>();
    }
  }
  return out;
}

namespace {

Json componentsToJson(const Sigma0Factors& sigma0) {
  Json out = Json::array();
  for (const auto& c : sigma0.components)
    out.push_back(Json{{"s0j_sq", c.weight}, {"u0j", toJson(c.u)}, {"v0j", toJson(c.v)}});
  return out;
}

Sigma0Factors componentsFromJson(const Json& j, long expectedCount, const std::string& context) {
  if (!j.is_array()) fail(context, "'components' must be an array");
  if (expectedCount >= 0 && static_cast<long>(j.size()) != expectedCount)
    fail(context, "'J' does not match the number of components");
  Sigma0Factors out;
  for (const auto& cj : j) {
    requireKeys(cj, {"s0j_sq", "u0j", "v0j"}, {}, context + ".components");
    Sigma0Component c;
    c.weight = getNumber(cj, "s0j_sq", context);
    c.u = vectorFromJson(cj.at("u0j"), context + ".u0j");
    c.v = vectorFromJson(cj.at("v0j"), context + ".v0j");
    out.components.push_back(std::move(c));
  }
  return out;
}

}  // namespace

MonitorConfig CalibrationFile::config() const {
  MonitorConfig c;
  c.lambda = lambda;
  c.r = r;
  c.H = H;
  c.m = m;
  return c;
}

void CalibrationFile::validate() const {
  if (p < 1 || q < 1) throw InputError("calibration: p and q must be positive");
  try {
    config().validate();
    sigma0.validate(p, q);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("calibration: ") + e.what());
  }
  if (!std::isfinite(H)) throw InputError("calibration: H must be finite");
  if (meanX.size() != 0 && meanX.size() != p)
    throw InputError("calibration: mean_x has wrong dimension");
  if (meanY.size() != 0 && meanY.size() != q)
    throw InputError("calibration: mean_y has wrong dimension");
}

Json toJson(const CalibrationFile& file) {
  Json j;
  j["p"] = file.p;
  j["q"] = file.q;
  j["J"] = file.sigma0.count();
  j["components"] = componentsToJson(file.sigma0);
  j["H"] = file.H;
  j["lambda"] = file.lambda;
  j["r"] = file.r;
  j["m"] = file.m;
  j["target_arl0"] = file.targetArl0;
  j["achieved_arl"] = file.achievedArl;
  j["seed"] = file.seed;
  if (file.meanX.size()) j["mean_x"] = toJson(file.meanX);
  if (file.meanY.size()) j["mean_y"] = toJson(file.meanY);
  return j;
}

CalibrationFile calibrationFileFromJson(const Json& j) {
  const std::string context = "calibration";
  requireKeys(j,
              {"p", "q", "J", "components", "H", "lambda", "r", "m", "target_arl0",
               "achieved_arl", "seed"},
              {"mean_x", "mean_y"}, context);
  CalibrationFile file;
  file.p = getInteger(j, "p", context);
  file.q = getInteger(j, "q", context);
  file.sigma0 = componentsFromJson(j.at("components"), getInteger(j, "J", context), context);
  file.H = getNumber(j, "H", context);
  file.lambda = getNumber(j, "lambda", context);
  file.r = static_cast<int>(getInteger(j, "r", context));
  file.m = static_cast<int>(getInteger(j, "m", context));
  file.targetArl0 = getNumber(j, "target_arl0", context);
  file.achievedArl = getNumber(j, "achieved_arl", context);
  file.seed = getSeed(j, "seed", context);
  if (j.contains("mean_x")) file.meanX = vectorFromJson(j.at("mean_x"), context + ".mean_x");
  if (j.contains("mean_y")) file.meanY = vectorFromJson(j.at("mean_y"), context + ".mean_y");
  file.validate();
  return file;
}

Json snapshotToJson(const Monitor& monitor) {
  const auto& F = monitor.factored();
  const auto& c = monitor.config();
  Json j;
  j["t"] = monitor.t();
  j["U"] = toJson(F.U);
  j["S"] = toJson(F.S);
  j["V"] = toJson(F.V);
  // The renormalization counter keeps a resumed chart on the exact
  // reorthonormalization schedule of the uninterrupted run.
  j["update_count"] = monitor.updateCount();
  j["config"] = Json{{"lambda", c.lambda}, {"r", c.r}, {"H", c.H}, {"m", c.m}};
  j["sigma0"] = Json{{"J", monitor.sigma0().count()},
                     {"components", componentsToJson(monitor.sigma0())}};
  return j;
}

Monitor monitorFromSnapshot(const Json& j) {
  const std::string context = "snapshot";
  // mean_x/mean_y are maintained by front-ends that center the stream; the
  // chart state itself never depends on them.
  requireKeys(j, {"t", "U", "S", "V", "update_count", "config", "sigma0"},
              {"mean_x", "mean_y"}, context);

  const Json& cj = j.at("config");
  requireKeys(cj, {"lambda", "r", "H", "m"}, {}, context + ".config");
  MonitorConfig config;
  config.lambda = getNumber(cj, "lambda", context);
  config.r = static_cast<int>(getInteger(cj, "r", context));
  config.H = getNumber(cj, "H", context);
  config.m = static_cast<int>(getInteger(cj, "m", context));

  const Json& sj = j.at("sigma0");
  requireKeys(sj, {"J", "components"}, {}, context + ".sigma0");
  const Sigma0Factors sigma0 =
      componentsFromJson(sj.at("components"), getInteger(sj, "J", context), context);

  FactoredMatrix<double> F;
  F.U = matrixFromJson(j.at("U"), context + ".U");
  F.S = vectorFromJson(j.at("S"), context + ".S");
  F.V = matrixFromJson(j.at("V"), context + ".V");
  const long updates = getInteger(j, "update_count", context);
  if (updates < 0) fail(context, "'update_count' must be nonnegative");
  F.updatesSinceRenorm = static_cast<int>(std::min<long>(updates, kRenormCadence));
  if (F.U.cols() != F.S.size() || F.V.cols() != F.S.size())
    fail(context, "factor shapes disagree");
  for (Eigen::Index i = 0; i < F.rank(); ++i) {
    if (!(F.S(i) > 0) || !std::isfinite(F.S(i)))
      fail(context, "singular values must be positive and finite");
    if (i > 0 && F.S(i) > F.S(i - 1)) fail(context, "singular values must be nonincreasing");
  }
  if (F.rank() > config.r) fail(context, "rank exceeds the configured bound");
  if (F.rank() > 0 && orthogonalityDrift(F) > 1e-8)
    fail(context, "stored factors are not orthonormal");

  try {
    return Monitor(sigma0, config, std::move(F), getInteger(j, "t", context));
  } catch (const std::invalid_argument& e) {
    throw InputError(context + ": " + e.what());
  }
}

Json toJson(const Subgroup& g) {
  Json xs = Json::array(), ys = Json::array();
  for (Eigen::Index i = 0; i < g.x.cols(); ++i) xs.push_back(toJson(g.x.col(i).eval()));
  for (Eigen::Index i = 0; i < g.y.cols(); ++i) ys.push_back(toJson(g.y.col(i).eval()));
  return Json{{"t", g.t}, {"x", std::move(xs)}, {"y", std::move(ys)}};
}

Subgroup subgroupFromJson(const Json& j, const std::string& context) {
  requireKeys(j, {"t", "x", "y"}, {}, context);
  Subgroup g;
  g.t = getInteger(j, "t", context);
  if (g.t < 1) fail(context, "'t' must be a positive integer");
  const Json& xj = j.at("x");
  const Json& yj = j.at("y");
  if (!xj.is_array() || !yj.is_array() || xj.empty() || yj.empty())
    fail(context, "'x' and 'y' must be nonempty arrays of observations");
  if (xj.size() != yj.size())
    fail(context, "'x' and 'y' must pair up (equal subgroup sizes)");
  const Eigen::MatrixXd xs = matrixFromJson(xj, context + ".x");
  const Eigen::MatrixXd ys = matrixFromJson(yj, context + ".y");
  g.x = xs.transpose();
  g.y = ys.transpose();
  if (!g.x.allFinite() || !g.y.allFinite()) fail(context, "non-finite observation values");
  return g;
}

Subgroup parseStreamRecordLine(const std::string& line, long lineNo) {
  const std::string context = "line " + std::to_string(lineNo);
  const Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded()) fail(context, "not valid JSON");
  return subgroupFromJson(j, context);
}

Json toJson(const ProcessModel& model) {
  Json j;
  j["p"] = model.p;
  j["q"] = model.q;
  j["noise_sd_x"] = model.noiseSdX;
  j["noise_sd_y"] = model.noiseSdY;
  if (model.meanX.size()) j["mean_x"] = toJson(model.meanX);
  if (model.meanY.size()) j["mean_y"] = toJson(model.meanY);
  Json factors = Json::array();
  for (const auto& f : model.factors)
    factors.push_back(Json{{"scale", f.scale}, {"u", toJson(f.u)}, {"v", toJson(f.v)}});
  j["factors"] = std::move(factors);
  if (model.change) {
    j["change"] = Json{{"scale", model.change->scale},
                       {"u", toJson(model.change->u)},
                       {"v", toJson(model.change->v)}};
    j["change_time"] = model.changeTime;
  }
  return j;
}

ProcessModel modelFromJson(const Json& j) {
  const std::string context = "model";
  requireKeys(j, {"p", "q"},
              {"noise_sd_x", "noise_sd_y", "mean_x", "mean_y", "factors", "change",
               "change_time"},
              context);
  ProcessModel model;
  model.p = getInteger(j, "p", context);
  model.q = getInteger(j, "q", context);
  if (j.contains("noise_sd_x")) model.noiseSdX = getNumber(j, "noise_sd_x", context);
  if (j.contains("noise_sd_y")) model.noiseSdY = getNumber(j, "noise_sd_y", context);
  if (j.contains("mean_x")) model.meanX = vectorFromJson(j.at("mean_x"), context + ".mean_x");
  if (j.contains("mean_y")) model.meanY = vectorFromJson(j.at("mean_y"), context + ".mean_y");
  if (j.contains("factors")) {
    const Json& fj = j.at("factors");
    if (!fj.is_array()) fail(context, "'factors' must be an array");
    for (const auto& f : fj) {
      requireKeys(f, {"scale", "u", "v"}, {}, context + ".factors");
      LatentFactor lf;
      lf.scale = getNumber(f, "scale", context);
      lf.u = vectorFromJson(f.at("u"), context + ".u");
      lf.v = vectorFromJson(f.at("v"), context + ".v");
      model.factors.push_back(std::move(lf));
    }
  }
  if (j.contains("change")) {
    const Json& cj = j.at("change");
    requireKeys(cj, {"scale", "u", "v"}, {}, context + ".change");
    LatentFactor cf;
    cf.scale = getNumber(cj, "scale", context);
    cf.u = vectorFromJson(cj.at("u"), context + ".u");
    cf.v = vectorFromJson(cj.at("v"), context + ".v");
    model.change = std::move(cf);
    model.changeTime = j.contains("change_time") ? getInteger(j, "change_time", context) : 1;
  } else if (j.contains("change_time")) {
    fail(context, "'change_time' given without a 'change'");
  }
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(context + ": " + e.what());
  }
  return model;
}

}  // namespace isvd
