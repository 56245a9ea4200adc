#pragma once

#include "qpi/adaptation.hpp"
#include "qpi/estimators.hpp"
#include "qpi/simulator.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

namespace qpi {

inline constexpr int kScenarioSchemaVersion = 1;

/// Estimator and adaptation settings that travel with a scenario file.
struct ExperimentConfig {
  KFState kf;
  RLSState rls;
  AdaptationConfig adaptation;
};

struct ScenarioFile {
  Scenario scenario;
  ExperimentConfig experiment;
};

namespace io {

using nlohmann::json;

inline long line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<long>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

class Reader {
 public:
  explicit Reader(const json& j, std::string path = "") : j_(j), path_(std::move(path)) {}

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  Reader at(const char* key) const {
    if (!has(key)) fail(std::string("missing required field '") + key + "'");
    return Reader(j_.at(key), path_ + "/" + key);
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    return j_.get<double>();
  }
  long integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<long>();
  }
  bool boolean() const {
    if (!j_.is_boolean()) fail("expected a boolean");
    return j_.get<bool>();
  }
  std::string string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }
  template <int N>
  Eigen::Matrix<double, N, 1> vec() const {
    if (!j_.is_array() || j_.size() != static_cast<std::size_t>(N))
      fail("expected an array of " + std::to_string(N) + " numbers");
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v(i) = Reader(j_[static_cast<std::size_t>(i)], path_).number();
    return v;
  }
  std::vector<Reader> array() const {
    if (!j_.is_array()) fail("expected an array");
    std::vector<Reader> out;
    for (std::size_t i = 0; i < j_.size(); ++i)
      out.emplace_back(j_[i], path_ + "/" + std::to_string(i));
    return out;
  }

  double number_or(const char* key, double fallback) const {
    return has(key) ? at(key).number() : fallback;
  }
  bool boolean_or(const char* key, bool fallback) const {
    return has(key) ? at(key).boolean() : fallback;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError((path_.empty() ? std::string("/") : path_) + ": " + msg);
  }

 private:
  const json& j_;
  std::string path_;
};

inline ParameterVector read_parameters(const Reader& r) {
  return {r.at("m").number(), r.at("h_x").number(), r.at("h_y").number()};
}

inline json write_parameters(const ParameterVector& p) {
  return {{"m", p.m}, {"h_x", p.h_x}, {"h_y", p.h_y}};
}

inline json write_vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline GaitSchedule read_segment(const Reader& r) {
  GaitSchedule s;
  const auto pattern = gait_pattern_from_string(r.at("pattern").string());
  if (!pattern) r.at("pattern").fail("unknown gait pattern (stand | trot | custom)");
  s.pattern = *pattern;
  s.start_time = r.at("start_time").number();
  s.duration = r.at("duration").number();
  s.phase_duration = r.number_or("phase_duration", s.phase_duration);
  s.swing_apex = r.number_or("swing_apex", s.swing_apex);
  s.bob_amplitude = r.number_or("bob_amplitude", s.bob_amplitude);
  s.sway_amplitude = r.number_or("sway_amplitude", s.sway_amplitude);
  s.yaw_vibration = r.number_or("yaw_vibration", s.yaw_vibration);
  if (r.has("vibration_cycles")) s.vibration_cycles = static_cast<int>(r.at("vibration_cycles").integer());
  if (r.has("table")) {
    for (const auto& row : r.at("table").array()) {
      const auto cells = row.array();
      if (cells.size() != kLegCount) row.fail("stance rows need exactly four booleans");
      StanceRow stance{};
      for (std::size_t i = 0; i < kLegCount; ++i) stance[i] = cells[i].boolean();
      s.table.push_back(stance);
    }
  }
  return s;
}

inline json write_segment(const GaitSchedule& s) {
  json j = {{"pattern", std::string(to_string(s.pattern))},
            {"start_time", s.start_time},
            {"duration", s.duration},
            {"phase_duration", s.phase_duration},
            {"swing_apex", s.swing_apex},
            {"bob_amplitude", s.bob_amplitude},
            {"sway_amplitude", s.sway_amplitude},
            {"yaw_vibration", s.yaw_vibration},
            {"vibration_cycles", s.vibration_cycles}};
  if (!s.table.empty()) {
    json rows = json::array();
    for (const auto& row : s.table) rows.push_back(json(std::vector<bool>(row.begin(), row.end())));
    j["table"] = rows;
  }
  return j;
}

inline NoiseModel read_noise(const Reader& r) {
  NoiseModel n;
  n.force_noise_std = r.number_or("force_noise_std", n.force_noise_std);
  n.position_noise_std = r.number_or("position_noise_std", n.position_noise_std);
  n.accel_noise_std = r.number_or("accel_noise_std", n.accel_noise_std);
  n.angular_accel_noise_std = r.number_or("angular_accel_noise_std", n.angular_accel_noise_std);
  if (r.has("standing_force_bias")) n.standing_force_bias = r.at("standing_force_bias").vec<3>();
  if (r.has("swing_force_bias")) n.swing_force_bias = r.at("swing_force_bias").vec<3>();
  if (r.has("contact_detection_lag"))
    n.contact_detection_lag = static_cast<int>(r.at("contact_detection_lag").integer());
  n.swing_contact_fault = r.boolean_or("swing_contact_fault", n.swing_contact_fault);
  if (r.has("seed")) {
    const long seed = r.at("seed").integer();
    if (seed < 0) r.at("seed").fail("seed must be non-negative");
    n.seed = static_cast<std::uint64_t>(seed);
  }
  return n;
}

inline json write_noise(const NoiseModel& n) {
  return {{"force_noise_std", n.force_noise_std},
          {"position_noise_std", n.position_noise_std},
          {"accel_noise_std", n.accel_noise_std},
          {"angular_accel_noise_std", n.angular_accel_noise_std},
          {"standing_force_bias", write_vec(n.standing_force_bias)},
          {"swing_force_bias", write_vec(n.swing_force_bias)},
          {"contact_detection_lag", n.contact_detection_lag},
          {"swing_contact_fault", n.swing_contact_fault},
          {"seed", n.seed}};
}

template <int N>
Eigen::Matrix<double, N, N> read_diagonal(const Reader& r) {
  return r.vec<N>().asDiagonal();
}

inline ExperimentConfig read_experiment(const Reader& r, const Scenario& scenario) {
  ExperimentConfig e;
  e.adaptation.regressor_model = scenario.regressor_model;
  if (r.has("kf")) {
    const Reader kf = r.at("kf");
    if (kf.has("initial")) e.kf.pi_hat = read_parameters(kf.at("initial"));
    if (kf.has("P0")) e.kf.P = read_diagonal<3>(kf.at("P0"));
    if (kf.has("Q")) e.kf.Q = read_diagonal<3>(kf.at("Q"));
    if (kf.has("R")) e.kf.R = read_diagonal<6>(kf.at("R"));
    if ((e.kf.R.diagonal().array() <= 0.0).any()) kf.at("R").fail("R must be positive definite");
    if ((e.kf.Q.diagonal().array() < 0.0).any()) kf.at("Q").fail("Q must be non-negative");
    if ((e.kf.P.diagonal().array() < 0.0).any()) kf.at("P0").fail("P0 must be non-negative");
  }
  if (r.has("rls")) {
    const Reader rls = r.at("rls");
    if (rls.has("initial")) e.rls.pi_hat = read_parameters(rls.at("initial"));
    e.rls.lambda = rls.number_or("lambda", e.rls.lambda);
    if (rls.has("P0")) e.rls.P = rls.at("P0").number() * Mat3::Identity();
    if (!(e.rls.lambda > 0.0 && e.rls.lambda <= 1.0))
      rls.at("lambda").fail("forgetting factor must lie in (0, 1]");
  }
  if (r.has("adaptation")) {
    const Reader a = r.at("adaptation");
    if (a.has("thresholds")) e.adaptation.thresholds = a.at("thresholds").vec<3>();
    if (a.has("leg_contribution")) e.adaptation.leg_contribution = read_parameters(a.at("leg_contribution"));
    if (a.has("publish_policy")) {
      const auto p = publish_policy_from_string(a.at("publish_policy").string());
      if (!p) a.at("publish_policy").fail("unknown publish policy (all_below | per_parameter)");
      e.adaptation.publish_policy = *p;
    }
    e.adaptation.latched = a.boolean_or("latched", e.adaptation.latched);
    if (a.has("airborne_update")) {
      const auto u = airborne_update_from_string(a.at("airborne_update").string());
      if (!u) a.at("airborne_update").fail("unknown airborne update (zero_forces | skip)");
      e.adaptation.airborne_update = *u;
    }
  }
  try {
    validate(e.adaptation, e.kf.pi_hat.m);
  } catch (const ConfigError& err) {
    r.fail(err.what());
  }
  return e;
}

inline json write_experiment(const ExperimentConfig& e) {
  return {{"kf",
           {{"initial", write_parameters(e.kf.pi_hat)},
            {"P0", write_vec(e.kf.P.diagonal())},
            {"Q", write_vec(e.kf.Q.diagonal())},
            {"R", write_vec(e.kf.R.diagonal())}}},
          {"rls",
           {{"initial", write_parameters(e.rls.pi_hat)},
            {"lambda", e.rls.lambda},
            {"P0", e.rls.P(0, 0)}}},
          {"adaptation",
           {{"thresholds", write_vec(e.adaptation.thresholds)},
            {"leg_contribution", write_parameters(e.adaptation.leg_contribution)},
            {"publish_policy", std::string(to_string(e.adaptation.publish_policy))},
            {"latched", e.adaptation.latched},
            {"airborne_update", std::string(to_string(e.adaptation.airborne_update))}}}};
}

}  // namespace io

/// Parses a scenario document. Syntax errors carry the offending line;
/// semantic errors carry the JSON path of the offending field.
inline ScenarioFile parse_scenario(const std::string& text) {
  using io::json;
  using io::Reader;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const long line = io::line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError("line " + std::to_string(line) + ": " + e.what(), line);
  }

  const Reader root(j);
  if (!j.is_object()) root.fail("scenario must be a JSON object");
  const long version = root.at("schema_version").integer();
  if (version != kScenarioSchemaVersion)
    root.at("schema_version").fail("unsupported schema_version " + std::to_string(version));

  ScenarioFile file;
  Scenario& s = file.scenario;
  s.name = root.at("name").string();
  s.duration = root.at("duration").number();
  s.tick_rate = root.at("tick_rate").number();
  s.gravity = root.number_or("gravity", s.gravity);
  if (root.has("regressor_model")) {
    const auto m = regressor_model_from_string(root.at("regressor_model").string());
    if (!m) root.at("regressor_model").fail("unknown regressor model (gravity_torque | rigid_body)");
    s.regressor_model = *m;
  }
  s.true_base_parameters = io::read_parameters(root.at("true_base_parameters"));
  if (root.has("footprint")) {
    const Reader fp = root.at("footprint");
    s.footprint.half_length = fp.number_or("half_length", s.footprint.half_length);
    s.footprint.half_width = fp.number_or("half_width", s.footprint.half_width);
    s.footprint.height = fp.number_or("height", s.footprint.height);
  }
  for (const auto& seg : root.at("gait_timeline").array()) s.gait_timeline.push_back(io::read_segment(seg));
  if (root.has("payload_events")) {
    for (const auto& ev : root.at("payload_events").array()) {
      PayloadEvent e;
      e.time = ev.at("time").number();
      e.mass_delta = ev.at("mass_delta").number();
      if (ev.has("attach_point")) {
        const Eigen::Vector2d p = ev.at("attach_point").vec<2>();
        e.attach_point = {p(0), p(1)};
      }
      if (ev.has("label")) {
        e.label = ev.at("label").string();
      } else {
        std::ostringstream os;
        os << (e.mass_delta >= 0 ? "attach " : "detach ") << std::abs(e.mass_delta) << " kg";
        e.label = os.str();
      }
      s.payload_events.push_back(e);
    }
  }
  if (root.has("noise")) s.noise = io::read_noise(root.at("noise"));

  try {
    validate(s);
  } catch (const ConfigError& e) {
    root.fail(e.what());
  }
  static const json no_experiment = json::object();
  file.experiment = io::read_experiment(
      root.has("experiment") ? root.at("experiment") : Reader(no_experiment, "/experiment"), s);
  return file;
}

inline ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

inline std::string dump_scenario(const ScenarioFile& file) {
  using io::json;
  const Scenario& s = file.scenario;
  json timeline = json::array();
  for (const auto& seg : s.gait_timeline) timeline.push_back(io::write_segment(seg));
  json events = json::array();
  for (const auto& e : s.payload_events) {
    events.push_back({{"time", e.time},
                      {"mass_delta", e.mass_delta},
                      {"attach_point", {e.attach_point[0], e.attach_point[1]}},
                      {"label", e.label}});
  }
  json j = {{"schema_version", kScenarioSchemaVersion},
            {"name", s.name},
            {"duration", s.duration},
            {"tick_rate", s.tick_rate},
            {"gravity", s.gravity},
            {"regressor_model", std::string(to_string(s.regressor_model))},
            {"true_base_parameters", io::write_parameters(s.true_base_parameters)},
            {"footprint",
             {{"half_length", s.footprint.half_length},
              {"half_width", s.footprint.half_width},
              {"height", s.footprint.height}}},
            {"gait_timeline", timeline},
            {"payload_events", events},
            {"noise", io::write_noise(s.noise)},
            {"experiment", io::write_experiment(file.experiment)}};
  return j.dump(2) + "\n";
}

}  // namespace qpi
