#pragma once

#include "qpi/model.hpp"
#include "qpi/types.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qpi {

enum class GaitPattern { stand, trot, custom };

inline std::string_view to_string(GaitPattern p) {
  switch (p) {
    case GaitPattern::stand: return "stand";
    case GaitPattern::trot: return "trot";
    case GaitPattern::custom: return "custom";
  }
  return "unknown";
}

inline std::optional<GaitPattern> gait_pattern_from_string(std::string_view s) {
  if (s == "stand") return GaitPattern::stand;
  if (s == "trot") return GaitPattern::trot;
  if (s == "custom") return GaitPattern::custom;
  return std::nullopt;
}

using StanceRow = std::array<bool, kLegCount>;

/// One contiguous segment of the gait timeline.
///
/// Outside of stand segments the base is driven by a vibration at
/// vibration_cycles periods per gait phase: a vertical bob, a horizontal sway
/// along the support line of a two-foot stance, and a yaw oscillation.
struct GaitSchedule {
  GaitPattern pattern{GaitPattern::stand};
  double phase_duration{0.35};  ///< s
  double start_time{0.0};       ///< s
  double duration{0.0};         ///< s
  std::vector<StanceRow> table;  ///< custom pattern only, cycled

  double swing_apex{0.05};      ///< m
  double bob_amplitude{0.02};   ///< m/s^2
  double sway_amplitude{0.0};   ///< m/s^2
  double yaw_vibration{0.0};    ///< rad/s^2
  int vibration_cycles{2};

  double end_time() const { return start_time + duration; }
};

/// Nominal stance geometry relative to the footprint center, which the
/// simulated base keeps under its center of mass.
struct Footprint {
  double half_length{0.19};
  double half_width{0.15};
  double height{0.30};

  Vec3 nominal(std::size_t leg) const {
    const double sx = (leg == 0 || leg == 1) ? 1.0 : -1.0;
    const double sy = (leg == 0 || leg == 2) ? 1.0 : -1.0;
    return {sx * half_length, sy * half_width, -height};
  }
};

struct PayloadEvent {
  double time{0.0};
  double mass_delta{0.0};  ///< kg, negative detaches
  std::array<double, 2> attach_point{0.0, 0.0};  ///< m, body frame
  std::string label;
};

struct NoiseModel {
  double force_noise_std{5.0};         ///< N per axis, every foot
  double position_noise_std{0.002};    ///< m per axis
  double accel_noise_std{0.3};         ///< m/s^2 per axis
  double angular_accel_noise_std{0.5}; ///< rad/s^2 per axis
  Vec3 standing_force_bias{0.0, 0.0, 4.0};  ///< N per stance foot in stand segments
  Vec3 swing_force_bias{Vec3::Zero()};      ///< N per unscheduled foot (phantom GRF)
  int contact_detection_lag{0};        ///< ticks
  bool swing_contact_fault{false};     ///< swing feet report a measured contact
  std::uint64_t seed{1};
};

struct Scenario {
  std::string name{"scenario"};
  double duration{10.0};   ///< s
  double tick_rate{100.0};  ///< Hz
  std::vector<GaitSchedule> gait_timeline;
  std::vector<PayloadEvent> payload_events;
  NoiseModel noise;
  ParameterVector true_base_parameters{16.21, 16.21 * 0.0088, 0.0};
  double gravity{9.81};
  Footprint footprint;
  RegressorModel regressor_model{RegressorModel::gravity_torque};

  std::size_t tick_count() const {
    return static_cast<std::size_t>(std::llround(duration * tick_rate));
  }
};

/// Kinematic reference of the stepping gait at one instant.
struct GaitSample {
  StanceRow stance{};
  std::array<Vec3, kLegCount> foot{};  ///< relative to the footprint center
  Vec3 linear_velocity{Vec3::Zero()};
  Vec3 linear_acceleration{Vec3::Zero()};
  Vec3 angular_velocity{Vec3::Zero()};
  Vec3 angular_acceleration{Vec3::Zero()};
  double yaw{0.0};
};

namespace detail {

inline StanceRow stance_row(const GaitSchedule& s, long phase) {
  switch (s.pattern) {
    case GaitPattern::stand: return {true, true, true, true};
    case GaitPattern::trot:
      // diagonal pairs: front-left + rear-right, then front-right + rear-left
      return (phase % 2 == 0) ? StanceRow{true, false, false, true}
                              : StanceRow{false, true, true, false};
    case GaitPattern::custom:
      return s.table.at(static_cast<std::size_t>(phase) % s.table.size());
  }
  return {true, true, true, true};
}

inline int stance_count(const StanceRow& row) {
  return static_cast<int>(std::count(row.begin(), row.end(), true));
}

}  // namespace detail

inline GaitSample stepping_motion(const GaitSchedule& schedule, const Footprint& footprint,
                                  double t) {
  GaitSample out;
  const double local = std::max(0.0, t - schedule.start_time);
  const double period = schedule.phase_duration;
  const long phase = static_cast<long>(std::floor(local / period));
  const double tau = local - static_cast<double>(phase) * period;

  out.stance = detail::stance_row(schedule, phase);
  for (std::size_t i = 0; i < kLegCount; ++i) {
    out.foot[i] = footprint.nominal(i);
    if (!out.stance[i]) out.foot[i].z() += schedule.swing_apex * std::sin(std::numbers::pi * tau / period);
  }
  if (schedule.pattern == GaitPattern::stand) return out;

  const double omega = 2.0 * std::numbers::pi * schedule.vibration_cycles / period;
  const double s = std::sin(omega * tau);
  const double c = std::cos(omega * tau);

  Vec3 sway_dir = Vec3::UnitX();
  if (detail::stance_count(out.stance) == 2) {
    std::array<std::size_t, 2> pair{};
    std::size_t n = 0;
    for (std::size_t i = 0; i < kLegCount; ++i)
      if (out.stance[i]) pair[n++] = i;
    Vec3 d = out.foot[pair[1]] - out.foot[pair[0]];
    d.z() = 0.0;
    if (d.norm() > 0.0) sway_dir = d.normalized();
  }

  out.linear_acceleration = schedule.sway_amplitude * s * sway_dir;
  out.linear_acceleration.z() += schedule.bob_amplitude * s;
  out.linear_velocity = -(schedule.sway_amplitude / omega) * c * sway_dir;
  out.linear_velocity.z() += -(schedule.bob_amplitude / omega) * c;

  out.angular_acceleration = Vec3(0.0, 0.0, schedule.yaw_vibration * c);
  out.angular_velocity = Vec3(0.0, 0.0, (schedule.yaw_vibration / omega) * s);
  out.yaw = -(schedule.yaw_vibration / (omega * omega)) * c;
  return out;
}

/// Minimum-norm contact forces realizing the target wrench
/// [sum F; sum r x F]. Positions are relative to the base origin.
///
/// Throws DistributionError when the contact map has rank below 5 and
/// InfeasibleStanceError when the wrench is unreachable or a normal force
/// would have to pull on the ground.
inline std::vector<Vec3> distribute_forces(std::span<const Vec3> stance, const Vec6& target) {
  if (stance.size() < 2) throw DistributionError("at least two stance feet are required");
  const auto n = static_cast<Eigen::Index>(stance.size());
  Eigen::MatrixXd map(6, 3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    map.block<3, 3>(0, 3 * i) = Mat3::Identity();
    map.block<3, 3>(3, 3 * i) = skew(stance[static_cast<std::size_t>(i)]);
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(map);
  cod.setThreshold(1e-10);
  if (cod.rank() < 5) {
    throw DistributionError("contact map is rank deficient (rank " + std::to_string(cod.rank()) +
                            ")");
  }
  const Eigen::VectorXd forces = cod.solve(target);
  const double residual = (map * forces - target).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-9 * std::max(1.0, target.cwiseAbs().maxCoeff()))) {
    throw InfeasibleStanceError("target wrench is not reachable from the stance feet (residual " +
                                std::to_string(residual) + ")");
  }
  std::vector<Vec3> out(stance.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = forces.segment<3>(3 * i);
    if (out[static_cast<std::size_t>(i)].z() < -1e-9)
      throw InfeasibleStanceError("stance requires a negative normal force");
  }
  return out;
}

/// Quasi-static wrench the contacts must supply for the given motion.
inline Vec6 required_wrench(const ParameterVector& pi, const Vec3& accel, const Vec3& gravity,
                            const Vec3& angular_velocity = Vec3::Zero(),
                            const Vec3& angular_acceleration = Vec3::Zero(),
                            RegressorModel model = RegressorModel::gravity_torque) {
  const Vec3 h(pi.h_x, pi.h_y, 0.0);
  const Vec3 g_eff = accel + gravity;
  Vec6 w;
  w.head<3>() = pi.m * g_eff;
  if (model == RegressorModel::rigid_body) {
    w.head<3>() += angular_acceleration.cross(h) + angular_velocity.cross(angular_velocity.cross(h));
    w.tail<3>() = h.cross(g_eff);
  } else {
    w.tail<3>() = h.cross(gravity);
  }
  return w;
}

inline std::vector<Vec3> distribute_forces(std::span<const Vec3> stance, const ParameterVector& pi,
                                           const Vec3& accel, const Vec3& gravity) {
  if (!(pi.m > 0.0)) throw DomainError("mass must be positive");
  return distribute_forces(stance, required_wrench(pi, accel, gravity));
}

/// Offset along the horizontal normal of a two-foot support line that makes
/// the target wrench reachable. Shifting the whole footprint by this amount
/// keeps the supported moment in the plane of the support line.
inline Vec3 two_foot_balance_shift(const Vec3& r_a, const Vec3& r_b, const Vec6& target) {
  Vec3 u = r_b - r_a;
  u.z() = 0.0;
  if (u.norm() == 0.0) throw DistributionError("stance feet coincide");
  u.normalize();
  const Vec3 normal(-u.y(), u.x(), 0.0);
  const Vec3 force = target.head<3>();
  const Vec3 axis = (r_b - r_a).normalized();
  const double unreachable = axis.dot(target.tail<3>() - r_a.cross(force));
  const double sensitivity = axis.dot(normal.cross(force));
  if (std::abs(sensitivity) < 1e-12) throw InfeasibleStanceError("no vertical support force");
  return (unreachable / sensitivity) * normal;
}

struct SimTick {
  std::size_t index{0};
  RobotSnapshot noisy;
  RobotSnapshot clean;
  ParameterVector pi_true;  ///< inertial-frame first moments
  bool standing{false};
  std::string event_label{"none"};
};

inline void validate(const Scenario& s) {
  if (!(s.tick_rate > 0.0)) throw ConfigError("tick_rate must be positive");
  if (!(s.duration > 0.0)) throw ConfigError("duration must be positive");
  if (!(s.gravity > 0.0)) throw ConfigError("gravity must be positive");
  if (!(s.true_base_parameters.m > 0.0)) throw ConfigError("true mass must be positive");
  if (!(s.footprint.half_length > 0.0 && s.footprint.half_width > 0.0 && s.footprint.height > 0.0))
    throw ConfigError("footprint dimensions must be positive");
  if (s.gait_timeline.empty()) throw ConfigError("gait_timeline must not be empty");
  constexpr double tol = 1e-9;
  double expected_start = 0.0;
  for (std::size_t i = 0; i < s.gait_timeline.size(); ++i) {
    const auto& seg = s.gait_timeline[i];
    const std::string where = "gait segment " + std::to_string(i) + ": ";
    if (std::abs(seg.start_time - expected_start) > tol)
      throw ConfigError(where + "segments must be contiguous and start at 0");
    if (!(seg.duration > 0.0)) throw ConfigError(where + "duration must be positive");
    if (!(seg.phase_duration > 0.0)) throw ConfigError(where + "phase_duration must be positive");
    if (seg.vibration_cycles < 1) throw ConfigError(where + "vibration_cycles must be >= 1");
    if (seg.pattern == GaitPattern::custom) {
      if (seg.table.empty()) throw ConfigError(where + "custom pattern needs a table");
      for (const auto& row : seg.table)
        if (detail::stance_count(row) < 2)
          throw ConfigError(where + "every custom phase needs at least two stance feet");
    }
    expected_start = seg.end_time();
  }
  if (expected_start < s.duration - tol) throw ConfigError("gait_timeline ends before duration");

  const auto& n = s.noise;
  if (n.force_noise_std < 0.0 || n.position_noise_std < 0.0 || n.accel_noise_std < 0.0 ||
      n.angular_accel_noise_std < 0.0)
    throw ConfigError("noise standard deviations must be non-negative");
  if (n.contact_detection_lag < 0) throw ConfigError("contact_detection_lag must be >= 0");

  double mass = s.true_base_parameters.m;
  double last_time = -std::numeric_limits<double>::infinity();
  for (const auto& e : s.payload_events) {
    if (e.time < last_time) throw ConfigError("payload events must be sorted by time");
    last_time = e.time;
    mass += e.mass_delta;
    if (mass < s.true_base_parameters.m - 1e-9)
      throw ConfigError("payload events remove more mass than was attached");
  }
}

/// Deterministic generator of (noisy, clean, truth) snapshots for a scenario.
class ScenarioRunner {
 public:
  explicit ScenarioRunner(Scenario scenario)
      : scenario_(std::move(scenario)), rng_(scenario_.noise.seed) {
    validate(scenario_);
    pi_body_ = scenario_.true_base_parameters;
    history_.assign(static_cast<std::size_t>(scenario_.noise.contact_detection_lag) + 1,
                    StanceRow{true, true, true, true});
  }

  const Scenario& scenario() const { return scenario_; }
  bool done() const { return index_ >= scenario_.tick_count(); }

  SimTick next() {
    if (done()) throw SimulationError("scenario stream exhausted");
    const std::size_t k = index_++;
    const double t = static_cast<double>(k) / scenario_.tick_rate;
    try {
      return make_tick(k, t);
    } catch (const InfeasibleStanceError& e) {
      throw InfeasibleStanceError(std::string(e.what()) + " at tick " + std::to_string(k),
                                  static_cast<long>(k));
    } catch (const DistributionError& e) {
      throw DistributionError(std::string(e.what()) + " at tick " + std::to_string(k));
    }
  }

 private:
  const GaitSchedule& segment_at(double t) const {
    for (const auto& seg : scenario_.gait_timeline)
      if (t < seg.end_time() - 1e-12) return seg;
    return scenario_.gait_timeline.back();
  }

  void apply_events(double t) {
    while (next_event_ < scenario_.payload_events.size() &&
           scenario_.payload_events[next_event_].time <= t + 1e-12) {
      const auto& e = scenario_.payload_events[next_event_++];
      pi_body_.m += e.mass_delta;
      pi_body_.h_x += e.mass_delta * e.attach_point[0];
      pi_body_.h_y += e.mass_delta * e.attach_point[1];
      label_ = e.label;
    }
  }

  double normal() { return unit_normal_(rng_); }

  SimTick make_tick(std::size_t k, double t) {
    apply_events(t);
    const GaitSchedule& seg = segment_at(t);
    const GaitSample gait = stepping_motion(seg, scenario_.footprint, t);
    const Vec3 gravity(0.0, 0.0, scenario_.gravity);

    const Mat3 yaw = Eigen::AngleAxisd(gait.yaw, Vec3::UnitZ()).toRotationMatrix();
    const Vec3 h_world = yaw * Vec3(pi_body_.h_x, pi_body_.h_y, 0.0);
    const ParameterVector pi_true{pi_body_.m, h_world.x(), h_world.y()};

    RobotSnapshot clean;
    clean.time = t;
    clean.gravity = gravity;
    clean.base.position = Vec3(0.0, 0.0, scenario_.footprint.height);
    clean.base.orientation = yaw;
    clean.base.linear_velocity = gait.linear_velocity;
    clean.base.linear_acceleration = gait.linear_acceleration;
    clean.base.angular_velocity = gait.angular_velocity;
    clean.base.angular_acceleration = gait.angular_acceleration;

    const Vec6 target = required_wrench(pi_true, gait.linear_acceleration, gravity,
                                        gait.angular_velocity, gait.angular_acceleration,
                                        scenario_.regressor_model);

    // the base keeps its center of mass over the footprint center
    Vec3 center(h_world.x() / pi_true.m, h_world.y() / pi_true.m, 0.0);
    std::vector<std::size_t> stance_idx;
    for (std::size_t i = 0; i < kLegCount; ++i)
      if (gait.stance[i]) stance_idx.push_back(i);
    if (stance_idx.size() == 2) {
      center += two_foot_balance_shift(center + gait.foot[stance_idx[0]],
                                       center + gait.foot[stance_idx[1]], target);
    }
    std::vector<Vec3> stance_pos;
    for (auto i : stance_idx) stance_pos.push_back(center + gait.foot[i]);
    const std::vector<Vec3> forces = distribute_forces(stance_pos, target);

    history_.erase(history_.begin());
    history_.push_back(gait.stance);
    const StanceRow& measured = history_.front();

    for (std::size_t i = 0; i < kLegCount; ++i) {
      auto& f = clean.feet[i];
      f.position = center + gait.foot[i];
      f.force.setZero();
      f.contact_scheduled = gait.stance[i];
      f.contact_measured = measured[i];
    }
    for (std::size_t j = 0; j < stance_idx.size(); ++j) clean.feet[stance_idx[j]].force = forces[j];

    SimTick tick;
    tick.index = k;
    tick.clean = clean;
    tick.pi_true = pi_true;
    tick.standing = seg.pattern == GaitPattern::stand;
    tick.event_label = label_;
    tick.noisy = corrupt(clean, tick.standing);
    return tick;
  }

  RobotSnapshot corrupt(const RobotSnapshot& clean, bool standing) {
    const NoiseModel& n = scenario_.noise;
    RobotSnapshot noisy = clean;
    for (auto& f : noisy.feet) {
      for (int a = 0; a < 3; ++a) f.force(a) += n.force_noise_std * normal();
      for (int a = 0; a < 3; ++a) f.position(a) += n.position_noise_std * normal();
      if (!f.contact_scheduled) {
        f.force += n.swing_force_bias;
        if (n.swing_contact_fault) f.contact_measured = true;
      } else if (standing) {
        f.force += n.standing_force_bias;
      }
    }
    for (int a = 0; a < 3; ++a) noisy.base.linear_acceleration(a) += n.accel_noise_std * normal();
    for (int a = 0; a < 3; ++a)
      noisy.base.angular_acceleration(a) += n.angular_accel_noise_std * normal();
    return noisy;
  }

  Scenario scenario_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> unit_normal_{0.0, 1.0};
  ParameterVector pi_body_;
  std::size_t index_{0};
  std::size_t next_event_{0};
  std::string label_{"none"};
  std::vector<StanceRow> history_;
};

inline std::vector<SimTick> run_scenario(const Scenario& scenario) {
  ScenarioRunner runner(scenario);
  std::vector<SimTick> ticks;
  ticks.reserve(scenario.tick_count());
  while (!runner.done()) ticks.push_back(runner.next());
  return ticks;
}

}  // namespace qpi
