#pragma once

#include "qpi/qpi.hpp"

#include <random>

namespace qpi::fixtures {

// Four feet at the corners of a rectangle centred under the base.
inline std::vector<Vec3> square_stance(double half_length = 0.19, double half_width = 0.15,
                                       double height = 0.30) {
  return {{half_length, half_width, -height},
          {half_length, -half_width, -height},
          {-half_length, half_width, -height},
          {-half_length, -half_width, -height}};
}

inline RobotSnapshot snapshot_with_forces(const std::vector<Vec3>& positions,
                                          const std::vector<Vec3>& forces) {
  RobotSnapshot s;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    s.feet[i].position = positions[i];
    s.feet[i].force = forces[i];
    s.feet[i].contact_measured = true;
    s.feet[i].contact_scheduled = true;
  }
  return s;
}

// Clean standing snapshot whose forces come from the minimum-norm distribution.
inline RobotSnapshot static_stand(const ParameterVector& pi) {
  const auto stance = square_stance();
  const auto forces = distribute_forces(stance, pi, Vec3::Zero(), Vec3(0, 0, 9.81));
  return snapshot_with_forces(stance, forces);
}

// Feasible random clean snapshot for the given regressor model.
inline std::pair<RobotSnapshot, ParameterVector> random_clean_snapshot(std::mt19937_64& rng,
                                                                       RegressorModel model) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ParameterVector pi{12.0 + 8.0 * (u(rng) + 1.0) / 2.0, 0.3 * u(rng), 0.3 * u(rng)};
  RobotSnapshot s;
  s.base.linear_acceleration = Vec3(1.5 * u(rng), 1.5 * u(rng), 1.0 * u(rng));
  s.base.angular_velocity = Vec3(0.5 * u(rng), 0.5 * u(rng), 1.0 * u(rng));
  s.base.angular_acceleration = Vec3(3.0 * u(rng), 3.0 * u(rng), 5.0 * u(rng));
  const Vec3 com(pi.h_x / pi.m, pi.h_y / pi.m, 0.0);
  auto stance = square_stance(0.19 + 0.03 * u(rng), 0.15 + 0.03 * u(rng));
  for (auto& p : stance) p += com;
  const Vec6 w = required_wrench(pi, s.base.linear_acceleration, s.gravity,
                                 s.base.angular_velocity, s.base.angular_acceleration, model);
  const auto forces = distribute_forces(stance, w);
  for (std::size_t i = 0; i < 4; ++i) {
    s.feet[i].position = stance[i];
    s.feet[i].force = forces[i];
    s.feet[i].contact_measured = s.feet[i].contact_scheduled = true;
  }
  return {s, pi};
}

inline Scenario quiet_scenario(double duration, GaitPattern pattern) {
  Scenario s;
  s.name = "quiet";
  s.duration = duration;
  GaitSchedule seg;
  seg.pattern = pattern;
  seg.duration = duration;
  if (pattern != GaitPattern::stand) {
    seg.sway_amplitude = 7.0;
    seg.yaw_vibration = 12.0;
  }
  s.gait_timeline.push_back(seg);
  s.noise = NoiseModel{};
  s.noise.force_noise_std = 0.0;
  s.noise.position_noise_std = 0.0;
  s.noise.accel_noise_std = 0.0;
  s.noise.angular_accel_noise_std = 0.0;
  s.noise.standing_force_bias.setZero();
  s.regressor_model = RegressorModel::rigid_body;
  return s;
}

}  // namespace qpi::fixtures
