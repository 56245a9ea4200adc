#pragma once

#include "qpi/types.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace qpi {

/// Identified inertial parameters: total mass and the horizontal first
/// moment h = m * (c_x, c_y). c_z is taken to be zero.
struct ParameterVector {
  double m{0.0};    ///< kg
  double h_x{0.0};  ///< kg*m
  double h_y{0.0};  ///< kg*m

  Vec3 vector() const { return {m, h_x, h_y}; }
  static ParameterVector from_vector(const Vec3& v) { return {v(0), v(1), v(2)}; }

  friend ParameterVector operator+(const ParameterVector& a, const ParameterVector& b) {
    return {a.m + b.m, a.h_x + b.h_x, a.h_y + b.h_y};
  }
  friend ParameterVector operator-(const ParameterVector& a, const ParameterVector& b) {
    return {a.m - b.m, a.h_x - b.h_x, a.h_y - b.h_y};
  }
  friend ParameterVector operator*(double s, const ParameterVector& p) {
    return {s * p.m, s * p.h_x, s * p.h_y};
  }
  bool operator==(const ParameterVector&) const = default;
};

struct CenterOfMass {
  double x{0.0};
  double y{0.0};
};

/// Floating-base state. Every vector is expressed in the inertial frame.
struct RigidBodyState {
  Vec3 position{Vec3::Zero()};
  Mat3 orientation{Mat3::Identity()};  ///< body -> inertial
  Vec3 linear_velocity{Vec3::Zero()};
  Vec3 linear_acceleration{Vec3::Zero()};
  Vec3 angular_velocity{Vec3::Zero()};
  Vec3 angular_acceleration{Vec3::Zero()};
};

enum class Leg : std::size_t { front_left = 0, front_right = 1, rear_left = 2, rear_right = 3 };
inline constexpr std::size_t kLegCount = 4;

struct FootState {
  std::size_t index{0};
  Vec3 position{Vec3::Zero()};  ///< r_i, relative to the base origin
  Vec3 force{Vec3::Zero()};     ///< F_i, ground reaction on the robot
  bool contact_measured{false};
  bool contact_scheduled{false};
};

using Feet = std::array<FootState, kLegCount>;

inline Feet make_feet() {
  Feet feet;
  for (std::size_t i = 0; i < kLegCount; ++i) feet[i].index = i;
  return feet;
}

struct RobotSnapshot {
  double time{0.0};
  RigidBodyState base;
  Feet feet{make_feet()};
  Vec3 gravity{0.0, 0.0, 9.81};  ///< points up so that standing GRFs are positive
};

struct RegressorSample {
  Mat63 phi{Mat63::Zero()};
  Vec6 z{Vec6::Zero()};  ///< rows 0-2 N, rows 3-5 N*m
  double time{0.0};
};

/// Which terms of the single-rigid-body equations enter the regressor.
///
/// gravity_torque: force rows m(a + g), torque rows c x m g. The angular
///   acceleration and the linear-acceleration coupling of the torque balance
///   are dropped. Row 6 of phi is identically zero.
/// rigid_body: force rows m(a + g) + dw x h + w x (w x h), torque rows
///   h x (a + g). Only the rotational inertia term is dropped.
enum class RegressorModel { gravity_torque, rigid_body };

inline std::string_view to_string(RegressorModel model) {
  return model == RegressorModel::gravity_torque ? "gravity_torque" : "rigid_body";
}

inline std::optional<RegressorModel> regressor_model_from_string(std::string_view s) {
  if (s == "gravity_torque") return RegressorModel::gravity_torque;
  if (s == "rigid_body") return RegressorModel::rigid_body;
  return std::nullopt;
}

namespace detail {

inline void check_gravity(const Vec3& gravity) {
  if (!all_finite(gravity)) throw DomainError("gravity is not finite");
  if (gravity.x() != 0.0 || gravity.y() != 0.0)
    throw DomainError("gravity must be vertical (zero x and y components)");
}

inline void check_snapshot(const RobotSnapshot& s) {
  check_gravity(s.gravity);
  const auto& b = s.base;
  if (!std::isfinite(s.time) || !all_finite(b.linear_acceleration) ||
      !all_finite(b.angular_velocity) || !all_finite(b.angular_acceleration))
    throw DomainError("snapshot contains non-finite base quantities");
  for (const auto& f : s.feet) {
    if (!all_finite(f.position) || !all_finite(f.force))
      throw DomainError("snapshot contains non-finite foot quantities");
  }
}

}  // namespace detail

/// Wrench sensitivity of each parameter (the columns of phi) for the given
/// base motion. Independent of the foot forces.
inline Mat63 regressor_matrix(const RigidBodyState& base, const Vec3& gravity,
                              RegressorModel model = RegressorModel::gravity_torque) {
  const Vec3 g_eff = base.linear_acceleration + gravity;
  Mat63 phi = Mat63::Zero();
  phi.block<3, 1>(0, 0) = g_eff;

  const Vec3 torque_drive = model == RegressorModel::rigid_body ? g_eff : gravity;
  // column j is e_j x torque_drive for the unit first moments e_x, e_y
  phi.block<3, 1>(3, 1) = Vec3::UnitX().cross(torque_drive);
  phi.block<3, 1>(3, 2) = Vec3::UnitY().cross(torque_drive);

  if (model == RegressorModel::rigid_body) {
    const Vec3& w = base.angular_velocity;
    const Vec3& dw = base.angular_acceleration;
    for (int j = 0; j < 2; ++j) {
      const Vec3 e = Vec3::Unit(j);
      phi.block<3, 1>(0, 1 + j) = dw.cross(e) + w.cross(w.cross(e));
    }
  }
  return phi;
}

/// Stacked contact wrench [sum F_i; sum r_i x F_i] of the given feet.
inline Vec6 contact_wrench(const Feet& feet) {
  Vec6 z = Vec6::Zero();
  for (const auto& f : feet) {
    z.head<3>() += f.force;
    z.tail<3>() += f.position.cross(f.force);
  }
  return z;
}

/// Builds phi and z for one instant. Forces are taken as given; gating is the
/// caller's job.
inline RegressorSample build_regressor(const RobotSnapshot& snapshot,
                                       RegressorModel model = RegressorModel::gravity_torque) {
  detail::check_snapshot(snapshot);
  RegressorSample sample;
  sample.phi = regressor_matrix(snapshot.base, snapshot.gravity, model);
  sample.z = contact_wrench(snapshot.feet);
  sample.time = snapshot.time;
  return sample;
}

inline Vec6 predicted_wrench(const ParameterVector& pi, const RobotSnapshot& snapshot,
                             RegressorModel model = RegressorModel::gravity_torque) {
  if (!all_finite(pi.vector())) throw DomainError("parameter vector is not finite");
  if (!(pi.m > 0.0)) throw DomainError("mass must be positive");
  detail::check_snapshot(snapshot);
  return regressor_matrix(snapshot.base, snapshot.gravity, model) * pi.vector();
}

inline CenterOfMass com_from_parameters(const ParameterVector& pi) {
  if (!std::isfinite(pi.m) || !(pi.m > 0.0))
    throw DomainError("center of mass undefined for non-positive mass");
  return {pi.h_x / pi.m, pi.h_y / pi.m};
}

}  // namespace qpi
