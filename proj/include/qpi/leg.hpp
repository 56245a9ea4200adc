#pragma once

#include "qpi/types.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>

namespace qpi {

/// Analytic 3-DoF serial leg: hip abduction about x, hip flexion about y,
/// knee about y.
///
///   foot = hip_offset + Rx(q0) * ( [0, l0, 0] + Ry(q1) * ( [0, 0, -l1] + Ry(q2) * [0, 0, -l2] ) )
///
/// With all joints at zero the leg hangs straight down. Positive flexion
/// swings the foot towards -x. The knee is singular when q2 = 0 (stretched).
struct LegModel {
  static constexpr int joint_count = 3;
  Vec3 link_lengths{0.0, 0.213, 0.213};  ///< abduction offset, thigh, calf
  Vec3 hip_offset{Vec3::Zero()};
};

/// Jacobian condition numbers above this are treated as singular.
inline constexpr double kMaxLegCondition = 1e6;

namespace detail {

inline Mat3 rot_x(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix();
}
inline Mat3 rot_y(double a) {
  return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix();
}

}  // namespace detail

inline Vec3 leg_forward_kinematics(const LegModel& leg, const Vec3& q) {
  using detail::rot_x;
  using detail::rot_y;
  const double l0 = leg.link_lengths(0), l1 = leg.link_lengths(1), l2 = leg.link_lengths(2);
  const Vec3 knee_to_foot = rot_y(q(2)) * Vec3(0.0, 0.0, -l2);
  const Vec3 hip_to_foot = rot_y(q(1)) * (Vec3(0.0, 0.0, -l1) + knee_to_foot);
  return leg.hip_offset + rot_x(q(0)) * (Vec3(0.0, l0, 0.0) + hip_to_foot);
}

inline Mat3 leg_jacobian(const LegModel& leg, const Vec3& q) {
  using detail::rot_x;
  using detail::rot_y;
  const double l0 = leg.link_lengths(0), l1 = leg.link_lengths(1), l2 = leg.link_lengths(2);
  const Mat3 rx = rot_x(q(0));
  const Mat3 ry1 = rot_y(q(1));
  const Vec3 calf = rot_y(q(2)) * Vec3(0.0, 0.0, -l2);
  const Vec3 sagittal = ry1 * (Vec3(0.0, 0.0, -l1) + calf);

  // Each column is axis x (vector from joint to foot), with the axis and the
  // vector expressed in the hip frame.
  Mat3 j;
  j.col(0) = Vec3::UnitX().cross(rx * (Vec3(0.0, l0, 0.0) + sagittal));
  const Vec3 y_axis = rx * Vec3::UnitY();
  j.col(1) = y_axis.cross(rx * sagittal);
  j.col(2) = y_axis.cross(rx * (ry1 * calf));
  return j;
}

inline double leg_condition_number(const Mat3& jacobian) {
  const Eigen::JacobiSVD<Mat3> svd(jacobian);
  const Vec3 s = svd.singularValues();
  if (s(2) <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(2);
}

/// Foot force from joint torques, F = J^-T tau. Rejects configurations whose
/// Jacobian condition number exceeds kMaxLegCondition instead of
/// regularizing.
inline Vec3 leg_grf_from_torques(const LegModel& leg, const Vec3& q, const Vec3& tau) {
  if (!all_finite(q) || !all_finite(tau)) throw DomainError("joint state is not finite");
  const Mat3 j = leg_jacobian(leg, q);
  const double cond = leg_condition_number(j);
  if (!(cond <= kMaxLegCondition)) {
    throw SingularityError("leg Jacobian is singular (condition number " +
                               std::to_string(cond) + ")",
                           cond);
  }
  return j.transpose().partialPivLu().solve(tau);
}

}  // namespace qpi
