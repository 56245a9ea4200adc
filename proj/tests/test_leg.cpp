#include "qpi/leg.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace qpi;

namespace {

Mat3 numeric_jacobian(const LegModel& leg, const Vec3& q, double h = 1e-6) {
  Mat3 j;
  for (int k = 0; k < 3; ++k) {
    Vec3 dq = Vec3::Zero();
    dq(k) = h;
    j.col(k) = (leg_forward_kinematics(leg, q + dq) - leg_forward_kinematics(leg, q - dq)) / (2 * h);
  }
  return j;
}

Vec3 random_bent_configuration(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> abd(-0.5, 0.5), hip(-1.2, 1.2), knee(0.3, 2.5);
  return {abd(rng), hip(rng), -knee(rng)};
}

}  // namespace

TEST(LegKinematics, ZeroConfigurationHangsStraightDown) {
  LegModel leg;
  leg.hip_offset = Vec3(0.19, 0.15, 0.0);
  const Vec3 foot = leg_forward_kinematics(leg, Vec3::Zero());
  EXPECT_TRUE(foot.isApprox(leg.hip_offset + Vec3(0, 0, -0.426), 1e-15));
}

TEST(LegKinematics, HipFlexionSwingsForwardLegHorizontal) {
  const LegModel leg;
  const Vec3 foot = leg_forward_kinematics(leg, Vec3(0.0, std::numbers::pi / 2, 0.0));
  EXPECT_NEAR(foot.x(), -0.426, 1e-12);
  EXPECT_NEAR(foot.z(), 0.0, 1e-12);
}

TEST(LegKinematics, PeriodicInEveryJoint) {
  const LegModel leg;
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) {
    const Vec3 q = random_bent_configuration(rng);
    for (int j = 0; j < 3; ++j) {
      Vec3 shifted = q;
      shifted(j) += 2 * std::numbers::pi;
      EXPECT_LE((leg_forward_kinematics(leg, q) - leg_forward_kinematics(leg, shifted)).norm(), 1e-12);
    }
  }
}

TEST(LegJacobian, MatchesCentralDifferences) {
  LegModel leg;
  leg.link_lengths = Vec3(0.06, 0.213, 0.213);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const Vec3 q = random_bent_configuration(rng);
    EXPECT_LE((leg_jacobian(leg, q) - numeric_jacobian(leg, q)).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(LegInverseDynamics, RoundTrip) {
  const LegModel leg;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 60.0);
  for (int k = 0; k < 100; ++k) {
    const Vec3 q = random_bent_configuration(rng);
    const Vec3 f(n(rng), n(rng), n(rng));
    const Vec3 tau = leg_jacobian(leg, q).transpose() * f;
    EXPECT_LE((leg_grf_from_torques(leg, q, tau) - f).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(LegInverseDynamics, ZeroTorqueGivesZeroForce) {
  const LegModel leg;
  EXPECT_TRUE(leg_grf_from_torques(leg, Vec3(0.1, 0.4, -1.0), Vec3::Zero()).isZero(0.0));
}

TEST(LegInverseDynamics, StretchedKneeIsSingular) {
  const LegModel leg;
  try {
    leg_grf_from_torques(leg, Vec3(0.0, 0.3, 0.0), Vec3(1.0, 2.0, 3.0));
    FAIL() << "expected a singularity error";
  } catch (const SingularityError& e) {
    EXPECT_GT(e.condition_number, kMaxLegCondition);
  }
}
