#pragma once

#include "qpi/model.hpp"
#include "qpi/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <span>
#include <string>
#include <vector>

namespace qpi {

/// Nominal parameters of the reference quadruped (16.21 kg, c_x = 8.8 mm).
inline const ParameterVector kNominalParameters{16.21, 16.21 * 0.0088, 0.0};

inline Mat3 default_process_noise() { return Vec3(5e-3, 5e-4, 5e-4).asDiagonal(); }

inline Mat6 default_measurement_noise() {
  Vec6 d;
  d << 1e3, 1e3, 1e4, 1e4, 1e4, 1e3;
  return d.asDiagonal();
}

inline Mat3 default_initial_covariance() { return Vec3(1.0, 0.2, 0.2).asDiagonal(); }

/// Random-walk Kalman filter over the parameter vector.
struct KFState {
  ParameterVector pi_hat{kNominalParameters};
  Mat3 P{default_initial_covariance()};
  Mat3 Q{default_process_noise()};
  Mat6 R{default_measurement_noise()};
  Mat36 last_gain{Mat36::Zero()};
};

/// Exponentially weighted recursive least squares.
struct RLSState {
  ParameterVector pi_hat{kNominalParameters};
  Mat3 P{100.0 * Mat3::Identity()};
  double lambda{0.8};
};

namespace detail {

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m, double tol = 1e-9) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

inline void validate(const KFState& s) {
  if (!all_finite(s.pi_hat.vector()) || !all_finite(s.P) || !all_finite(s.Q) || !all_finite(s.R))
    throw NumericalError("Kalman filter state is not finite");
  if (!is_symmetric(s.P) || !is_symmetric(s.Q) || !is_symmetric(s.R))
    throw DomainError("Kalman filter covariances must be symmetric");
  if ((s.P.diagonal().array() < 0.0).any() || (s.Q.diagonal().array() < 0.0).any())
    throw DomainError("Kalman filter covariances must have non-negative diagonals");
}

inline void validate(const RLSState& s) {
  if (!(s.lambda > 0.0 && s.lambda <= 1.0))
    throw DomainError("forgetting factor must lie in (0, 1]");
  if (!all_finite(s.pi_hat.vector()) || !all_finite(s.P))
    throw NumericalError("RLS state is not finite");
}

inline void validate(const RegressorSample& sample) {
  if (!all_finite(sample.phi) || !all_finite(sample.z))
    throw NumericalError("regressor sample is not finite");
}

}  // namespace detail

/// Prediction with A = I, B = 0: the estimate carries over and the covariance
/// grows by Q.
inline KFState kf_predict(KFState state) {
  detail::validate(state);
  state.P += state.Q;
  symmetrize(state.P);
  return state;
}

/// Measurement update with the regressor as the measurement Jacobian and the
/// contact wrench as the measurement.
inline KFState kf_update(KFState state, const RegressorSample& sample) {
  detail::validate(state);
  detail::validate(sample);
  const Mat63& phi = sample.phi;
  Mat6 innovation_cov = phi * state.P * phi.transpose() + state.R;
  symmetrize(innovation_cov);

  const Eigen::LLT<Mat6> llt(innovation_cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("innovation covariance is not positive definite (check R)");

  // K = P phi^T S^-1, computed as (S^-1 phi P)^T since S and P are symmetric.
  const Mat36 gain = llt.solve(phi * state.P).transpose();
  if (!all_finite(gain)) throw NumericalError("Kalman gain is not finite");

  const Vec6 innovation = sample.z - phi * state.pi_hat.vector();
  state.pi_hat = ParameterVector::from_vector(state.pi_hat.vector() + gain * innovation);
  state.P = ((Mat3::Identity() - gain * phi) * state.P).eval();
  symmetrize(state.P);
  state.last_gain = gain;
  return state;
}

inline RLSState rls_update(RLSState state, const RegressorSample& sample) {
  detail::validate(state);
  detail::validate(sample);
  const Mat63& phi = sample.phi;
  Mat6 innovation = state.lambda * Mat6::Identity() + phi * state.P * phi.transpose();
  symmetrize(innovation);

  const Eigen::LLT<Mat6> llt(innovation);
  if (llt.info() != Eigen::Success) throw NumericalError("RLS innovation matrix is singular");

  const Mat36 gain = llt.solve(phi * state.P).transpose();
  const Vec6 residual = sample.z - phi * state.pi_hat.vector();
  state.pi_hat = ParameterVector::from_vector(state.pi_hat.vector() + gain * residual);
  state.P = ((state.P - gain * phi * state.P) / state.lambda).eval();
  symmetrize(state.P);
  if (!all_finite(state.P)) throw NumericalError("RLS covariance diverged");
  return state;
}

/// Least-squares fit over a whole sample set via the normal equations. Used
/// as an oracle for the recursive estimators.
inline ParameterVector batch_least_squares(std::span<const RegressorSample> samples) {
  if (samples.empty()) throw RankError("no samples", 0);
  Eigen::MatrixXd stacked(6 * samples.size(), 3);
  Mat3 normal = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    detail::validate(samples[k]);
    stacked.middleRows<6>(6 * k) = samples[k].phi;
    normal += samples[k].phi.transpose() * samples[k].phi;
    rhs += samples[k].phi.transpose() * samples[k].z;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(stacked);
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  if (rank < 3) {
    throw RankError("stacked regressor is rank deficient (rank " + std::to_string(rank) + ")",
                    rank);
  }
  const Eigen::LDLT<Mat3> ldlt(normal);
  if (ldlt.info() != Eigen::Success) throw NumericalError("normal equations are singular");
  return ParameterVector::from_vector(ldlt.solve(rhs));
}

inline ParameterVector batch_least_squares(const std::vector<RegressorSample>& samples) {
  return batch_least_squares(std::span<const RegressorSample>(samples));
}

}  // namespace qpi
