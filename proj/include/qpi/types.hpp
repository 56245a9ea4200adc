#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace qpi {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

// Error hierarchy. The CLI maps each family onto an exit code, so new error
// kinds should derive from the closest existing family.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Physically meaningless input: non-positive mass, non-vertical gravity, NaNs.
struct DomainError : Error {
  using Error::Error;
};

/// Numerical breakdown inside an estimator or solver.
struct NumericalError : Error {
  using Error::Error;
};

struct SingularityError : NumericalError {
  SingularityError(const std::string& what, double condition_number)
      : NumericalError(what), condition_number(condition_number) {}
  double condition_number;
};

struct RankError : NumericalError {
  RankError(const std::string& what, int rank) : NumericalError(what), rank(rank) {}
  int rank;
};

/// The simulator could not produce a physically consistent contact state.
struct SimulationError : Error {
  using Error::Error;
};

struct DistributionError : SimulationError {
  using SimulationError::SimulationError;
};

struct InfeasibleStanceError : SimulationError {
  InfeasibleStanceError(const std::string& what, long tick = -1)
      : SimulationError(what), tick(tick) {}
  long tick;
};

/// Malformed scenario file or invalid configuration value.
struct ConfigError : Error {
  ConfigError(const std::string& what, long line = -1) : Error(what), line(line) {}
  long line;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

template <typename Derived>
void symmetrize(Eigen::MatrixBase<Derived>& m) {
  m = (0.5 * (m + m.transpose())).eval();
}

}  // namespace qpi
