#pragma once

#include "qpi/estimators.hpp"
#include "qpi/model.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>

namespace qpi {

enum class PublishPolicy {
  all_below,      ///< publish the whole vector once every monitored variance is below its limit
  per_parameter,  ///< publish each parameter independently
};

/// What the filter does on a tick where every foot force was gated out.
enum class AirborneUpdate {
  zero_forces,  ///< run the update with the zeroed wrench
  skip,         ///< predict only
};

struct AdaptationConfig {
  Vec3 thresholds{0.695, 0.12, 0.11};  ///< limits on diag(P) for (m, h_x, h_y)
  ParameterVector leg_contribution{0.0, 0.0, 0.0};
  PublishPolicy publish_policy{PublishPolicy::all_below};
  /// Once the thresholds have been met, keep publishing on every tick.
  bool latched{false};
  AirborneUpdate airborne_update{AirborneUpdate::zero_forces};
  RegressorModel regressor_model{RegressorModel::gravity_torque};
};

struct PublishedModel {
  ParameterVector pi_base;
  double time{0.0};
  bool fresh{false};
};

inline std::optional<PublishPolicy> publish_policy_from_string(std::string_view s) {
  if (s == "all_below") return PublishPolicy::all_below;
  if (s == "per_parameter") return PublishPolicy::per_parameter;
  return std::nullopt;
}

inline std::string_view to_string(PublishPolicy p) {
  return p == PublishPolicy::all_below ? "all_below" : "per_parameter";
}

inline std::optional<AirborneUpdate> airborne_update_from_string(std::string_view s) {
  if (s == "zero_forces") return AirborneUpdate::zero_forces;
  if (s == "skip") return AirborneUpdate::skip;
  return std::nullopt;
}

inline std::string_view to_string(AirborneUpdate a) {
  return a == AirborneUpdate::zero_forces ? "zero_forces" : "skip";
}

inline void validate(const AdaptationConfig& config, double base_total_mass) {
  if (!(config.thresholds.array() > 0.0).all())
    throw ConfigError("covariance thresholds must be strictly positive");
  if (!(config.leg_contribution.m >= 0.0) || !(config.leg_contribution.m < base_total_mass))
    throw ConfigError("leg mass must be non-negative and below the total mass");
}

/// Keeps a foot force only if the contact is both measured and scheduled.
inline Feet gate_contacts(Feet feet) {
  for (auto& f : feet) {
    if (!(f.contact_measured && f.contact_scheduled)) f.force.setZero();
  }
  return feet;
}

/// Bit i set when foot i's force is discarded by gate_contacts.
inline std::uint8_t gated_mask(const Feet& feet) {
  std::uint8_t mask = 0;
  for (const auto& f : feet) {
    if (!(f.contact_measured && f.contact_scheduled)) mask |= std::uint8_t(1u << f.index);
  }
  return mask;
}

/// Per-parameter reliability flags: diag(P) strictly below each threshold.
inline std::array<bool, 3> reliable_parameters(const Mat3& P, const AdaptationConfig& config) {
  return {P(0, 0) < config.thresholds(0), P(1, 1) < config.thresholds(1),
          P(2, 2) < config.thresholds(2)};
}

inline bool should_publish(const Mat3& P, const AdaptationConfig& config) {
  const auto ok = reliable_parameters(P, config);
  if (config.publish_policy == PublishPolicy::all_below) return ok[0] && ok[1] && ok[2];
  return ok[0] || ok[1] || ok[2];
}

inline ParameterVector subtract_leg_contribution(const ParameterVector& pi_total,
                                                 const AdaptationConfig& config) {
  const ParameterVector base = pi_total - config.leg_contribution;
  if (!(base.m > 0.0))
    throw DomainError("leg contribution leaves a non-positive floating-base mass");
  return base;
}

struct AdaptationResult {
  KFState kf;
  PublishedModel published;
  RegressorSample sample;
  std::uint8_t gated{0};
  bool reliable{false};  ///< thresholds met on this tick (before latching)
};

/// One tick of the adaptation pipeline: gate, build the regressor, predict,
/// update, and decide whether to publish. The filter always advances.
inline AdaptationResult adaptation_tick(const RobotSnapshot& snapshot, const KFState& kf,
                                        const AdaptationConfig& config,
                                        const PublishedModel& previous,
                                        bool previously_latched = false) {
  RobotSnapshot gated = snapshot;
  gated.feet = gate_contacts(snapshot.feet);

  AdaptationResult out;
  out.gated = gated_mask(snapshot.feet);
  out.sample = build_regressor(gated, config.regressor_model);
  out.kf = kf_predict(kf);
  const bool airborne = out.gated == 0x0f;
  if (!(airborne && config.airborne_update == AirborneUpdate::skip)) {
    out.kf = kf_update(out.kf, out.sample);
  }

  out.reliable = should_publish(out.kf.P, config);
  const bool publish = out.reliable || (config.latched && previously_latched);
  if (!publish) {
    out.published = previous;
    out.published.fresh = false;
    return out;
  }

  ParameterVector total = out.kf.pi_hat;
  if (config.publish_policy == PublishPolicy::per_parameter && !config.latched) {
    // parameters that are not yet reliable keep their last published value
    const ParameterVector prev_total = previous.pi_base + config.leg_contribution;
    const auto ok = reliable_parameters(out.kf.P, config);
    if (!ok[0]) total.m = prev_total.m;
    if (!ok[1]) total.h_x = prev_total.h_x;
    if (!ok[2]) total.h_y = prev_total.h_y;
  }
  out.published.pi_base = subtract_leg_contribution(total, config);
  out.published.time = snapshot.time;
  out.published.fresh = true;
  return out;
}

/// Stateful wrapper enforcing strictly increasing tick times.
class AdaptationPipeline {
 public:
  AdaptationPipeline(KFState initial, AdaptationConfig config)
      : kf_(std::move(initial)), config_(config) {
    validate(config_, kf_.pi_hat.m);
    published_.pi_base = subtract_leg_contribution(kf_.pi_hat, config_);
    published_.time = -std::numeric_limits<double>::infinity();
    published_.fresh = false;
  }

  const AdaptationResult& tick(const RobotSnapshot& snapshot) {
    if (!(snapshot.time > last_time_))
      throw DomainError("adaptation ticks must have strictly increasing time");
    last_ = adaptation_tick(snapshot, kf_, config_, published_, latched_);
    last_time_ = snapshot.time;
    kf_ = last_.kf;
    published_ = last_.published;
    latched_ = latched_ || last_.reliable;
    return last_;
  }

  const KFState& kf() const { return kf_; }
  const PublishedModel& published() const { return published_; }
  const AdaptationConfig& config() const { return config_; }

 private:
  KFState kf_;
  AdaptationConfig config_;
  PublishedModel published_;
  AdaptationResult last_;
  double last_time_{-std::numeric_limits<double>::infinity()};
  bool latched_{false};
};

}  // namespace qpi
