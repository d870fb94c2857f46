#pragma once

// Complementary blending of sparse absolute pose fixes into a dead-reckoned
// pose stream.

#include "navcore/ahrs.hpp"

#include <optional>

namespace navcore {

struct Pose {
  Vec3 position = Vec3::Zero();
  UnitQuaternion orientation;

  /// Rigid composition: `delta` expressed in this pose's frame.
  Pose compose(const Pose& delta) const {
    return {position + orientation.rotate(delta.position), orientation * delta.orientation};
  }

  Pose inverse() const {
    const UnitQuaternion qi = orientation.conjugate();
    return {-qi.rotate(position), qi};
  }

  /// Motion that takes `*this` to `to`, in this pose's frame.
  Pose between(const Pose& to) const { return inverse().compose(to); }
};

struct PoseFix {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  UnitQuaternion orientation;
  double confidence = 1.0;

  void validate() const {
    require(finite(t) && position.allFinite(), "pose fix must be finite");
    require(confidence >= 0.0 && confidence <= 1.0, "fix confidence must be in [0,1]");
  }
};

enum class FixStatus { applied, stale, jitter_rejected };

inline const char* to_string(FixStatus s) {
  switch (s) {
    case FixStatus::applied: return "applied";
    case FixStatus::stale: return "stale";
    case FixStatus::jitter_rejected: return "jitter_rejected";
  }
  return "unknown";
}

struct FusionState {
  Pose pose;
  std::optional<double> last_fix_time;
  /// Last dead-reckoned pose consumed by apply_dr_pose.
  std::optional<Pose> dr_reference;
  double alpha = 0.8;
  /// A fix farther than this from the estimate, with confidence below
  /// jitter_confidence, is ignored.
  double jitter_distance = 2.0;
  double jitter_confidence = 0.5;

  void validate() const {
    require(alpha >= 0.0 && alpha <= 1.0, "fusion alpha must be in [0,1]");
    require(finite(jitter_distance) && jitter_distance >= 0.0, "jitter_distance must be non-negative");
    require(jitter_confidence >= 0.0 && jitter_confidence <= 1.0,
            "jitter_confidence must be in [0,1]");
  }

  /// Rigid transform from the dead-reckoning frame into the fused frame.
  std::optional<Pose> dr_offset() const {
    if (!dr_reference) return std::nullopt;
    return pose.compose(dr_reference->inverse());
  }
};

/// Composes a body-frame relative motion onto the current pose.
inline FusionState apply_motion(FusionState state, const Vec3& delta_position,
                                const UnitQuaternion& delta_orientation) {
  require(delta_position.allFinite(), "motion delta must be finite");
  require(std::abs(delta_orientation.norm() - 1.0) < 1e-9, "delta orientation must be normalized");
  state.pose = state.pose.compose({delta_position, delta_orientation});
  return state;
}

/// Feeds an absolute dead-reckoned pose; the motion since the previous one is
/// composed onto the fused pose. The first call only sets the reference.
inline FusionState apply_dr_pose(FusionState state, const Pose& dr) {
  if (state.dr_reference) {
    const Pose d = state.dr_reference->between(dr);
    state = apply_motion(std::move(state), d.position, d.orientation);
  }
  state.dr_reference = dr;
  return state;
}

/// Blends the pose toward the fix by weight alpha * confidence. Stale and
/// jittery fixes leave the state unchanged and are reported through `status`.
inline FusionState apply_fix(FusionState state, const PoseFix& fix, FixStatus* status = nullptr) {
  fix.validate();
  state.validate();
  auto report = [&](FixStatus s) {
    if (status) *status = s;
  };
  if (state.last_fix_time && fix.t < *state.last_fix_time) {
    report(FixStatus::stale);
    return state;
  }
  if ((fix.position - state.pose.position).norm() > state.jitter_distance &&
      fix.confidence < state.jitter_confidence) {
    report(FixStatus::jitter_rejected);
    return state;
  }
  const double w = state.alpha * fix.confidence;
  if (w >= 1.0) {
    state.pose = {fix.position, fix.orientation};
  } else if (w > 0.0) {
    state.pose.position = (1.0 - w) * state.pose.position + w * fix.position;
    state.pose.orientation = slerp(state.pose.orientation, fix.orientation, w);
  }
  state.last_fix_time = fix.t;
  report(FixStatus::applied);
  return state;
}

}  // namespace navcore
