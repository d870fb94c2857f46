#include <gtest/gtest.h>

#include "navcore/fusion.hpp"

#include <random>

using namespace navcore;

namespace {

Eigen::Matrix4d homogeneous(const Vec3& p, const UnitQuaternion& q) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = q.rotation_matrix();
  m.block<3, 1>(0, 3) = p;
  return m;
}

UnitQuaternion small_rotation(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  return UnitQuaternion::from_rotation_vector(Vec3(n(rng), n(rng), n(rng)));
}

PoseFix fix_at(double t, const Vec3& p, double c = 1.0, UnitQuaternion q = {}) {
  PoseFix f;
  f.t = t;
  f.position = p;
  f.orientation = q;
  f.confidence = c;
  return f;
}

double quat_diff(const UnitQuaternion& a, const UnitQuaternion& b) {
  return std::max({std::abs(a.w() - b.w()), std::abs(a.x() - b.x()), std::abs(a.y() - b.y()),
                   std::abs(a.z() - b.z())});
}

}  // namespace

TEST(ApplyMotion, ZeroDeltaIsIdentity) {
  FusionState s;
  s.pose = {Vec3(1, 2, 3), UnitQuaternion::from_yaw(0.4)};
  const auto out = apply_motion(s, Vec3::Zero(), UnitQuaternion::identity());
  EXPECT_EQ(out.pose.position, s.pose.position);
  EXPECT_EQ(out.pose.orientation, s.pose.orientation);
}

TEST(ApplyMotion, ComposesLikeTheGroup) {
  FusionState s;
  s.pose = {Vec3(0.5, -1, 0), UnitQuaternion::from_axis_angle(Vec3(1, 1, 0), 0.3)};
  const Pose a{Vec3(1, 0.2, 0), UnitQuaternion::from_yaw(0.7)};
  const Pose b{Vec3(-0.3, 0.4, 0.1), UnitQuaternion::from_axis_angle(Vec3(0, 1, 0), -0.2)};
  const auto two = apply_motion(apply_motion(s, a.position, a.orientation), b.position, b.orientation);
  const Pose ab = a.compose(b);
  const auto one = apply_motion(s, ab.position, ab.orientation);
  EXPECT_LE((two.pose.position - one.pose.position).norm(), 1e-9);
  EXPECT_LE(quat_diff(two.pose.orientation, one.pose.orientation), 1e-9);
}

TEST(ApplyMotion, MatchesHomogeneousMatrixOracle) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 0.05);
  FusionState s;
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int i = 0; i < 1000; ++i) {
    const Vec3 dp(n(rng), n(rng), n(rng));
    const UnitQuaternion dq = small_rotation(rng, 0.05);
    s = apply_motion(s, dp, dq);
    m = m * homogeneous(dp, dq);
  }
  EXPECT_LE((s.pose.position - m.block<3, 1>(0, 3)).norm(), 1e-6);
  EXPECT_LE((s.pose.orientation.rotation_matrix() - m.block<3, 3>(0, 0)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(s.pose.orientation.norm(), 1.0, 1e-12);
}

TEST(ApplyMotion, RejectsUnnormalizedDelta) {
  FusionState s;
  EXPECT_THROW(apply_motion(s, Vec3(NAN, 0, 0), {}), ValidationError);
}

TEST(ApplyDrPose, ReplaysRelativeMotion) {
  FusionState s;
  s.pose = {Vec3(2, 3, 0), UnitQuaternion::from_yaw(kPi / 2)};
  s = apply_dr_pose(s, {Vec3::Zero(), UnitQuaternion::identity()});
  s = apply_dr_pose(s, {Vec3(1, 0, 0), UnitQuaternion::identity()});
  // DR forward is +x; the fused frame is rotated 90 degrees, so forward is +y.
  EXPECT_LE((s.pose.position - Vec3(2, 4, 0)).norm(), 1e-12);
  const auto off = s.dr_offset();
  ASSERT_TRUE(off);
  EXPECT_LE((off->compose({Vec3(1, 0, 0), {}}).position - s.pose.position).norm(), 1e-12);
}

TEST(ApplyFix, FullConfidenceSnaps) {
  FusionState s;
  s.alpha = 1.0;
  s.pose = {Vec3(0.3, 0.1, 0), UnitQuaternion::from_yaw(1.0)};
  const auto f = fix_at(1.0, Vec3(1.234, -5.5, 0.2), 1.0, UnitQuaternion::from_yaw(-0.3));
  FixStatus st{};
  const auto out = apply_fix(s, f, &st);
  EXPECT_EQ(st, FixStatus::applied);
  EXPECT_EQ(out.pose.position, f.position);
  EXPECT_EQ(out.pose.orientation, f.orientation);
  EXPECT_EQ(*out.last_fix_time, 1.0);
}

TEST(ApplyFix, ZeroConfidenceLeavesPose) {
  FusionState s;
  s.pose = {Vec3(0.3, 0.1, 0), UnitQuaternion::from_yaw(1.0)};
  const auto out = apply_fix(s, fix_at(1.0, Vec3(1, 1, 0), 0.0));
  EXPECT_EQ(out.pose.position, s.pose.position);
  EXPECT_EQ(out.pose.orientation, s.pose.orientation);
}

TEST(ApplyFix, StaleFixRejectedUnchanged) {
  FusionState s;
  s = apply_fix(s, fix_at(5.0, Vec3(1, 0, 0)));
  FixStatus st{};
  const auto out = apply_fix(s, fix_at(4.0, Vec3(1.5, 0, 0)), &st);
  EXPECT_EQ(st, FixStatus::stale);
  EXPECT_EQ(out.pose.position, s.pose.position);
  EXPECT_EQ(*out.last_fix_time, 5.0);
}

TEST(ApplyFix, JitterGuard) {
  FusionState s;
  FixStatus st{};
  auto out = apply_fix(s, fix_at(1.0, Vec3(3, 0, 0), 0.4), &st);
  EXPECT_EQ(st, FixStatus::jitter_rejected);
  EXPECT_EQ(out.pose.position, Vec3::Zero());
  EXPECT_FALSE(out.last_fix_time);
  // Confident fixes are accepted even after a long jump.
  out = apply_fix(s, fix_at(1.0, Vec3(3, 0, 0), 0.6), &st);
  EXPECT_EQ(st, FixStatus::applied);
  // Nearby low-confidence fixes are accepted.
  out = apply_fix(s, fix_at(1.0, Vec3(1, 0, 0), 0.2), &st);
  EXPECT_EQ(st, FixStatus::applied);
}

TEST(ApplyFix, InvalidFix) {
  FusionState s;
  EXPECT_THROW(apply_fix(s, fix_at(1.0, Vec3::Zero(), 1.5)), ValidationError);
  EXPECT_THROW(apply_fix(s, fix_at(NAN, Vec3::Zero(), 0.5)), ValidationError);
}

TEST(ApplyFix, BlendIsContraction) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.5, 1.5), c(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    FusionState s;
    s.alpha = c(rng);
    s.pose = {Vec3(u(rng), u(rng), u(rng)), small_rotation(rng, 1.0)};
    const auto f = fix_at(i, Vec3(u(rng), u(rng), u(rng)), 0.5 + 0.5 * c(rng), small_rotation(rng, 1.0));
    const double before = (s.pose.position - f.position).norm();
    const auto out = apply_fix(s, f);
    const double w = s.alpha * f.confidence;
    EXPECT_LE((out.pose.position - f.position).norm(), (1.0 - w) * before + 1e-12);
    EXPECT_NEAR(out.pose.orientation.norm(), 1.0, 1e-12);
  }
}

TEST(ApplyFix, SnapErasesInterleavingHistory) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 0.1);
  std::vector<Pose> motions;
  for (int i = 0; i < 20; ++i) motions.push_back({Vec3(n(rng), n(rng), 0), small_rotation(rng, 0.1)});
  FusionState a, b;
  a.alpha = b.alpha = 1.0;
  a = apply_fix(a, fix_at(0.0, Vec3(1, 1, 0)));
  b = apply_fix(b, fix_at(0.0, Vec3(1, 1, 0)));
  for (const auto& m : motions) a = apply_motion(a, m.position, m.orientation);
  for (auto it = motions.rbegin(); it != motions.rend(); ++it) b = apply_motion(b, it->position, it->orientation);
  a = apply_fix(a, fix_at(1.0, Vec3(2, 0, 0), 1.0, UnitQuaternion::from_yaw(0.2)));
  b = apply_fix(b, fix_at(1.0, Vec3(2, 0, 0), 1.0, UnitQuaternion::from_yaw(0.2)));
  EXPECT_EQ(a.pose.position, b.pose.position);
  EXPECT_EQ(a.pose.orientation, b.pose.orientation);
}

TEST(ApplyFix, DriftingDeadReckoningSteadyState) {
  // Truth walks +x at 1 m/s; DR adds 0.05 m/s of lateral drift. Fixes at 1 Hz.
  FusionState s;
  s.alpha = 0.5;
  const double dt = 0.01;
  double worst_late = 0.0;
  for (int k = 1; k <= 6000; ++k) {
    const double t = k * dt;
    s = apply_motion(s, Vec3(1.0 * dt, 0.05 * dt, 0.0), UnitQuaternion::identity());
    if (k % 100 == 0) s = apply_fix(s, fix_at(t, Vec3(t, 0, 0)));
    if (t > 10.0) worst_late = std::max(worst_late, (s.pose.position - Vec3(t, 0, 0)).norm());
  }
  EXPECT_LT(worst_late, 0.2);
}
