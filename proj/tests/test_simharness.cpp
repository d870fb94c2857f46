#include <gtest/gtest.h>

#include "navcore/scoring.hpp"

using namespace navcore;

namespace {

constexpr double kRate = 100.0;

/// Sample indices at the middle of every dwell between swings.
std::vector<std::size_t> stance_midpoints(const Scenario& sc, const Trajectory& t, std::size_t steps) {
  std::vector<std::size_t> out;
  const double period = 1.0 / sc.cadence;
  const double swing = (1.0 - sc.stance_fraction) * period;
  for (std::size_t i = 0; i < steps; ++i) {
    const double mid = sc.lead_in + i * period + swing + 0.5 * (period - swing);
    out.push_back(static_cast<std::size_t>(std::lround(mid * kRate)));
  }
  (void)t;
  return out;
}

NoiseModel noisy(double accel_sigma, std::uint64_t seed) {
  NoiseModel n;
  n.accel_sigma = accel_sigma;
  n.gyro_sigma = 0.002;
  n.seed = seed;
  return n;
}

ObstacleBox box(const Vec3& lo, const Vec3& hi) {
  ObstacleBox b;
  b.min = lo;
  b.max = hi;
  b.height_class = classify_height(b);
  return b;
}

}  // namespace

TEST(GaussianSource, MomentsAndDeterminism) {
  GaussianSource a(3), b(3);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = a.normal();
    ASSERT_EQ(x, b.normal());
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(GenTrajectory, CorridorGeometry) {
  Scenario sc;
  sc.kind = Corridor{10.0};
  const auto t = gen_trajectory(sc, kRate);
  EXPECT_EQ(t.step_boundaries.size(), 20u);
  EXPECT_LE((t.positions.back() - Vec3(10, 0, 0)).norm(), 1e-6);
  EXPECT_EQ(t.positions.front(), Vec3::Zero());
}

TEST(GenTrajectory, SpiralRiseAndHeading) {
  Scenario sc;
  SpiralStaircase s;
  s.n_steps = 24;
  sc.kind = s;
  const auto t = gen_trajectory(sc, kRate);
  EXPECT_NEAR(t.positions.back().z(), 24 * s.step_rise, 1e-9);
  const auto mids = stance_midpoints(sc, t, 24);
  for (std::size_t i = 0; i < mids.size(); ++i) {
    const double expect = wrap_angle((i + 1) * 2.0 * kPi / s.steps_per_turn);
    EXPECT_NEAR(wrap_angle(t.orientations[mids[i]].yaw() - expect), 0.0, 1e-9) << i;
  }
}

TEST(GenTrajectory, StanceMidpointsAreStill) {
  Scenario sc;
  sc.kind = WaypointWalk{{Vec3(0, 0, 0), Vec3(3, 0, 0), Vec3(3, 2, 0.5)}};
  const auto t = gen_trajectory(sc, kRate);
  const std::size_t steps = t.step_boundaries.size();
  ASSERT_GT(steps, 5u);
  for (std::size_t k : stance_midpoints(sc, t, steps)) {
    EXPECT_EQ(t.positions[k + 1], t.positions[k - 1]);
    EXPECT_EQ(t.orientations[k + 1], t.orientations[k - 1]);
  }
}

TEST(GenTrajectory, ContinuousAndValidated) {
  Scenario sc;
  const auto t = gen_trajectory(sc, kRate);
  double worst = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) worst = std::max(worst, (t.positions[k] - t.positions[k - 1]).norm());
  EXPECT_LT(worst, 0.02);  // no jumps at 100 Hz
  EXPECT_THROW(gen_trajectory(sc, 40.0), ValidationError);
  sc.stance_fraction = 1.0;
  EXPECT_THROW(gen_trajectory(sc, kRate), ValidationError);
  Scenario bad;
  bad.kind = WaypointWalk{{Vec3::Zero()}};
  EXPECT_THROW(gen_trajectory(bad, kRate), ValidationError);
}

TEST(SynthImu, StaticIsGravity) {
  Trajectory t;
  const UnitQuaternion q = UnitQuaternion::from_axis_angle(Vec3(1, 2, 0.5), 0.4);
  for (int k = 0; k < 50; ++k) {
    t.timestamps.push_back(k / kRate);
    t.positions.push_back(Vec3(1, 2, 3));
    t.orientations.push_back(q);
  }
  const auto imu = synth_imu(t, {}, kRate);
  ASSERT_EQ(imu.size(), 50u);
  const Vec3 g_body = q.conjugate().rotate(Vec3(0, 0, kStandardGravity));
  for (const auto& s : imu) {
    EXPECT_LE((s.accel - g_body).norm(), 1e-6);
    EXPECT_LE(s.gyro.norm(), 1e-6);
  }
}

TEST(SynthImu, CorridorRoundTripWithinOnePercent) {
  Scenario sc;
  sc.kind = Corridor{10.0};
  const auto truth = gen_trajectory(sc, kRate);
  const auto est = run_offline(synth_imu(truth, {}, kRate), {});
  EXPECT_LE((est.positions.back() - truth.positions.back()).norm(), 0.01 * 10.0);
}

TEST(SynthImu, SeededStreamsAreIdentical) {
  Scenario sc;
  const auto truth = gen_trajectory(sc, kRate);
  const auto a = synth_imu(truth, noisy(0.05, 7), kRate);
  const auto b = synth_imu(truth, noisy(0.05, 7), kRate);
  const auto c = synth_imu(truth, noisy(0.05, 8), kRate);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].accel, b[i].accel);
    ASSERT_EQ(a[i].gyro, b[i].gyro);
    differs |= a[i].accel != c[i].accel;
  }
  EXPECT_TRUE(differs);
}

TEST(SynthImu, OversampledTruthIsDecimated) {
  Scenario sc;
  sc.kind = Corridor{2.0};
  const auto fine = gen_trajectory(sc, 400.0);
  const auto imu = synth_imu(fine, {}, kRate);
  EXPECT_EQ(imu.size(), (fine.size() - 1) / 4 + 1);
  EXPECT_NEAR(imu[1].t, 0.01, 1e-12);
  EXPECT_THROW(synth_imu(fine, {}, 300.0), ValidationError);
}

TEST(Evaluate, IdenticalAndShifted) {
  Scenario sc;
  sc.kind = Corridor{3.0};
  const auto t = gen_trajectory(sc, kRate);
  const auto same = evaluate(t, t);
  EXPECT_EQ(same.rmse, 0.0);
  EXPECT_EQ(same.endpoint_error, 0.0);
  EXPECT_EQ(same.path_length_ratio, 1.0);
  auto shifted = t;
  for (auto& p : shifted.positions) p += Vec3(1, 0, 0);
  const auto m = evaluate(t, shifted);
  EXPECT_NEAR(m.rmse, 1.0, 1e-12);
  EXPECT_NEAR(m.endpoint_error, 1.0, 1e-12);
}

TEST(Evaluate, DisjointRangesRejected) {
  Scenario sc;
  sc.kind = Corridor{1.0};
  const auto t = gen_trajectory(sc, kRate);
  auto later = t;
  for (auto& ts : later.timestamps) ts += 1000.0;
  EXPECT_THROW(evaluate(t, later), ValidationError);
}

TEST(Evaluate, StaircaseCompensationContrast) {
  Scenario sc;
  sc.kind = SpiralStaircase{};
  const auto truth = gen_trajectory(sc, kRate);
  NoiseModel n = noisy(0.02, 42);
  n.accel_bias = Vec3(0.02, -0.01, 0.015);
  n.gyro_bias = Vec3(0.0005, -0.0003, 0.0005);
  const auto imu = synth_imu(truth, n, kRate);
  TrackerConfig off;
  off.zupt = false;
  const auto comp = evaluate(run_offline(imu, {}), truth);
  const auto raw = evaluate(run_offline(imu, off), truth);
  EXPECT_LT(comp.rmse, 0.5);
  EXPECT_GE(raw.rmse, 100.0 * comp.rmse);
  EXPECT_GE(raw.endpoint_error, 100.0 * comp.endpoint_error);
}

TEST(Evaluate, RoundTripPer100m) {
  for (int which = 0; which < 2; ++which) {
    Scenario sc;
    if (which == 0) sc.kind = Corridor{20.0};
    else sc.kind = SpiralStaircase{};
    const auto truth = gen_trajectory(sc, kRate);
    const auto m = evaluate(run_offline(synth_imu(truth, {}, kRate), {}), truth);
    const double per100 = m.rmse / (walked_length(truth) / 100.0);
    EXPECT_LT(per100, 0.1) << which;
  }
}

TEST(Evaluate, NoiseMonotonicity) {
  Scenario sc;
  sc.kind = Corridor{6.0};
  const auto truth = gen_trajectory(sc, kRate);
  double prev = -1.0;
  for (double sigma : {0.0, 0.05, 0.2, 0.5}) {
    double mean = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
      mean += evaluate(run_offline(synth_imu(truth, noisy(sigma, seed), kRate), {}), truth).rmse / 10.0;
    EXPECT_GE(mean, prev) << "sigma " << sigma;
    prev = mean;
  }
}

TEST(WalkAndScore, EmptyMapNoCollisions) {
  const auto plan = straight_line_plan(Vec2(0, 0), Vec2(3, 4));
  const auto s = walk_and_score({}, plan);
  EXPECT_EQ(s.collisions, 0u);
  WalkerModel w;
  EXPECT_NEAR(s.traversal_time, 5.0 / w.speed(), 1e-12);
  EXPECT_NEAR(s.mean_speed, w.speed(), 1e-12);
}

TEST(WalkAndScore, RoutedThroughBox) {
  const std::vector<ObstacleBox> boxes{box(Vec3(1, -0.2, 0), Vec3(1.4, 0.2, 0.8)),
                                       box(Vec3(2, -0.2, 0), Vec3(2.4, 0.2, 0.05)),   // rug
                                       box(Vec3(3, -0.2, 2.0), Vec3(3.4, 0.2, 2.2))};  // above head
  const auto s = walk_and_score(boxes, straight_line_plan(Vec2(0, 0), Vec2(4, 0)));
  EXPECT_EQ(s.collisions, 1u);
  EXPECT_EQ(s.hit, std::vector<std::size_t>{0});
}

TEST(WalkAndScore, DiscRadiusGrazing) {
  const std::vector<ObstacleBox> boxes{box(Vec3(1, 0.3, 0), Vec3(2, 1, 1))};
  WalkerModel w;
  w.radius = 0.25;
  EXPECT_EQ(walk_and_score(boxes, straight_line_plan(Vec2(0, 0), Vec2(3, 0)), w).collisions, 0u);
  w.radius = 0.35;
  EXPECT_EQ(walk_and_score(boxes, straight_line_plan(Vec2(0, 0), Vec2(3, 0)), w).collisions, 1u);
}

TEST(WalkAndScore, TurnsCostTime) {
  NavPlan p;
  p.waypoints = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1)};
  const WalkerModel w;
  const auto s = walk_and_score({}, p, w);
  EXPECT_NEAR(s.traversal_time, 2.0 / w.speed() + (kPi / 2) / w.turn_rate, 1e-12);
  EXPECT_LT(s.mean_speed, w.speed());
}

TEST(SegmentBoxDistance, MatchesSampling) {
  GaussianSource rng(9);
  auto u = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  for (int i = 0; i < 500; ++i) {
    const Vec2 a(u(-2, 2), u(-2, 2)), b(u(-2, 2), u(-2, 2));
    const Vec3 lo(u(-1, 1), u(-1, 1), 0);
    const auto bx = box(lo, lo + Vec3(u(0.1, 1), u(0.1, 1), 1));
    double best = 1e9;
    for (int k = 0; k <= 4000; ++k) {
      const Vec2 p = a + (b - a) * (k / 4000.0);
      const Vec2 d = (bx.min.head<2>() - p).cwiseMax(p - bx.max.head<2>()).cwiseMax(Vec2::Zero());
      best = std::min(best, d.norm());
    }
    ASSERT_NEAR(segment_box_distance(a, b, bx), best, 2e-3);
  }
}

TEST(RandomRoom, DeterministicAndClearOfEndpoints) {
  const auto a = random_room(5), b = random_room(5), c = random_room(6);
  ASSERT_EQ(a.obstacles.size(), 14u);
  EXPECT_EQ(a.obstacles, b.obstacles);
  EXPECT_EQ(a.start, b.start);
  EXPECT_NE(a.obstacles, c.obstacles);
  for (std::size_t i = 4; i < a.obstacles.size(); ++i) {
    EXPECT_GE(segment_box_distance(a.start, a.start, a.obstacles[i]), 0.8);
    EXPECT_GE(segment_box_distance(a.goal, a.goal, a.obstacles[i]), 0.8);
  }
}

TEST(RandomRoom, RasterizeCoversBoxes) {
  const auto r = random_room(11);
  const auto g = rasterize(r.obstacles, 0.05);
  for (const auto& b : r.obstacles) {
    const Vec3 c = b.center();
    EXPECT_TRUE(g.contains(g.key_of(c)));
    EXPECT_TRUE(g.contains(g.key_of(b.min + Vec3::Constant(1e-6))));
    EXPECT_TRUE(g.contains(g.key_of(b.max - Vec3::Constant(1e-6))));
  }
  const auto comps = connected_components(g, 26);
  EXPECT_FALSE(comps.empty());
}

TEST(RandomRoom, PlannedPathsCollisionFree) {
  const WalkerModel w;
  int solved = 0, baseline_blocked = 0, baseline_hits = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto room = random_room(seed);
    const auto grid = rasterize(room.obstacles, 0.05);
    ProjectionParams p;
    p.agent_radius = w.radius + 1.5 * 0.05;
    const auto map = project_occupancy(grid, p);
    NavPlan plan;
    try {
      plan = plan_path(map, room.start, room.goal);
    } catch (const NoPath&) {
      continue;
    }
    ++solved;
    EXPECT_EQ(walk_and_score(room.obstacles, plan, w).collisions, 0u) << "seed " << seed;
    const auto straight = straight_line_plan(room.start, room.goal);
    bool blocked = false;
    for (const auto& b : room.obstacles)
      blocked |= b.min.z() < w.height && b.max.z() > w.step_clearance &&
                 segment_box_distance(room.start, room.goal, b) < w.radius;
    if (blocked) {
      ++baseline_blocked;
      baseline_hits += walk_and_score(room.obstacles, straight, w).collisions >= 1;
    }
  }
  EXPECT_GE(solved, 15);
  EXPECT_GT(baseline_blocked, 0);
  EXPECT_EQ(baseline_hits, baseline_blocked);
}
