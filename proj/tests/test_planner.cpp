#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace navcore;
using namespace oracles;

namespace {

void fill_voxels(SparseVoxelGrid& g, const Vec3& lo, const Vec3& hi) {
  const VoxelKey a = g.key_of(lo + Vec3::Constant(1e-9));
  const VoxelKey b = g.key_of(hi - Vec3::Constant(1e-9));
  for (int x = a.x; x <= b.x; ++x)
    for (int y = a.y; y <= b.y; ++y)
      for (int z = a.z; z <= b.z; ++z) g.set({x, y, z}, {1.0});
}

ObstacleBox box(const Vec3& lo, const Vec3& hi, std::optional<std::string> label = std::nullopt) {
  ObstacleBox b;
  b.min = lo;
  b.max = hi;
  b.height_class = classify_height(b);
  b.label = std::move(label);
  return b;
}

Costmap open_map() { return Costmap(0.05, Vec2(-1.0, -1.0), 140, 40); }

}  // namespace

TEST(Costmap, GeometryAndBounds) {
  Costmap m(0.1, Vec2(1.0, 2.0), 10, 5);
  EXPECT_EQ(*m.cell_of(Vec2(1.05, 2.45)), (Cell{0, 4}));
  EXPECT_FALSE(m.cell_of(Vec2(0.99, 2.1)));
  EXPECT_FALSE(m.cell_of(Vec2(2.0, 2.1)));
  EXPECT_NEAR((m.center({3, 1}) - Vec2(1.35, 2.15)).norm(), 0.0, 1e-12);
  EXPECT_THROW(Costmap(0.1, Vec2::Zero(), 0, 3), ValidationError);
}

TEST(Inflation, CostRange) {
  EXPECT_EQ(inflation_cost(0.3, 0.3), 0);
  EXPECT_EQ(inflation_cost(0.5, 0.3), 0);
  EXPECT_EQ(inflation_cost(1e-9, 0.3), 253);
  EXPECT_EQ(inflation_cost(0.0, 0.3), 0);
  EXPECT_EQ(inflation_cost(0.15, 0.3), 1 + 126);
  for (double d = 0.001; d < 0.3; d += 0.001) {
    EXPECT_GE(inflation_cost(d, 0.3), 1);
    EXPECT_LE(inflation_cost(d, 0.3), 254);
  }
}

TEST(Inflation, DistanceTransformMatchesBruteForce) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Costmap m = random_costmap(rng, 40, 0.0);
    const auto fast = squared_distance_to_blocked(m);
    const auto slow = brute_force_distance(m);
    for (std::size_t i = 0; i < fast.size(); ++i)
      ASSERT_NEAR(std::sqrt(fast[i]) * m.cell_size(), slow[i], 1e-9) << "cell " << i;
  }
}

TEST(ProjectOccupancy, EmptyGridIsFree) {
  SparseVoxelGrid g(0.05, Vec3::Zero(), 1);
  const auto m = project_occupancy(g, {}, MapBounds{Vec2(0, 0), Vec2(2, 1)});
  EXPECT_EQ(m.width(), 40);
  EXPECT_EQ(m.height(), 20);
  for (auto v : m.data()) EXPECT_EQ(v, Costmap::kFree);
  EXPECT_EQ(project_occupancy(g, {}).data().size(), 1u);
}

TEST(ProjectOccupancy, CeilingLampAndFloorIgnored) {
  SparseVoxelGrid g(0.05, Vec3::Zero(), 1);
  fill_voxels(g, Vec3(1.0, 1.0, 2.0), Vec3(1.2, 1.2, 2.1));
  fill_voxels(g, Vec3(0.0, 0.0, 0.0), Vec3(2.0, 2.0, 0.05));  // floor slab
  ProjectionParams p;
  p.agent_height = 1.8;
  const auto m = project_occupancy(g, p, MapBounds{Vec2(0, 0), Vec2(2, 2)});
  for (auto v : m.data()) EXPECT_EQ(v, Costmap::kFree);
}

TEST(ProjectOccupancy, SweptIntervalIsOpen) {
  SparseVoxelGrid g(0.05, Vec3::Zero(), 1);
  g.set(g.key_of(Vec3(0.52, 0.52, 0.12)), {1.0});  // [0.10, 0.15]: touches clearance only
  g.set(g.key_of(Vec3(1.02, 0.52, 1.82)), {1.0});  // [1.80, 1.85]: touches head only
  g.set(g.key_of(Vec3(1.52, 0.52, 1.77)), {1.0});  // [1.75, 1.80]: inside
  ProjectionParams p;
  p.agent_radius = 0.0;
  const auto m = project_occupancy(g, p, MapBounds{Vec2(0, 0), Vec2(2, 1)});
  EXPECT_FALSE(m.blocked(*m.cell_of(Vec2(0.52, 0.52))));
  EXPECT_FALSE(m.blocked(*m.cell_of(Vec2(1.02, 0.52))));
  EXPECT_TRUE(m.blocked(*m.cell_of(Vec2(1.52, 0.52))));
}

TEST(ProjectOccupancy, WallInflationMatchesBruteForce) {
  SparseVoxelGrid g(0.05, Vec3::Zero(), 1);
  fill_voxels(g, Vec3(1.0, 0.0, 0.0), Vec3(1.05, 2.0, 1.0));
  ProjectionParams p;
  p.agent_radius = 0.3;
  const auto m = project_occupancy(g, p, MapBounds{Vec2(0, 0), Vec2(2, 2)});
  const auto dist = brute_force_distance(m);
  int band = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      const Cell c{x, y};
      const double cx = m.center(c).x();
      if (cx > 1.0 && cx < 1.05) {
        ASSERT_TRUE(m.blocked(c));
        continue;
      }
      ASSERT_EQ(m.at(c), inflation_cost(dist[m.index(c)], 0.3)) << x << "," << y;
      if (y == 20 && m.at(c) > 0) ++band;
    }
  // 0.3 m band each side at 0.05 m cells, exclusive of distance 0.3: 5 + 5.
  EXPECT_EQ(band, 10);
}

TEST(ProjectOccupancy, ImpliedBoundsCoverInflation) {
  SparseVoxelGrid g(0.05, Vec3::Zero(), 1);
  fill_voxels(g, Vec3(1.0, 1.0, 0.5), Vec3(1.1, 1.1, 0.6));
  ProjectionParams p;
  p.agent_radius = 0.2;
  const auto m = project_occupancy(g, p);
  // Outer ring is free: inflation never clipped by the map edge.
  for (int x = 0; x < m.width(); ++x) {
    EXPECT_EQ(m.at({x, 0}), 0);
    EXPECT_EQ(m.at({x, m.height() - 1}), 0);
  }
  std::size_t blocked = 0;
  for (auto v : m.data()) blocked += v == Costmap::kBlocked;
  EXPECT_EQ(blocked, 4u);
}

TEST(PathCost, ExactOrdering) {
  EXPECT_LT((PathCost{141, 0}), (PathCost{0, 100}));
  EXPECT_GT((PathCost{142, 0}), (PathCost{0, 100}));
  EXPECT_LT((PathCost{0, 1}), (PathCost{2, 0}));
  EXPECT_EQ((PathCost{3, 4}), (PathCost{3, 4}));
  EXPECT_LT((PathCost{-5, 4}), (PathCost{0, 1}));  // -5 + 3 sqrt2 = 0.657
}

TEST(PlanPath, StraightOnEmptyMap) {
  const auto m = open_map();
  const auto plan = plan_path(m, Vec2(0, 0), Vec2(5, 0));
  ASSERT_EQ(plan.waypoints.size(), 2u);
  EXPECT_EQ(plan.waypoints.front(), Vec2(0, 0));
  EXPECT_EQ(plan.waypoints.back(), Vec2(5, 0));
  EXPECT_NEAR(plan.total_length, 5.0, 1e-12);
  EXPECT_EQ(plan.cost, (PathCost{254 * 100, 0}));
}

TEST(PlanPath, SameCell) {
  const auto m = open_map();
  const auto plan = plan_path(m, Vec2(0.01, 0.01), Vec2(0.01, 0.01));
  EXPECT_EQ(plan.waypoints.size(), 1u);
  EXPECT_EQ(plan.total_length, 0.0);
  EXPECT_EQ(plan.cells.size(), 1u);
}

TEST(PlanPath, ThroughGapMatchesDijkstra) {
  // Wall at x = 2 with a 1 m gap between y = 1 and y = 2.
  SparseVoxelGrid g(0.05, Vec3::Zero(), 1);
  fill_voxels(g, Vec3(2.0, 0.0, 0.0), Vec3(2.1, 1.0, 1.0));
  fill_voxels(g, Vec3(2.0, 2.0, 0.0), Vec3(2.1, 4.0, 1.0));
  ProjectionParams p;
  p.agent_radius = 0.3;
  const auto m = project_occupancy(g, p, MapBounds{Vec2(0, 0), Vec2(4, 4)});
  const Vec2 s(0.5, 3.5), goal(3.5, 0.5);
  for (int lethal : {1, 255}) {
    PlannerOptions o;
    o.lethal_cost = lethal;
    const auto plan = plan_path(m, s, goal, o);
    const auto ref = dijkstra_cost(m, *m.cell_of(s), *m.cell_of(goal), lethal);
    ASSERT_TRUE(ref);
    EXPECT_EQ(plan.cost, *ref);
    EXPECT_TRUE(valid_cell_path(m, plan.cells, lethal));
    EXPECT_FALSE(polyline_hits_blocked(m, plan.waypoints));
    bool through_gap = false;
    for (const Cell& c : plan.cells) {
      const Vec2 x = m.center(c);
      through_gap |= x.x() > 2.0 && x.x() < 2.1 && x.y() > 1.0 && x.y() < 2.0;
    }
    EXPECT_TRUE(through_gap);
    EXPECT_NEAR(plan.total_length, polyline_length(plan.waypoints), 1e-12);
  }
}

TEST(PlanPath, EnclosedGoalHasNoPath) {
  Costmap m(0.1, Vec2::Zero(), 30, 30);
  for (int i = 10; i <= 20; ++i) {
    m.set({i, 10}, Costmap::kBlocked);
    m.set({i, 20}, Costmap::kBlocked);
    m.set({10, i}, Costmap::kBlocked);
    m.set({20, i}, Costmap::kBlocked);
  }
  EXPECT_THROW(plan_path(m, Vec2(0.5, 0.5), Vec2(1.55, 1.55)), NoPath);
}

TEST(PlanPath, DiagonalGapIsNotCut) {
  Costmap m(0.1, Vec2::Zero(), 3, 3);
  m.set({1, 0}, Costmap::kBlocked);
  m.set({0, 1}, Costmap::kBlocked);
  EXPECT_THROW(plan_path(m, Vec2(0.05, 0.05), Vec2(0.25, 0.25)), NoPath);
}

TEST(PlanPath, EndpointErrors) {
  Costmap m(0.1, Vec2::Zero(), 10, 10);
  m.set({5, 5}, Costmap::kBlocked);
  EXPECT_THROW(plan_path(m, Vec2(0.55, 0.55), Vec2(0.1, 0.1)), ValidationError);
  EXPECT_THROW(plan_path(m, Vec2(0.1, 0.1), Vec2(0.55, 0.55)), ValidationError);
  EXPECT_THROW(plan_path(m, Vec2(-0.1, 0.1), Vec2(0.2, 0.2)), ValidationError);
  EXPECT_THROW(plan_path(m, Vec2(0.1, 0.1), Vec2(0.2, 5.0)), ValidationError);
}

TEST(PlanPath, RandomMapsMatchDijkstraAndStaySafe) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> rad(0.0, 0.35);
  const int lethals[] = {1, 128, 255};
  int planned = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const double radius = rad(rng);
    const Costmap m = random_costmap(rng, 64, radius);
    const int lethal = lethals[trial % 3];
    std::vector<Cell> open;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (m.at({x, y}) < lethal) open.push_back({x, y});
    if (open.size() < 2) continue;
    std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
    const Cell a = open[pick(rng)], b = open[pick(rng)];
    const Vec2 s = m.center(a), g = m.center(b);
    const auto ref = dijkstra_cost(m, a, b, lethal);
    PlannerOptions o;
    o.lethal_cost = lethal;
    if (!ref) {
      EXPECT_THROW(plan_path(m, s, g, o), NoPath);
      continue;
    }
    const auto plan = plan_path(m, s, g, o);
    ++planned;
    ASSERT_EQ(plan.cost, *ref) << "trial " << trial;
    ASSERT_TRUE(valid_cell_path(m, plan.cells, lethal));
    ASSERT_FALSE(polyline_hits_blocked(m, plan.waypoints));
    for (std::size_t i = 1; i < plan.waypoints.size(); ++i)
      for (const Cell& c : cells_touching(m, plan.waypoints[i - 1], plan.waypoints[i]))
        ASSERT_TRUE(m.at(c) < lethal || c == a || c == b);
    if (lethal == 1) {
      const auto d = brute_force_distance(m);
      for (const Cell& c : plan.cells) ASSERT_GE(d[m.index(c)] + 1e-12, radius);
    }
    const auto again = plan_path(m, s, g, o);
    EXPECT_EQ(again.cells, plan.cells);
    EXPECT_EQ(again.waypoints, plan.waypoints);
  }
  EXPECT_GT(planned, 30);
}

TEST(Instructions, StraightLeg) {
  const auto plan = plan_path(open_map(), Vec2(0, 0), Vec2(3, 0));
  EXPECT_EQ(generate_instructions(plan, 0.0, {}), std::vector<std::string>{"walk forward 3.0 meters"});
}

TEST(Instructions, LeftTurn) {
  NavPlan p;
  p.waypoints = {Vec2(0, 0), Vec2(0, 2)};
  p.cell_size = 0.05;
  EXPECT_EQ(generate_instructions(p, 0.0, {}),
            (std::vector<std::string>{"turn left 90 degrees", "walk forward 2.0 meters"}));
  EXPECT_EQ(generate_instructions(p, kPi, {}),
            (std::vector<std::string>{"turn right 90 degrees", "walk forward 2.0 meters"}));
}

TEST(Instructions, HeadLevelWarning) {
  NavPlan p;
  p.waypoints = {Vec2(0, 0), Vec2(3, 0)};
  p.cell_size = 0.05;
  const auto head = box(Vec3(1.0, -0.8, 1.6), Vec3(1.4, -0.5, 1.9));
  const auto far = box(Vec3(1.0, 1.5, 0.0), Vec3(1.4, 1.8, 1.0));
  const auto behind = box(Vec3(-1.0, 0.2, 0.0), Vec3(-0.5, 0.4, 1.0));
  const auto out = generate_instructions(p, 0.0, {head, far, behind});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], "walk forward 3.0 meters, obstacle at head level on your right");
  const auto near = nearby_obstacles(p, {head, far, behind});
  ASSERT_EQ(near.size(), 1u);
  EXPECT_NEAR(near[0].lateral_offset, -0.5, 1e-12);
}

TEST(Instructions, WarningGeometryOracle) {
  // Rotated leg; the offset must equal the brute-force minimum lateral
  // distance over footprint points whose projection falls on the leg.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-3.0, 3.0), sz(0.1, 1.0);
  for (int i = 0; i < 300; ++i) {
    const Vec2 a(u(rng), u(rng)), b(u(rng), u(rng));
    const Vec3 lo(u(rng), u(rng), 0.0);
    const auto bx = box(lo, lo + Vec3(sz(rng), sz(rng), 1.0));
    const double len = (b - a).norm();
    const Vec2 t = (b - a) / len, n(-t.y(), t.x());
    double best = std::numeric_limits<double>::infinity();
    bool any = false, pos = false, neg = false;
    const int k = 200;
    for (int ix = 0; ix <= k; ++ix)
      for (int iy = 0; iy <= k; ++iy) {
        const Vec2 q(bx.min.x() + (bx.max.x() - bx.min.x()) * ix / k, bx.min.y() + (bx.max.y() - bx.min.y()) * iy / k);
        const double s = (q - a).dot(t);
        if (s < 0 || s > len) continue;
        const double l = (q - a).dot(n);
        any = true;
        pos |= l > 0;
        neg |= l < 0;
        best = std::min(best, std::abs(l));
      }
    const auto off = lateral_offset(a, b, bx, 100.0);
    auto inside = [&bx](const Vec2& p) {
      return p.x() > bx.min.x() && p.x() < bx.max.x() && p.y() > bx.min.y() && p.y() < bx.max.y();
    };
    if (inside(a) || inside(b)) {
      EXPECT_FALSE(off);  // enclosing box
      continue;
    }
    if (!any) continue;  // grazing cases are resolution dependent
    ASSERT_TRUE(off);
    if (pos && neg) {
      EXPECT_EQ(*off, 0.0);
    } else {
      EXPECT_NEAR(std::abs(*off), best, 0.02);
      EXPECT_EQ(*off > 0, pos);
    }
  }
}

TEST(Instructions, RoundTripEndsWithinTolerance) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> rad(0.0, 0.2), hd(-kPi, kPi);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Costmap m = random_costmap(rng, 64, rad(rng));
    std::vector<Cell> open;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (m.at({x, y}) == 0) open.push_back({x, y});
    std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
    const Vec2 s = m.center(open[pick(rng)]), g = m.center(open[pick(rng)]);
    NavPlan plan;
    try {
      plan = plan_path(m, s, g);
    } catch (const NoPath&) {
      continue;
    }
    const double h = hd(rng);
    const auto ins = generate_instructions(plan, h, {});
    const Vec2 end = execute_instructions(ins, s, h);
    EXPECT_LE((end - g).norm(), std::max(plan.cell_size, 0.1)) << "trial " << trial;
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(FindObject, Examples) {
  const std::vector<ObstacleBox> boxes{
      box(Vec3(2.5, -0.5, 0), Vec3(3.5, 0.5, 1), "Chair"),
      box(Vec3(0.5, -0.5, 0), Vec3(1.5, 0.5, 1), "chair"),
      box(Vec3(5, 5, 0), Vec3(6, 5.1, 2), "door"),
      box(Vec3(-5, -5, 0), Vec3(-4, -4, 1)),
  };
  EXPECT_EQ(find_object(boxes, "door", Vec2::Zero()).label, "door");
  EXPECT_EQ(find_object(boxes, "CHAIR", Vec2::Zero()).min.x(), 0.5);
  try {
    find_object(boxes, "sofa", Vec2::Zero());
    FAIL() << "expected NotFound";
  } catch (const NotFound& e) {
    EXPECT_EQ(e.labels(), (std::vector<std::string>{"Chair", "chair", "door"}));
  }
}

TEST(FindObject, TieBreakByCenter) {
  const std::vector<ObstacleBox> boxes{
      box(Vec3(0.5, -0.5, 0), Vec3(1.5, 0.5, 1), "door"),
      box(Vec3(-1.5, -0.5, 0), Vec3(-0.5, 0.5, 1), "door"),
  };
  EXPECT_EQ(find_object(boxes, "door", Vec2::Zero()).min.x(), -1.5);
}
