#pragma once

// Walking a planned polyline through a box world: collision counts, time and
// speed. Also seeded random rooms for planner trials.

#include "navcore/planner.hpp"
#include "navcore/simharness.hpp"

namespace navcore {

struct WalkerModel {
  double radius = 0.25;
  double height = 1.8;
  double step_clearance = 0.15;
  double cadence = Scenario{}.cadence;  // footfalls per second
  double stride = Scenario{}.stride;    // m per footfall
  double turn_rate = kPi / 2.0;         // rad/s spent turning on the spot

  void validate() const {
    require(finite(radius) && radius >= 0.0, "walker radius must be non-negative");
    require(finite(height) && height > step_clearance && step_clearance >= 0.0,
            "walker height must exceed step clearance");
    require(cadence > 0.0 && stride > 0.0 && turn_rate > 0.0, "walker pace must be positive");
  }

  double speed() const { return cadence * stride; }
};

struct WalkScore {
  std::size_t collisions = 0;
  double traversal_time = 0.0;
  double mean_speed = 0.0;
  /// Indices of the obstacles that were entered.
  std::vector<std::size_t> hit;
};

namespace detail {

inline double point_rect_distance(const Vec2& p, const Vec2& lo, const Vec2& hi) {
  const Vec2 d = (lo - p).cwiseMax(p - hi).cwiseMax(Vec2::Zero());
  return d.norm();
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double l2 = ab.squaredNorm();
  const double t = l2 > 0.0 ? std::clamp((p - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

inline bool segment_hits_rect(const Vec2& a, const Vec2& b, const Vec2& lo, const Vec2& hi) {
  double t0 = 0.0, t1 = 1.0;
  const Vec2 d = b - a;
  for (int ax = 0; ax < 2; ++ax) {
    if (d[ax] == 0.0) {
      if (a[ax] < lo[ax] || a[ax] > hi[ax]) return false;
      continue;
    }
    double ta = (lo[ax] - a[ax]) / d[ax], tb = (hi[ax] - a[ax]) / d[ax];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace detail

/// Exact distance between segment a-b and the xy footprint of `box`.
inline double segment_box_distance(const Vec2& a, const Vec2& b, const ObstacleBox& box) {
  const Vec2 lo = box.min.head<2>(), hi = box.max.head<2>();
  if (detail::segment_hits_rect(a, b, lo, hi)) return 0.0;
  double d = std::min(detail::point_rect_distance(a, lo, hi), detail::point_rect_distance(b, lo, hi));
  for (const Vec2& c : {lo, hi, Vec2(lo.x(), hi.y()), Vec2(hi.x(), lo.y())})
    d = std::min(d, detail::point_segment_distance(c, a, b));
  return d;
}

/// Sweeps the walker disc along the plan polyline. A collision is an overlap
/// with the footprint of a distinct obstacle that reaches into the walker's
/// body interval (step_clearance, height). Time is walking at cadence*stride
/// plus turning on the spot at each bend.
inline WalkScore walk_and_score(const std::vector<ObstacleBox>& obstacles, const NavPlan& plan,
                                const WalkerModel& w = {}) {
  w.validate();
  WalkScore s;
  const auto& wp = plan.waypoints;
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const auto& box = obstacles[i];
    if (!(box.min.z() < w.height && box.max.z() > w.step_clearance)) continue;
    bool hit = false;
    for (std::size_t k = 0; k < wp.size() && !hit; ++k) {
      const Vec2& a = wp[k];
      const Vec2& b = k + 1 < wp.size() ? wp[k + 1] : wp[k];
      hit = segment_box_distance(a, b, box) < w.radius;
    }
    if (hit) s.hit.push_back(i);
  }
  s.collisions = s.hit.size();
  const double length = polyline_length(wp);
  double turning = 0.0;
  for (std::size_t k = 2; k < wp.size(); ++k) {
    const Vec2 u = wp[k - 1] - wp[k - 2], v = wp[k] - wp[k - 1];
    turning += std::abs(std::atan2(u.x() * v.y() - u.y() * v.x(), u.dot(v)));
  }
  s.traversal_time = length / w.speed() + turning / w.turn_rate;
  s.mean_speed = s.traversal_time > 0.0 ? length / s.traversal_time : 0.0;
  return s;
}

/// Polyline straight from the plan start to its goal.
inline NavPlan straight_line_plan(const Vec2& start, const Vec2& goal) {
  NavPlan p;
  p.waypoints = {start, goal};
  p.total_length = (goal - start).norm();
  return p;
}

struct RoomOptions {
  double size = 6.0;
  int obstacles = 10;
  double wall_height = 2.0;
  double wall_thickness = 0.1;
  /// Obstacles keep this far from start and goal.
  double endpoint_clearance = 0.8;
};

struct Room {
  std::vector<ObstacleBox> obstacles;  // walls first
  Vec2 start = Vec2::Zero();
  Vec2 goal = Vec2::Zero();
  double size = 0.0;
};

/// Square room [0,size]^2 with walls and seeded boxes at ground, body and
/// head level. Start is near the x = 0 wall, goal near the opposite one.
inline Room random_room(std::uint64_t seed, const RoomOptions& opt = {}) {
  require(opt.size > 2.0 && opt.obstacles >= 0, "room must be larger than 2 m");
  GaussianSource rng(seed);
  auto uni = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  Room r;
  r.size = opt.size;
  const double s = opt.size, t = opt.wall_thickness, h = opt.wall_height;
  auto add = [&r](Vec3 lo, Vec3 hi, const char* label) {
    ObstacleBox b;
    b.min = lo;
    b.max = hi;
    b.label = label;
    b.height_class = classify_height(b);
    r.obstacles.push_back(b);
  };
  add(Vec3(-t, -t, 0), Vec3(s + t, 0, h), "wall");
  add(Vec3(-t, s, 0), Vec3(s + t, s + t, h), "wall");
  add(Vec3(-t, 0, 0), Vec3(0, s, h), "wall");
  add(Vec3(s, 0, 0), Vec3(s + t, s, h), "wall");
  r.start = Vec2(0.5, uni(1.0, s - 1.0));
  r.goal = Vec2(s - 0.5, uni(1.0, s - 1.0));
  static constexpr const char* kinds[] = {"box", "chair", "table", "shelf", "lamp"};
  int placed = 0;
  while (placed < opt.obstacles) {
    const double wx = uni(0.3, 1.2), wy = uni(0.3, 1.2);
    const Vec2 lo(uni(1.0, s - 1.0 - wx), uni(0.3, s - 0.3 - wy));
    const Vec2 hi = lo + Vec2(wx, wy);
    if (detail::point_rect_distance(r.start, lo, hi) < opt.endpoint_clearance ||
        detail::point_rect_distance(r.goal, lo, hi) < opt.endpoint_clearance)
      continue;
    const int kind = static_cast<int>(rng.uniform() * 5.0);
    double z0 = 0.0, z1 = 0.0;
    switch (kind) {
      case 0: z1 = uni(0.25, 0.4); break;                         // ground level
      case 1: case 2: z1 = uni(0.6, 1.2); break;                  // body level
      case 3: z1 = uni(1.6, 2.0); break;                          // tall
      default: z0 = uni(1.3, 1.6); z1 = z0 + uni(0.1, 0.3); break;  // hanging, head level
    }
    add(Vec3(lo.x(), lo.y(), z0), Vec3(hi.x(), hi.y(), z1), kinds[kind]);
    ++placed;
  }
  return r;
}

/// Occupies every voxel whose cell overlaps the interior of a box; each voxel
/// carries the box label. Feature layout matches voxelize().
inline SparseVoxelGrid rasterize(const std::vector<ObstacleBox>& boxes, double voxel_size,
                                 const Vec3& origin = Vec3::Zero()) {
  SparseVoxelGrid g(voxel_size, origin, kVoxelFeatureChannels);
  for (const auto& b : boxes) {
    const double eps = 1e-9 * voxel_size;
    const VoxelKey lo = g.key_of(b.min + Vec3::Constant(eps));
    const VoxelKey hi = g.key_of(b.max - Vec3::Constant(eps));
    for (int x = lo.x; x <= hi.x; ++x)
      for (int y = lo.y; y <= hi.y; ++y)
        for (int z = lo.z; z <= hi.z; ++z) {
          const VoxelKey k{x, y, z};
          const double n = g.contains(k) ? (*g.find(k))[0] + 1.0 : 1.0;
          const double half = 0.5 * voxel_size;
          g.set(k, {n, half, half, half});
          if (b.label) g.add_labels(k, {{*b.label, 1}});
        }
  }
  return g;
}

/// Voxel-centre samples of the boxes with labels, as a labelled cloud.
inline void room_cloud(const std::vector<ObstacleBox>& boxes, double spacing, std::vector<Vec3>& points,
                       std::vector<std::string>& labels) {
  const auto g = rasterize(boxes, spacing);
  points.clear();
  labels.clear();
  for (const auto& k : g.sorted_keys()) {
    points.push_back(g.cell_min(k) + Vec3::Constant(0.5 * spacing));
    const LabelCounts* l = g.labels(k);
    labels.push_back(l ? *majority_label(*l) : std::string());
  }
}

}  // namespace navcore
