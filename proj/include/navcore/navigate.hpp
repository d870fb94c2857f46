#pragma once

// Closed-loop guidance: stream IMU through the online tracker, blend pose
// fixes, plan on the costmap, and issue timestamped instructions.

#include "navcore/config.hpp"
#include "navcore/scoring.hpp"

namespace navcore {

struct NavigationRequest {
  Costmap map{1.0, Vec2::Zero(), 1, 1};
  std::vector<ObstacleBox> obstacles;
  std::vector<ImuSample> imu;
  std::vector<PoseFix> fixes;
  Vec2 start = Vec2::Zero();
  double start_yaw = 0.0;
  std::optional<Vec2> goal;
  std::optional<std::string> find;
  AppConfig config;
};

struct NavigationResult {
  std::vector<std::string> transcript;
  Trajectory fused;
  NavPlan plan;  // the first plan
  Vec2 goal = Vec2::Zero();
  std::optional<ObstacleBox> target;
  std::size_t replans = 0;
  bool arrived = false;
  std::size_t fixes_applied = 0;
  std::size_t fixes_rejected = 0;
};

namespace detail {

inline std::string stamp(double t, const std::string& text) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f ", t);
  return buf + text;
}

/// Traversable cell centre nearest to the footprint of `box`.
inline Vec2 approach_point(const Costmap& map, const ObstacleBox& box, int lethal) {
  std::optional<Cell> best;
  double best_d = 0.0;
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      const Cell c{x, y};
      if (map.at(c) >= lethal) continue;
      const double d = point_rect_distance(map.center(c), box.min.head<2>(), box.max.head<2>());
      if (!best || d < best_d) {
        best = c;
        best_d = d;
      }
    }
  if (!best) throw NoPath("no traversable cell near the target");
  return map.center(*best);
}

/// `p` itself when its cell is traversable, else the nearest traversable cell
/// centre (a drifted pose may sit in the inflated band, which the planner
/// cannot leave).
inline Vec2 snap_start(const Costmap& map, const Vec2& p, int lethal) {
  const auto c = map.cell_of(p);
  if (c && map.at(*c) < lethal) return p;
  std::optional<Cell> best;
  double best_d = 0.0;
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      const Cell k{x, y};
      if (map.at(k) >= lethal) continue;
      const double d = (map.center(k) - p).norm();
      if (!best || d < best_d) {
        best = k;
        best_d = d;
      }
    }
  if (!best) throw NoPath("map has no traversable cell");
  return map.center(*best);
}

inline double distance_to_polyline(const Vec2& p, const std::vector<Vec2>& wp) {
  if (wp.size() == 1) return (p - wp.front()).norm();
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < wp.size(); ++i) d = std::min(d, point_segment_distance(p, wp[i - 1], wp[i]));
  return d;
}

}  // namespace detail

inline NavigationResult navigate(const NavigationRequest& req) {
  const AppConfig& cfg = req.config;
  cfg.validate();
  require(req.goal.has_value() != req.find.has_value(), "exactly one of goal and find is required");
  require(!req.imu.empty(), "IMU stream is empty");
  NavigationResult res;
  if (req.find) {
    res.target = find_object(req.obstacles, *req.find, req.start);
    res.goal = detail::approach_point(req.map, *res.target, cfg.planner.lethal_cost);
  } else {
    res.goal = *req.goal;
  }
  const std::string goal_name = req.find ? *req.find : std::string("goal");
  const double replan_dist = cfg.replan_distance > 0.0 ? cfg.replan_distance : req.map.cell_size();

  NavPlan plan;
  auto make_plan = [&](const Vec2& from, double heading, double t) {
    NavPlan p = plan_path(req.map, detail::snap_start(req.map, from, cfg.planner.lethal_cost), res.goal, cfg.planner);
    plan = annotate_plan(std::move(p), heading, req.obstacles, cfg.instructions);
    for (const auto& line : plan.instructions) res.transcript.push_back(detail::stamp(t, line));
  };
  make_plan(req.start, req.start_yaw, req.imu.front().t);
  res.plan = plan;

  std::vector<PoseFix> fixes = req.fixes;
  std::stable_sort(fixes.begin(), fixes.end(), [](const PoseFix& a, const PoseFix& b) { return a.t < b.t; });
  std::size_t next_fix = 0;

  FusionState s = cfg.fusion_state();
  s.pose = {Vec3(req.start.x(), req.start.y(), 0.0), UnitQuaternion::from_yaw(req.start_yaw)};
  UnitQuaternion last_dr_q;
  double last_t = req.imu.front().t;

  auto feed_dr = [&](const Vec3& p, const UnitQuaternion& q) {
    if (!s.dr_reference) {
      // Align DR yaw with the given start heading; keep its tilt.
      const UnitQuaternion r = UnitQuaternion::from_yaw(req.start_yaw - q.yaw());
      s.pose.orientation = r * q;
      s.dr_reference = Pose{p, q};
      return;
    }
    s = apply_dr_pose(std::move(s), Pose{p, q});
  };
  auto apply_fixes_until = [&](double t) {
    for (; next_fix < fixes.size() && fixes[next_fix].t <= t; ++next_fix) {
      FixStatus st{};
      s = apply_fix(std::move(s), fixes[next_fix], &st);
      if (st == FixStatus::applied) ++res.fixes_applied;
      else ++res.fixes_rejected;
    }
  };
  auto check_progress = [&](double t) {
    if (res.arrived) return;
    const Vec2 here = s.pose.position.head<2>();
    if ((here - res.goal).norm() <= cfg.arrival_radius) {
      res.arrived = true;
      res.transcript.push_back(detail::stamp(t, "arrived at " + goal_name));
      return;
    }
    const double off = detail::distance_to_polyline(here, plan.waypoints) - cfg.agent.agent_radius;
    if (off > replan_dist) {
      ++res.replans;
      res.transcript.push_back(detail::stamp(t, "off course, replanning"));
      try {
        make_plan(here, s.pose.orientation.yaw(), t);
      } catch (const NoPath&) {
        // Keep guiding along the previous plan.
        res.transcript.push_back(detail::stamp(t, "no path from here, continue as before"));
      }
    }
  };
  auto record = [&](double t) {
    res.fused.timestamps.push_back(t);
    res.fused.positions.push_back(s.pose.position);
    res.fused.orientations.push_back(s.pose.orientation);
  };
  auto handle = [&](const std::vector<TrackerEvent>& events) {
    for (const auto& ev : events) {
      if (const auto* p = std::get_if<ProvisionalPose>(&ev)) {
        feed_dr(p->position, p->orientation);
        last_dr_q = p->orientation;
        last_t = p->t;
        apply_fixes_until(p->t);
        record(p->t);
        continue;
      }
      const StepSegment& seg = std::holds_alternative<StepCompleted>(ev) ? std::get<StepCompleted>(ev).segment
                                                                         : std::get<SegmentFinalized>(ev).segment;
      // The corrected segment end replaces the provisional estimate.
      feed_dr(detail::segment_end(seg), last_dr_q);
      if (!res.fused.positions.empty()) {
        res.fused.positions.back() = s.pose.position;
        res.fused.orientations.back() = s.pose.orientation;
      }
      if (seg.kind == SegmentKind::step) res.fused.step_boundaries.push_back(res.fused.size() - 1);
      check_progress(last_t);
    }
  };

  OnlineTracker tracker(cfg.tracker);
  for (const auto& sample : req.imu) handle(tracker.push(sample));
  handle(tracker.finish());
  apply_fixes_until(last_t);
  if (!res.fused.positions.empty()) {
    res.fused.positions.back() = s.pose.position;
    res.fused.orientations.back() = s.pose.orientation;
  }
  check_progress(last_t);
  if (!res.arrived) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "stream ended %.1f meters from %s",
                  (s.pose.position.head<2>() - res.goal).norm(), goal_name.c_str());
    res.transcript.push_back(detail::stamp(last_t, buf));
  }
  return res;
}

}  // namespace navcore
