// navcore: track, simulate, map, plan and navigate from the command line.
//
// Exit codes: 0 ok, 1 usage/config/invalid input, 2 malformed input file,
// 3 no steps detected, 4 goal unreachable, 5 unknown object label.

#include "navcore/navigate.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace navcore;

namespace {

enum Exit { kOk = 0, kUsage = 1, kMalformed = 2, kNoSteps = 3, kUnreachable = 4, kUnknownLabel = 5 };

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true) {
  cmd->add_option("--config", c.config, "JSON config file (default: $NAVCORE_CONFIG)");
  cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set agent.radius=0.35");
  auto* o = cmd->add_option("--out", c.out, "Output path prefix");
  if (needs_out) o->required();
}

std::vector<double> parse_list(const std::string& s, std::size_t min_n, std::size_t max_n, const char* what) {
  std::vector<double> v;
  for (const auto& f : io::detail::split(s, ',')) {
    double x = 0.0;
    const auto r = std::from_chars(f.data(), f.data() + f.size(), x);
    if (f.empty() || r.ec != std::errc() || r.ptr != f.data() + f.size() || !std::isfinite(x))
      throw ValidationError(std::string(what) + " must be comma-separated numbers: '" + s + "'");
    v.push_back(x);
  }
  if (v.size() < min_n || v.size() > max_n)
    throw ValidationError(std::string(what) + " has the wrong number of components: '" + s + "'");
  return v;
}

Vec3 parse_vec3(const std::string& s, const char* what) {
  const auto v = parse_list(s, 3, 3, what);
  return {v[0], v[1], v[2]};
}

std::string out_path(const std::string& prefix, const char* suffix) { return prefix + suffix; }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// --------------------------------------------------------------------------

struct TrackArgs {
  Common common;
  std::string imu;
  bool online = false;
  bool offline = false;
  bool no_zupt = false;
  std::string compare;
};

int cmd_track(const TrackArgs& a) {
  AppConfig cfg = load_config(a.common.config, a.common.overrides);
  if (a.no_zupt) cfg.tracker.zupt = false;
  const auto samples = io::parse_imu_csv(io::read_file(a.imu));
  std::optional<Trajectory> ref;
  if (!a.compare.empty()) ref = io::parse_trajectory_csv(io::read_file(a.compare));
  const Trajectory traj = a.online ? run_online(samples, cfg.tracker) : run_offline(samples, cfg.tracker);

  io::OutputSet out;
  out.add(out_path(a.common.out, "_trajectory.csv"), io::format_trajectory_csv(traj));
  out.add(out_path(a.common.out, "_trajectory.json"), io::dump(io::trajectory_json(traj)));
  std::optional<AccuracyMetrics> m;
  if (ref) m = evaluate(traj, *ref);
  out.commit();

  std::cout << "mode: " << (a.online ? "online" : "offline") << (cfg.tracker.zupt ? "" : ", no zupt") << "\n"
            << "samples: " << traj.size() << "\n"
            << "steps: " << traj.step_boundaries.size() << "\n"
            << "path length: " << fixed(path_length(traj), 4) << " m\n";
  if (m)
    std::cout << "rmse: " << fixed(m->rmse, 4) << " m\n"
              << "endpoint error: " << fixed(m->endpoint_error, 4) << " m\n"
              << "path length ratio: " << fixed(m->path_length_ratio, 4) << "\n";
  return kOk;
}

// --------------------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string scenario;
  double rate = 0.0;
  double noise_accel = 0.02;
  double noise_gyro = 0.002;
  std::string accel_bias = "0,0,0";
  std::string gyro_bias = "0,0,0";
  std::uint64_t seed = 1;
  double fix_period = 0.0;
  double fix_sigma = 0.05;
  double fix_confidence = 0.9;
};

int cmd_simulate(const SimulateArgs& a) {
  const AppConfig cfg = load_config(a.common.config, a.common.overrides);
  const Scenario sc = io::parse_scenario_json(io::read_file(a.scenario));
  const double rate = a.rate > 0.0 ? a.rate : cfg.tracker.sample_rate;
  NoiseModel n;
  n.accel_sigma = a.noise_accel;
  n.gyro_sigma = a.noise_gyro;
  n.accel_bias = parse_vec3(a.accel_bias, "--accel-bias");
  n.gyro_bias = parse_vec3(a.gyro_bias, "--gyro-bias");
  n.seed = a.seed;
  const Trajectory truth = gen_trajectory(sc, rate);
  const auto imu = synth_imu(truth, n, rate, cfg.tracker.g);

  io::OutputSet out;
  out.add(out_path(a.common.out, "_imu.csv"), io::format_imu_csv(imu));
  out.add(out_path(a.common.out, "_truth.csv"), io::format_trajectory_csv(truth));
  out.add(out_path(a.common.out, "_truth.json"), io::dump(io::trajectory_json(truth)));
  std::size_t nfix = 0;
  if (a.fix_period > 0.0) {
    // Fix noise draws from its own stream so the IMU is unchanged by fix options.
    const auto fixes = simulate_fixes(truth, a.fix_period, a.fix_sigma, a.fix_confidence, a.seed ^ 0x9e3779b97f4a7c15ULL);
    nfix = fixes.size();
    out.add(out_path(a.common.out, "_fixes.csv"), io::format_fixes_csv(fixes));
  }
  out.commit();
  std::cout << "seed: " << a.seed << "\n"
            << "samples: " << imu.size() << " at " << fixed(rate, 1) << " Hz\n"
            << "steps: " << truth.step_boundaries.size() << "\n"
            << "walked: " << fixed(walked_length(truth), 3) << " m\n";
  if (nfix) std::cout << "fixes: " << nfix << "\n";
  return kOk;
}

// --------------------------------------------------------------------------

struct RoomArgs {
  Common common;
  std::uint64_t seed = 1;
};

int cmd_room(const RoomArgs& a) {
  const AppConfig cfg = load_config(a.common.config, a.common.overrides);
  const Room room = random_room(a.seed);
  io::PointCloud cloud;
  room_cloud(room.obstacles, cfg.voxel_size, cloud.points, cloud.labels);
  io::Json j;
  j["frame"] = io::frame_header();
  j["seed"] = a.seed;
  j["start"] = {room.start.x(), room.start.y()};
  j["goal"] = {room.goal.x(), room.goal.y()};
  io::Json boxes = io::Json::array();
  for (const auto& b : room.obstacles) boxes.push_back(io::obstacle_json(b));
  j["obstacles"] = std::move(boxes);
  io::OutputSet out;
  out.add(out_path(a.common.out, "_cloud.txt"), io::format_cloud_ascii(cloud));
  out.add(out_path(a.common.out, "_room.json"), io::dump(j));
  out.commit();
  std::cout << "seed: " << a.seed << "\n"
            << "points: " << cloud.points.size() << "\n"
            << "start: " << fixed(room.start.x(), 3) << "," << fixed(room.start.y(), 3) << "\n"
            << "goal: " << fixed(room.goal.x(), 3) << "," << fixed(room.goal.y(), 3) << "\n";
  return kOk;
}

// --------------------------------------------------------------------------

struct MapArgs {
  Common common;
  std::string cloud;
  bool binary = false;
  std::string kernel;
};

int cmd_map(const MapArgs& a) {
  const AppConfig cfg = load_config(a.common.config, a.common.overrides);
  const std::string raw = io::read_file(a.cloud);
  const io::PointCloud cloud = a.binary ? io::parse_cloud_binary(raw) : io::parse_cloud_ascii(raw);
  std::optional<ConvKernel> kernel;
  if (!a.kernel.empty()) kernel = io::parse_kernel_json(io::read_file(a.kernel));

  SparseVoxelGrid grid = voxelize(cloud.points, cfg.voxel_size, Vec3::Zero(), cloud.labels);
  const std::size_t voxels = grid.size();
  ConvStats stats;
  if (kernel) {
    SparseVoxelGrid feat = sparse_conv(grid, *kernel, &stats);
    // Labels follow the surviving sites.
    for (const auto& k : feat.sorted_keys())
      if (const LabelCounts* l = grid.labels(k)) feat.add_labels(k, *l);
    grid = std::move(feat);
  }
  const auto boxes = connected_components(grid, cfg.connectivity, cfg.heights);

  MapBounds bounds{Vec2::Constant(-cfg.map_margin), Vec2::Constant(cfg.map_margin)};
  if (!cloud.points.empty()) {
    bounds.min = bounds.max = cloud.points.front().head<2>();
    for (const auto& p : cloud.points) {
      bounds.min = bounds.min.cwiseMin(p.head<2>());
      bounds.max = bounds.max.cwiseMax(p.head<2>());
    }
    bounds.min -= Vec2::Constant(cfg.map_margin);
    bounds.max += Vec2::Constant(cfg.map_margin);
    if (cfg.map_margin == 0.0) bounds.max += Vec2::Constant(cfg.voxel_size);
  }
  const Costmap map = project_occupancy(grid, cfg.agent, bounds);

  io::OutputSet out;
  out.add(out_path(a.common.out, "_obstacles.json"),
          io::dump(io::obstacles_json(boxes, cfg.voxel_size, cfg.connectivity)));
  out.add(out_path(a.common.out, "_costmap.pgm"), io::format_costmap_pgm(map));
  out.add(out_path(a.common.out, "_costmap.json"), io::dump(io::costmap_meta_json(map)));
  out.commit();

  std::size_t blocked = 0;
  for (auto v : map.data()) blocked += v == Costmap::kBlocked;
  std::cout << "points: " << cloud.points.size() << "\n"
            << "voxels: " << voxels << "\n";
  if (kernel) std::cout << "conv gathers: " << stats.gathers << ", active after conv: " << grid.size() << "\n";
  std::cout << "obstacles: " << boxes.size() << "\n"
            << "costmap: " << map.width() << "x" << map.height() << ", " << blocked << " blocked cells\n";
  return kOk;
}

// --------------------------------------------------------------------------

struct MapFiles {
  Costmap map{1.0, Vec2::Zero(), 1, 1};
  std::vector<ObstacleBox> obstacles;
};

MapFiles load_map(const std::string& prefix) {
  MapFiles m;
  m.map = io::parse_costmap(io::read_file(prefix + "_costmap.pgm"), io::read_file(prefix + "_costmap.json"));
  m.obstacles = io::parse_obstacles_json(io::read_file(prefix + "_obstacles.json"));
  return m;
}

struct PlanArgs {
  Common common;
  std::string map;
  std::string start;
  std::string goal;
  std::string find;
};

int cmd_plan(const PlanArgs& a) {
  const AppConfig cfg = load_config(a.common.config, a.common.overrides);
  const MapFiles m = load_map(a.map);
  const auto st = parse_list(a.start, 2, 3, "--start");
  const Vec2 start(st[0], st[1]);
  const double yaw = st.size() == 3 ? st[2] : 0.0;
  Vec2 goal;
  if (!a.find.empty()) {
    const ObstacleBox& target = find_object(m.obstacles, a.find, start);
    goal = detail::approach_point(m.map, target, cfg.planner.lethal_cost);
    const Vec3 c = target.center();
    std::cout << "target: " << *target.label << " at " << fixed(c.x(), 3) << "," << fixed(c.y(), 3) << "\n";
  } else {
    const auto g = parse_list(a.goal, 2, 2, "--goal");
    goal = Vec2(g[0], g[1]);
  }
  NavPlan plan = plan_path(m.map, start, goal, cfg.planner);
  plan = annotate_plan(std::move(plan), yaw, m.obstacles, cfg.instructions);
  io::OutputSet out;
  out.add(out_path(a.common.out, "_plan.json"), io::dump(io::plan_json(plan)));
  out.commit();
  std::cout << "waypoints: " << plan.waypoints.size() << "\n"
            << "length: " << fixed(plan.total_length, 3) << " m\n";
  for (const auto& line : plan.instructions) std::cout << line << "\n";
  return kOk;
}

// --------------------------------------------------------------------------

struct NavigateArgs {
  Common common;
  std::string map;
  std::string imu;
  std::string fixes;
  std::string start;
  std::string goal;
  std::string find;
};

int cmd_navigate(const NavigateArgs& a) {
  NavigationRequest rq;
  rq.config = load_config(a.common.config, a.common.overrides);
  MapFiles m = load_map(a.map);
  rq.map = std::move(m.map);
  rq.obstacles = std::move(m.obstacles);
  rq.imu = io::parse_imu_csv(io::read_file(a.imu));
  if (!a.fixes.empty()) rq.fixes = io::parse_fixes_csv(io::read_file(a.fixes));
  const auto st = parse_list(a.start, 3, 3, "--start");
  rq.start = Vec2(st[0], st[1]);
  rq.start_yaw = st[2];
  if (!a.find.empty()) {
    rq.find = a.find;
  } else {
    const auto g = parse_list(a.goal, 2, 2, "--goal");
    rq.goal = Vec2(g[0], g[1]);
  }
  const NavigationResult r = navigate(rq);

  std::string transcript;
  for (const auto& l : r.transcript) transcript += l + "\n";
  io::OutputSet out;
  out.add(out_path(a.common.out, "_transcript.txt"), transcript);
  out.add(out_path(a.common.out, "_fused.csv"), io::format_trajectory_csv(r.fused));
  out.add(out_path(a.common.out, "_fused.json"), io::dump(io::trajectory_json(r.fused)));
  out.commit();
  std::cout << transcript;
  std::cout << "fixes applied: " << r.fixes_applied << ", rejected: " << r.fixes_rejected << "\n"
            << "replans: " << r.replans << "\n";
  if (r.target) {
    const Vec3 c = r.target->center();
    std::cout << "target: " << *r.target->label << " at " << fixed(c.x(), 3) << "," << fixed(c.y(), 3) << "\n";
  }
  return kOk;
}

// --------------------------------------------------------------------------

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    std::cerr << "error: malformed input: " << e.what() << "\n";
    return kMalformed;
  } catch (const NoStanceError& e) {
    std::cerr << "error: " << e.what() << "\n"
              << "hint: e.g. --set tracker.stance_threshold=" << 2.0 * TrackerConfig{}.stance_threshold << "\n";
    return kNoSteps;
  } catch (const NoPath& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnreachable;
  } catch (const NotFound& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnknownLabel;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Foot-mounted inertial tracking, voxel mapping and guidance"};
  app.require_subcommand(1);

  TrackArgs track;
  auto* t = app.add_subcommand("track", "Dead-reckon a foot-mounted IMU CSV");
  t->add_option("imu", track.imu, "IMU CSV (t,ax,ay,az,gx,gy,gz)")->required();
  auto* on = t->add_flag("--online", track.online, "Streaming tracker");
  auto* off = t->add_flag("--offline", track.offline, "Batch tracker (default)");
  on->excludes(off);
  t->add_flag("--no-zupt", track.no_zupt, "Disable zero-velocity updates");
  t->add_option("--compare", track.compare, "Reference trajectory CSV for error metrics");
  add_common(t, track.common);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic walk and IMU stream");
  s->add_option("scenario", sim.scenario, "Scenario JSON")->required();
  s->add_option("--rate", sim.rate, "IMU rate in Hz (default: tracker.sample_rate)");
  s->add_option("--noise-accel", sim.noise_accel, "Accelerometer white noise sigma, m/s^2")->capture_default_str();
  s->add_option("--noise-gyro", sim.noise_gyro, "Gyro white noise sigma, rad/s")->capture_default_str();
  s->add_option("--accel-bias", sim.accel_bias, "Accelerometer bias x,y,z")->capture_default_str();
  s->add_option("--gyro-bias", sim.gyro_bias, "Gyro bias x,y,z")->capture_default_str();
  s->add_option("--seed", sim.seed, "Noise seed")->capture_default_str();
  s->add_option("--fix-period", sim.fix_period, "Also write pose fixes every N seconds (0: none)");
  s->add_option("--fix-sigma", sim.fix_sigma, "Fix position noise sigma, m")->capture_default_str();
  s->add_option("--fix-confidence", sim.fix_confidence, "Confidence written with each fix")->capture_default_str();
  add_common(s, sim.common);

  RoomArgs room;
  auto* r = app.add_subcommand("room", "Write a seeded random room as a labelled point cloud");
  r->add_option("--seed", room.seed, "Room seed")->capture_default_str();
  add_common(r, room.common);

  MapArgs map;
  auto* m = app.add_subcommand("map", "Voxelize a point cloud into obstacles and a costmap");
  m->add_option("cloud", map.cloud, "Point cloud, 'x y z [label]' per line")->required();
  m->add_flag("--binary", map.binary, "Cloud is little-endian float32 xyz triples");
  m->add_option("--kernel", map.kernel, "Sparse convolution kernel JSON applied before grouping");
  add_common(m, map.common);

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "Plan a path on a map and print instructions");
  p->add_option("--map", plan.map, "Map prefix written by 'map'")->required();
  p->add_option("--start", plan.start, "x,y[,yaw]")->required();
  auto* pg = p->add_option("--goal", plan.goal, "x,y");
  auto* pf = p->add_option("--find", plan.find, "Object label to walk to");
  pg->excludes(pf);
  add_common(p, plan.common);

  NavigateArgs nav;
  auto* n = app.add_subcommand("navigate", "Closed-loop guidance from IMU and pose fixes");
  n->add_option("--map", nav.map, "Map prefix written by 'map'")->required();
  n->add_option("--imu", nav.imu, "IMU CSV")->required();
  n->add_option("--fixes", nav.fixes, "Pose fix CSV (t,px,py,pz,qw,qx,qy,qz,confidence)");
  n->add_option("--start", nav.start, "x,y,yaw")->required();
  auto* ng = n->add_option("--goal", nav.goal, "x,y");
  auto* nf = n->add_option("--find", nav.find, "Object label to walk to");
  ng->excludes(nf);
  add_common(n, nav.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*p && plan.goal.empty() && plan.find.empty()) {
    std::cerr << "error: plan needs --goal or --find\n";
    return kUsage;
  }
  if (*n && nav.goal.empty() && nav.find.empty()) {
    std::cerr << "error: navigate needs --goal or --find\n";
    return kUsage;
  }
  if (*t) return guarded([&] { return cmd_track(track); });
  if (*s) return guarded([&] { return cmd_simulate(sim); });
  if (*r) return guarded([&] { return cmd_room(room); });
  if (*m) return guarded([&] { return cmd_map(map); });
  if (*p) return guarded([&] { return cmd_plan(plan); });
  return guarded([&] { return cmd_navigate(nav); });
}
