#pragma once

// Ground-truth walking trajectories, synthetic IMU streams, and accuracy
// metrics. Collision and speed scoring for planned paths lives in
// navcore/scoring.hpp.

#include "navcore/deadreckon.hpp"
#include "navcore/fusion.hpp"

#include <cstdint>
#include <random>
#include <variant>

namespace navcore {

struct Corridor {
  double length = 10.0;
};

struct SpiralStaircase {
  double radius = 1.0;
  double step_rise = 0.17;
  int steps_per_turn = 12;
  int n_steps = 60;
};

struct WaypointWalk {
  std::vector<Vec3> points;
};

/// Gait model: the tracked foot dwells for stance_fraction / cadence seconds
/// between minimum-jerk swings with a vertical lift bump.
struct Scenario {
  std::variant<Corridor, SpiralStaircase, WaypointWalk> kind = Corridor{};
  double cadence = 0.7;          // footfalls per second
  double stance_fraction = 0.35;
  double stride = 0.5;           // m, corridor and waypoint walks
  double lift = 0.05;            // m, swing clearance above the higher footfall
  double lead_in = 1.0;          // s, static before the first swing
  double lead_out = 1.0;         // s, static after the last footfall

  void validate() const {
    require(finite(cadence) && cadence > 0.0, "cadence must be positive");
    require(stance_fraction > 0.0 && stance_fraction < 1.0, "stance_fraction must be in (0,1)");
    require(finite(stride) && stride > 0.0, "stride must be positive");
    require(finite(lift) && lift >= 0.0, "lift must be non-negative");
    require(finite(lead_in) && lead_in >= 0.0 && finite(lead_out) && lead_out >= 0.0,
            "lead-in and lead-out must be non-negative");
    if (const auto* c = std::get_if<Corridor>(&kind)) {
      require(finite(c->length) && c->length > 0.0, "corridor length must be positive");
    } else if (const auto* s = std::get_if<SpiralStaircase>(&kind)) {
      require(s->radius > 0.0 && s->step_rise >= 0.0 && s->steps_per_turn > 0 && s->n_steps > 0,
              "staircase geometry must be positive");
    } else {
      const auto& w = std::get<WaypointWalk>(kind);
      require(w.points.size() >= 2, "waypoint walk needs at least two points");
      for (const auto& p : w.points) require(p.allFinite(), "waypoints must be finite");
    }
  }
};

struct NoiseModel {
  double accel_sigma = 0.0;  // m/s^2
  double gyro_sigma = 0.0;   // rad/s
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  std::uint64_t seed = 1;

  void validate() const {
    require(accel_sigma >= 0.0 && gyro_sigma >= 0.0, "noise sigmas must be non-negative");
    require(accel_bias.allFinite() && gyro_bias.allFinite(), "biases must be finite");
  }
};

/// Reproducible Gaussian source: std::mt19937_64 feeding Box-Muller. Uniforms
/// are the top 53 bits scaled to [0,1); each pair of uniforms yields two
/// normals, cosine branch first. Both pieces are fully specified, so streams
/// match across standard libraries.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

namespace detail {

inline double min_jerk(double s) { return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s); }

inline double lift_bump(double s) {
  const double a = s * (1.0 - s);
  return 64.0 * a * a * a;
}

struct Footfalls {
  std::vector<Vec3> position;
  std::vector<double> heading;  // unwrapped, rad
};

inline double heading_of(const Vec3& d) { return std::atan2(d.y(), d.x()); }

inline void unwrap(std::vector<double>& h) {
  for (std::size_t i = 1; i < h.size(); ++i) h[i] = h[i - 1] + wrap_angle(h[i] - h[i - 1]);
}

inline Footfalls footfalls(const Scenario& sc) {
  Footfalls f;
  if (const auto* c = std::get_if<Corridor>(&sc.kind)) {
    const long n = std::max(1L, std::lround(c->length / sc.stride));
    const double step = c->length / static_cast<double>(n);
    for (long i = 0; i <= n; ++i) {
      f.position.emplace_back(static_cast<double>(i) * step, 0.0, 0.0);
      f.heading.push_back(0.0);
    }
    return f;
  }
  if (const auto* s = std::get_if<SpiralStaircase>(&sc.kind)) {
    // Circle centred at (0, r) so the walk starts at the origin heading +x.
    const double dphi = 2.0 * kPi / s->steps_per_turn;
    for (int i = 0; i <= s->n_steps; ++i) {
      const double phi = -kPi / 2 + i * dphi;
      f.position.emplace_back(s->radius * std::cos(phi), s->radius + s->radius * std::sin(phi),
                              i * s->step_rise);
      f.heading.push_back(i * dphi);
    }
    return f;
  }
  const auto& pts = std::get<WaypointWalk>(sc.kind).points;
  // Footfalls every `stride` of arc length along the polyline, ending on the last point.
  std::vector<double> cum{0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) cum.push_back(cum.back() + (pts[i] - pts[i - 1]).norm());
  const double total = cum.back();
  require(total > 0.0, "waypoint walk has zero length");
  const long n = std::max(1L, static_cast<long>(std::ceil(total / sc.stride - 1e-9)));
  std::size_t leg = 0;
  for (long i = 0; i <= n; ++i) {
    const double s = std::min(total, static_cast<double>(i) * sc.stride);
    while (leg + 2 < pts.size() && cum[leg + 1] < s) ++leg;
    const double len = cum[leg + 1] - cum[leg];
    const double frac = len > 0.0 ? (s - cum[leg]) / len : 0.0;
    f.position.push_back(pts[leg] + frac * (pts[leg + 1] - pts[leg]));
  }
  for (std::size_t i = 0; i < f.position.size(); ++i) {
    const std::size_t a = i + 1 < f.position.size() ? i : i - 1;
    f.heading.push_back(heading_of(f.position[a + 1] - f.position[a]));
  }
  unwrap(f.heading);
  return f;
}

}  // namespace detail

inline Trajectory gen_trajectory(const Scenario& sc, double rate) {
  sc.validate();
  require(finite(rate) && rate >= 50.0, "rate must be at least 50 Hz");
  const detail::Footfalls f = detail::footfalls(sc);
  const std::size_t steps = f.position.size() - 1;
  const double period = 1.0 / sc.cadence;
  const double swing = (1.0 - sc.stance_fraction) * period;
  const double total = sc.lead_in + static_cast<double>(steps) * period + sc.lead_out;
  const auto n = static_cast<std::size_t>(std::floor(total * rate + 1e-9)) + 1;

  Trajectory traj;
  traj.timestamps.reserve(n);
  traj.positions.reserve(n);
  traj.orientations.reserve(n);
  std::size_t next_landing = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / rate;
    Vec3 p = f.position.front();
    double yaw = f.heading.front();
    const double rel = t - sc.lead_in;
    if (rel > 0.0) {
      auto i = static_cast<std::size_t>(std::floor(rel / period));
      const double local = rel - static_cast<double>(i) * period;
      if (i >= steps) {
        p = f.position.back();
        yaw = f.heading.back();
      } else if (local < swing) {
        const double s = local / swing;
        const double m = detail::min_jerk(s);
        p = f.position[i] + m * (f.position[i + 1] - f.position[i]);
        // Clear the higher footfall by `lift`, so a stair swing clears the step nosing.
        const double rise = std::abs(f.position[i + 1].z() - f.position[i].z());
        p.z() += (sc.lift + 0.5 * rise) * detail::lift_bump(s);
        yaw = f.heading[i] + m * (f.heading[i + 1] - f.heading[i]);
      } else {
        p = f.position[i + 1];
        yaw = f.heading[i + 1];
        if (next_landing == i) {
          traj.step_boundaries.push_back(k);
          ++next_landing;
        }
      }
    }
    traj.timestamps.push_back(t);
    traj.positions.push_back(p);
    traj.orientations.push_back(UnitQuaternion::from_yaw(yaw));
  }
  return traj;
}

/// Differentiates a trajectory into body-frame specific force and angular rate.
/// Accel uses the second central difference; gyro uses the backward rotation
/// increment, so integrating sample k's gyro over its interval reproduces the
/// sampled orientation.
inline std::vector<ImuSample> synth_imu(const Trajectory& traj, const NoiseModel& noise, double rate,
                                        double g = kStandardGravity) {
  noise.validate();
  require(traj.size() >= 3, "trajectory too short to differentiate");
  const double traj_rate = 1.0 / (traj.timestamps[1] - traj.timestamps[0]);
  require(finite(rate) && rate > 0.0 && traj_rate >= rate * (1.0 - 1e-9),
          "trajectory must be sampled at least at the requested rate");
  const long stride_l = std::lround(traj_rate / rate);
  require(stride_l >= 1 && std::abs(traj_rate / static_cast<double>(stride_l) - rate) < 1e-6 * rate,
          "trajectory rate must be an integer multiple of the IMU rate");
  const auto stride = static_cast<std::size_t>(stride_l);
  const double h = static_cast<double>(stride) / traj_rate;

  GaussianSource gauss(noise.seed);
  std::vector<ImuSample> out;
  const std::size_t n = (traj.size() - 1) / stride + 1;
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k = j * stride;
    const std::size_t km = j == 0 ? k : k - stride;
    const std::size_t kp = j + 1 == n ? k : k + stride;
    const Vec3 acc = (traj.positions[kp] - 2.0 * traj.positions[k] + traj.positions[km]) / (h * h);
    const UnitQuaternion& q = traj.orientations[k];
    ImuSample s;
    s.t = traj.timestamps[k];
    s.accel = q.conjugate().rotate(acc + Vec3(0.0, 0.0, g));
    s.gyro = j == 0 ? Vec3::Zero() : Vec3((traj.orientations[km].conjugate() * q).rotation_vector() / h);
    for (int a = 0; a < 3; ++a) s.accel[a] += noise.accel_bias[a] + noise.accel_sigma * gauss.normal();
    for (int a = 0; a < 3; ++a) s.gyro[a] += noise.gyro_bias[a] + noise.gyro_sigma * gauss.normal();
    out.push_back(s);
  }
  return out;
}

struct AccuracyMetrics {
  double rmse = 0.0;
  double endpoint_error = 0.0;
  double path_length_ratio = 1.0;
  std::size_t compared = 0;
};

/// Truth position at time t by linear interpolation (t within range).
inline Vec3 interpolate_position(const Trajectory& traj, double t) {
  const auto& ts = traj.timestamps;
  if (t <= ts.front()) return traj.positions.front();
  if (t >= ts.back()) return traj.positions.back();
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - ts.begin());
  const double a = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
  return traj.positions[i - 1] + a * (traj.positions[i] - traj.positions[i - 1]);
}

inline AccuracyMetrics evaluate(const Trajectory& est, const Trajectory& truth) {
  require(!est.timestamps.empty() && !truth.timestamps.empty(), "trajectories must be non-empty");
  const double lo = truth.timestamps.front();
  const double hi = truth.timestamps.back();
  AccuracyMetrics m;
  double sq = 0.0;
  double est_len = 0.0;
  double true_len = 0.0;
  bool have_prev = false;
  Vec3 prev_e, prev_t;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est.timestamps[i];
    if (t < lo || t > hi) continue;
    const Vec3 tp = interpolate_position(truth, t);
    const Vec3& ep = est.positions[i];
    sq += (ep - tp).squaredNorm();
    if (have_prev) {
      est_len += (ep - prev_e).norm();
      true_len += (tp - prev_t).norm();
    }
    prev_e = ep;
    prev_t = tp;
    have_prev = true;
    ++m.compared;
  }
  if (m.compared == 0) throw ValidationError("trajectories have disjoint time ranges");
  m.rmse = std::sqrt(sq / static_cast<double>(m.compared));
  m.endpoint_error = (prev_e - prev_t).norm();
  if (true_len > 0.0) {
    m.path_length_ratio = est_len / true_len;
  } else {
    m.path_length_ratio = est_len > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  }
  return m;
}

/// Absolute pose fixes sampled from truth every `period` seconds, with
/// Gaussian horizontal and vertical position noise and the true orientation.
inline std::vector<PoseFix> simulate_fixes(const Trajectory& truth, double period, double sigma,
                                           double confidence, std::uint64_t seed) {
  require(finite(period) && period > 0.0, "fix period must be positive");
  require(finite(sigma) && sigma >= 0.0, "fix sigma must be non-negative");
  require(confidence >= 0.0 && confidence <= 1.0, "fix confidence must be in [0,1]");
  GaussianSource gauss(seed);
  std::vector<PoseFix> out;
  if (truth.timestamps.empty()) return out;
  const double t0 = truth.timestamps.front();
  double next = t0 + period;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth.timestamps[i] + 1e-9 < next) continue;
    PoseFix f;
    f.t = truth.timestamps[i];
    f.position = truth.positions[i];
    for (int a = 0; a < 3; ++a) f.position[a] += sigma * gauss.normal();
    f.orientation = truth.orientations[i];
    f.confidence = confidence;
    out.push_back(f);
    next += period;
  }
  return out;
}

/// Walked distance (horizontal and vertical) of a trajectory.
inline double walked_length(const Trajectory& t) { return path_length(t); }

}  // namespace navcore
