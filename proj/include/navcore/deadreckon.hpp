#pragma once

// Foot-mounted strapdown dead reckoning with band-pass stance detection and
// per-step zero-velocity drift compensation.
//
// Both the batch path (run_offline) and the streaming path (OnlineTracker)
// are built from the same per-sample primitives in the same order, so their
// outputs agree bit for bit on any valid stream.
//
// Segment layout for a stream of N samples with confirmed stance points
// c_0 < c_1 < ... < c_m (a stance run is confirmed at the sample where it
// reaches min_stance_duration):
//   [0, c_0]      leading hold (stream starts in stance) or leading partial
//   [c_j, c_j+1]  one swing, ZUPT-corrected
//   [c_m, N-1]    trailing hold (stream ends in stance) or trailing partial
// Holds keep position frozen. Partials are integrated but not corrected.

#include "navcore/ahrs.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace navcore {

enum class AttitudeFilter { mahony, madgwick };

struct TrackerConfig {
  double sample_rate = 100.0;          // Hz
  double hp_cutoff = 0.1;              // Hz
  double lp_cutoff = 5.0;              // Hz
  double stance_threshold = 0.05 * kStandardGravity;  // m/s^2
  double min_stance_duration = 0.1;    // s
  double g = kStandardGravity;         // m/s^2
  double init_duration = 0.5;          // s, assumed static for the initial attitude
  /// Accelerometer feedback uses the sample this far back, and only once that
  /// sample itself lies inside a confirmed stance.
  double attitude_guard = 0.1;         // s
  bool zupt = true;
  AttitudeFilter filter = AttitudeFilter::mahony;
  AhrsGains gains;

  void validate() const {
    require(finite(sample_rate) && sample_rate > 0.0, "sample_rate must be positive");
    require(hp_cutoff > 0.0 && hp_cutoff < lp_cutoff && lp_cutoff < 0.5 * sample_rate,
            "cutoffs must satisfy 0 < hp_cutoff < lp_cutoff < sample_rate/2");
    require(finite(stance_threshold) && stance_threshold > 0.0, "stance_threshold must be positive");
    require(finite(min_stance_duration) && min_stance_duration >= 0.0,
            "min_stance_duration must be non-negative");
    require(finite(g) && g > 0.0, "g must be positive");
    require(finite(init_duration) && init_duration >= 0.0, "init_duration must be non-negative");
    require(finite(attitude_guard) && attitude_guard >= 0.0, "attitude_guard must be non-negative");
    require(gains.kp >= 0.0 && gains.ki >= 0.0 && gains.beta >= 0.0, "gains must be non-negative");
  }

  /// Number of consecutive quiet samples that make a stance.
  std::size_t min_stance_samples() const {
    const double n = std::ceil(min_stance_duration * sample_rate - 1e-9);
    return n < 1.0 ? 1 : static_cast<std::size_t>(n);
  }

  std::size_t guard_samples() const {
    return static_cast<std::size_t>(std::ceil(attitude_guard * sample_rate - 1e-9));
  }

  std::size_t init_samples() const {
    const double n = std::ceil(init_duration * sample_rate - 1e-9);
    return n < 1.0 ? 1 : static_cast<std::size_t>(n);
  }
};

/// Thrown when a stream contains no confirmed stance.
class NoStanceError : public std::runtime_error {
 public:
  NoStanceError()
      : std::runtime_error(
            "no stance phase detected; try raising stance_threshold or lowering "
            "min_stance_duration") {}
};

struct Interval {
  std::size_t begin = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  friend bool operator==(const Interval&, const Interval&) = default;
};

enum class SegmentKind : std::uint8_t {
  step,              // swing between two stances, ZUPT-corrected
  leading_hold,      // stream opens in stance
  leading_partial,   // stream opens mid-swing; uncorrected
  trailing_hold,     // stream closes in stance
  trailing_partial,  // stream closes mid-swing; uncorrected
};

inline const char* to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::step: return "step";
    case SegmentKind::leading_hold: return "leading_hold";
    case SegmentKind::leading_partial: return "leading_partial";
    case SegmentKind::trailing_hold: return "trailing_hold";
    case SegmentKind::trailing_partial: return "trailing_partial";
  }
  return "unknown";
}

struct StepSegment {
  std::size_t start_idx = 0;
  std::size_t end_idx = 0;
  SegmentKind kind = SegmentKind::step;
  std::vector<double> timestamps;
  std::vector<Vec3> raw_velocity;
  std::vector<Vec3> corrected_velocity;
  /// Relative to `origin`; corrected_positions.front() is zero.
  std::vector<Vec3> corrected_positions;
  Vec3 residual_velocity = Vec3::Zero();
  /// Absolute earth-frame position at start_idx.
  Vec3 origin = Vec3::Zero();

  bool corrected() const { return kind == SegmentKind::step; }
  std::size_t size() const { return end_idx - start_idx + 1; }
};

struct Trajectory {
  std::vector<double> timestamps;
  std::vector<Vec3> positions;
  std::vector<UnitQuaternion> orientations;
  std::vector<std::size_t> step_boundaries;

  std::size_t size() const { return timestamps.size(); }
};

// ---------------------------------------------------------------------------
// Band-pass stance signal

/// First-order IIR section realised with the bilinear transform (prewarped).
class FirstOrderSection {
 public:
  enum class Type { low_pass, high_pass };

  FirstOrderSection(Type type, double cutoff, double rate) {
    const double k = std::tan(kPi * cutoff / rate);
    a1_ = (k - 1.0) / (k + 1.0);
    if (type == Type::low_pass) {
      b0_ = k / (1.0 + k);
      b1_ = b0_;
    } else {
      b0_ = 1.0 / (1.0 + k);
      b1_ = -b0_;
    }
  }

  double push(double x) {
    const double y = b0_ * x + b1_ * x_prev_ - a1_ * y_prev_;
    x_prev_ = x;
    y_prev_ = y;
    return y;
  }

  double b0() const { return b0_; }
  double b1() const { return b1_; }
  double a1() const { return a1_; }

 private:
  double b0_ = 0.0;
  double b1_ = 0.0;
  double a1_ = 0.0;
  double x_prev_ = 0.0;
  double y_prev_ = 0.0;
};

/// Streaming form of bandpass_magnitude: |LP(HP(|a| - g))|.
class StanceSignalFilter {
 public:
  explicit StanceSignalFilter(const TrackerConfig& cfg)
      : g_(cfg.g),
        hp_(FirstOrderSection::Type::high_pass, cfg.hp_cutoff, cfg.sample_rate),
        lp_(FirstOrderSection::Type::low_pass, cfg.lp_cutoff, cfg.sample_rate) {}

  double push(const Vec3& accel) { return std::abs(lp_.push(hp_.push(accel.norm() - g_))); }

 private:
  double g_;
  FirstOrderSection hp_;
  FirstOrderSection lp_;
};

/// Checks that consecutive timestamps are spaced 1/sample_rate apart within 1%.
inline void check_uniform_gap(double t_prev, double t, double sample_rate, std::size_t index) {
  const double nominal = 1.0 / sample_rate;
  const double gap = t - t_prev;
  if (!(gap > 0.0) || std::abs(gap - nominal) > 0.01 * nominal) {
    throw ValidationError("non-uniform sampling between samples " + std::to_string(index - 1) +
                          " and " + std::to_string(index) + ": gap " + std::to_string(gap) +
                          " s, expected " + std::to_string(nominal) + " s");
  }
}

inline void validate_stream(std::span<const ImuSample> samples, const TrackerConfig& cfg) {
  cfg.validate();
  require(samples.size() >= 2, "need at least 2 samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    validate_sample(samples[i]);
    if (i > 0) check_uniform_gap(samples[i - 1].t, samples[i].t, cfg.sample_rate, i);
  }
}

inline std::vector<double> bandpass_magnitude(std::span<const ImuSample> samples,
                                              const TrackerConfig& cfg) {
  validate_stream(samples, cfg);
  StanceSignalFilter filter(cfg);
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(filter.push(s.accel));
  return out;
}

inline std::vector<Interval> detect_stance(std::span<const double> filtered,
                                           const TrackerConfig& cfg) {
  const std::size_t min_len = cfg.min_stance_samples();
  std::vector<Interval> out;
  std::size_t i = 0;
  while (i < filtered.size()) {
    require(finite(filtered[i]), "filtered signal must be finite");
    if (filtered[i] < cfg.stance_threshold) {
      std::size_t j = i;
      while (j + 1 < filtered.size() && filtered[j + 1] < cfg.stance_threshold) ++j;
      if (j - i + 1 >= min_len) out.push_back({i, j});
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Integration and compensation

/// Trapezoidal double integration of a pre-rotated earth-frame acceleration
/// series; v and p start at zero.
inline void integrate_earth_accel(std::span<const double> t, std::span<const Vec3> acc,
                                  std::vector<Vec3>& velocity, std::vector<Vec3>& position) {
  const std::size_t n = t.size();
  velocity.assign(n, Vec3::Zero());
  position.assign(n, Vec3::Zero());
  for (std::size_t i = 1; i < n; ++i) {
    const double dt = t[i] - t[i - 1];
    velocity[i] = velocity[i - 1] + 0.5 * (acc[i - 1] + acc[i]) * dt;
    position[i] = position[i - 1] + 0.5 * (velocity[i - 1] + velocity[i]) * dt;
  }
}

struct SegmentKinematics {
  std::vector<Vec3> velocity;
  std::vector<Vec3> position;
};

inline SegmentKinematics integrate_segment(std::span<const ImuSample> samples,
                                           std::span<const UnitQuaternion> orientations,
                                           std::size_t start, std::size_t end,
                                           const TrackerConfig& cfg) {
  if (orientations.size() != samples.size())
    throw std::out_of_range("orientations must align with samples");
  if (!(start < end) || end >= samples.size())
    throw std::out_of_range("segment indices out of range");
  std::vector<double> t;
  std::vector<Vec3> acc;
  t.reserve(end - start + 1);
  acc.reserve(end - start + 1);
  for (std::size_t i = start; i <= end; ++i) {
    t.push_back(samples[i].t);
    acc.push_back(earth_accel(orientations[i], samples[i].accel, cfg.g));
  }
  SegmentKinematics out;
  integrate_earth_accel(t, acc, out.velocity, out.position);
  return out;
}

/// Removes a velocity ramp that is zero at the segment start and equal to the
/// residual at its end, then re-integrates position.
inline StepSegment zupt_correct(StepSegment seg) {
  const std::size_t n = seg.raw_velocity.size();
  require(n >= 2 && seg.timestamps.size() == n, "segment needs aligned velocity and timestamps");
  const double t0 = seg.timestamps.front();
  const double span = seg.timestamps.back() - t0;
  require(span > 0.0, "segment duration must be positive");
  seg.residual_velocity = seg.raw_velocity.back();
  seg.corrected_velocity.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = (seg.timestamps[i] - t0) / span;
    seg.corrected_velocity[i] = seg.raw_velocity[i] - seg.residual_velocity * frac;
  }
  seg.corrected_velocity.back() = Vec3::Zero();
  seg.corrected_positions.assign(n, Vec3::Zero());
  for (std::size_t i = 1; i < n; ++i) {
    const double dt = seg.timestamps[i] - seg.timestamps[i - 1];
    seg.corrected_positions[i] =
        seg.corrected_positions[i - 1] + 0.5 * (seg.corrected_velocity[i - 1] + seg.corrected_velocity[i]) * dt;
  }
  return seg;
}

namespace detail {

/// Builds a segment from a contiguous window of (t, earth accel).
inline StepSegment make_segment(std::size_t start, SegmentKind kind, std::span<const double> t,
                                std::span<const Vec3> acc, const Vec3& origin) {
  StepSegment seg;
  seg.start_idx = start;
  seg.end_idx = start + t.size() - 1;
  seg.kind = kind;
  seg.origin = origin;
  seg.timestamps.assign(t.begin(), t.end());
  const std::size_t n = t.size();
  if (kind == SegmentKind::leading_hold || kind == SegmentKind::trailing_hold) {
    seg.raw_velocity.assign(n, Vec3::Zero());
    seg.corrected_velocity.assign(n, Vec3::Zero());
    seg.corrected_positions.assign(n, Vec3::Zero());
    return seg;
  }
  std::vector<Vec3> position;
  integrate_earth_accel(t, acc, seg.raw_velocity, position);
  if (kind == SegmentKind::step && n >= 2) return zupt_correct(std::move(seg));
  seg.residual_velocity = seg.raw_velocity.back();
  seg.corrected_velocity = seg.raw_velocity;
  seg.corrected_positions = std::move(position);
  return seg;
}

inline Vec3 segment_end(const StepSegment& seg) {
  return seg.origin + seg.corrected_positions.back();
}

inline UnitQuaternion initial_attitude(std::span<const ImuSample> window) {
  Vec3 sum = Vec3::Zero();
  for (const auto& s : window) sum += s.accel;
  if (sum.norm() == 0.0) return UnitQuaternion::identity();
  return UnitQuaternion::from_two_vectors(sum / static_cast<double>(window.size()), Vec3::UnitZ());
}

/// One attitude step. With a delayed measurement (accel of an earlier quiet
/// sample, already rotated into the previous body frame) the filter corrects
/// against it; otherwise it runs on the gyro alone.
inline AhrsState attitude_step(const AhrsState& prev, const ImuSample& sample, double dt,
                               const std::optional<Vec3>& delayed_accel,
                               const TrackerConfig& cfg) {
  AhrsState s = prev;
  ImuSample m = sample;
  if (delayed_accel) {
    m.accel = *delayed_accel;
  } else {
    s.gains.kp = 0.0;
    s.gains.ki = 0.0;
    s.gains.beta = 0.0;
  }
  s = cfg.filter == AttitudeFilter::mahony ? mahony_update(s, m, dt) : madgwick_update(s, m, dt);
  s.gains = prev.gains;
  return s;
}

/// Accel of sample j carried into a later body frame. `gj` and `gnow` come
/// from the gyro-only chain, so filter corrections made since j do not feed
/// back with a delay.
inline Vec3 delayed_accel(const UnitQuaternion& gnow, const UnitQuaternion& gj, const Vec3& aj) {
  return (gnow.conjugate() * gj).rotate(aj);
}

}  // namespace detail

/// Orientation for every sample: initial tilt from the static window, then
/// filter updates with accelerometer feedback only from samples that sit at
/// least attitude_guard inside a confirmed stance.
inline std::vector<UnitQuaternion> estimate_orientations(std::span<const ImuSample> samples,
                                                         std::span<const double> filtered,
                                                         const TrackerConfig& cfg) {
  std::vector<UnitQuaternion> q(samples.size());
  if (samples.empty()) return q;
  const std::size_t init = std::min(cfg.init_samples(), samples.size());
  const std::size_t min_len = cfg.min_stance_samples();
  const std::size_t guard = cfg.guard_samples();
  AhrsState state;
  state.gains = cfg.gains;
  state.gains.gravity = cfg.g;
  state.q = detail::initial_attitude(samples.first(init));
  q[0] = state.q;
  std::vector<UnitQuaternion> chain(samples.size());  // gyro-only body rotation
  std::size_t run = filtered[0] < cfg.stance_threshold ? 1 : 0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double dt = samples[i].t - samples[i - 1].t;
    run = filtered[i] < cfg.stance_threshold ? run + 1 : 0;
    std::optional<Vec3> fb;
    if (run >= min_len + guard) {
      const std::size_t j = i - guard;
      fb = guard == 0 ? samples[i].accel
                      : detail::delayed_accel(chain[i - 1], chain[j], samples[j].accel);
    }
    state = detail::attitude_step(state, samples[i], dt, fb, cfg);
    q[i] = state.q;
    chain[i] = quat_integrate_gyro(chain[i - 1], samples[i].gyro, dt);
  }
  return q;
}

/// Anchor indices (confirmed stances) of an ordered segment list.
inline std::vector<std::size_t> step_boundaries(std::span<const StepSegment> segments) {
  std::vector<std::size_t> out;
  for (const auto& seg : segments) {
    if (seg.kind == SegmentKind::step || seg.kind == SegmentKind::leading_hold ||
        seg.kind == SegmentKind::leading_partial)
      out.push_back(seg.end_idx);
  }
  return out;
}

/// Assembles a per-sample trajectory from a complete, ordered segment list.
inline Trajectory assemble_trajectory(std::span<const ImuSample> samples,
                                      std::vector<UnitQuaternion> orientations,
                                      std::span<const StepSegment> segments) {
  Trajectory traj;
  traj.timestamps.reserve(samples.size());
  for (const auto& s : samples) traj.timestamps.push_back(s.t);
  traj.positions.assign(samples.size(), Vec3::Zero());
  traj.orientations = std::move(orientations);
  for (const auto& seg : segments) {
    for (std::size_t i = seg.start_idx; i <= seg.end_idx; ++i)
      traj.positions[i] = seg.origin + seg.corrected_positions[i - seg.start_idx];
  }
  traj.step_boundaries = step_boundaries(segments);
  return traj;
}

struct OfflineResult {
  Trajectory trajectory;
  std::vector<StepSegment> segments;
  std::vector<Interval> stances;
};

inline OfflineResult run_offline_detailed(std::span<const ImuSample> samples,
                                          const TrackerConfig& cfg) {
  const std::vector<double> filtered = bandpass_magnitude(samples, cfg);
  std::vector<UnitQuaternion> q = estimate_orientations(samples, filtered, cfg);

  std::vector<double> t(samples.size());
  std::vector<Vec3> acc(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    t[i] = samples[i].t;
    acc[i] = earth_accel(q[i], samples[i].accel, cfg.g);
  }
  const std::span<const double> ts(t);
  const std::span<const Vec3> as(acc);

  OfflineResult out;
  if (!cfg.zupt) {
    StepSegment whole = detail::make_segment(0, SegmentKind::leading_partial, ts, as, Vec3::Zero());
    out.trajectory = assemble_trajectory(samples, std::move(q), std::span(&whole, 1));
    out.trajectory.step_boundaries.clear();
    return out;
  }

  out.stances = detect_stance(filtered, cfg);
  if (out.stances.empty()) throw NoStanceError();
  const std::size_t min_len = cfg.min_stance_samples();
  std::vector<std::size_t> confirm;
  for (const auto& s : out.stances) confirm.push_back(s.begin + min_len - 1);

  auto window = [&](std::size_t a, std::size_t b) {
    return std::pair{ts.subspan(a, b - a + 1), as.subspan(a, b - a + 1)};
  };

  const SegmentKind lead =
      out.stances.front().begin == 0 ? SegmentKind::leading_hold : SegmentKind::leading_partial;
  {
    auto [tw, aw] = window(0, confirm.front());
    out.segments.push_back(detail::make_segment(0, lead, tw, aw, Vec3::Zero()));
  }
  for (std::size_t j = 0; j + 1 < confirm.size(); ++j) {
    auto [tw, aw] = window(confirm[j], confirm[j + 1]);
    out.segments.push_back(detail::make_segment(confirm[j], SegmentKind::step, tw, aw,
                                                detail::segment_end(out.segments.back())));
  }
  const std::size_t last = samples.size() - 1;
  if (confirm.back() < last) {
    const SegmentKind trail = out.stances.back().end == last ? SegmentKind::trailing_hold
                                                             : SegmentKind::trailing_partial;
    auto [tw, aw] = window(confirm.back(), last);
    out.segments.push_back(detail::make_segment(confirm.back(), trail, tw, aw,
                                                detail::segment_end(out.segments.back())));
  }
  out.trajectory = assemble_trajectory(samples, std::move(q), out.segments);
  return out;
}

inline Trajectory run_offline(std::span<const ImuSample> samples, const TrackerConfig& cfg) {
  return run_offline_detailed(samples, cfg).trajectory;
}

// ---------------------------------------------------------------------------
// Streaming tracker

struct ProvisionalPose {
  std::size_t index = 0;
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  UnitQuaternion orientation;
};

/// A swing has ended and been drift-corrected.
struct StepCompleted {
  StepSegment segment;
};

/// Holds and uncorrected partial swings at the stream edges.
struct SegmentFinalized {
  StepSegment segment;
};

using TrackerEvent = std::variant<ProvisionalPose, StepCompleted, SegmentFinalized>;

/// Single-owner streaming tracker. Buffers the static initialisation window,
/// then emits a provisional pose per sample and a corrected segment as soon
/// as each stance is confirmed. Memory is bounded by the longest swing plus
/// the stance confirmation window.
class OnlineTracker {
 public:
  explicit OnlineTracker(TrackerConfig cfg) : cfg_(cfg), filter_(cfg_) {
    cfg_.validate();
    min_len_ = cfg_.min_stance_samples();
    guard_ = cfg_.guard_samples();
    init_len_ = cfg_.init_samples();
  }

  /// Rejects out-of-order or non-uniform samples without changing state.
  std::vector<TrackerEvent> push(const ImuSample& sample) {
    validate_sample(sample);
    if (count_ > 0) check_uniform_gap(last_t_, sample.t, cfg_.sample_rate, count_);
    last_t_ = sample.t;
    const std::size_t index = count_++;
    const double f = filter_.push(sample.accel);

    std::vector<TrackerEvent> events;
    if (!initialised_) {
      init_buffer_.push_back({sample, f});
      if (init_buffer_.size() == init_len_) start(events);
      return events;
    }
    process(index, sample, f, events);
    return events;
  }

  /// Flushes the initialisation window (short streams) and the trailing segment.
  std::vector<TrackerEvent> finish() {
    std::vector<TrackerEvent> events;
    if (finished_) return events;
    finished_ = true;
    if (!initialised_) {
      if (init_buffer_.empty()) return events;
      start(events);
    }
    if (!cfg_.zupt) return events;
    if (!anchor_index_) throw NoStanceError();
    if (*anchor_index_ + 1 < count_) {
      const SegmentKind kind =
          run_active_ && run_confirmed_ ? SegmentKind::trailing_hold : SegmentKind::trailing_partial;
      events.emplace_back(SegmentFinalized{build(kind)});
    }
    return events;
  }

  std::size_t samples_seen() const { return count_; }
  /// Samples currently retained for the open segment.
  std::size_t buffered() const { return win_t_.size() + init_buffer_.size(); }
  const TrackerConfig& config() const { return cfg_; }

 private:
  struct Pending {
    ImuSample sample;
    double filtered;
  };

  void start(std::vector<TrackerEvent>& events) {
    std::vector<ImuSample> window;
    window.reserve(init_buffer_.size());
    for (const auto& p : init_buffer_) window.push_back(p.sample);
    state_.gains = cfg_.gains;
    state_.gains.gravity = cfg_.g;
    state_.q = detail::initial_attitude(window);
    initialised_ = true;
    std::vector<Pending> buffered = std::move(init_buffer_);
    init_buffer_.clear();
    for (std::size_t i = 0; i < buffered.size(); ++i)
      process(i, buffered[i].sample, buffered[i].filtered, events);
  }

  void process(std::size_t index, const ImuSample& sample, double f,
               std::vector<TrackerEvent>& events) {
    const bool quiet = f < cfg_.stance_threshold;
    bool opened = false;
    if (quiet) {
      if (!run_active_) {
        run_active_ = true;
        run_confirmed_ = false;
        run_start_ = index;
        run_len_ = 0;
      }
      ++run_len_;
      opened = !run_confirmed_ && run_len_ >= min_len_;
    } else {
      run_active_ = false;
      run_confirmed_ = false;
    }

    if (index > 0) {
      std::optional<Vec3> fb;
      if (run_active_ && run_len_ >= min_len_ + guard_) {
        // hist_ holds samples index-guard-1 .. index-1; front is index-guard.
        if (guard_ == 0) {
          fb = sample.accel;
        } else {
          const auto& [gj, aj] = hist_[hist_.size() - guard_];
          fb = detail::delayed_accel(chain_, gj, aj);
        }
      }
      state_ = detail::attitude_step(state_, sample, sample.t - prev_t_, fb, cfg_);
      chain_ = quat_integrate_gyro(chain_, sample.gyro, sample.t - prev_t_);
    }
    prev_t_ = sample.t;
    hist_.emplace_back(chain_, sample.accel);
    if (hist_.size() > guard_ + 1) hist_.pop_front();
    const Vec3 acc = earth_accel(state_.q, sample.accel, cfg_.g);

    if (!cfg_.zupt && !win_t_.empty()) {
      // Uncompensated mode keeps only the previous sample.
      win_t_.erase(win_t_.begin(), win_t_.end() - 1);
      win_acc_.erase(win_acc_.begin(), win_acc_.end() - 1);
      win_started_ = true;
    }
    win_t_.push_back(sample.t);
    win_acc_.push_back(acc);

    // Running uncorrected estimate for the provisional pose.
    if (win_t_.size() == 1 && !win_started_) {
      run_v_ = Vec3::Zero();
      run_p_ = Vec3::Zero();
    } else {
      const std::size_t k = win_t_.size() - 1;
      const double dt = win_t_[k] - win_t_[k - 1];
      const Vec3 v = run_v_ + 0.5 * (win_acc_[k - 1] + win_acc_[k]) * dt;
      run_p_ = run_p_ + 0.5 * (run_v_ + v) * dt;
      run_v_ = v;
    }
    events.emplace_back(ProvisionalPose{index, sample.t, anchor_ + run_p_, state_.q});

    if (cfg_.zupt && opened) {
      run_confirmed_ = true;
      confirm(index, events);
    } else if (opened) {
      run_confirmed_ = true;
    }
  }

  void confirm(std::size_t index, std::vector<TrackerEvent>& events) {
    if (!anchor_index_) {
      const SegmentKind kind =
          run_start_ == 0 ? SegmentKind::leading_hold : SegmentKind::leading_partial;
      events.emplace_back(SegmentFinalized{build(kind)});
    } else {
      events.emplace_back(StepCompleted{build(SegmentKind::step)});
    }
    anchor_index_ = index;
    // The confirmation sample opens the next window.
    win_t_.erase(win_t_.begin(), win_t_.end() - 1);
    win_acc_.erase(win_acc_.begin(), win_acc_.end() - 1);
    run_v_ = Vec3::Zero();
    run_p_ = Vec3::Zero();
  }

  StepSegment build(SegmentKind kind) {
    const std::size_t start = anchor_index_ ? *anchor_index_ : 0;
    StepSegment seg = detail::make_segment(start, kind, win_t_, win_acc_, anchor_);
    anchor_ = detail::segment_end(seg);
    return seg;
  }

  TrackerConfig cfg_;
  StanceSignalFilter filter_;
  std::size_t min_len_ = 1;
  std::size_t guard_ = 0;
  UnitQuaternion chain_;  // gyro-only body rotation since the first sample
  std::deque<std::pair<UnitQuaternion, Vec3>> hist_;  // recent (chain, accel) for delayed feedback
  std::size_t init_len_ = 1;

  std::size_t count_ = 0;
  double last_t_ = 0.0;
  double prev_t_ = 0.0;
  bool initialised_ = false;
  bool finished_ = false;
  std::vector<Pending> init_buffer_;

  AhrsState state_;
  std::vector<double> win_t_;
  std::vector<Vec3> win_acc_;
  bool win_started_ = false;
  Vec3 run_v_ = Vec3::Zero();
  Vec3 run_p_ = Vec3::Zero();
  Vec3 anchor_ = Vec3::Zero();
  std::optional<std::size_t> anchor_index_;

  bool run_active_ = false;
  bool run_confirmed_ = false;
  std::size_t run_start_ = 0;
  std::size_t run_len_ = 0;
};

/// Rebuilds a full trajectory from the event stream of an OnlineTracker.
/// Corrected and finalized segments override provisional positions.
class OnlineTrajectoryCollector {
 public:
  void add(const TrackerEvent& ev) {
    if (const auto* p = std::get_if<ProvisionalPose>(&ev)) {
      if (p->index >= traj_.timestamps.size()) {
        traj_.timestamps.resize(p->index + 1);
        traj_.positions.resize(p->index + 1, Vec3::Zero());
        traj_.orientations.resize(p->index + 1);
      }
      traj_.timestamps[p->index] = p->t;
      traj_.positions[p->index] = p->position;
      traj_.orientations[p->index] = p->orientation;
      return;
    }
    const StepSegment& seg = std::holds_alternative<StepCompleted>(ev)
                                 ? std::get<StepCompleted>(ev).segment
                                 : std::get<SegmentFinalized>(ev).segment;
    for (std::size_t i = seg.start_idx; i <= seg.end_idx; ++i)
      traj_.positions[i] = seg.origin + seg.corrected_positions[i - seg.start_idx];
    segments_.push_back(seg);
  }

  void add(const std::vector<TrackerEvent>& evs) {
    for (const auto& e : evs) add(e);
  }

  Trajectory trajectory() const {
    Trajectory t = traj_;
    t.step_boundaries = step_boundaries(segments_);
    return t;
  }

  const std::vector<StepSegment>& segments() const { return segments_; }

 private:
  Trajectory traj_;
  std::vector<StepSegment> segments_;
};

inline Trajectory run_online(std::span<const ImuSample> samples, const TrackerConfig& cfg) {
  OnlineTracker tracker(cfg);
  OnlineTrajectoryCollector collector;
  for (const auto& s : samples) collector.add(tracker.push(s));
  collector.add(tracker.finish());
  return collector.trajectory();
}

/// Total polyline length of a trajectory's positions.
inline double path_length(const Trajectory& t) {
  double len = 0.0;
  for (std::size_t i = 1; i < t.positions.size(); ++i) len += (t.positions[i] - t.positions[i - 1]).norm();
  return len;
}

}  // namespace navcore
