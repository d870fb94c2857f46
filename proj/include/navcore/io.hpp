#pragma once

// File formats. Text numbers use the shortest round-trip representation, so
// writing and re-reading is lossless and output bytes are deterministic.

#include "navcore/fusion.hpp"
#include "navcore/planner.hpp"
#include "navcore/simharness.hpp"

#include <json.hpp>

#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace navcore::io {

using Json = nlohmann::ordered_json;

/// Unreadable or unwritable file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a sibling temporary and renames, so readers never see a
/// partial file.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw IoError("cannot write " + path);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot write " + path + ": " + ec.message());
  }
}

/// Several outputs that succeed or fail together: contents are built first and
/// only written by commit().
class OutputSet {
 public:
  void add(std::string path, std::string content) { files_.emplace_back(std::move(path), std::move(content)); }
  void commit() const {
    for (const auto& [p, c] : files_) write_file_atomic(p, c);
  }
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

/// Frame block written at the top of every JSON document.
inline Json frame_header() {
  Json f;
  f["earth"] = "local level, z up";
  f["units"] = "m, s, rad";
  f["quaternion"] = "body to earth, [w, x, y, z]";
  return f;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline double parse_number(const std::string& s, std::size_t line, const char* what) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (!s.empty() && *b == '+') ++b;
  const auto r = std::from_chars(b, e, v);
  if (s.empty() || r.ec != std::errc() || r.ptr != e || !std::isfinite(v))
    throw ParseError(std::string("invalid ") + what + " '" + s + "'", line);
  return v;
}

/// Iterates data rows of a CSV with a required header; blank lines and lines
/// starting with '#' are skipped.
template <class Row>
void for_each_row(const std::string& text, const std::vector<std::string>& header, Row&& row) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line;
    const std::string l = trim(raw);
    if (l.empty() || l[0] == '#') continue;
    const auto f = split(l, ',');
    if (!have_header) {
      if (f != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw ParseError("expected header '" + want + "'", line);
      }
      have_header = true;
      continue;
    }
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()),
                       line);
    std::vector<double> v(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) v[i] = parse_number(f[i], line, header[i].c_str());
    row(v, line);
  }
  if (!have_header) throw ParseError("missing header", line == 0 ? 1 : line);
}

template <class... T>
std::string csv_line(const T&... v) {
  std::string s;
  ((s += (s.empty() ? "" : ","), s += fmt(v)), ...);
  return s + "\n";
}

}  // namespace detail

inline const std::vector<std::string> kImuHeader{"t", "ax", "ay", "az", "gx", "gy", "gz"};
inline const std::vector<std::string> kTrajectoryHeader{"t", "px", "py", "pz", "qw", "qx", "qy", "qz"};
inline const std::vector<std::string> kFixHeader{"t", "px", "py", "pz", "qw", "qx", "qy", "qz", "confidence"};

/// IMU CSV. Timestamps must strictly increase.
inline std::vector<ImuSample> parse_imu_csv(const std::string& text) {
  std::vector<ImuSample> out;
  detail::for_each_row(text, kImuHeader, [&](const std::vector<double>& v, std::size_t line) {
    if (!out.empty() && !(v[0] > out.back().t)) throw ParseError("timestamps must strictly increase", line);
    out.push_back({v[0], Vec3(v[1], v[2], v[3]), Vec3(v[4], v[5], v[6])});
  });
  return out;
}

inline std::string format_imu_csv(const std::vector<ImuSample>& samples) {
  std::string s = "t,ax,ay,az,gx,gy,gz\n";
  for (const auto& x : samples)
    s += detail::csv_line(x.t, x.accel.x(), x.accel.y(), x.accel.z(), x.gyro.x(), x.gyro.y(), x.gyro.z());
  return s;
}

inline Trajectory parse_trajectory_csv(const std::string& text) {
  Trajectory t;
  detail::for_each_row(text, kTrajectoryHeader, [&](const std::vector<double>& v, std::size_t line) {
    if (!t.timestamps.empty() && !(v[0] > t.timestamps.back()))
      throw ParseError("timestamps must strictly increase", line);
    const double n = std::sqrt(v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]);
    if (std::abs(n - 1.0) > 1e-6) throw ParseError("quaternion is not unit length", line);
    t.timestamps.push_back(v[0]);
    t.positions.emplace_back(v[1], v[2], v[3]);
    t.orientations.emplace_back(v[4], v[5], v[6], v[7]);
  });
  return t;
}

inline std::string format_trajectory_csv(const Trajectory& t) {
  std::string s = "t,px,py,pz,qw,qx,qy,qz\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& p = t.positions[i];
    const auto& q = t.orientations[i];
    s += detail::csv_line(t.timestamps[i], p.x(), p.y(), p.z(), q.w(), q.x(), q.y(), q.z());
  }
  return s;
}

inline Json trajectory_json(const Trajectory& t) {
  Json j;
  j["frame"] = frame_header();
  j["samples"] = t.size();
  j["step_boundaries"] = t.step_boundaries;
  Json poses = Json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& p = t.positions[i];
    const auto& q = t.orientations[i];
    poses.push_back({{"t", t.timestamps[i]}, {"p", {p.x(), p.y(), p.z()}}, {"q", {q.w(), q.x(), q.y(), q.z()}}});
  }
  j["poses"] = std::move(poses);
  return j;
}

inline std::vector<PoseFix> parse_fixes_csv(const std::string& text) {
  std::vector<PoseFix> out;
  detail::for_each_row(text, kFixHeader, [&](const std::vector<double>& v, std::size_t line) {
    PoseFix f;
    f.t = v[0];
    f.position = Vec3(v[1], v[2], v[3]);
    const double n = std::sqrt(v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]);
    if (std::abs(n - 1.0) > 1e-6) throw ParseError("quaternion is not unit length", line);
    f.orientation = UnitQuaternion(v[4], v[5], v[6], v[7]);
    f.confidence = v[8];
    if (f.confidence < 0.0 || f.confidence > 1.0) throw ParseError("confidence must be in [0,1]", line);
    out.push_back(f);
  });
  return out;
}

inline std::string format_fixes_csv(const std::vector<PoseFix>& fixes) {
  std::string s = "t,px,py,pz,qw,qx,qy,qz,confidence\n";
  for (const auto& f : fixes) {
    const auto& p = f.position;
    const auto& q = f.orientation;
    s += detail::csv_line(f.t, p.x(), p.y(), p.z(), q.w(), q.x(), q.y(), q.z(), f.confidence);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Point clouds

struct PointCloud {
  std::vector<Vec3> points;
  /// Empty, or one entry per point ("" for unlabelled points).
  std::vector<std::string> labels;
};

/// ASCII cloud: one point per line, "x y z" or "x y z label".
inline PointCloud parse_cloud_ascii(const std::string& text) {
  PointCloud c;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  bool any_label = false;
  std::vector<std::string> labels;
  while (std::getline(in, raw)) {
    ++line;
    const std::string l = detail::trim(raw);
    if (l.empty() || l[0] == '#') continue;
    const auto f = detail::split_ws(l);
    if (f.size() != 3 && f.size() != 4) throw ParseError("expected 'x y z [label]'", line);
    c.points.emplace_back(detail::parse_number(f[0], line, "x"), detail::parse_number(f[1], line, "y"),
                          detail::parse_number(f[2], line, "z"));
    labels.push_back(f.size() == 4 ? f[3] : std::string());
    any_label |= f.size() == 4;
  }
  if (any_label) c.labels = std::move(labels);
  return c;
}

inline std::string format_cloud_ascii(const PointCloud& c) {
  std::string s;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    s += fmt(p.x()) + " " + fmt(p.y()) + " " + fmt(p.z());
    if (!c.labels.empty() && !c.labels[i].empty()) s += " " + c.labels[i];
    s += "\n";
  }
  return s;
}

/// Binary cloud: consecutive little-endian float32 triples, no header.
/// Errors report the 1-based record number as the line.
inline PointCloud parse_cloud_binary(const std::string& bytes) {
  static_assert(sizeof(float) == 4);
  if (bytes.size() % 12 != 0) throw ParseError("binary cloud size is not a multiple of 12 bytes", bytes.size() / 12 + 1);
  PointCloud c;
  c.points.reserve(bytes.size() / 12);
  for (std::size_t r = 0; r < bytes.size() / 12; ++r) {
    float v[3];
    for (int a = 0; a < 3; ++a) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b)
        u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[r * 12 + a * 4 + b])) << (8 * b);
      std::memcpy(&v[a], &u, 4);
    }
    if (!std::isfinite(v[0]) || !std::isfinite(v[1]) || !std::isfinite(v[2]))
      throw ParseError("non-finite coordinate", r + 1);
    c.points.emplace_back(v[0], v[1], v[2]);
  }
  return c;
}

inline std::string format_cloud_binary(const std::vector<Vec3>& points) {
  std::string out;
  out.reserve(points.size() * 12);
  for (const auto& p : points)
    for (int a = 0; a < 3; ++a) {
      const float f = static_cast<float>(p[a]);
      std::uint32_t u = 0;
      std::memcpy(&u, &f, 4);
      for (int b = 0; b < 4; ++b) out += static_cast<char>((u >> (8 * b)) & 0xFF);
    }
  return out;
}

// ---------------------------------------------------------------------------
// JSON documents

namespace detail {

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // byte offset -> line
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text.size()); ++i) line += text[i] == '\n';
    throw ParseError(what + ": " + e.what(), line);
  }
}

inline Vec3 vec3(const Json& j) {
  require(j.is_array() && j.size() == 3, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Vec2 vec2(const Json& j) {
  require(j.is_array() && j.size() == 2, "expected a 2-vector");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline void only_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& what) {
  require(j.is_object(), what + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : keys) ok |= k == a;
    require(ok, "unknown key '" + k + "' in " + what);
  }
}

/// Runs `f`, turning JSON type errors into validation errors.
template <class F>
auto typed(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

}  // namespace detail

inline ConvKernel parse_kernel_json(const std::string& text) {
  const Json j = detail::parse_json(text, "kernel");
  return detail::typed("kernel", [&] {
    detail::only_keys(j, {"k", "c_in", "c_out", "weights", "bias"}, "kernel");
    ConvKernel k;
    k.k = j.at("k").get<int>();
    k.c_in = j.at("c_in").get<std::size_t>();
    k.c_out = j.at("c_out").get<std::size_t>();
    k.weights = j.at("weights").get<std::vector<double>>();
    k.bias = j.at("bias").get<std::vector<double>>();
    k.validate();
    return k;
  });
}

inline Json obstacle_json(const ObstacleBox& b) {
  Json j;
  j["min"] = {b.min.x(), b.min.y(), b.min.z()};
  j["max"] = {b.max.x(), b.max.y(), b.max.z()};
  j["height_class"] = to_string(b.height_class);
  j["label"] = b.label ? Json(*b.label) : Json(nullptr);
  j["voxel_count"] = b.voxel_count;
  return j;
}

inline Json obstacles_json(const std::vector<ObstacleBox>& boxes, double voxel_size, int connectivity) {
  Json j;
  j["frame"] = frame_header();
  j["voxel_size"] = voxel_size;
  j["connectivity"] = connectivity;
  Json arr = Json::array();
  for (const auto& b : boxes) arr.push_back(obstacle_json(b));
  j["obstacles"] = std::move(arr);
  return j;
}

inline std::vector<ObstacleBox> parse_obstacles_json(const std::string& text) {
  const Json j = detail::parse_json(text, "obstacles");
  return detail::typed("obstacles", [&] {
    std::vector<ObstacleBox> out;
    for (const auto& o : j.at("obstacles")) {
      ObstacleBox b;
      b.min = detail::vec3(o.at("min"));
      b.max = detail::vec3(o.at("max"));
      const auto hc = height_class_from_string(o.at("height_class").get<std::string>());
      require(hc.has_value(), "unknown height class");
      b.height_class = *hc;
      if (!o.at("label").is_null()) b.label = o.at("label").get<std::string>();
      b.voxel_count = o.at("voxel_count").get<std::size_t>();
      out.push_back(std::move(b));
    }
    return out;
  });
}

/// Binary PGM, one byte per cell, 0 free to 255 blocked. The first image row
/// is the costmap's highest y row.
inline std::string format_costmap_pgm(const Costmap& m) {
  std::string s = "P5\n" + std::to_string(m.width()) + " " + std::to_string(m.height()) + "\n255\n";
  for (int y = m.height() - 1; y >= 0; --y)
    for (int x = 0; x < m.width(); ++x) s += static_cast<char>(m.at({x, y}));
  return s;
}

inline Json costmap_meta_json(const Costmap& m) {
  Json j;
  j["frame"] = frame_header();
  j["cell_size"] = m.cell_size();
  j["origin"] = {m.origin().x(), m.origin().y()};
  j["width"] = m.width();
  j["height"] = m.height();
  j["image_rows"] = "first row is the highest y";
  return j;
}

inline Costmap parse_costmap(const std::string& pgm, const std::string& meta_text) {
  const Json meta = detail::parse_json(meta_text, "costmap metadata");
  Costmap m = detail::typed("costmap metadata", [&] {
    return Costmap(meta.at("cell_size").get<double>(), detail::vec2(meta.at("origin")), meta.at("width").get<int>(),
                   meta.at("height").get<int>());
  });
  std::istringstream in(pgm);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  if (!in || magic != "P5" || maxv != 255) throw ParseError("not an 8-bit binary PGM", 1);
  in.get();
  if (w != m.width() || h != m.height()) throw ParseError("PGM size does not match metadata", 2);
  const auto start = static_cast<std::size_t>(in.tellg());
  if (pgm.size() - start != static_cast<std::size_t>(w) * static_cast<std::size_t>(h))
    throw ParseError("PGM pixel data has the wrong length", 4);
  for (int r = 0; r < h; ++r)
    for (int x = 0; x < w; ++x)
      m.set({x, h - 1 - r}, static_cast<std::uint8_t>(pgm[start + static_cast<std::size_t>(r) * w + x]));
  return m;
}

inline Json plan_json(const NavPlan& p) {
  Json j;
  j["frame"] = frame_header();
  Json wp = Json::array();
  for (const auto& w : p.waypoints) wp.push_back({w.x(), w.y()});
  j["waypoints"] = std::move(wp);
  j["total_length"] = p.total_length;
  j["cost"] = p.cost.value() / 254.0;
  j["instructions"] = p.instructions;
  Json warn = Json::array();
  for (const auto& n : p.nearby_obstacles) {
    Json o = obstacle_json(n.box);
    o["lateral_offset"] = n.lateral_offset;
    warn.push_back(std::move(o));
  }
  j["warnings"] = std::move(warn);
  return j;
}

inline Scenario parse_scenario_json(const std::string& text) {
  const Json j = detail::parse_json(text, "scenario");
  return detail::typed("scenario", [&] {
    Scenario sc;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "corridor") {
      detail::only_keys(j, {"kind", "length", "cadence", "stance_fraction", "stride", "lift", "lead_in", "lead_out"},
                        "scenario");
      Corridor c;
      c.length = j.value("length", c.length);
      sc.kind = c;
    } else if (kind == "spiral_staircase") {
      detail::only_keys(j, {"kind", "radius", "step_rise", "steps_per_turn", "n_steps", "cadence", "stance_fraction",
                            "stride", "lift", "lead_in", "lead_out"},
                        "scenario");
      SpiralStaircase s;
      s.radius = j.value("radius", s.radius);
      s.step_rise = j.value("step_rise", s.step_rise);
      s.steps_per_turn = j.value("steps_per_turn", s.steps_per_turn);
      s.n_steps = j.value("n_steps", s.n_steps);
      sc.kind = s;
    } else if (kind == "waypoint_walk") {
      detail::only_keys(j, {"kind", "points", "cadence", "stance_fraction", "stride", "lift", "lead_in", "lead_out"},
                        "scenario");
      WaypointWalk w;
      for (const auto& p : j.at("points")) w.points.push_back(detail::vec3(p));
      sc.kind = w;
    } else {
      throw ValidationError("unknown scenario kind '" + kind + "'");
    }
    sc.cadence = j.value("cadence", sc.cadence);
    sc.stance_fraction = j.value("stance_fraction", sc.stance_fraction);
    sc.stride = j.value("stride", sc.stride);
    sc.lift = j.value("lift", sc.lift);
    sc.lead_in = j.value("lead_in", sc.lead_in);
    sc.lead_out = j.value("lead_out", sc.lead_out);
    sc.validate();
    return sc;
  });
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace navcore::io
