#pragma once

// 2D traversability costmap from a voxel map, A* planning on it, and spoken
// style instructions with obstacle height warnings.

#include "navcore/voxelmap.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <queue>
#include <set>

namespace navcore {

class NoPath : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No obstacle carries the requested label; `labels()` lists those present.
class NotFound : public std::runtime_error {
 public:
  NotFound(const std::string& query, std::vector<std::string> labels)
      : std::runtime_error(message(query, labels)), labels_(std::move(labels)) {}
  const std::vector<std::string>& labels() const noexcept { return labels_; }

 private:
  static std::string message(const std::string& query, const std::vector<std::string>& labels) {
    std::string m = "no obstacle labelled '" + query + "'; available:";
    if (labels.empty()) m += " (none)";
    for (const auto& l : labels) m += " " + l;
    return m;
  }
  std::vector<std::string> labels_;
};

struct Cell {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Row-major grid of costs: 0 free, 1..254 inflated, 255 blocked.
class Costmap {
 public:
  static constexpr std::uint8_t kFree = 0;
  static constexpr std::uint8_t kBlocked = 255;

  Costmap(double cell_size, Vec2 origin, int width, int height)
      : cell_size_(cell_size), origin_(std::move(origin)), width_(width), height_(height) {
    require(finite(cell_size) && cell_size > 0.0, "cell_size must be positive");
    require(origin_.allFinite(), "costmap origin must be finite");
    require(width > 0 && height > 0, "costmap dimensions must be positive");
    cost_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), kFree);
  }

  double cell_size() const { return cell_size_; }
  const Vec2& origin() const { return origin_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<std::uint8_t>& data() const { return cost_; }

  bool in_bounds(const Cell& c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }

  std::uint8_t at(const Cell& c) const { return cost_[index(c)]; }
  void set(const Cell& c, std::uint8_t v) { cost_[index(c)] = v; }
  bool blocked(const Cell& c) const { return at(c) == kBlocked; }

  std::size_t index(const Cell& c) const {
    require(in_bounds(c), "cell outside costmap");
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c.x);
  }

  /// Cell containing `p`; nullopt outside the map.
  std::optional<Cell> cell_of(const Vec2& p) const {
    if (!p.allFinite()) return std::nullopt;
    const Vec2 r = (p - origin_) / cell_size_;
    const double fx = std::floor(r.x()), fy = std::floor(r.y());
    if (fx < 0 || fy < 0 || fx >= width_ || fy >= height_) return std::nullopt;
    return Cell{static_cast<int>(fx), static_cast<int>(fy)};
  }

  Vec2 center(const Cell& c) const { return origin_ + cell_size_ * Vec2(c.x + 0.5, c.y + 0.5); }

  friend bool operator==(const Costmap&, const Costmap&) = default;

 private:
  double cell_size_;
  Vec2 origin_;
  int width_;
  int height_;
  std::vector<std::uint8_t> cost_;
};

namespace detail {

/// One-dimensional squared distance transform (Felzenszwalb and Huttenlocher).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                   std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; ++q) {
    if (f[q] == inf) continue;
    if (f[v[k]] == inf) {
      v[k] = q;
      continue;
    }
    double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]));
    while (s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]));
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = f[v[k]] == inf ? inf : dq * dq + f[v[k]];
  }
}

}  // namespace detail

/// Squared distance, in cells, from every cell centre to the nearest blocked
/// cell centre. Infinite when nothing is blocked.
inline std::vector<double> squared_distance_to_blocked(const Costmap& map) {
  const int w = map.width(), h = map.height();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> g(map.data().size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = map.data()[i] == Costmap::kBlocked ? 0.0 : inf;
  const int n = std::max(w, h);
  std::vector<double> f, d;
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  f.resize(static_cast<std::size_t>(h));
  d.resize(static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = g[static_cast<std::size_t>(y) * w + x];
    detail::edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) g[static_cast<std::size_t>(y) * w + x] = d[y];
  }
  f.resize(static_cast<std::size_t>(w));
  d.resize(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = g[static_cast<std::size_t>(y) * w + x];
    detail::edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) g[static_cast<std::size_t>(y) * w + x] = d[x];
  }
  return g;
}

/// Inflated cost for a cell at distance `d` from the nearest blocked cell.
/// Zero (free) once d >= radius.
inline std::uint8_t inflation_cost(double d, double radius) {
  if (!(d < radius) || d <= 0.0) return Costmap::kFree;
  return static_cast<std::uint8_t>(1 + static_cast<int>(std::floor(253.0 * (1.0 - d / radius))));
}

/// Marks non-blocked cells within `radius` metres of a blocked cell centre.
inline void inflate(Costmap& map, double radius) {
  require(finite(radius) && radius >= 0.0, "inflation radius must be non-negative");
  if (radius == 0.0) return;
  const auto d2 = squared_distance_to_blocked(map);
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x) {
      const Cell c{x, y};
      if (map.blocked(c)) continue;
      const double d = std::sqrt(d2[map.index(c)]) * map.cell_size();
      map.set(c, inflation_cost(d, radius));
    }
}

struct ProjectionParams {
  double agent_height = 1.8;
  double agent_radius = 0.3;
  /// Anything lower than this is floor texture, not an obstacle.
  double step_clearance = 0.15;

  void validate() const {
    require(finite(agent_height) && finite(step_clearance) && step_clearance >= 0.0 &&
                agent_height > step_clearance,
            "need agent_height > step_clearance >= 0");
    require(finite(agent_radius) && agent_radius >= 0.0, "agent_radius must be non-negative");
  }
};

struct MapBounds {
  Vec2 min = Vec2::Zero();
  Vec2 max = Vec2::Zero();
};

/// Projects occupied voxels that intersect the swept body interval
/// (step_clearance, agent_height) onto the floor and inflates by agent_radius.
/// Cells share the voxel size and are aligned with the voxel lattice. Without
/// `bounds` the map covers the occupied columns plus the inflation margin.
inline Costmap project_occupancy(const SparseVoxelGrid& grid, const ProjectionParams& p,
                                 const std::optional<MapBounds>& bounds = std::nullopt) {
  p.validate();
  const double s = grid.voxel_size();
  const Vec2 g0 = grid.origin().head<2>();
  long kx0 = 0, ky0 = 0, kx1 = 0, ky1 = 0;
  if (bounds) {
    require(bounds->min.allFinite() && bounds->max.allFinite() && (bounds->max.array() > bounds->min.array()).all(),
            "map bounds must be finite with max > min");
    kx0 = static_cast<long>(std::floor((bounds->min.x() - g0.x()) / s));
    ky0 = static_cast<long>(std::floor((bounds->min.y() - g0.y()) / s));
    kx1 = static_cast<long>(std::ceil((bounds->max.x() - g0.x()) / s));
    ky1 = static_cast<long>(std::ceil((bounds->max.y() - g0.y()) / s));
  } else if (grid.empty()) {
    kx1 = ky1 = 1;
  } else {
    kx0 = ky0 = std::numeric_limits<long>::max();
    kx1 = ky1 = std::numeric_limits<long>::min();
    for (const auto& k : grid.sorted_keys()) {
      kx0 = std::min<long>(kx0, k.x);
      ky0 = std::min<long>(ky0, k.y);
      kx1 = std::max<long>(kx1, k.x + 1);
      ky1 = std::max<long>(ky1, k.y + 1);
    }
    const long margin = static_cast<long>(std::ceil(p.agent_radius / s)) + 1;
    kx0 -= margin;
    ky0 -= margin;
    kx1 += margin;
    ky1 += margin;
  }
  Costmap map(s, g0 + s * Vec2(static_cast<double>(kx0), static_cast<double>(ky0)), static_cast<int>(kx1 - kx0),
              static_cast<int>(ky1 - ky0));
  // Voxels that only touch the interval ends, up to rounding, do not count.
  const double eps = 1e-9 * s;
  for (const auto& k : grid.sorted_keys()) {
    const double z0 = grid.cell_min(k).z();
    if (!(z0 < p.agent_height - eps && z0 + s > p.step_clearance + eps)) continue;
    const Cell c{static_cast<int>(k.x - kx0), static_cast<int>(k.y - ky0)};
    if (map.in_bounds(c)) map.set(c, Costmap::kBlocked);
  }
  inflate(map, p.agent_radius);
  return map;
}

/// Exact path cost a + b*sqrt(2), in units of 1/254 cell.
struct PathCost {
  std::int64_t a = 0;
  std::int64_t b = 0;

  double value() const { return static_cast<double>(a) + static_cast<double>(b) * std::sqrt(2.0); }
  PathCost operator+(const PathCost& o) const { return {a + o.a, b + o.b}; }
  bool operator==(const PathCost&) const = default;

  friend std::strong_ordering operator<=>(const PathCost& x, const PathCost& y) {
    const std::int64_t da = x.a - y.a, db = x.b - y.b;
    if (da == 0 && db == 0) return std::strong_ordering::equal;
    if (da >= 0 && db >= 0) return std::strong_ordering::greater;
    if (da <= 0 && db <= 0) return std::strong_ordering::less;
    // Opposite signs: compare |da| against |db| sqrt(2) by squaring.
    const __int128 l = static_cast<__int128>(da) * da;
    const __int128 r = 2 * static_cast<__int128>(db) * db;
    const bool positive = da > 0 ? l > r : r > l;
    return positive ? std::strong_ordering::greater : std::strong_ordering::less;
  }
};

/// Cost of stepping into a cell of cost `c`: step length times (1 + c/254).
inline PathCost step_cost(bool diagonal, std::uint8_t c) {
  const std::int64_t w = 254 + c;
  return diagonal ? PathCost{0, w} : PathCost{w, 0};
}

struct PlannerOptions {
  /// Cells at or above this cost are not entered. The default keeps paths in
  /// free space, at least agent_radius from obstacles; 255 allows crossing the
  /// inflated band at a penalty.
  int lethal_cost = 1;

  void validate() const { require(lethal_cost >= 1 && lethal_cost <= 255, "lethal_cost must be in [1,255]"); }
};

struct NearbyObstacle {
  ObstacleBox box;
  /// Signed distance from the nearest leg, positive to the left.
  double lateral_offset = 0.0;
};

struct NavPlan {
  std::vector<Vec2> waypoints;
  double total_length = 0.0;
  std::vector<std::string> instructions;
  std::vector<NearbyObstacle> nearby_obstacles;
  std::vector<Cell> cells;
  PathCost cost;
  double cell_size = 0.0;
};

inline double polyline_length(const std::vector<Vec2>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

/// Every cell whose closed square touches the segment a-b.
inline std::vector<Cell> cells_touching(const Costmap& map, const Vec2& a, const Vec2& b) {
  const double s = map.cell_size();
  const double eps = 1e-9;
  const Vec2 ra = (a - map.origin()) / s, rb = (b - map.origin()) / s;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ra.x(), rb.x()) - eps)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ra.y(), rb.y()) - eps)));
  const int x1 = std::min(map.width() - 1, static_cast<int>(std::floor(std::max(ra.x(), rb.x()) + eps)));
  const int y1 = std::min(map.height() - 1, static_cast<int>(std::floor(std::max(ra.y(), rb.y()) + eps)));
  std::vector<Cell> out;
  const Vec2 d = rb - ra;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      // Liang-Barsky clip against the slightly grown square.
      double t0 = 0.0, t1 = 1.0;
      bool hit = true;
      for (int ax = 0; ax < 2 && hit; ++ax) {
        const double lo = (ax == 0 ? x : y) - eps, hi = (ax == 0 ? x : y) + 1 + eps;
        if (d[ax] == 0.0) {
          hit = ra[ax] >= lo && ra[ax] <= hi;
          continue;
        }
        double ta = (lo - ra[ax]) / d[ax], tb = (hi - ra[ax]) / d[ax];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        hit = t0 <= t1;
      }
      if (hit) out.push_back({x, y});
    }
  return out;
}

namespace detail {

inline bool traversable(const Costmap& map, const Cell& c, int lethal) {
  return map.in_bounds(c) && map.at(c) < lethal;
}

inline bool segment_clear(const Costmap& map, const Vec2& a, const Vec2& b, int lethal,
                          const std::set<Cell>& exempt) {
  for (const Cell& c : cells_touching(map, a, b))
    if (map.blocked(c) || (!traversable(map, c, lethal) && !exempt.count(c))) return false;
  return true;
}

inline constexpr std::array<std::array<int, 2>, 8> kMoves{
    {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};

}  // namespace detail

/// Optimal 8-connected grid path between the cells of `start` and `goal`.
/// Diagonal moves may not cut a corner of an untraversable cell. The endpoint
/// cells themselves may lie in the inflated band but not in a blocked cell.
inline NavPlan plan_path(const Costmap& map, const Vec2& start, const Vec2& goal, const PlannerOptions& opt = {}) {
  opt.validate();
  const auto sc = map.cell_of(start);
  const auto gc = map.cell_of(goal);
  require(sc.has_value(), "start is outside the map");
  require(gc.has_value(), "goal is outside the map");
  require(!map.blocked(*sc), "start lies in a blocked cell");
  require(!map.blocked(*gc), "goal lies in a blocked cell");

  const std::set<Cell> exempt{*sc, *gc};
  auto passable = [&](const Cell& c) {
    return map.in_bounds(c) && !map.blocked(c) && (map.at(c) < opt.lethal_cost || exempt.count(c));
  };
  auto heuristic = [&](const Cell& c) {
    const std::int64_t dx = std::abs(c.x - gc->x), dy = std::abs(c.y - gc->y);
    const std::int64_t lo = std::min(dx, dy), hi = std::max(dx, dy);
    return PathCost{254 * (hi - lo), 254 * lo};
  };

  const std::size_t n = map.data().size();
  std::vector<PathCost> g(n);
  std::vector<char> seen(n, 0), closed(n, 0);
  std::vector<std::size_t> parent(n, n);
  struct Entry {
    PathCost f;
    Cell c;
  };
  auto later = [](const Entry& x, const Entry& y) {
    if (x.f != y.f) return x.f > y.f;
    return x.c > y.c;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(later)> open(later);
  const std::size_t si = map.index(*sc), gi = map.index(*gc);
  seen[si] = 1;
  open.push({heuristic(*sc), *sc});
  while (!open.empty()) {
    const Entry e = open.top();
    open.pop();
    const std::size_t ei = map.index(e.c);
    if (closed[ei]) continue;
    closed[ei] = 1;
    if (ei == gi) break;
    for (const auto& m : detail::kMoves) {
      const Cell nc{e.c.x + m[0], e.c.y + m[1]};
      if (!passable(nc)) continue;
      const bool diag = m[0] != 0 && m[1] != 0;
      if (diag && !(passable({e.c.x + m[0], e.c.y}) && passable({e.c.x, e.c.y + m[1]}))) continue;
      const std::size_t ni = map.index(nc);
      if (closed[ni]) continue;
      const PathCost cand = g[ei] + step_cost(diag, map.at(nc));
      if (seen[ni] && !(cand < g[ni])) continue;
      seen[ni] = 1;
      g[ni] = cand;
      parent[ni] = ei;
      open.push({cand + heuristic(nc), nc});
    }
  }
  if (!closed[gi]) throw NoPath("goal is unreachable from start");

  NavPlan plan;
  plan.cell_size = map.cell_size();
  plan.cost = g[gi];
  for (std::size_t i = gi;; i = parent[i]) {
    plan.cells.push_back({static_cast<int>(i % static_cast<std::size_t>(map.width())),
                          static_cast<int>(i / static_cast<std::size_t>(map.width()))});
    if (i == si) break;
  }
  std::reverse(plan.cells.begin(), plan.cells.end());

  // Corners of the cell path, then the exact endpoints. The endpoint cell
  // centres are kept only where the direct segment would clip a bad cell.
  std::vector<Vec2> corners;
  for (std::size_t i = 1; i + 1 < plan.cells.size(); ++i) {
    const Cell& p = plan.cells[i - 1];
    const Cell& c = plan.cells[i];
    const Cell& q = plan.cells[i + 1];
    if (c.x - p.x != q.x - c.x || c.y - p.y != q.y - c.y) corners.push_back(map.center(c));
  }
  const Vec2 first = corners.empty() ? goal : corners.front();
  std::vector<Vec2> wp{start};
  if (plan.cells.size() > 1 && !detail::segment_clear(map, start, first, opt.lethal_cost, exempt))
    wp.push_back(map.center(plan.cells.front()));
  wp.insert(wp.end(), corners.begin(), corners.end());
  if (plan.cells.size() > 1 && !detail::segment_clear(map, wp.back(), goal, opt.lethal_cost, exempt))
    wp.push_back(map.center(plan.cells.back()));
  wp.push_back(goal);
  // Skip ahead to the farthest waypoint in clear line of sight.
  std::vector<Vec2> pulled{wp.front()};
  for (std::size_t i = 0; i + 1 < wp.size();) {
    std::size_t j = wp.size() - 1;
    while (j > i + 1 && !detail::segment_clear(map, wp[i], wp[j], opt.lethal_cost, exempt)) --j;
    pulled.push_back(wp[j]);
    i = j;
  }
  // Drop exact duplicates, e.g. start == goal.
  plan.waypoints.push_back(pulled.front());
  for (std::size_t i = 1; i < pulled.size(); ++i)
    if (pulled[i] != plan.waypoints.back()) plan.waypoints.push_back(pulled[i]);
  plan.total_length = polyline_length(plan.waypoints);
  return plan;
}

namespace detail {

/// Lateral extent [lo, hi] of the part of a box footprint beside segment a-b,
/// in the segment frame (positive left), plus the along-track start.
struct Beside {
  double lo, hi, along;
};

inline std::optional<Beside> footprint_beside(const Vec2& a, const Vec2& b, const ObstacleBox& box) {
  const double len = (b - a).norm();
  if (len <= 0.0) return std::nullopt;
  const Vec2 u = (b - a) / len;
  const Vec2 nrm(-u.y(), u.x());
  std::vector<Vec2> poly;  // (along, lateral)
  for (const Vec2& c : {Vec2(box.min.x(), box.min.y()), Vec2(box.max.x(), box.min.y()),
                        Vec2(box.max.x(), box.max.y()), Vec2(box.min.x(), box.max.y())})
    poly.emplace_back((c - a).dot(u), (c - a).dot(nrm));
  auto clip = [&poly](double bound, double sign) {
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2& p = poly[i];
      const Vec2& q = poly[(i + 1) % poly.size()];
      const double dp = sign * (bound - p.x()), dq = sign * (bound - q.x());
      if (dp >= 0) out.push_back(p);
      if ((dp >= 0) != (dq >= 0)) out.push_back(p + (q - p) * (dp / (dp - dq)));
    }
    poly = std::move(out);
  };
  clip(len, 1.0);   // along <= len
  clip(0.0, -1.0);  // along >= 0
  if (poly.empty()) return std::nullopt;
  Beside r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity()};
  for (const Vec2& p : poly) {
    r.lo = std::min(r.lo, p.y());
    r.hi = std::max(r.hi, p.y());
    r.along = std::min(r.along, p.x());
  }
  return r;
}

inline double signed_offset(const Beside& b) {
  if (b.lo <= 0.0 && b.hi >= 0.0) return 0.0;
  return b.lo > 0.0 ? b.lo : b.hi;
}

inline std::string format_meters(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", d);
  return buf;
}

}  // namespace detail

/// Signed lateral offset of `box` from segment a-b if it comes within `reach`.
/// A box whose footprint contains an end of the segment encloses the walker
/// (e.g. the bounding box of connected walls) and gives no offset.
inline std::optional<double> lateral_offset(const Vec2& a, const Vec2& b, const ObstacleBox& box, double reach) {
  auto inside = [&box](const Vec2& p) {
    return p.x() > box.min.x() && p.x() < box.max.x() && p.y() > box.min.y() && p.y() < box.max.y();
  };
  if (inside(a) || inside(b)) return std::nullopt;
  const auto bs = detail::footprint_beside(a, b, box);
  if (!bs) return std::nullopt;
  const double off = detail::signed_offset(*bs);
  if (std::abs(off) > reach) return std::nullopt;
  return off;
}

struct InstructionOptions {
  double turn_step_deg = 15.0;
  double distance_step = 0.1;
  double warn_distance = 1.0;
  /// Correction legs are added until the simulated walker is this close to
  /// the goal; zero means max(cell_size, distance_step).
  double tolerance = 0.0;
  int max_corrections = 8;
};

inline std::string warning_text(const ObstacleBox& box, double offset) {
  const char* side = offset > 0.0 ? "on your left" : (offset < 0.0 ? "on your right" : "ahead");
  return std::string("obstacle at ") + to_string(box.height_class) + " level " + side;
}

/// Turn-then-walk instructions for perfect execution starting at the first
/// waypoint with `heading`. Each turn aims at the next waypoint from where the
/// rounded instructions so far would leave the walker.
inline std::vector<std::string> generate_instructions(const NavPlan& plan, double heading,
                                                      const std::vector<ObstacleBox>& obstacles,
                                                      const InstructionOptions& opt = {}) {
  require(!plan.waypoints.empty(), "plan has no waypoints");
  require(finite(heading), "heading must be finite");
  require(opt.turn_step_deg > 0.0 && opt.distance_step > 0.0 && opt.warn_distance >= 0.0,
          "instruction steps must be positive");
  const double tol = opt.tolerance > 0.0 ? opt.tolerance : std::max(plan.cell_size, opt.distance_step);
  struct Entry {
    int turn = 0;  // degrees, left positive; zero for a walk
    double dist = 0.0;
    std::vector<std::string> warnings;
  };
  std::vector<Entry> entries;
  Vec2 pos = plan.waypoints.front();
  double h = heading;

  auto leg = [&](const Vec2& target, const Vec2* seg_a, const Vec2* seg_b) {
    const Vec2 d = target - pos;
    const double dist = std::round(d.norm() / opt.distance_step) * opt.distance_step;
    if (dist <= 0.0) return;
    const double turn_deg = wrap_angle(std::atan2(d.y(), d.x()) - h) * 180.0 / kPi;
    const int turn = static_cast<int>(std::lround(turn_deg / opt.turn_step_deg) * opt.turn_step_deg);
    if (turn != 0) entries.push_back({turn, 0.0, {}});
    h = wrap_angle(h + turn * kPi / 180.0);
    // A walk straight on from the previous one extends it.
    if (entries.empty() || entries.back().turn != 0) entries.push_back({});
    Entry& walk = entries.back();
    walk.dist += dist;
    if (seg_a) {
      std::vector<std::pair<double, std::size_t>> hits;
      std::vector<double> offsets(obstacles.size());
      for (std::size_t i = 0; i < obstacles.size(); ++i) {
        const auto off = lateral_offset(*seg_a, *seg_b, obstacles[i], opt.warn_distance);
        if (!off) continue;
        offsets[i] = *off;
        hits.emplace_back(detail::footprint_beside(*seg_a, *seg_b, obstacles[i])->along, i);
      }
      std::stable_sort(hits.begin(), hits.end());
      for (const auto& [along, i] : hits) {
        std::string w = warning_text(obstacles[i], offsets[i]);
        if (std::find(walk.warnings.begin(), walk.warnings.end(), w) == walk.warnings.end())
          walk.warnings.push_back(std::move(w));
      }
    }
    pos += dist * Vec2(std::cos(h), std::sin(h));
  };

  for (std::size_t k = 1; k < plan.waypoints.size(); ++k)
    leg(plan.waypoints[k], &plan.waypoints[k - 1], &plan.waypoints[k]);
  const Vec2& goal = plan.waypoints.back();
  for (int i = 0; i < opt.max_corrections && (goal - pos).norm() > tol; ++i) leg(goal, nullptr, nullptr);

  std::vector<std::string> out;
  for (const Entry& e : entries) {
    if (e.turn != 0) {
      out.push_back((e.turn > 0 ? "turn left " : "turn right ") + std::to_string(std::abs(e.turn)) + " degrees");
      continue;
    }
    std::string text = "walk forward " + detail::format_meters(e.dist) + " meters";
    for (const auto& w : e.warnings) text += ", " + w;
    out.push_back(std::move(text));
  }
  return out;
}

/// Final simulated position after perfect execution of `instructions`.
inline Vec2 execute_instructions(const std::vector<std::string>& instructions, Vec2 pos, double heading) {
  for (const auto& line : instructions) {
    double v = 0.0;
    if (std::sscanf(line.c_str(), "turn left %lf", &v) == 1) {
      heading += v * kPi / 180.0;
    } else if (std::sscanf(line.c_str(), "turn right %lf", &v) == 1) {
      heading -= v * kPi / 180.0;
    } else if (std::sscanf(line.c_str(), "walk forward %lf", &v) == 1) {
      pos += v * Vec2(std::cos(heading), std::sin(heading));
    } else {
      throw ValidationError("unrecognized instruction: " + line);
    }
  }
  return pos;
}

/// Obstacles within `reach` of any leg, with the offset from the closest leg.
inline std::vector<NearbyObstacle> nearby_obstacles(const NavPlan& plan, const std::vector<ObstacleBox>& obstacles,
                                                    double reach = 1.0) {
  std::vector<NearbyObstacle> out;
  for (const auto& box : obstacles) {
    std::optional<double> best;
    for (std::size_t k = 1; k < plan.waypoints.size(); ++k) {
      const auto off = lateral_offset(plan.waypoints[k - 1], plan.waypoints[k], box, reach);
      if (off && (!best || std::abs(*off) < std::abs(*best))) best = off;
    }
    if (best) out.push_back({box, *best});
  }
  return out;
}

/// Fills instructions and nearby obstacles.
inline NavPlan annotate_plan(NavPlan plan, double heading, const std::vector<ObstacleBox>& obstacles,
                             const InstructionOptions& opt = {}) {
  plan.instructions = generate_instructions(plan, heading, obstacles, opt);
  plan.nearby_obstacles = nearby_obstacles(plan, obstacles, opt.warn_distance);
  return plan;
}

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

/// Nearest labelled box by centre distance from `from`, case-insensitive.
inline const ObstacleBox& find_object(const std::vector<ObstacleBox>& obstacles, const std::string& label,
                                      const Vec2& from) {
  const std::string want = detail::lower(label);
  const ObstacleBox* best = nullptr;
  double best_d = 0.0;
  std::set<std::string> names;
  for (const auto& b : obstacles) {
    if (!b.label) continue;
    names.insert(*b.label);
    if (detail::lower(*b.label) != want) continue;
    const double d = (b.center().head<2>() - from).norm();
    const Vec3 c = b.center(), bc = best ? best->center() : Vec3::Zero();
    if (!best || d < best_d ||
        (d == best_d && std::tie(c.x(), c.y(), c.z()) < std::tie(bc.x(), bc.y(), bc.z()))) {
      best = &b;
      best_d = d;
    }
  }
  if (!best) throw NotFound(label, {names.begin(), names.end()});
  return *best;
}

}  // namespace navcore
