#pragma once

// Sparse voxel grids, submanifold sparse convolution, and geometric obstacle
// extraction by connected components.

#include "navcore/core.hpp"

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace navcore {

struct VoxelKey {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
  VoxelKey operator+(const VoxelKey& o) const { return {x + o.x, y + o.y, z + o.z}; }
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    // Large-prime spatial hash.
    const auto h = static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.x)) * 73856093ULL ^
                   static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.y)) * 19349663ULL ^
                   static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.z)) * 83492791ULL;
    return static_cast<std::size_t>(h * 0x9E3779B97F4A7C15ULL >> 16);
  }
};

using Features = std::vector<double>;
using LabelCounts = std::map<std::string, std::size_t>;

/// Hash-indexed sparse grid. Stored feature vectors are never all zero.
class SparseVoxelGrid {
 public:
  SparseVoxelGrid(double voxel_size, Vec3 origin, std::size_t channels)
      : voxel_size_(voxel_size), origin_(std::move(origin)), channels_(channels) {
    require(finite(voxel_size) && voxel_size > 0.0, "voxel_size must be positive");
    require(origin_.allFinite(), "grid origin must be finite");
    require(channels > 0, "channel count must be positive");
  }

  double voxel_size() const { return voxel_size_; }
  const Vec3& origin() const { return origin_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

  bool contains(const VoxelKey& k) const { return cells_.count(k) != 0; }

  const Features* find(const VoxelKey& k) const {
    const auto it = cells_.find(k);
    return it == cells_.end() ? nullptr : &it->second;
  }

  /// Stores `f` at `k`; an all-zero vector erases the cell instead.
  void set(const VoxelKey& k, Features f) {
    require(f.size() == channels_, "feature length must equal the channel count");
    if (std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; })) {
      cells_.erase(k);
      labels_.erase(k);
      return;
    }
    cells_[k] = std::move(f);
  }

  /// Per-cell label counts from an annotated cloud; only for stored cells.
  void add_labels(const VoxelKey& k, const LabelCounts& counts) {
    require(contains(k), "labels can only be attached to occupied cells");
    auto& dst = labels_[k];
    for (const auto& [name, n] : counts) dst[name] += n;
  }

  const LabelCounts* labels(const VoxelKey& k) const {
    const auto it = labels_.find(k);
    return it == labels_.end() ? nullptr : &it->second;
  }

  /// Keys in lexicographic order.
  std::vector<VoxelKey> sorted_keys() const {
    std::vector<VoxelKey> keys;
    keys.reserve(cells_.size());
    for (const auto& kv : cells_) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    return keys;
  }

  Vec3 cell_min(const VoxelKey& k) const {
    return origin_ + voxel_size_ * Vec3(k.x, k.y, k.z);
  }

  VoxelKey key_of(const Vec3& p) const {
    const Vec3 r = (p - origin_) / voxel_size_;
    return {static_cast<std::int32_t>(std::floor(r.x())), static_cast<std::int32_t>(std::floor(r.y())),
            static_cast<std::int32_t>(std::floor(r.z()))};
  }

  friend bool operator==(const SparseVoxelGrid& a, const SparseVoxelGrid& b) {
    return a.voxel_size_ == b.voxel_size_ && a.origin_ == b.origin_ && a.channels_ == b.channels_ &&
           a.cells_ == b.cells_ && a.labels_ == b.labels_;
  }

 private:
  double voxel_size_;
  Vec3 origin_;
  std::size_t channels_;
  std::unordered_map<VoxelKey, Features, VoxelKeyHash> cells_;
  std::unordered_map<VoxelKey, LabelCounts, VoxelKeyHash> labels_;
};

/// Default indoor resolution.
inline constexpr double kDefaultVoxelSize = 0.05;

/// Feature layout produced by voxelize: point count, then the mean offset of
/// the points from the cell's minimum corner.
inline constexpr std::size_t kVoxelFeatureChannels = 4;

/// Voxelizes a cloud. `labels`, when non-empty, must align with `points`;
/// empty strings mean "unlabeled". Points are sorted inside each cell before
/// averaging, so the result does not depend on input order.
inline SparseVoxelGrid voxelize(std::span<const Vec3> points, double voxel_size, const Vec3& origin,
                                std::span<const std::string> labels = {}) {
  SparseVoxelGrid grid(voxel_size, origin, kVoxelFeatureChannels);
  require(labels.empty() || labels.size() == points.size(), "labels must align with points");
  std::unordered_map<VoxelKey, std::vector<std::size_t>, VoxelKeyHash> members;
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(points[i].allFinite(), "point cloud contains non-finite coordinates");
    members[grid.key_of(points[i])].push_back(i);
  }
  for (auto& [key, idx] : members) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const Vec3& p = points[a];
      const Vec3& q = points[b];
      return std::tie(p.x(), p.y(), p.z()) < std::tie(q.x(), q.y(), q.z());
    });
    const Vec3 corner = grid.cell_min(key);
    Vec3 sum = Vec3::Zero();
    for (std::size_t i : idx) sum += points[i] - corner;
    const double n = static_cast<double>(idx.size());
    const Vec3 mean = sum / n;
    grid.set(key, {n, mean.x(), mean.y(), mean.z()});
    if (!labels.empty()) {
      LabelCounts counts;
      for (std::size_t i : idx)
        if (!labels[i].empty()) ++counts[labels[i]];
      if (!counts.empty()) grid.add_labels(key, counts);
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Sparse convolution

/// k x k x k kernel. Offsets are enumerated lexicographically over
/// (dx, dy, dz), each in [-(k-1)/2, (k-1)/2]; weights are laid out as
/// weights[(offset * c_in + ci) * c_out + co].
struct ConvKernel {
  int k = 1;
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t offsets() const { return static_cast<std::size_t>(k) * k * k; }

  void validate() const {
    require(k >= 1 && k % 2 == 1, "kernel size must be odd and positive");
    require(c_in > 0 && c_out > 0, "kernel channel counts must be positive");
    require(weights.size() == offsets() * c_in * c_out, "kernel weight count mismatch");
    require(bias.size() == c_out, "kernel bias length must equal c_out");
    for (double w : weights) require(finite(w), "kernel weights must be finite");
    for (double b : bias) require(finite(b), "kernel bias must be finite");
  }

  VoxelKey offset(std::size_t o) const {
    const int r = (k - 1) / 2;
    const int kk = k;
    const int oi = static_cast<int>(o);
    return {oi / (kk * kk) - r, (oi / kk) % kk - r, oi % kk - r};
  }

  double weight(std::size_t o, std::size_t ci, std::size_t co) const {
    return weights[(o * c_in + ci) * c_out + co];
  }

  static ConvKernel identity(std::size_t channels) {
    ConvKernel kr;
    kr.c_in = kr.c_out = channels;
    kr.weights.assign(channels * channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) kr.weights[c * channels + c] = 1.0;
    kr.bias.assign(channels, 0.0);
    return kr;
  }
};

struct ConvStats {
  /// Hash lookups performed; exactly active_sites * k^3.
  std::size_t gathers = 0;
};

/// Submanifold convolution: outputs only at input-active sites; inactive
/// neighbours contribute zero. An output that comes out exactly all-zero is
/// dropped to keep the grid canonical.
inline SparseVoxelGrid sparse_conv(const SparseVoxelGrid& grid, const ConvKernel& kernel,
                                   ConvStats* stats = nullptr) {
  kernel.validate();
  require(kernel.c_in == grid.channels(), "kernel input channels do not match the grid");
  SparseVoxelGrid out(grid.voxel_size(), grid.origin(), kernel.c_out);
  std::vector<VoxelKey> offs(kernel.offsets());
  for (std::size_t o = 0; o < offs.size(); ++o) offs[o] = kernel.offset(o);
  std::size_t gathers = 0;
  for (const VoxelKey& key : grid.sorted_keys()) {
    Features acc(kernel.bias);
    for (std::size_t o = 0; o < offs.size(); ++o) {
      ++gathers;
      const Features* in = grid.find(key + offs[o]);
      if (!in) continue;
      for (std::size_t ci = 0; ci < kernel.c_in; ++ci) {
        const double x = (*in)[ci];
        if (x == 0.0) continue;
        for (std::size_t co = 0; co < kernel.c_out; ++co) acc[co] += kernel.weight(o, ci, co) * x;
      }
    }
    out.set(key, std::move(acc));
    if (const LabelCounts* l = grid.labels(key); l && out.contains(key)) out.add_labels(key, *l);
  }
  if (stats) stats->gathers += gathers;
  return out;
}

// ---------------------------------------------------------------------------
// Obstacles

enum class HeightClass { ground, body, head };

inline const char* to_string(HeightClass h) {
  switch (h) {
    case HeightClass::ground: return "ground";
    case HeightClass::body: return "body";
    case HeightClass::head: return "head";
  }
  return "unknown";
}

inline std::optional<HeightClass> height_class_from_string(const std::string& s) {
  if (s == "ground") return HeightClass::ground;
  if (s == "body") return HeightClass::body;
  if (s == "head") return HeightClass::head;
  return std::nullopt;
}

struct HeightThresholds {
  double ground_max = 0.4;
  double body_max = 1.5;

  void validate() const {
    require(ground_max > 0.0 && ground_max < body_max && finite(body_max),
            "height thresholds must satisfy 0 < ground_max < body_max");
  }
};

struct ObstacleBox {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  HeightClass height_class = HeightClass::ground;
  std::optional<std::string> label;
  std::size_t voxel_count = 1;

  Vec3 center() const { return 0.5 * (min + max); }
  friend bool operator==(const ObstacleBox&, const ObstacleBox&) = default;
};

/// Classifies by the height of the box's top face.
inline HeightClass classify_height(const ObstacleBox& box, const HeightThresholds& th = {}) {
  th.validate();
  const double top = box.max.z();
  if (top <= th.ground_max) return HeightClass::ground;
  if (top <= th.body_max) return HeightClass::body;
  return HeightClass::head;
}

namespace detail {

inline std::vector<VoxelKey> neighbor_offsets(int connectivity) {
  require(connectivity == 6 || connectivity == 26, "connectivity must be 6 or 26");
  std::vector<VoxelKey> out;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0) continue;
        if (connectivity == 6 && manhattan != 1) continue;
        out.push_back({dx, dy, dz});
      }
  return out;
}

}  // namespace detail

/// Component id per occupied voxel. Ids are assigned in lexicographic order of
/// each component's smallest key.
inline std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> label_components(
    const SparseVoxelGrid& grid, int connectivity) {
  const auto offs = detail::neighbor_offsets(connectivity);
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> id;
  std::size_t next = 0;
  std::vector<VoxelKey> stack;
  for (const VoxelKey& seed : grid.sorted_keys()) {
    if (id.count(seed)) continue;
    id[seed] = next;
    stack.push_back(seed);
    while (!stack.empty()) {
      const VoxelKey k = stack.back();
      stack.pop_back();
      for (const auto& o : offs) {
        const VoxelKey n = k + o;
        if (grid.contains(n) && !id.count(n)) {
          id[n] = next;
          stack.push_back(n);
        }
      }
    }
    ++next;
  }
  return id;
}

/// Majority label over summed counts; ties go to the lexicographically first.
inline std::optional<std::string> majority_label(const LabelCounts& counts) {
  std::optional<std::string> best;
  std::size_t best_n = 0;
  for (const auto& [name, n] : counts) {  // std::map iterates in lexicographic order
    if (n > best_n) {
      best = name;
      best_n = n;
    }
  }
  return best;
}

/// Tight boxes around connected occupied voxels, sorted by min corner.
inline std::vector<ObstacleBox> connected_components(const SparseVoxelGrid& grid, int connectivity,
                                                     const HeightThresholds& th = {}) {
  th.validate();
  const auto id = label_components(grid, connectivity);
  std::size_t n = 0;
  for (const auto& kv : id) n = std::max(n, kv.second + 1);
  struct Acc {
    VoxelKey lo{INT32_MAX, INT32_MAX, INT32_MAX};
    VoxelKey hi{INT32_MIN, INT32_MIN, INT32_MIN};
    std::size_t count = 0;
    LabelCounts labels;
  };
  std::vector<Acc> acc(n);
  for (const VoxelKey& k : grid.sorted_keys()) {
    Acc& a = acc[id.at(k)];
    a.lo = {std::min(a.lo.x, k.x), std::min(a.lo.y, k.y), std::min(a.lo.z, k.z)};
    a.hi = {std::max(a.hi.x, k.x), std::max(a.hi.y, k.y), std::max(a.hi.z, k.z)};
    ++a.count;
    if (const LabelCounts* l = grid.labels(k))
      for (const auto& [name, c] : *l) a.labels[name] += c;
  }
  std::vector<ObstacleBox> boxes;
  boxes.reserve(n);
  for (const Acc& a : acc) {
    ObstacleBox b;
    b.min = grid.cell_min(a.lo);
    b.max = grid.cell_min(a.hi + VoxelKey{1, 1, 1});
    b.voxel_count = a.count;
    b.label = majority_label(a.labels);
    b.height_class = classify_height(b, th);
    boxes.push_back(std::move(b));
  }
  std::stable_sort(boxes.begin(), boxes.end(), [](const ObstacleBox& a, const ObstacleBox& b) {
    return std::tie(a.min.x(), a.min.y(), a.min.z(), a.max.x(), a.max.y(), a.max.z()) <
           std::tie(b.min.x(), b.min.y(), b.min.z(), b.max.x(), b.max.y(), b.max.z());
  });
  return boxes;
}

}  // namespace navcore
