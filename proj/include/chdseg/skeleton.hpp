#pragma once

// Curve skeletons by topology-preserving 3D thinning.
//
// Border voxels are peeled in six directional sub-iterations (N, S, E, W, U,
// D). A voxel is removed only when it is simple for (26, 6) connectivity and
// is not a curve end. Candidates of a sub-iteration
// are re-checked one by one in raster order, so the result is deterministic
// and never changes the number of components, cavities or tunnels.

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "chdseg/volume.hpp"

namespace chdseg {

struct Skeleton {
  Dims dims;
  VoxelSpacing spacing;
  Vec3 origin;
  std::vector<Index3> voxels;     // raster order
  std::vector<double> radius_mm;  // distance-transform value per voxel

  Mask to_mask() const {
    Mask m(dims, spacing, origin);
    for (const auto& p : voxels) m(p) = 1;
    return m;
  }
  Vec3 world(const Index3& p) const {
    return {origin.x + p.x * spacing.dx, origin.y + p.y * spacing.dy, origin.z + p.z * spacing.dz};
  }
};

namespace detail {

// Neighbourhood positions are numbered (dx+1) + 3(dy+1) + 9(dz+1); 13 is the centre.
struct SimplePointTables {
  std::array<std::vector<int>, 27> adj26;  // 26-adjacency among the 26 neighbours
  std::array<std::vector<int>, 27> adj6;   // 6-adjacency among the 18 neighbours
  std::array<bool, 27> in18{};
  std::array<int, 6> face{};

  SimplePointTables() {
    auto off = [](int i) { return std::array<int, 3>{i % 3 - 1, (i / 3) % 3 - 1, i / 9 - 1}; };
    int nf = 0;
    for (int i = 0; i < 27; ++i) {
      const auto a = off(i);
      const int l1 = std::abs(a[0]) + std::abs(a[1]) + std::abs(a[2]);
      in18[static_cast<std::size_t>(i)] = i != 13 && l1 <= 2;
      if (l1 == 1) face[static_cast<std::size_t>(nf++)] = i;
    }
    for (int i = 0; i < 27; ++i) {
      if (i == 13) continue;
      for (int j = 0; j < 27; ++j) {
        if (j == 13 || j == i) continue;
        const auto a = off(i), b = off(j);
        const int dx = std::abs(a[0] - b[0]), dy = std::abs(a[1] - b[1]), dz = std::abs(a[2] - b[2]);
        if (std::max({dx, dy, dz}) == 1) adj26[static_cast<std::size_t>(i)].push_back(j);
        if (dx + dy + dz == 1 && in18[static_cast<std::size_t>(i)] && in18[static_cast<std::size_t>(j)])
          adj6[static_cast<std::size_t>(i)].push_back(j);
      }
    }
  }
};

inline const SimplePointTables& simple_tables() {
  static const SimplePointTables t;
  return t;
}

/// `nb[i]` is true for object voxels; the centre entry is ignored.
inline bool is_simple(const std::array<bool, 27>& nb) {
  const auto& t = simple_tables();
  std::array<int, 27> seen{};
  std::array<int, 27> stack{};

  // foreground: exactly one 26-component among the 26 neighbours
  int fg = 0;
  for (int s = 0; s < 27; ++s) {
    if (s == 13 || !nb[static_cast<std::size_t>(s)] || seen[static_cast<std::size_t>(s)]) continue;
    if (++fg > 1) return false;
    int top = 0;
    stack[static_cast<std::size_t>(top++)] = s;
    seen[static_cast<std::size_t>(s)] = 1;
    while (top) {
      const int c = stack[static_cast<std::size_t>(--top)];
      for (int n : t.adj26[static_cast<std::size_t>(c)])
        if (nb[static_cast<std::size_t>(n)] && !seen[static_cast<std::size_t>(n)]) {
          seen[static_cast<std::size_t>(n)] = 1;
          stack[static_cast<std::size_t>(top++)] = n;
        }
    }
  }
  if (fg != 1) return false;

  // background: exactly one 6-component in N18 touching a face neighbour
  seen.fill(0);
  int bg = 0;
  for (int s : t.face) {
    if (nb[static_cast<std::size_t>(s)] || seen[static_cast<std::size_t>(s)]) continue;
    if (++bg > 1) return false;
    int top = 0;
    stack[static_cast<std::size_t>(top++)] = s;
    seen[static_cast<std::size_t>(s)] = 1;
    while (top) {
      const int c = stack[static_cast<std::size_t>(--top)];
      for (int n : t.adj6[static_cast<std::size_t>(c)])
        if (!nb[static_cast<std::size_t>(n)] && !seen[static_cast<std::size_t>(n)]) {
          seen[static_cast<std::size_t>(n)] = 1;
          stack[static_cast<std::size_t>(top++)] = n;
        }
    }
  }
  return bg == 1;
}

inline std::array<bool, 27> neighborhood(const Mask& m, const Index3& p) {
  std::array<bool, 27> nb{};
  for (int i = 0; i < 27; ++i) {
    const Index3 q{p.x + i % 3 - 1, p.y + (i / 3) % 3 - 1, p.z + i / 9 - 1};
    nb[static_cast<std::size_t>(i)] = m.contains(q) && m(q) != 0;
  }
  return nb;
}

inline int count26(const std::array<bool, 27>& nb) {
  int n = 0;
  for (int i = 0; i < 27; ++i)
    if (i != 13 && nb[static_cast<std::size_t>(i)]) ++n;
  return n;
}

/// Curve end: one neighbour, or the tip of a staircase line (two touching
/// neighbours, not both face-adjacent). A staircase tip would otherwise be
/// eaten one voxel per pass before its redundant corner gets removed.
inline bool is_curve_end(const std::array<bool, 27>& nb) {
  int first = -1, second = -1, n = 0;
  for (int i = 0; i < 27; ++i) {
    if (i == 13 || !nb[static_cast<std::size_t>(i)]) continue;
    if (++n > 2) return false;
    (first < 0 ? first : second) = i;
  }
  if (n <= 1) return true;
  const auto& t = simple_tables();
  const auto& adj = t.adj26[static_cast<std::size_t>(first)];
  if (std::find(adj.begin(), adj.end(), second) == adj.end()) return false;
  auto is_face = [&](int i) { return std::find(t.face.begin(), t.face.end(), i) != t.face.end(); };
  return !(is_face(first) && is_face(second));
}

}  // namespace detail

/// Thins `mask` to a curve skeleton. Radii are exact Euclidean distances (mm)
/// from each skeleton voxel to the nearest background voxel.
inline Skeleton skeletonize(const Mask& mask) {
  Mask work = Mask::like(mask);
  std::vector<std::size_t> alive;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) {
      work[i] = 1;
      alive.push_back(i);
    }
  if (alive.empty()) throw Error("skeletonize: empty mask");

  static constexpr std::array<Index3, 6> kDirections = {
      {{0, -1, 0}, {0, 1, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 0, 1}, {0, 0, -1}}};

  std::vector<std::size_t> candidates;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& dir : kDirections) {
      candidates.clear();
      for (auto i : alive) {
        const auto p = work.coord(i);
        const Index3 q{p.x + dir.x, p.y + dir.y, p.z + dir.z};
        if (work.contains(q) && work(q)) continue;  // not a border voxel in this direction
        const auto nb = detail::neighborhood(work, p);
        if (!detail::is_curve_end(nb) && detail::is_simple(nb)) candidates.push_back(i);
      }
      for (auto i : candidates) {
        const auto nb = detail::neighborhood(work, work.coord(i));
        if (!detail::is_curve_end(nb) && detail::is_simple(nb)) {
          work[i] = 0;
          changed = true;
        }
      }
      if (!candidates.empty())
        alive.erase(std::remove_if(alive.begin(), alive.end(), [&](std::size_t i) { return !work[i]; }),
                    alive.end());
    }
  }

  const auto dist = distance_to_background(mask, true);
  Skeleton s{mask.dims(), mask.spacing(), mask.origin(), {}, {}};
  for (auto i : alive) {
    s.voxels.push_back(mask.coord(i));
    s.radius_mm.push_back(dist[i]);
  }
  return s;
}

}  // namespace chdseg
