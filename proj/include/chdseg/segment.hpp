#pragma once

// Classical stand-ins for the learned stages: RoI cropping, blood pool with
// a boundary class, and chamber refinement against the pool.

#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "chdseg/volume.hpp"

namespace chdseg {

struct SegmentParams {
  double threshold = 150.0;          // pool intensity threshold
  double boundary_mm = 1.0;          // PoolBoundary thickness
  double roi_margin_mm = 10.0;
  double min_component_mm3 = 500.0;  // smaller pool components are dropped
  // refinement
  double flood_cap_mm = 5.0;
  double guard_core_mm = 1.5;
  double guard_mm = 3.5;
  double thin_layer_mm = 2.0;

  void validate() const {
    if (!std::isfinite(threshold)) throw Error("SegmentParams: threshold must be finite");
    if (!(boundary_mm > 0) || !std::isfinite(boundary_mm)) throw Error("SegmentParams: boundary thickness must be > 0");
    if (!(roi_margin_mm >= 0) || !std::isfinite(roi_margin_mm)) throw Error("SegmentParams: RoI margin must be >= 0");
    if (!(min_component_mm3 >= 0)) throw Error("SegmentParams: minimum component volume must be >= 0");
    if (!(flood_cap_mm >= 0) || !(guard_core_mm >= 0) || !(guard_mm >= 0) || !(thin_layer_mm >= 0))
      throw Error("SegmentParams: refinement distances must be >= 0");
  }
};

inline constexpr Dims kRoiGrid{64, 64, 64};

struct RoiResult {
  BoundingBox box;
  IntensityVolume volume;
};

/// Downsamples to 64^3, thresholds, keeps the largest component and maps its
/// box back to full resolution grown by the margin.
inline RoiResult roi_crop(const IntensityVolume& intensity, const SegmentParams& params = {}) {
  params.validate();
  if (intensity.size() == 0) throw Error("roi_crop: empty volume");
  const auto low = resample(intensity, kRoiGrid);
  Mask m = Mask::like(low);
  for (std::size_t i = 0; i < low.size(); ++i) m[i] = low[i] > params.threshold ? 1 : 0;
  const auto cc = connected_components(m, Connectivity::TwentySix);
  if (cc.component_count() == 0) throw Error("empty RoI");
  Mask largest = Mask::like(m);
  for (std::size_t i = 0; i < m.size(); ++i) largest[i] = cc.ids[i] == 1 ? 1 : 0;
  BoundingBox lb;
  nonzero_bounds(largest, lb);

  const auto& d = intensity.dims();
  const auto& s = intensity.spacing();
  const double sp[3] = {s.dx, s.dy, s.dz};
  std::int64_t lo[3], hi[3];
  const std::int64_t lmin[3] = {lb.min.x, lb.min.y, lb.min.z}, lmax[3] = {lb.max.x, lb.max.y, lb.max.z};
  for (int a = 0; a < 3; ++a) {
    const double f = static_cast<double>(d[a]) / static_cast<double>(kRoiGrid[a]);
    const auto margin = static_cast<std::int64_t>(std::ceil(params.roi_margin_mm / sp[a] - 1e-9));
    lo[a] = static_cast<std::int64_t>(std::floor(static_cast<double>(lmin[a]) * f)) - margin;
    hi[a] = static_cast<std::int64_t>(std::ceil(static_cast<double>(lmax[a] + 1) * f)) - 1 + margin;
    lo[a] = std::clamp<std::int64_t>(lo[a], 0, d[a] - 1);
    hi[a] = std::clamp<std::int64_t>(hi[a], 0, d[a] - 1);
  }
  BoundingBox box{{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
  return {box, crop(intensity, box)};
}

namespace detail {

/// Erosion by an axis-aligned box; half-widths in voxels. Outside is background.
inline Mask box_erode(const Mask& m, const std::int64_t half[3]) {
  Mask cur = m;
  const auto& d = m.dims();
  for (int a = 0; a < 3; ++a) {
    if (half[a] == 0) continue;
    Mask next = Mask::like(m);
    const std::int64_t n = d[a];
    const std::int64_t stride = a == 0 ? 1 : (a == 1 ? d.nx : d.nx * d.ny);
    std::vector<std::int64_t> run(static_cast<std::size_t>(n));
    for (std::size_t start = 0; start < m.size(); ++start) {
      const auto c = m.coord(start);
      if ((a == 0 && c.x != 0) || (a == 1 && c.y != 0) || (a == 2 && c.z != 0)) continue;
      // prefix count of foreground along the line
      std::int64_t acc = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        acc += cur[start + static_cast<std::size_t>(i * stride)] ? 1 : 0;
        run[static_cast<std::size_t>(i)] = acc;
      }
      for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t l = i - half[a], h = i + half[a];
        if (l < 0 || h >= n) continue;
        const std::int64_t cnt = run[static_cast<std::size_t>(h)] - (l > 0 ? run[static_cast<std::size_t>(l - 1)] : 0);
        if (cnt == h - l + 1) next[start + static_cast<std::size_t>(i * stride)] = 1;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

/// Open voxels inside a run of open voxels no longer than `thickness_mm`
/// along some axis, closed at both ends with at least one chamber end.
/// 1 = chamber on one end, 2 = chambers on both ends.
inline Volume<std::uint8_t> thin_layer(const Mask& open, const LabelVolume& labels, double thickness_mm) {
  Volume<std::uint8_t> out = Volume<std::uint8_t>::like(open);
  const auto& s = open.spacing();
  const double sp[3] = {s.dx, s.dy, s.dz};
  for (std::size_t i = 0; i < open.size(); ++i) {
    if (!open[i]) continue;
    const auto p = open.coord(i);
    for (int a = 0; a < 3 && out[i] < 2; ++a) {
      const auto k = static_cast<std::int64_t>(std::floor(thickness_mm / sp[a] + 1e-9));
      std::int64_t run = 1;
      int chamber_ends = 0;
      bool closed = true;
      for (int dir : {-1, 1}) {
        Index3 q = p;
        while (true) {
          (a == 0 ? q.x : a == 1 ? q.y : q.z) += dir;
          if (!open.contains(q)) break;  // the border counts as a closed end
          if (!open(q)) {
            chamber_ends += is_chamber(labels(q)) ? 1 : 0;
            break;
          }
          if (++run > k) {
            closed = false;
            break;
          }
        }
        if (!closed) break;
      }
      if (closed && chamber_ends > 0 && run <= k) out[i] = std::max<std::uint8_t>(out[i], static_cast<std::uint8_t>(chamber_ends));
    }
  }
  return out;
}

}  // namespace detail

/// Labels over {Background, BloodPool, PoolBoundary}. The boundary is the pool
/// minus its erosion by a box of half-width max(1, round(t / spacing)) voxels.
inline LabelVolume segment_blood_pool(const IntensityVolume& intensity, const SegmentParams& params = {}) {
  params.validate();
  Mask m = Mask::like(intensity);
  for (std::size_t i = 0; i < intensity.size(); ++i) m[i] = intensity[i] > params.threshold ? 1 : 0;
  const auto& s = intensity.spacing();
  const double voxel_mm3 = s.dx * s.dy * s.dz;
  const auto min_voxels = static_cast<std::size_t>(std::ceil(params.min_component_mm3 / voxel_mm3 - 1e-9));
  m = remove_small_components(m, min_voxels, Connectivity::TwentySix);
  if (count_nonzero(m) == 0) throw Error("empty pool");

  const double sp[3] = {s.dx, s.dy, s.dz};
  std::int64_t half[3];
  for (int a = 0; a < 3; ++a)
    half[a] = std::max<std::int64_t>(1, std::llround(params.boundary_mm / sp[a]));
  const Mask inner = detail::box_erode(m, half);

  LabelVolume out = LabelVolume::like(intensity);
  for (std::size_t i = 0; i < m.size(); ++i)
    out[i] = !m[i] ? Label::Background : (inner[i] ? Label::BloodPool : Label::PoolBoundary);
  return out;
}

inline Mask pool_mask(const LabelVolume& pool) {
  Mask m = Mask::like(pool);
  for (std::size_t i = 0; i < pool.size(); ++i)
    m[i] = (pool[i] == Label::BloodPool || pool[i] == Label::PoolBoundary) ? 1 : 0;
  return m;
}

/// Reconciles chamber masks with the pool.
///  1. Chamber labels outside the pool are cleared; Myo is kept off the pool.
///  2. Unassigned pool voxels are flooded from the chambers along geodesic
///     paths up to the cap. Near tube cores the flood only enters thin
///     slits between chambers or continues along thin layers it reached
///     from outside. Equidistant contests go to the lower label code.
///  3. The rest of the pool becomes VesselCandidate.
inline LabelVolume refine_chambers(const LabelVolume& chambers, const LabelVolume& pool,
                                   const SegmentParams& params = {}) {
  params.validate();
  if (!chambers.same_grid(pool)) throw Error("refine_chambers: grid mismatch");
  const Mask in_pool = pool_mask(pool);
  LabelVolume out = LabelVolume::like(chambers);
  Mask open = Mask::like(chambers);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Label c = chambers[i];
    if (in_pool[i]) {
      if (is_chamber(c)) out[i] = c;
      else open[i] = 1;
    } else if (c == Label::Myo) {
      out[i] = Label::Myo;
    }
  }

  // Near tube cores only thin layers are claimable: slits between two
  // chambers directly, other layers only by growth from voxels the flood
  // has already claimed (a shell continuing from elsewhere).
  const Mask guard = dilate(erode(open, params.guard_core_mm), params.guard_mm);
  const auto layer = detail::thin_layer(open, out, params.thin_layer_mm);

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(out.size(), inf);
  std::vector<Label> owner(out.size(), Label::Background);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (is_chamber(out[i])) {
      dist[i] = 0;
      owner[i] = out[i];
      heap.push({0.0, i});
    }
  const auto& s = out.spacing();
  const auto& offs = neighbor_offsets(Connectivity::TwentySix);
  constexpr double eps = 1e-6;
  while (!heap.empty()) {
    const auto [du, u] = heap.top();
    heap.pop();
    if (du > dist[u]) continue;
    const auto p = out.coord(u);
    for (const auto& o : offs) {
      const Index3 q{p.x + o.x, p.y + o.y, p.z + o.z};
      if (!out.contains(q)) continue;
      const auto v = out.index(q);
      if (!open[v] || (guard[v] && (layer[v] == 0 || (layer[v] == 1 && du == 0)))) continue;
      const double step = std::sqrt(o.x * o.x * s.dx * s.dx + o.y * o.y * s.dy * s.dy + o.z * o.z * s.dz * s.dz);
      const double nd = du + step;
      if (nd > params.flood_cap_mm + eps) continue;
      if (nd < dist[v] - eps) {
        dist[v] = nd;
        owner[v] = owner[u];
        heap.push({nd, v});
      } else if (nd <= dist[v] + eps && code(owner[u]) < code(owner[v])) {
        owner[v] = owner[u];
        heap.push({dist[v], v});
      }
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!open[i]) continue;
    if (dist[i] < inf) out[i] = owner[i];
    else out[i] = Label::VesselCandidate;
  }
  return out;
}

inline Mask vessel_candidates(const LabelVolume& refined) { return label_mask(refined, Label::VesselCandidate); }

}  // namespace chdseg
