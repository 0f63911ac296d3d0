#pragma once

// Dense 3D voxel grids and the grid operations every pipeline stage uses:
// resampling, cropping, padding, connected components, distance transforms
// and physical-radius morphology.
//
// Storage is x-fastest: index = x + nx * (y + ny * z).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace chdseg {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Small geometric value types

struct Vec3 {
  double x = 0, y = 0, z = 0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(double s, Vec3 a) { return a * s; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

struct Index3 {
  std::int64_t x = 0, y = 0, z = 0;
  friend bool operator==(const Index3&, const Index3&) = default;
  friend auto operator<=>(const Index3&, const Index3&) = default;
};

struct Dims {
  std::int64_t nx = 1, ny = 1, nz = 1;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  std::int64_t operator[](int axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Millimetres per voxel along each axis.
struct VoxelSpacing {
  double dx = 1.0, dy = 1.0, dz = 1.0;

  double operator[](int axis) const { return axis == 0 ? dx : axis == 1 ? dy : dz; }
  bool valid() const {
    auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
    return ok(dx) && ok(dy) && ok(dz);
  }
  void validate() const {
    if (!valid()) throw Error("voxel spacing must be positive and finite");
  }
  friend bool operator==(const VoxelSpacing&, const VoxelSpacing&) = default;
};

/// Inclusive voxel-index box.
struct BoundingBox {
  Index3 min;
  Index3 max;

  Dims size() const { return {max.x - min.x + 1, max.y - min.y + 1, max.z - min.z + 1}; }
  bool valid_in(const Dims& d) const {
    return min.x >= 0 && min.y >= 0 && min.z >= 0 && min.x <= max.x && min.y <= max.y &&
           min.z <= max.z && max.x < d.nx && max.y < d.ny && max.z < d.nz;
  }
  bool contains(const Index3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// ---------------------------------------------------------------------------
// Labels

enum class Label : std::uint8_t {
  Background = 0,
  LV = 1,
  RV = 2,
  LA = 3,
  RA = 4,
  Myo = 5,
  Ao = 6,
  PA = 7,
  // pipeline-internal
  BloodPool = 8,
  PoolBoundary = 9,
  VesselCandidate = 10,
};

inline constexpr int kMaxLabelCode = 10;
inline constexpr std::array<Label, 7> kSubstructures = {Label::LV, Label::RV, Label::LA, Label::RA,
                                                       Label::Myo, Label::Ao, Label::PA};
inline constexpr std::array<Label, 4> kChambers = {Label::LV, Label::RV, Label::LA, Label::RA};

inline constexpr bool is_chamber(Label l) {
  return l == Label::LV || l == Label::RV || l == Label::LA || l == Label::RA;
}
inline constexpr bool is_output_label(Label l) { return static_cast<int>(l) <= 7; }
inline constexpr int code(Label l) { return static_cast<int>(l); }

inline std::string label_name(Label l) {
  switch (l) {
    case Label::Background: return "Background";
    case Label::LV: return "LV";
    case Label::RV: return "RV";
    case Label::LA: return "LA";
    case Label::RA: return "RA";
    case Label::Myo: return "Myo";
    case Label::Ao: return "Ao";
    case Label::PA: return "PA";
    case Label::BloodPool: return "BloodPool";
    case Label::PoolBoundary: return "PoolBoundary";
    case Label::VesselCandidate: return "VesselCandidate";
  }
  return "?";
}

inline Label label_from_name(const std::string& s) {
  for (int c = 0; c <= kMaxLabelCode; ++c) {
    auto l = static_cast<Label>(c);
    if (label_name(l) == s) return l;
  }
  throw Error("unknown label name '" + s + "'");
}

// ---------------------------------------------------------------------------
// Volume

template <typename T>
class Volume {
public:
  using value_type = T;

  Volume() = default;
  explicit Volume(Dims dims, VoxelSpacing spacing = {}, Vec3 origin = {}, T fill = T{})
      : dims_(dims), spacing_(spacing), origin_(origin) {
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw Error("volume dims must all be >= 1");
    spacing_.validate();
    data_.assign(dims.count(), fill);
  }

  /// Same grid, new payload type.
  template <typename U>
  static Volume like(const Volume<U>& other, T fill = T{}) {
    return Volume(other.dims(), other.spacing(), other.origin(), fill);
  }

  const Dims& dims() const { return dims_; }
  const VoxelSpacing& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  void set_spacing(VoxelSpacing s) {
    s.validate();
    spacing_ = s;
  }
  void set_origin(Vec3 o) { origin_ = o; }

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return static_cast<std::size_t>(x + dims_.nx * (y + dims_.ny * z));
  }
  std::size_t index(const Index3& p) const { return index(p.x, p.y, p.z); }
  Index3 coord(std::size_t i) const {
    auto ii = static_cast<std::int64_t>(i);
    return {ii % dims_.nx, (ii / dims_.nx) % dims_.ny, ii / (dims_.nx * dims_.ny)};
  }
  bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims_.nx && y < dims_.ny && z < dims_.nz;
  }
  bool contains(const Index3& p) const { return contains(p.x, p.y, p.z); }

  T& operator()(std::int64_t x, std::int64_t y, std::int64_t z) { return data_[index(x, y, z)]; }
  const T& operator()(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return data_[index(x, y, z)];
  }
  T& operator()(const Index3& p) { return data_[index(p)]; }
  const T& operator()(const Index3& p) const { return data_[index(p)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  /// Physical (mm) position of a voxel centre.
  Vec3 world(const Index3& p) const {
    return {origin_.x + p.x * spacing_.dx, origin_.y + p.y * spacing_.dy,
            origin_.z + p.z * spacing_.dz};
  }

  template <typename U>
  bool same_grid(const Volume<U>& o) const {
    return dims_ == o.dims() && spacing_ == o.spacing() && origin_ == o.origin();
  }

  friend bool operator==(const Volume& a, const Volume& b) {
    return a.dims_ == b.dims_ && a.spacing_ == b.spacing_ && a.origin_ == b.origin_ &&
           a.data_ == b.data_;
  }

private:
  Dims dims_{};
  VoxelSpacing spacing_{};
  Vec3 origin_{};
  std::vector<T> data_;
};

using IntensityVolume = Volume<float>;
using LabelVolume = Volume<Label>;
using Mask = Volume<std::uint8_t>;

template <typename A, typename B>
void require_same_grid(const Volume<A>& a, const Volume<B>& b, const char* what) {
  if (!a.same_grid(b)) throw Error(std::string(what) + ": grid mismatch");
}

/// Binary mask of voxels satisfying `pred`.
template <typename T, typename Pred>
Mask make_mask(const Volume<T>& v, Pred pred) {
  Mask m = Mask::like(v);
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = pred(v[i]) ? 1 : 0;
  return m;
}

inline Mask label_mask(const LabelVolume& v, Label l) {
  return make_mask(v, [l](Label x) { return x == l; });
}

inline std::size_t count_nonzero(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

// ---------------------------------------------------------------------------
// Neighbourhoods

enum class Connectivity { Six = 6, TwentySix = 26 };

inline const std::vector<Index3>& neighbor_offsets(Connectivity c) {
  static const std::vector<Index3> six = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                          {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  static const std::vector<Index3> twenty_six = [] {
    std::vector<Index3> v;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (dx || dy || dz) v.push_back({dx, dy, dz});
    return v;
  }();
  return c == Connectivity::Six ? six : twenty_six;
}

// ---------------------------------------------------------------------------
// Resampling

/// Grid of a volume resampled to `target` with physical extent preserved.
/// Voxel i of the output sits at input index (i + 0.5) * n_in / n_out - 0.5.
struct ResampledGrid {
  Dims dims;
  VoxelSpacing spacing;
  Vec3 origin;
};

inline ResampledGrid resampled_grid(const Dims& src, const VoxelSpacing& s, const Vec3& origin,
                                    const Dims& target) {
  if (target.nx < 1 || target.ny < 1 || target.nz < 1)
    throw Error("resample: target dimensions must all be >= 1");
  auto f = [&](int a) { return static_cast<double>(src[a]) / static_cast<double>(target[a]); };
  VoxelSpacing ns{s.dx * f(0), s.dy * f(1), s.dz * f(2)};
  Vec3 no{origin.x + (0.5 * f(0) - 0.5) * s.dx, origin.y + (0.5 * f(1) - 0.5) * s.dy,
          origin.z + (0.5 * f(2) - 0.5) * s.dz};
  return {target, ns, no};
}

/// Floating-point volumes are interpolated trilinearly; everything else
/// (labels, masks) uses nearest neighbour so the value vocabulary survives.
template <typename T>
Volume<T> resample(const Volume<T>& in, const Dims& target) {
  const auto g = resampled_grid(in.dims(), in.spacing(), in.origin(), target);
  if (target == in.dims()) return in;
  Volume<T> out(g.dims, g.spacing, g.origin);
  const Dims& d = in.dims();
  auto src_pos = [&](std::int64_t i, int axis) {
    return (static_cast<double>(i) + 0.5) * static_cast<double>(d[axis]) /
               static_cast<double>(target[axis]) -
           0.5;
  };
  auto clampi = [](std::int64_t v, std::int64_t hi) { return std::clamp<std::int64_t>(v, 0, hi - 1); };

  if constexpr (std::is_floating_point_v<T>) {
    for (std::int64_t z = 0; z < target.nz; ++z) {
      const double pz = std::clamp(src_pos(z, 2), 0.0, static_cast<double>(d.nz - 1));
      const auto z0 = static_cast<std::int64_t>(std::floor(pz));
      const auto z1 = clampi(z0 + 1, d.nz);
      const double wz = pz - static_cast<double>(z0);
      for (std::int64_t y = 0; y < target.ny; ++y) {
        const double py = std::clamp(src_pos(y, 1), 0.0, static_cast<double>(d.ny - 1));
        const auto y0 = static_cast<std::int64_t>(std::floor(py));
        const auto y1 = clampi(y0 + 1, d.ny);
        const double wy = py - static_cast<double>(y0);
        for (std::int64_t x = 0; x < target.nx; ++x) {
          const double px = std::clamp(src_pos(x, 0), 0.0, static_cast<double>(d.nx - 1));
          const auto x0 = static_cast<std::int64_t>(std::floor(px));
          const auto x1 = clampi(x0 + 1, d.nx);
          const double wx = px - static_cast<double>(x0);
          auto lerp = [](double a, double b, double w) { return a + (b - a) * w; };
          const double c00 = lerp(in(x0, y0, z0), in(x1, y0, z0), wx);
          const double c10 = lerp(in(x0, y1, z0), in(x1, y1, z0), wx);
          const double c01 = lerp(in(x0, y0, z1), in(x1, y0, z1), wx);
          const double c11 = lerp(in(x0, y1, z1), in(x1, y1, z1), wx);
          out(x, y, z) = static_cast<T>(lerp(lerp(c00, c10, wy), lerp(c01, c11, wy), wz));
        }
      }
    }
  } else {
    auto nearest = [&](std::int64_t i, int axis) {
      return clampi(static_cast<std::int64_t>(std::floor(src_pos(i, axis) + 0.5)), d[axis]);
    };
    for (std::int64_t z = 0; z < target.nz; ++z) {
      const auto sz = nearest(z, 2);
      for (std::int64_t y = 0; y < target.ny; ++y) {
        const auto sy = nearest(y, 1);
        for (std::int64_t x = 0; x < target.nx; ++x) out(x, y, z) = in(nearest(x, 0), sy, sz);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cropping / pasting / padding

template <typename T>
Volume<T> crop(const Volume<T>& in, const BoundingBox& box) {
  if (!box.valid_in(in.dims())) throw Error("crop: bounding box exceeds volume bounds");
  const auto& s = in.spacing();
  Volume<T> out(box.size(), s,
                in.origin() + Vec3{box.min.x * s.dx, box.min.y * s.dy, box.min.z * s.dz});
  for (std::int64_t z = box.min.z; z <= box.max.z; ++z)
    for (std::int64_t y = box.min.y; y <= box.max.y; ++y) {
      auto src = in.data().begin() + static_cast<std::ptrdiff_t>(in.index(box.min.x, y, z));
      auto dst = out.data().begin() +
                 static_cast<std::ptrdiff_t>(out.index(0, y - box.min.y, z - box.min.z));
      std::copy(src, src + (box.max.x - box.min.x + 1), dst);
    }
  return out;
}

/// Writes `part` into `into` at `box` (the inverse of crop).
template <typename T>
void paste(const Volume<T>& part, const BoundingBox& box, Volume<T>& into) {
  if (!box.valid_in(into.dims()) || !(box.size() == part.dims()))
    throw Error("paste: bounding box does not fit");
  for (std::int64_t z = 0; z < part.dims().nz; ++z)
    for (std::int64_t y = 0; y < part.dims().ny; ++y)
      for (std::int64_t x = 0; x < part.dims().nx; ++x)
        into(x + box.min.x, y + box.min.y, z + box.min.z) = part(x, y, z);
}

/// Places a cropped volume back on its parent grid, filling elsewhere with `fill`.
template <typename T>
Volume<T> uncrop(const Volume<T>& part, const BoundingBox& box, const Dims& parent, T fill = T{}) {
  const auto& s = part.spacing();
  Volume<T> out(parent, s,
                part.origin() - Vec3{box.min.x * s.dx, box.min.y * s.dy, box.min.z * s.dz}, fill);
  paste(part, box, out);
  return out;
}

template <typename T>
Volume<T> pad(const Volume<T>& in, std::int64_t n, T fill = T{}) {
  const auto& d = in.dims();
  const auto& s = in.spacing();
  Volume<T> out({d.nx + 2 * n, d.ny + 2 * n, d.nz + 2 * n}, s,
                in.origin() - Vec3{n * s.dx, n * s.dy, n * s.dz}, fill);
  paste(in, BoundingBox{{n, n, n}, {n + d.nx - 1, n + d.ny - 1, n + d.nz - 1}}, out);
  return out;
}

template <typename T>
BoundingBox full_box(const Volume<T>& v) {
  return {{0, 0, 0}, {v.dims().nx - 1, v.dims().ny - 1, v.dims().nz - 1}};
}

/// Tight box around nonzero voxels; nullopt-like empty flag via bool.
inline bool nonzero_bounds(const Mask& m, BoundingBox& out) {
  bool any = false;
  BoundingBox b{{std::numeric_limits<std::int64_t>::max(), std::numeric_limits<std::int64_t>::max(),
                 std::numeric_limits<std::int64_t>::max()},
                {-1, -1, -1}};
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    any = true;
    const auto p = m.coord(i);
    b.min = {std::min(b.min.x, p.x), std::min(b.min.y, p.y), std::min(b.min.z, p.z)};
    b.max = {std::max(b.max.x, p.x), std::max(b.max.y, p.y), std::max(b.max.z, p.z)};
  }
  if (any) out = b;
  return any;
}

// ---------------------------------------------------------------------------
// Connected components

struct ComponentMap {
  Volume<std::int32_t> ids;          // 0 = background, 1 = largest component
  std::vector<std::size_t> counts;   // counts[id], counts[0] == 0

  std::size_t component_count() const { return counts.empty() ? 0 : counts.size() - 1; }
};

/// Labels foreground components. Ids are ordered by descending voxel count;
/// equal counts keep raster order of each component's first voxel.
inline ComponentMap connected_components(const Mask& mask, Connectivity conn) {
  ComponentMap out{Volume<std::int32_t>::like(mask), {0}};
  const auto& offs = neighbor_offsets(conn);
  std::vector<std::size_t> queue;
  std::vector<std::size_t> raw_counts{0};
  std::int32_t next = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || out.ids[i]) continue;
    ++next;
    std::size_t count = 0;
    queue.clear();
    queue.push_back(i);
    out.ids[i] = next;
    while (!queue.empty()) {
      const auto cur = queue.back();
      queue.pop_back();
      ++count;
      const auto p = mask.coord(cur);
      for (const auto& o : offs) {
        const Index3 q{p.x + o.x, p.y + o.y, p.z + o.z};
        if (!mask.contains(q)) continue;
        const auto qi = mask.index(q);
        if (mask[qi] && !out.ids[qi]) {
          out.ids[qi] = next;
          queue.push_back(qi);
        }
      }
    }
    raw_counts.push_back(count);
  }
  std::vector<std::int32_t> order(static_cast<std::size_t>(next));
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    return raw_counts[static_cast<std::size_t>(a)] > raw_counts[static_cast<std::size_t>(b)];
  });
  std::vector<std::int32_t> remap(static_cast<std::size_t>(next) + 1, 0);
  for (std::size_t r = 0; r < order.size(); ++r) {
    remap[static_cast<std::size_t>(order[r])] = static_cast<std::int32_t>(r + 1);
    out.counts.push_back(raw_counts[static_cast<std::size_t>(order[r])]);
  }
  for (auto& id : out.ids.data()) id = remap[static_cast<std::size_t>(id)];
  return out;
}

/// Keeps components whose voxel count is at least `min_voxels`.
inline Mask remove_small_components(const Mask& mask, std::size_t min_voxels, Connectivity conn) {
  const auto cc = connected_components(mask, conn);
  Mask out = Mask::like(mask);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto id = cc.ids[i];
    out[i] = (id && cc.counts[static_cast<std::size_t>(id)] >= min_voxels) ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact Euclidean distance transform (separable lower-envelope method)

namespace detail {

inline void edt_1d(std::span<double> f, double spacing, std::vector<double>& d,
                   std::vector<std::int64_t>& v, std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto n = f.size();
  d.resize(n);
  v.resize(n);
  z.resize(n + 1);
  const double s2 = spacing * spacing;
  auto meet = [&](std::size_t q, std::size_t p) {
    const auto dq = static_cast<double>(q), dp = static_cast<double>(p);
    return ((f[q] + s2 * dq * dq) - (f[p] + s2 * dp * dp)) / (2.0 * s2 * (dq - dp));
  };
  std::size_t k = 0;
  bool any = false;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    if (!any) {
      any = true;
      v[0] = static_cast<std::int64_t>(q);
      z[0] = -inf;
      z[1] = inf;
      continue;
    }
    double s = meet(q, static_cast<std::size_t>(v[k]));
    while (s <= z[k]) {
      --k;
      s = meet(q, static_cast<std::size_t>(v[k]));
    }
    ++k;
    v[k] = static_cast<std::int64_t>(q);
    z[k] = s;
    z[k + 1] = inf;
  }
  if (!any) return;  // no background on this line
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const auto p = static_cast<std::size_t>(v[k]);
    const double dq = spacing * (static_cast<double>(q) - static_cast<double>(p));
    d[q] = dq * dq + f[p];
  }
  std::copy(d.begin(), d.end(), f.begin());
}

}  // namespace detail

/// Squared physical distance (mm^2) from every voxel to the nearest voxel
/// where `mask` is zero. Voxels outside the mask get 0. When
/// `outside_is_background` is set the region beyond the volume border counts
/// as background; otherwise a mask without zeros yields +inf everywhere.
inline Volume<double> squared_distance_to_background(const Mask& mask,
                                                     bool outside_is_background) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (outside_is_background) {
    const Mask padded = pad(mask, 1, std::uint8_t{0});
    const auto full = squared_distance_to_background(padded, false);
    const auto& d = mask.dims();
    return crop(full, BoundingBox{{1, 1, 1}, {d.nx, d.ny, d.nz}});
  }
  Volume<double> f = Volume<double>::like(mask);
  for (std::size_t i = 0; i < mask.size(); ++i) f[i] = mask[i] ? inf : 0.0;
  const auto& d = mask.dims();
  const auto& s = mask.spacing();
  std::vector<double> line, tmp_d, tmp_z;
  std::vector<std::int64_t> tmp_v;
  // x lines are contiguous
  for (std::int64_t z = 0; z < d.nz; ++z)
    for (std::int64_t y = 0; y < d.ny; ++y) {
      std::span<double> row(f.data().data() + f.index(0, y, z), static_cast<std::size_t>(d.nx));
      detail::edt_1d(row, s.dx, tmp_d, tmp_v, tmp_z);
    }
  line.resize(static_cast<std::size_t>(d.ny));
  for (std::int64_t z = 0; z < d.nz; ++z)
    for (std::int64_t x = 0; x < d.nx; ++x) {
      for (std::int64_t y = 0; y < d.ny; ++y) line[static_cast<std::size_t>(y)] = f(x, y, z);
      detail::edt_1d(line, s.dy, tmp_d, tmp_v, tmp_z);
      for (std::int64_t y = 0; y < d.ny; ++y) f(x, y, z) = line[static_cast<std::size_t>(y)];
    }
  line.resize(static_cast<std::size_t>(d.nz));
  for (std::int64_t y = 0; y < d.ny; ++y)
    for (std::int64_t x = 0; x < d.nx; ++x) {
      for (std::int64_t z = 0; z < d.nz; ++z) line[static_cast<std::size_t>(z)] = f(x, y, z);
      detail::edt_1d(line, s.dz, tmp_d, tmp_v, tmp_z);
      for (std::int64_t z = 0; z < d.nz; ++z) f(x, y, z) = line[static_cast<std::size_t>(z)];
    }
  return f;
}

inline Volume<double> distance_to_background(const Mask& mask, bool outside_is_background) {
  auto d = squared_distance_to_background(mask, outside_is_background);
  for (auto& v : d.data()) v = std::sqrt(v);
  return d;
}

/// Squared distance (mm^2) from each voxel to the nearest nonzero voxel of `mask`.
inline Volume<double> squared_distance_to_set(const Mask& mask) {
  Mask inv = Mask::like(mask);
  for (std::size_t i = 0; i < mask.size(); ++i) inv[i] = mask[i] ? 0 : 1;
  return squared_distance_to_background(inv, false);
}

// ---------------------------------------------------------------------------
// Morphology

enum class MorphOp { Dilate, Erode };

namespace detail {
// Accept ball offsets exactly on the sphere despite rounding.
inline double radius_sq_with_slack(double r) { return r * r * (1.0 + 1e-12) + 1e-12; }
}  // namespace detail

/// Binary morphology with a spherical structuring element of physical radius
/// `radius_mm`; the element spans radius/spacing voxels on each axis. Erosion
/// treats the region beyond the volume border as background.
inline Mask morphology(const Mask& mask, MorphOp op, double radius_mm) {
  if (!(radius_mm >= 0.0) || !std::isfinite(radius_mm))
    throw Error("morphology: radius must be non-negative");
  Mask out = Mask::like(mask);
  if (radius_mm == 0.0) {
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 1 : 0;
    return out;
  }
  const double r2 = detail::radius_sq_with_slack(radius_mm);
  if (op == MorphOp::Dilate) {
    const auto d2 = squared_distance_to_set(mask);
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] = d2[i] <= r2 ? 1 : 0;
  } else {
    const auto d2 = squared_distance_to_background(mask, true);
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] = (mask[i] && d2[i] > r2) ? 1 : 0;
  }
  return out;
}

inline Mask dilate(const Mask& m, double r) { return morphology(m, MorphOp::Dilate, r); }
inline Mask erode(const Mask& m, double r) { return morphology(m, MorphOp::Erode, r); }

}  // namespace chdseg
