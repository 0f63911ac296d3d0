#pragma once

// Iso-surfaces of binary masks and binary STL export.
//
// Each grid cube is split into the six Kuhn tetrahedra that share the
// (0,0,0)-(1,1,1) diagonal. The split is translation invariant, so adjacent
// cubes triangulate their shared face identically and the 0.5 level set of the
// piecewise-linear field is a closed 2-manifold with no ambiguous cases.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "chdseg/volume.hpp"

namespace chdseg {

struct Mesh {
  std::vector<Vec3> vertices;                        // mm
  std::vector<std::array<std::uint32_t, 3>> triangles;  // CCW seen from outside

  bool empty() const { return triangles.empty(); }
};

namespace detail {

struct KuhnTables {
  // corner offsets of the unit cube, bit0 = x, bit1 = y, bit2 = z
  std::array<std::array<int, 4>, 6> tets{};
  KuhnTables() {
    const std::array<std::array<int, 3>, 6> perms = {
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    for (std::size_t t = 0; t < 6; ++t) {
      int c = 0;
      tets[t][0] = 0;
      for (int k = 0; k < 3; ++k) {
        c |= 1 << perms[t][static_cast<std::size_t>(k)];
        tets[t][static_cast<std::size_t>(k) + 1] = c;
      }
    }
  }
};

inline const KuhnTables& kuhn() {
  static const KuhnTables t;
  return t;
}

}  // namespace detail

/// Separable Gaussian blur of a binary mask with standard deviation
/// `sigma_vox` voxels on every axis, truncated at three sigma; beyond the
/// border counts as zero.
inline Volume<float> gaussian_field(const Mask& mask, double sigma_vox) {
  Volume<float> f = Volume<float>::like(mask);
  for (std::size_t i = 0; i < mask.size(); ++i) f[i] = mask[i] ? 1.0f : 0.0f;
  if (sigma_vox <= 0) return f;
  const auto& d = mask.dims();
  std::vector<float> line, out;
  for (int axis = 0; axis < 3; ++axis) {
    const double sv = sigma_vox;
    const auto half = static_cast<std::int64_t>(std::ceil(3.0 * sv));
    std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
    double sum = 0;
    for (std::int64_t j = -half; j <= half; ++j) {
      k[static_cast<std::size_t>(j + half)] = std::exp(-0.5 * static_cast<double>(j * j) / (sv * sv));
      sum += k[static_cast<std::size_t>(j + half)];
    }
    for (auto& w : k) w /= sum;
    const std::int64_t n = d[axis];
    line.resize(static_cast<std::size_t>(n));
    out.resize(static_cast<std::size_t>(n));
    const std::int64_t na = axis == 0 ? d.ny : d.nx;
    const std::int64_t nb = axis == 2 ? d.ny : d.nz;
    for (std::int64_t b = 0; b < nb; ++b)
      for (std::int64_t a = 0; a < na; ++a) {
        auto at = [&](std::int64_t t) -> float& {
          if (axis == 0) return f(t, a, b);
          if (axis == 1) return f(a, t, b);
          return f(a, b, t);
        };
        for (std::int64_t t = 0; t < n; ++t) line[static_cast<std::size_t>(t)] = at(t);
        for (std::int64_t t = 0; t < n; ++t) {
          double acc = 0;
          for (std::int64_t j = std::max<std::int64_t>(-half, -t); j <= half && t + j < n; ++j)
            acc += k[static_cast<std::size_t>(j + half)] * line[static_cast<std::size_t>(t + j)];
          out[static_cast<std::size_t>(t)] = static_cast<float>(acc);
        }
        for (std::int64_t t = 0; t < n; ++t) at(t) = out[static_cast<std::size_t>(t)];
      }
  }
  return f;
}

struct SurfaceOptions {
  /// Gaussian width (voxels) of the field used to place vertices along
  /// crossing edges; 0 puts every vertex at the edge midpoint. Much more than
  /// one voxel pulls the smoothed level set off the crossing edges.
  double placement_sigma_vox = 1.0;
};

/// Triangulates the 0.5 iso-surface of `mask` (nonzero = inside). The grid is
/// padded with background internally so the surface is always closed.
///
/// Which edges are crossed comes from the binary mask alone, so topology and
/// watertightness never depend on the placement field. Each vertex then sits
/// where the Gaussian-smoothed mask crosses 0.5 along its edge (clamped to the
/// edge interior), falling back to the midpoint when the smoothed values do
/// not bracket 0.5.
inline Mesh marching_cubes(const Mask& mask, const SurfaceOptions& opt = {}) {
  const auto& d = mask.dims();
  const auto& s = mask.spacing();
  const auto& o = mask.origin();
  // padded point grid: indices -1..n
  const std::int64_t px = d.nx + 2, py = d.ny + 2;
  auto inside = [&](std::int64_t x, std::int64_t y, std::int64_t z) -> bool {
    return mask.contains(x, y, z) && mask(x, y, z) != 0;
  };
  auto point_key = [&](std::int64_t x, std::int64_t y, std::int64_t z) -> std::uint64_t {
    return static_cast<std::uint64_t>((x + 1) + px * ((y + 1) + py * (z + 1)));
  };

  Mesh mesh;
  std::vector<Vec3> midpoint;  // unslid vertex positions in grid units, for orientation
  std::unordered_map<std::uint64_t, std::uint32_t> vertex_of_edge;
  bool any = false;
  for (std::size_t i = 0; i < mask.size() && !any; ++i) any = mask[i] != 0;
  if (!any) throw Error("marching_cubes: empty mask");

  const Volume<float> field = gaussian_field(mask, opt.placement_sigma_vox);
  auto field_at = [&](const Index3& p) -> double {
    return field.contains(p) ? static_cast<double>(field(p)) : 0.0;
  };

  const auto& tets = detail::kuhn().tets;
  std::array<bool, 8> in{};
  std::array<Index3, 8> corner{};

  auto edge_vertex = [&](int a, int b) -> std::uint32_t {
    // tetrahedron edges always run from a corner to a componentwise-larger one
    if (a > b) std::swap(a, b);
    const auto& pa = corner[static_cast<std::size_t>(a)];
    const std::uint64_t key = point_key(pa.x, pa.y, pa.z) * 8u + static_cast<std::uint64_t>(a ^ b);
    auto [it, fresh] = vertex_of_edge.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
    if (fresh) {
      const auto& pb = corner[static_cast<std::size_t>(b)];
      double t = 0.5;
      if (opt.placement_sigma_vox > 0) {
        const double fa = field_at(pa), fb = field_at(pb);
        if ((fa - 0.5) * (fb - 0.5) < 0) t = std::clamp((0.5 - fa) / (fb - fa), 0.05, 0.95);
      }
      midpoint.push_back({0.5 * static_cast<double>(pa.x + pb.x), 0.5 * static_cast<double>(pa.y + pb.y),
                          0.5 * static_cast<double>(pa.z + pb.z)});
      mesh.vertices.push_back({o.x + (static_cast<double>(pa.x) + t * static_cast<double>(pb.x - pa.x)) * s.dx,
                               o.y + (static_cast<double>(pa.y) + t * static_cast<double>(pb.y - pa.y)) * s.dy,
                               o.z + (static_cast<double>(pa.z) + t * static_cast<double>(pb.z - pa.z)) * s.dz});
    }
    return it->second;
  };
  auto corner_pos = [&](int c) {
    const auto& p = corner[static_cast<std::size_t>(c)];
    return Vec3{static_cast<double>(p.x), static_cast<double>(p.y), static_cast<double>(p.z)};
  };
  // Orientation is decided on the unslid midpoints, which always separate the
  // inside corners of a tetrahedron from the outside ones.
  auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c, int in_corner, int out_corner) {
    const Vec3 n = cross(midpoint[b] - midpoint[a], midpoint[c] - midpoint[a]);
    if (dot(n, corner_pos(out_corner) - corner_pos(in_corner)) < 0) std::swap(b, c);
    mesh.triangles.push_back({a, b, c});
  };

  for (std::int64_t z = -1; z < d.nz; ++z)
    for (std::int64_t y = -1; y < d.ny; ++y)
      for (std::int64_t x = -1; x < d.nx; ++x) {
        int n_in = 0;
        for (int c = 0; c < 8; ++c) {
          corner[static_cast<std::size_t>(c)] = {x + (c & 1), y + ((c >> 1) & 1), z + ((c >> 2) & 1)};
          const auto& p = corner[static_cast<std::size_t>(c)];
          in[static_cast<std::size_t>(c)] = inside(p.x, p.y, p.z);
          n_in += in[static_cast<std::size_t>(c)];
        }
        if (n_in == 0 || n_in == 8) continue;
        for (const auto& t : tets) {
          std::array<int, 4> ins{}, outs{};
          int ni = 0, no = 0;
          for (int c : t) {
            if (in[static_cast<std::size_t>(c)]) ins[static_cast<std::size_t>(ni++)] = c;
            else outs[static_cast<std::size_t>(no++)] = c;
          }
          if (ni == 0 || no == 0) continue;
          if (ni == 1 || no == 1) {
            const int apex = ni == 1 ? ins[0] : outs[0];
            const auto& others = ni == 1 ? outs : ins;
            const auto a = edge_vertex(apex, others[0]);
            const auto b = edge_vertex(apex, others[1]);
            const auto c = edge_vertex(apex, others[2]);
            emit(a, b, c, ins[0], outs[0]);
          } else {
            // quad: i0-o0, i0-o1, i1-o1, i1-o0
            const auto a = edge_vertex(ins[0], outs[0]);
            const auto b = edge_vertex(ins[0], outs[1]);
            const auto c = edge_vertex(ins[1], outs[1]);
            const auto e = edge_vertex(ins[1], outs[0]);
            emit(a, b, c, ins[0], outs[0]);
            emit(a, c, e, ins[0], outs[0]);
          }
        }
      }
  return mesh;
}

// ---------------------------------------------------------------------------
// Measurements

inline double surface_area(const Mesh& m) {
  double a = 0;
  for (const auto& t : m.triangles)
    a += 0.5 * norm(cross(m.vertices[t[1]] - m.vertices[t[0]], m.vertices[t[2]] - m.vertices[t[0]]));
  return a;
}

/// Enclosed volume by the divergence theorem; positive for outward winding.
inline double signed_volume(const Mesh& m) {
  double v = 0;
  for (const auto& t : m.triangles)
    v += dot(m.vertices[t[0]], cross(m.vertices[t[1]], m.vertices[t[2]])) / 6.0;
  return v;
}

namespace detail {
inline std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_use(const Mesh& m) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> uses;
  for (const auto& t : m.triangles)
    for (int k = 0; k < 3; ++k) {
      auto a = t[static_cast<std::size_t>(k)], b = t[static_cast<std::size_t>((k + 1) % 3)];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  return uses;
}
}  // namespace detail

/// Every undirected edge shared by exactly two triangles.
inline bool is_watertight(const Mesh& m) {
  if (m.triangles.empty()) return false;
  for (const auto& [e, n] : detail::edge_use(m))
    if (n != 2) return false;
  return true;
}

inline long euler_characteristic(const Mesh& m) {
  std::vector<bool> used(m.vertices.size(), false);
  for (const auto& t : m.triangles)
    for (auto v : t) used[v] = true;
  const auto v = std::count(used.begin(), used.end(), true);
  const auto e = static_cast<long>(detail::edge_use(m).size());
  return static_cast<long>(v) - e + static_cast<long>(m.triangles.size());
}

/// Umbrella-operator smoothing; zero iterations leaves the mesh untouched.
inline Mesh laplacian_smooth(Mesh m, int iterations, double lambda = 0.5) {
  if (iterations <= 0) return m;
  std::vector<std::vector<std::uint32_t>> nbr(m.vertices.size());
  for (const auto& [e, n] : detail::edge_use(m)) {
    nbr[e.first].push_back(e.second);
    nbr[e.second].push_back(e.first);
  }
  std::vector<Vec3> next(m.vertices.size());
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
      if (nbr[i].empty()) {
        next[i] = m.vertices[i];
        continue;
      }
      Vec3 c{};
      for (auto j : nbr[i]) c = c + m.vertices[j];
      c = c * (1.0 / static_cast<double>(nbr[i].size()));
      next[i] = m.vertices[i] + (c - m.vertices[i]) * lambda;
    }
    m.vertices.swap(next);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Printable walls

/// Outward wall of physical thickness `thickness_mm`, measured from the same
/// smoothed surface the mesh follows: every outside voxel whose centre lies
/// within the thickness of a surface point. Surface points sit on the axis
/// edges between inside and outside voxels, placed as in marching_cubes. With
/// one voxel of thickness this is exactly the set of outside face neighbours;
/// below one voxel the wall can have holes.
/// The result lives on the input grid; pad first if the mask touches the border.
inline Mask make_shell(const Mask& mask, double thickness_mm, const SurfaceOptions& opt = {}) {
  if (!(thickness_mm > 0.0) || !std::isfinite(thickness_mm))
    throw Error("make_shell: thickness must be positive");
  const auto& s = mask.spacing();
  const Volume<float> field = gaussian_field(mask, opt.placement_sigma_vox);
  auto field_at = [&](const Index3& p) -> double { return field.contains(p) ? static_cast<double>(field(p)) : 0.0; };
  static constexpr std::array<Index3, 6> kFace = {
      {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};

  // surface points in grid units, bucketed by their inside voxel
  std::unordered_map<std::size_t, std::vector<Vec3>> points;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const auto p = mask.coord(i);
    for (const auto& e : kFace) {
      const Index3 q{p.x + e.x, p.y + e.y, p.z + e.z};
      if (mask.contains(q) && mask(q)) continue;
      double t = 0.5;
      if (opt.placement_sigma_vox > 0) {
        const double fa = field_at(p), fb = field_at(q);
        if ((fa - 0.5) * (fb - 0.5) < 0) t = std::clamp((0.5 - fa) / (fb - fa), 0.05, 0.95);
      }
      points[i].push_back({static_cast<double>(p.x) + t * e.x, static_cast<double>(p.y) + t * e.y,
                           static_cast<double>(p.z) + t * e.z});
    }
  }
  Mask out = Mask::like(mask);
  if (points.empty()) return out;

  // a surface point is within one voxel of its inside voxel
  const std::array<std::int64_t, 3> reach = {static_cast<std::int64_t>(std::ceil(thickness_mm / s.dx)) + 1,
                                             static_cast<std::int64_t>(std::ceil(thickness_mm / s.dy)) + 1,
                                             static_cast<std::int64_t>(std::ceil(thickness_mm / s.dz)) + 1};
  const double smax = std::max({s.dx, s.dy, s.dz});
  const double r2 = detail::radius_sq_with_slack(thickness_mm);
  const double band2 = (thickness_mm + smax) * (thickness_mm + smax) * (1.0 + 1e-12);
  const auto near = squared_distance_to_set(mask);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] || near[i] > band2) continue;
    const auto q = mask.coord(i);
    bool hit = false;
    for (std::int64_t z = q.z - reach[2]; z <= q.z + reach[2] && !hit; ++z)
      for (std::int64_t y = q.y - reach[1]; y <= q.y + reach[1] && !hit; ++y)
        for (std::int64_t x = q.x - reach[0]; x <= q.x + reach[0] && !hit; ++x) {
          if (!mask.contains(x, y, z) || !mask(x, y, z)) continue;
          const auto it = points.find(mask.index(x, y, z));
          if (it == points.end()) continue;
          for (const auto& p : it->second) {
            const double dx = (p.x - static_cast<double>(q.x)) * s.dx, dy = (p.y - static_cast<double>(q.y)) * s.dy,
                         dz = (p.z - static_cast<double>(q.z)) * s.dz;
            if (dx * dx + dy * dy + dz * dz <= r2) {
              hit = true;
              break;
            }
          }
        }
    if (hit) out[i] = 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary STL

namespace detail {

template <typename T>
void put_le(std::string& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace detail

inline std::string encode_stl(const Mesh& mesh, const std::string& header_text = "chdseg binary STL") {
  std::string buf(80, '\0');
  std::copy_n(header_text.begin(), std::min<std::size_t>(header_text.size(), 80), buf.begin());
  buf.reserve(84 + 50 * mesh.triangles.size());
  detail::put_le(buf, static_cast<std::uint32_t>(mesh.triangles.size()));
  for (const auto& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    Vec3 n = cross(b - a, c - a);
    const double len = norm(n);
    n = len > 0 ? n * (1.0 / len) : Vec3{};
    for (const Vec3& v : {n, a, b, c}) {
      detail::put_le(buf, static_cast<float>(v.x));
      detail::put_le(buf, static_cast<float>(v.y));
      detail::put_le(buf, static_cast<float>(v.z));
    }
    detail::put_le(buf, std::uint16_t{0});
  }
  return buf;
}

inline void write_stl(const Mesh& mesh, const std::string& path) {
  const auto bytes = encode_stl(mesh);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("write_stl: cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write_stl: write failed for '" + path + "'");
}

/// One facet of a parsed STL: normal then three vertices, float32 as stored.
struct StlFacet {
  std::array<float, 3> normal;
  std::array<std::array<float, 3>, 3> vertex;
};

inline std::vector<StlFacet> read_stl(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("read_stl: cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 84) throw Error("read_stl: file shorter than header");
  const auto n = detail::get_le<std::uint32_t>(bytes.data() + 80);
  if (bytes.size() != 84 + 50 * static_cast<std::size_t>(n))
    throw Error("read_stl: size does not match triangle count");
  std::vector<StlFacet> out(n);
  const char* p = bytes.data() + 84;
  for (auto& facet : out) {
    for (int k = 0; k < 3; ++k) facet.normal[static_cast<std::size_t>(k)] = detail::get_le<float>(p + 4 * k);
    for (int v = 0; v < 3; ++v)
      for (int k = 0; k < 3; ++k)
        facet.vertex[static_cast<std::size_t>(v)][static_cast<std::size_t>(k)] =
            detail::get_le<float>(p + 12 + 12 * v + 4 * k);
    p += 50;
  }
  return out;
}

}  // namespace chdseg
