#pragma once

// Fixtures shared by the test binaries.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "chdseg/chdseg.hpp"

namespace testsupport {

using namespace chdseg;
namespace fs = std::filesystem;

inline fs::path source_path(const std::string& rel) { return fs::path(CHDSEG_SOURCE_DIR) / rel; }

inline nlohmann::json load_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return nlohmann::json::parse(in);
}

inline const nlohmann::json& geometry_oracle() {
  static const auto j = load_json(source_path("tests/data/geometry_oracle.json"));
  return j;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("chdseg_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline const Phantom& phantom(Variant v, std::uint64_t seed = 7) {
  static std::map<std::pair<int, std::uint64_t>, Phantom> cache;
  const auto key = std::make_pair(static_cast<int>(v), seed);
  auto it = cache.find(key);
  if (it == cache.end()) {
    PhantomSpec s;
    s.variant = v;
    s.seed = seed;
    it = cache.emplace(key, generate_phantom(s)).first;
  }
  return it->second;
}

/// Voxels within `r` (voxel units) of `c`.
inline Mask sphere_mask(const Dims& d, Vec3 c, double r, VoxelSpacing s = {1, 1, 1}) {
  Mask m(d, s);
  for (std::int64_t z = 0; z < d.nz; ++z)
    for (std::int64_t y = 0; y < d.ny; ++y)
      for (std::int64_t x = 0; x < d.nx; ++x) {
        const double dx = x - c.x, dy = y - c.y, dz = z - c.z;
        m(x, y, z) = dx * dx + dy * dy + dz * dz <= r * r ? 1 : 0;
      }
  return m;
}

inline double segment_distance(Vec3 p, Vec3 a, Vec3 b) {
  const Vec3 ab = b - a;
  const double t = std::clamp(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0);
  return norm(p - (a + ab * t));
}

/// Adds a capsule from a to b of radius r (voxel units).
inline void add_tube(Mask& m, Vec3 a, Vec3 b, double r) {
  const auto& d = m.dims();
  for (std::int64_t z = 0; z < d.nz; ++z)
    for (std::int64_t y = 0; y < d.ny; ++y)
      for (std::int64_t x = 0; x < d.nx; ++x)
        if (segment_distance(Vec3{double(x), double(y), double(z)}, a, b) <= r) m(x, y, z) = 1;
}

/// Solid torus around the z axis through c.
inline void add_torus(Mask& m, Vec3 c, double major, double minor) {
  const auto& d = m.dims();
  for (std::int64_t z = 0; z < d.nz; ++z)
    for (std::int64_t y = 0; y < d.ny; ++y)
      for (std::int64_t x = 0; x < d.nx; ++x) {
        const double px = x - c.x, py = y - c.y, pz = z - c.z;
        const double q = std::sqrt(px * px + py * py) - major;
        if (q * q + pz * pz <= minor * minor) m(x, y, z) = 1;
      }
}

/// Axis permutation: output axis a is input axis perm[a].
template <typename T>
Volume<T> permute_axes(const Volume<T>& in, const std::array<int, 3>& perm) {
  const auto& d = in.dims();
  const auto& s = in.spacing();
  const std::int64_t dd[3] = {d.nx, d.ny, d.nz};
  const double ss[3] = {s.dx, s.dy, s.dz};
  Volume<T> out(Dims{dd[perm[0]], dd[perm[1]], dd[perm[2]]}, VoxelSpacing{ss[perm[0]], ss[perm[1]], ss[perm[2]]});
  for (std::int64_t z = 0; z < d.nz; ++z)
    for (std::int64_t y = 0; y < d.ny; ++y)
      for (std::int64_t x = 0; x < d.nx; ++x) {
        const std::int64_t c[3] = {x, y, z};
        out(c[perm[0]], c[perm[1]], c[perm[2]]) = in(x, y, z);
      }
  return out;
}

/// Node description that survives renaming: kind plus port chamber.
inline std::string node_tag(const VesselGraph& g, int id) {
  const auto& n = g.nodes[static_cast<std::size_t>(id)];
  return kind_name(n.kind) + (n.kind == NodeKind::ChamberPort ? ":" + label_name(n.chamber) : "");
}

/// Edges as sorted endpoint tags plus an optional per-edge class, as a multiset.
inline std::multiset<std::string> edge_signature(const VesselGraph& g, const std::vector<VesselClass>* cls = nullptr) {
  std::multiset<std::string> out;
  for (const auto& e : g.edges) {
    auto a = node_tag(g, e.source), b = node_tag(g, e.target);
    if (b < a) std::swap(a, b);
    out.insert(a + "|" + b + (cls ? "|" + class_name((*cls)[static_cast<std::size_t>(e.id)]) : ""));
  }
  return out;
}

/// Random small vessel graph for matcher comparisons.
inline VesselGraph random_vessel_graph(std::mt19937& rng, int max_nodes) {
  VesselGraph g;
  g.grid = {{std::max(1, max_nodes), 1, 1}, {1, 1, 1}, {0, 0, 0}};
  const int n = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_nodes));
  constexpr Label kPorts[] = {Label::LV, Label::RV, Label::LA, Label::RA};
  for (int i = 0; i < n; ++i) {
    VesselNode node;
    node.id = i;
    node.kind = static_cast<NodeKind>(rng() % 3);
    if (node.kind == NodeKind::ChamberPort) node.chamber = kPorts[rng() % 4];
    node.voxel = {i, 0, 0};
    node.position = {double(i), 0, 0};
    node.radius_mm = 3;
    g.nodes.push_back(node);
  }
  constexpr double kLengths[] = {18, 26, 30, 48, 120, 166};
  const int m = static_cast<int>(rng() % static_cast<unsigned>(n + 3));
  for (int i = 0; i < m; ++i) {
    VesselEdge e;
    e.id = i;
    int a = static_cast<int>(rng() % static_cast<unsigned>(n)), b = static_cast<int>(rng() % static_cast<unsigned>(n));
    if (a > b) std::swap(a, b);
    e.source = a;
    e.target = b;
    e.length_mm = kLengths[rng() % 6] + static_cast<double>(rng() % 41) - 20;
    e.radius_mm = 2.0 + static_cast<double>(rng() % 401) / 100.0;
    g.edges.push_back(e);
  }
  return g;
}

/// Every stage of the chain on one phantom with jittered chambers.
struct EndToEnd {
  LabelVolume degraded;
  RoiResult roi;
  LabelVolume pool;
  LabelVolume refined;  // on the RoI grid
  GraphOutputs graph;
  MatchResult match;
  LabelVolume labels;  // full grid
};

inline EndToEnd run_end_to_end(Variant v, double jitter_mm, std::uint64_t degrade_seed, std::uint64_t seed = 7) {
  const auto& ph = phantom(v, seed);
  EndToEnd r;
  DegradeSpec ds;
  ds.jitter_mm = jitter_mm;
  ds.seed = degrade_seed;
  r.degraded = degrade_labels(ph.chambers, ds);
  r.roi = roi_crop(ph.intensity);
  r.pool = segment_blood_pool(r.roi.volume);
  r.refined = refine_chambers(crop(r.degraded, r.roi.box), r.pool);
  r.graph = build_graph(r.refined, GraphParams{});
  r.match = match_graph(r.graph.graph, builtin_templates());
  const RoiRecord rec{r.roi.box, ph.labels.dims(), ph.labels.spacing(), ph.labels.origin()};
  r.labels = final_labels(r.refined, r.graph, r.match, rec);
  return r;
}

/// Majority ground-truth label along each edge path (RoI-grid paths).
inline std::vector<Label> edge_truth(const VesselGraph& g, const LabelVolume& truth, const Index3& offset = {0, 0, 0}) {
  std::vector<Label> out;
  for (const auto& e : g.edges) {
    std::array<int, 8> votes{};
    for (const auto& p : e.path) {
      const int c = code(truth(p.x + offset.x, p.y + offset.y, p.z + offset.z));
      if (c < 8) ++votes[static_cast<std::size_t>(c)];
    }
    int best = 1;
    for (int c = 2; c < 8; ++c)
      if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
    out.push_back(static_cast<Label>(best));
  }
  return out;
}

inline int run_command(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace testsupport
