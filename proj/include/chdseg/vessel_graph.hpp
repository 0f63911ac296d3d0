#pragma once

// Attributed connectivity graph of a vessel skeleton.
//
// Skeleton voxels with one 26-neighbour are ends, with three or more they are
// junction voxels (adjacent junction voxels form one node), everything else
// lies on a path. Paths between critical voxels become edges carrying arc
// length, mean radius and end-to-end direction. An end within two vessel
// radii plus `port_radius_mm` of a chamber voxel becomes a ChamberPort.
// Terminal spurs are measured from the wall of the vessel they leave.
// A vessel that enters one chamber through several short legs is reduced to
// a single port at the junction where the legs meet.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "chdseg/skeleton.hpp"
#include "chdseg/volume.hpp"

namespace chdseg {

enum class NodeKind { Junction, Endpoint, ChamberPort };

inline std::string kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Junction: return "Junction";
    case NodeKind::Endpoint: return "Endpoint";
    case NodeKind::ChamberPort: return "ChamberPort";
  }
  return "?";
}

inline NodeKind kind_from_name(const std::string& s) {
  if (s == "Junction") return NodeKind::Junction;
  if (s == "Endpoint") return NodeKind::Endpoint;
  if (s == "ChamberPort") return NodeKind::ChamberPort;
  throw Error("unknown node kind '" + s + "'");
}

struct GridInfo {
  Dims dims;
  VoxelSpacing spacing;
  Vec3 origin;

  Vec3 world(const Index3& p) const {
    return {origin.x + p.x * spacing.dx, origin.y + p.y * spacing.dy, origin.z + p.z * spacing.dz};
  }
};

struct VesselNode {
  int id = 0;
  NodeKind kind = NodeKind::Endpoint;
  Index3 voxel;                 // centre voxel (largest radius in the node)
  Vec3 position;                // mm
  Label chamber = Label::Background;  // ChamberPort only
  double radius_mm = 0;
  std::vector<Index3> voxels;   // all critical voxels merged into this node
};

struct VesselEdge {
  int id = 0;
  int source = 0;
  int target = 0;
  std::vector<Index3> path;  // source node voxel .. target node voxel, 26-connected
  double length_mm = 0;
  double radius_mm = 0;
  Vec3 direction;            // unit vector source -> target, zero for loops
};

struct VesselGraph {
  GridInfo grid;
  std::vector<VesselNode> nodes;
  std::vector<VesselEdge> edges;

  int degree(int node) const {
    int d = 0;
    for (const auto& e : edges) d += (e.source == node) + (e.target == node);
    return d;
  }
};

struct GraphParams {
  double prune_length_mm = 5.0;
  double port_radius_mm = 1.5;
  /// Junction-to-junction edges shorter than this collapse into one junction.
  double junction_merge_mm = 4.0;
  /// A junction whose other edges all run this short into ports of one chamber
  /// is a vessel root entering through several openings.
  double root_fork_mm = 12.0;

  void validate() const {
    for (double v : {prune_length_mm, port_radius_mm, junction_merge_mm, root_fork_mm})
      if (!(v >= 0) || !std::isfinite(v)) throw Error("GraphParams: lengths must be finite and >= 0");
  }
};

namespace detail {

inline double path_length(const GridInfo& g, const std::vector<Index3>& path) {
  double len = 0;
  for (std::size_t i = 1; i < path.size(); ++i) len += norm(g.world(path[i]) - g.world(path[i - 1]));
  return len;
}

inline void finish_edge(const GridInfo& g, const Volume<double>& radius, VesselEdge& e) {
  e.length_mm = path_length(g, e.path);
  double r = 0;
  for (const auto& p : e.path) r += radius(p);
  e.radius_mm = r / static_cast<double>(e.path.size());
  const Vec3 d = g.world(e.path.back()) - g.world(e.path.front());
  const double n = norm(d);
  e.direction = (e.source == e.target || n == 0) ? Vec3{} : d * (1.0 / n);
}

inline void finish_node(const GridInfo& g, const Volume<double>& radius, VesselNode& n) {
  std::sort(n.voxels.begin(), n.voxels.end(), [](const Index3& a, const Index3& b) {
    return std::tie(a.z, a.y, a.x) < std::tie(b.z, b.y, b.x);
  });
  n.voxel = n.voxels.front();
  for (const auto& p : n.voxels)
    if (radius(p) > radius(n.voxel)) n.voxel = p;
  n.radius_mm = radius(n.voxel);
  n.position = g.world(n.voxel);
}

inline bool raster_less(const Index3& a, const Index3& b) {
  return std::tie(a.z, a.y, a.x) < std::tie(b.z, b.y, b.x);
}

/// Orders nodes by centre voxel, orients edges low id -> high id and orders
/// edges by (source, target, path).
inline void canonicalize(const GridInfo& g, const Volume<double>& radius, VesselGraph& graph) {
  std::vector<int> order(graph.nodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return raster_less(graph.nodes[static_cast<std::size_t>(a)].voxel,
                       graph.nodes[static_cast<std::size_t>(b)].voxel);
  });
  std::vector<int> remap(graph.nodes.size());
  std::vector<VesselNode> nodes;
  for (std::size_t i = 0; i < order.size(); ++i) {
    remap[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
    nodes.push_back(std::move(graph.nodes[static_cast<std::size_t>(order[i])]));
    nodes.back().id = static_cast<int>(i);
  }
  graph.nodes = std::move(nodes);
  for (auto& e : graph.edges) {
    e.source = remap[static_cast<std::size_t>(e.source)];
    e.target = remap[static_cast<std::size_t>(e.target)];
    if (e.source > e.target || (e.source == e.target && raster_less(e.path.back(), e.path.front()))) {
      std::swap(e.source, e.target);
      std::reverse(e.path.begin(), e.path.end());
    }
    finish_edge(g, radius, e);
  }
  std::sort(graph.edges.begin(), graph.edges.end(), [](const VesselEdge& a, const VesselEdge& b) {
    if (a.source != b.source) return a.source < b.source;
    if (a.target != b.target) return a.target < b.target;
    return std::lexicographical_compare(a.path.begin(), a.path.end(), b.path.begin(), b.path.end(),
                                        raster_less);
  });
  for (std::size_t i = 0; i < graph.edges.size(); ++i) graph.edges[i].id = static_cast<int>(i);
}

/// Removes flagged nodes (which must have no edges left) and renumbers.
inline void drop_nodes(VesselGraph& graph, const std::vector<bool>& drop) {
  std::vector<int> new_id(graph.nodes.size(), -1);
  std::vector<VesselNode> nodes;
  for (const auto& n : graph.nodes) {
    if (drop[static_cast<std::size_t>(n.id)]) continue;
    new_id[static_cast<std::size_t>(n.id)] = static_cast<int>(nodes.size());
    nodes.push_back(n);
    nodes.back().id = static_cast<int>(nodes.size()) - 1;
  }
  for (auto& e : graph.edges) {
    e.source = new_id[static_cast<std::size_t>(e.source)];
    e.target = new_id[static_cast<std::size_t>(e.target)];
  }
  graph.nodes = std::move(nodes);
}

/// Shortest 26-connected walk from `from` to `to` inside a node's voxels.
inline std::vector<Index3> cluster_path(const std::vector<Index3>& voxels, const Index3& from, const Index3& to) {
  std::vector<int> prev(voxels.size(), -1);
  std::vector<bool> seen(voxels.size(), false);
  auto find = [&](const Index3& p) {
    return static_cast<int>(std::find(voxels.begin(), voxels.end(), p) - voxels.begin());
  };
  const int s = find(from), t = find(to);
  if (s == static_cast<int>(voxels.size()) || t == static_cast<int>(voxels.size())) return {from, to};
  std::vector<int> queue{s};
  seen[static_cast<std::size_t>(s)] = true;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto& c = voxels[static_cast<std::size_t>(queue[head])];
    for (std::size_t j = 0; j < voxels.size(); ++j) {
      const auto& q = voxels[j];
      if (seen[j] || std::max({std::abs(q.x - c.x), std::abs(q.y - c.y), std::abs(q.z - c.z)}) != 1) continue;
      seen[j] = true;
      prev[j] = queue[head];
      queue.push_back(static_cast<int>(j));
    }
  }
  std::vector<Index3> path;
  for (int v = t; v >= 0; v = prev[static_cast<std::size_t>(v)]) path.push_back(voxels[static_cast<std::size_t>(v)]);
  std::reverse(path.begin(), path.end());
  return path;
}

/// Splits a skeleton voxel set into nodes and traced edges (no pruning).
inline VesselGraph trace_skeleton(const GridInfo& g, const Mask& skel, const Volume<double>& radius) {
  const auto& offs = neighbor_offsets(Connectivity::TwentySix);
  Volume<std::int32_t> node_of = Volume<std::int32_t>::like(skel, -1);
  Volume<std::uint8_t> nbr = Volume<std::uint8_t>::like(skel);
  Mask visited = Mask::like(skel);
  std::vector<std::size_t> on;
  for (std::size_t i = 0; i < skel.size(); ++i) {
    if (!skel[i]) continue;
    on.push_back(i);
    const auto p = skel.coord(i);
    int n = 0;
    for (const auto& o : offs) {
      const Index3 q{p.x + o.x, p.y + o.y, p.z + o.z};
      n += skel.contains(q) && skel(q);
    }
    nbr[i] = static_cast<std::uint8_t>(n);
  }

  VesselGraph graph{g, {}, {}};
  auto new_node = [&](NodeKind kind) {
    graph.nodes.push_back({});
    graph.nodes.back().id = static_cast<int>(graph.nodes.size()) - 1;
    graph.nodes.back().kind = kind;
    return graph.nodes.back().id;
  };

  for (auto i : on) {
    if (nbr[i] >= 3 && node_of[i] < 0) {
      const int id = new_node(NodeKind::Junction);
      std::vector<std::size_t> stack{i};
      node_of[i] = id;
      while (!stack.empty()) {
        const auto c = stack.back();
        stack.pop_back();
        const auto p = skel.coord(c);
        graph.nodes[static_cast<std::size_t>(id)].voxels.push_back(p);
        for (const auto& o : offs) {
          const Index3 q{p.x + o.x, p.y + o.y, p.z + o.z};
          if (!skel.contains(q)) continue;
          const auto qi = skel.index(q);
          if (skel[qi] && nbr[qi] >= 3 && node_of[qi] < 0) {
            node_of[qi] = id;
            stack.push_back(qi);
          }
        }
      }
    } else if (nbr[i] == 1) {
      const int id = new_node(NodeKind::Endpoint);
      node_of[i] = id;
      graph.nodes[static_cast<std::size_t>(id)].voxels.push_back(skel.coord(i));
    }
  }

  std::set<std::pair<std::size_t, std::size_t>> direct;
  auto trace_from = [&](int node, const Index3& start, const Index3& first) {
    VesselEdge e;
    e.source = node;
    e.path = {start, first};
    Index3 prev = start, cur = first;
    visited(cur) = 1;
    while (true) {
      bool advanced = false;
      for (const auto& o : offs) {
        const Index3 q{cur.x + o.x, cur.y + o.y, cur.z + o.z};
        if (q == prev || !skel.contains(q) || !skel(q)) continue;
        if (node_of(q) >= 0) {
          e.path.push_back(q);
          e.target = node_of(q);
          graph.edges.push_back(std::move(e));
          return;
        }
        if (visited(q)) continue;
        visited(q) = 1;
        e.path.push_back(q);
        prev = cur;
        cur = q;
        advanced = true;
        break;
      }
      if (!advanced) return;  // dead end inside a degenerate cluster; dropped
    }
  };

  auto trace_node = [&](int id) {
    const auto voxels = graph.nodes[static_cast<std::size_t>(id)].voxels;
    for (const auto& c : voxels)
      for (const auto& o : offs) {
        const Index3 q{c.x + o.x, c.y + o.y, c.z + o.z};
        if (!skel.contains(q) || !skel(q)) continue;
        const int other = node_of(q);
        if (other == id) continue;
        if (other >= 0) {
          const auto a = skel.index(c), b = skel.index(q);
          if (!direct.insert({std::min(a, b), std::max(a, b)}).second) continue;
          VesselEdge e;
          e.source = id;
          e.target = other;
          e.path = {c, q};
          graph.edges.push_back(std::move(e));
        } else if (!visited(q)) {
          trace_from(id, c, q);
        }
      }
  };

  const auto n_critical = graph.nodes.size();
  for (std::size_t id = 0; id < n_critical; ++id) trace_node(static_cast<int>(id));

  // closed loops without any critical voxel get a node of their own
  for (auto i : on) {
    if (nbr[i] != 2 || node_of[i] >= 0 || visited[i]) continue;
    const int id = new_node(NodeKind::Junction);
    node_of[i] = id;
    graph.nodes[static_cast<std::size_t>(id)].voxels.push_back(skel.coord(i));
    trace_node(id);
  }

  for (auto& n : graph.nodes) finish_node(g, radius, n);
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    graph.edges[i].id = static_cast<int>(i);
    finish_edge(g, radius, graph.edges[i]);
  }
  return graph;
}

}  // namespace detail

/// Builds the vessel graph of `skeleton`, pruning terminal spurs shorter than
/// `prune_length_mm` (one per junction per round, to a fixpoint), collapsing
/// short junction-junction edges and attaching chamber ports from `chambers`.
inline VesselGraph extract_graph(const Skeleton& skeleton, const LabelVolume& chambers,
                                 const GraphParams& params = {}) {
  params.validate();
  if (skeleton.voxels.empty()) throw Error("extract_graph: empty skeleton");
  const GridInfo g{skeleton.dims, skeleton.spacing, skeleton.origin};
  if (!(chambers.dims() == g.dims)) throw Error("extract_graph: chamber grid mismatch");

  Mask skel(g.dims, g.spacing, g.origin);
  Volume<double> radius(g.dims, g.spacing, g.origin);
  for (std::size_t k = 0; k < skeleton.voxels.size(); ++k) {
    skel(skeleton.voxels[k]) = 1;
    radius(skeleton.voxels[k]) = skeleton.radius_mm[k];
  }

  VesselGraph graph;
  while (true) {
    graph = detail::trace_skeleton(g, skel, radius);
    bool removed = false;
    std::map<int, int> shortest_spur;  // junction -> edge
    for (const auto& e : graph.edges) {
      if (e.source == e.target) {
        if (e.length_mm >= params.prune_length_mm) continue;
        for (std::size_t k = 1; k + 1 < e.path.size(); ++k) skel(e.path[k]) = 0;
        removed = removed || e.path.size() > 2;
        continue;
      }
      const auto& a = graph.nodes[static_cast<std::size_t>(e.source)];
      const auto& b = graph.nodes[static_cast<std::size_t>(e.target)];
      int junction = -1;
      if (a.kind == NodeKind::Endpoint && b.kind == NodeKind::Junction && graph.degree(b.id) >= 3) junction = b.id;
      if (b.kind == NodeKind::Endpoint && a.kind == NodeKind::Junction && graph.degree(a.id) >= 3) junction = a.id;
      if (junction < 0) continue;
      // spur length counts from the parent vessel's wall
      const double outside = e.length_mm - graph.nodes[static_cast<std::size_t>(junction)].radius_mm;
      if (outside >= params.prune_length_mm) continue;
      auto it = shortest_spur.find(junction);
      if (it == shortest_spur.end() ||
          e.length_mm < graph.edges[static_cast<std::size_t>(it->second)].length_mm)
        shortest_spur[junction] = e.id;
    }
    for (const auto& [junction, edge] : shortest_spur) {
      const auto& e = graph.edges[static_cast<std::size_t>(edge)];
      const bool junction_first = e.source == junction;
      for (std::size_t k = 0; k < e.path.size(); ++k) {
        const bool is_junction_end = junction_first ? k == 0 : k + 1 == e.path.size();
        if (!is_junction_end) skel(e.path[k]) = 0;
      }
      removed = true;
    }
    if (!removed) break;
  }

  // collapse short junction-junction edges
  {
    std::vector<int> parent(graph.nodes.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      return x;
    };
    std::vector<bool> drop(graph.edges.size(), false);
    for (const auto& e : graph.edges) {
      if (e.source == e.target || e.length_mm >= params.junction_merge_mm) continue;
      if (graph.nodes[static_cast<std::size_t>(e.source)].kind != NodeKind::Junction ||
          graph.nodes[static_cast<std::size_t>(e.target)].kind != NodeKind::Junction)
        continue;
      drop[static_cast<std::size_t>(e.id)] = true;
      const int ra = find(e.source), rb = find(e.target);
      if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
    }
    if (std::find(drop.begin(), drop.end(), true) != drop.end()) {
      std::vector<int> new_id(graph.nodes.size(), -1);
      std::vector<VesselNode> nodes;
      for (const auto& n : graph.nodes)
        if (find(n.id) == n.id) {
          new_id[static_cast<std::size_t>(n.id)] = static_cast<int>(nodes.size());
          nodes.push_back(n);
        }
      for (const auto& n : graph.nodes) {
        const int r = find(n.id);
        if (r == n.id) continue;
        auto& dst = nodes[static_cast<std::size_t>(new_id[static_cast<std::size_t>(r)])].voxels;
        dst.insert(dst.end(), n.voxels.begin(), n.voxels.end());
      }
      std::vector<VesselEdge> edges;
      for (const auto& e : graph.edges) {
        const int ns = new_id[static_cast<std::size_t>(find(e.source))];
        if (drop[static_cast<std::size_t>(e.id)]) {
          auto& dst = nodes[static_cast<std::size_t>(ns)].voxels;
          dst.insert(dst.end(), e.path.begin() + 1, e.path.end() - 1);
          continue;
        }
        VesselEdge ne = e;
        ne.source = ns;
        ne.target = new_id[static_cast<std::size_t>(find(e.target))];
        edges.push_back(std::move(ne));
      }
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        nodes[i].id = static_cast<int>(i);
        detail::finish_node(g, radius, nodes[i]);
      }
      for (std::size_t i = 0; i < edges.size(); ++i) edges[i].id = static_cast<int>(i);
      graph.nodes = std::move(nodes);
      graph.edges = std::move(edges);
    }
  }

  // isolated short segments are thinning debris
  {
    std::vector<bool> drop_node(graph.nodes.size(), false);
    std::vector<VesselEdge> edges;
    for (const auto& e : graph.edges) {
      const bool debris = e.source != e.target && e.length_mm < params.prune_length_mm &&
                          graph.nodes[static_cast<std::size_t>(e.source)].kind == NodeKind::Endpoint &&
                          graph.nodes[static_cast<std::size_t>(e.target)].kind == NodeKind::Endpoint;
      if (debris) {
        drop_node[static_cast<std::size_t>(e.source)] = drop_node[static_cast<std::size_t>(e.target)] = true;
      } else {
        edges.push_back(e);
      }
    }
    graph.edges = std::move(edges);
    detail::drop_nodes(graph, drop_node);
    for (std::size_t i = 0; i < graph.edges.size(); ++i) graph.edges[i].id = static_cast<int>(i);
  }

  // a junction left with exactly two edges is only a bend
  while (true) {
    int bend = -1;
    for (const auto& n : graph.nodes) {
      if (n.kind != NodeKind::Junction || graph.degree(n.id) != 2) continue;
      const bool loop = std::any_of(graph.edges.begin(), graph.edges.end(), [&](const VesselEdge& e) {
        return e.source == n.id && e.target == n.id;
      });
      if (!loop) {
        bend = n.id;
        break;
      }
    }
    if (bend < 0) break;
    std::vector<std::size_t> at;
    for (std::size_t i = 0; i < graph.edges.size(); ++i)
      if (graph.edges[i].source == bend || graph.edges[i].target == bend) at.push_back(i);
    VesselEdge a = graph.edges[at[0]], b = graph.edges[at[1]];
    if (a.source == bend) {
      std::reverse(a.path.begin(), a.path.end());
      std::swap(a.source, a.target);
    }
    if (b.target == bend) {
      std::reverse(b.path.begin(), b.path.end());
      std::swap(b.source, b.target);
    }
    VesselEdge merged;
    merged.source = a.source;
    merged.target = b.target;
    merged.path = a.path;
    const auto bridge = detail::cluster_path(graph.nodes[static_cast<std::size_t>(bend)].voxels,
                                             a.path.back(), b.path.front());
    merged.path.insert(merged.path.end(), bridge.begin() + 1, bridge.end());
    merged.path.insert(merged.path.end(), b.path.begin() + 1, b.path.end());
    graph.edges.erase(graph.edges.begin() + static_cast<std::ptrdiff_t>(at[1]));
    graph.edges.erase(graph.edges.begin() + static_cast<std::ptrdiff_t>(at[0]));
    graph.edges.push_back(std::move(merged));
    std::vector<bool> drop(graph.nodes.size(), false);
    drop[static_cast<std::size_t>(bend)] = true;
    detail::drop_nodes(graph, drop);
    for (std::size_t i = 0; i < graph.edges.size(); ++i) {
      graph.edges[i].id = static_cast<int>(i);
      detail::finish_edge(g, radius, graph.edges[i]);
    }
  }

  // chamber ports
  // Thinning pulls a tip back from the chamber by one to two vessel radii,
  // depending on how the end face meets the chamber.
  for (auto& n : graph.nodes) {
    if (n.kind != NodeKind::Endpoint) continue;
    double vessel_radius = n.radius_mm;
    for (const auto& e : graph.edges)
      if (e.source == n.id || e.target == n.id) vessel_radius = std::max(vessel_radius, e.radius_mm);
    const double reach = 2.0 * vessel_radius + params.port_radius_mm;
    const double reach2 = reach * reach * (1.0 + 1e-12);
    const auto& s = g.spacing;
    const std::int64_t wx = static_cast<std::int64_t>(std::ceil(reach / s.dx));
    const std::int64_t wy = static_cast<std::int64_t>(std::ceil(reach / s.dy));
    const std::int64_t wz = static_cast<std::int64_t>(std::ceil(reach / s.dz));
    double best = std::numeric_limits<double>::infinity();
    Label best_label = Label::Background;
    for (std::int64_t dz = -wz; dz <= wz; ++dz)
      for (std::int64_t dy = -wy; dy <= wy; ++dy)
        for (std::int64_t dx = -wx; dx <= wx; ++dx) {
          const Index3 q{n.voxel.x + dx, n.voxel.y + dy, n.voxel.z + dz};
          if (!chambers.contains(q) || !is_chamber(chambers(q))) continue;
          const double d2 = (dx * s.dx) * (dx * s.dx) + (dy * s.dy) * (dy * s.dy) + (dz * s.dz) * (dz * s.dz);
          if (d2 > reach2) continue;
          if (d2 < best || (d2 == best && code(chambers(q)) < code(best_label))) {
            best = d2;
            best_label = chambers(q);
          }
        }
    if (best_label != Label::Background) {
      n.kind = NodeKind::ChamberPort;
      n.chamber = best_label;
    }
  }

  // root forks: the junction itself becomes the port
  while (true) {
    int fork = -1;
    Label chamber = Label::Background;
    std::vector<std::size_t> short_edges;
    for (const auto& n : graph.nodes) {
      if (n.kind != NodeKind::Junction) continue;
      std::vector<std::size_t> roots, other;
      Label c = Label::Background;
      bool one_chamber = true;
      for (std::size_t i = 0; i < graph.edges.size(); ++i) {
        const auto& e = graph.edges[i];
        if (e.source != n.id && e.target != n.id) continue;
        const int m = e.source == n.id ? e.target : e.source;
        const auto& mn = graph.nodes[static_cast<std::size_t>(m)];
        if (m != n.id && mn.kind == NodeKind::ChamberPort && graph.degree(m) == 1 && e.length_mm <= params.root_fork_mm) {
          if (c != Label::Background && c != mn.chamber) one_chamber = false;
          c = mn.chamber;
          roots.push_back(i);
        } else {
          other.push_back(i);
        }
      }
      if (one_chamber && roots.size() >= 2 && other.size() == 1) {
        fork = n.id;
        chamber = c;
        short_edges = roots;
        break;
      }
    }
    if (fork < 0) break;
    std::vector<bool> drop(graph.nodes.size(), false);
    for (auto i : short_edges) {
      const auto& e = graph.edges[i];
      drop[static_cast<std::size_t>(e.source == fork ? e.target : e.source)] = true;
    }
    for (auto it = short_edges.rbegin(); it != short_edges.rend(); ++it)
      graph.edges.erase(graph.edges.begin() + static_cast<std::ptrdiff_t>(*it));
    graph.nodes[static_cast<std::size_t>(fork)].kind = NodeKind::ChamberPort;
    graph.nodes[static_cast<std::size_t>(fork)].chamber = chamber;
    detail::drop_nodes(graph, drop);
    for (std::size_t i = 0; i < graph.edges.size(); ++i) graph.edges[i].id = static_cast<int>(i);
  }

  detail::canonicalize(g, radius, graph);
  return graph;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const VesselGraph& g) {
  using nlohmann::json;
  auto ijk = [](const Index3& p) { return json::array({p.x, p.y, p.z}); };
  auto xyz = [](const Vec3& v) { return json::array({v.x, v.y, v.z}); };
  json j;
  j["grid"] = {{"dims", {g.grid.dims.nx, g.grid.dims.ny, g.grid.dims.nz}},
               {"spacing", {g.grid.spacing.dx, g.grid.spacing.dy, g.grid.spacing.dz}},
               {"origin", xyz(g.grid.origin)}};
  j["nodes"] = json::array();
  for (const auto& n : g.nodes) {
    json jn = {{"id", n.id}, {"kind", kind_name(n.kind)}, {"voxel", ijk(n.voxel)},
               {"position", xyz(n.position)}, {"radius", n.radius_mm}};
    if (n.kind == NodeKind::ChamberPort) jn["chamber"] = label_name(n.chamber);
    j["nodes"].push_back(std::move(jn));
  }
  j["edges"] = json::array();
  for (const auto& e : g.edges) {
    json path = json::array();
    for (const auto& p : e.path) path.push_back(ijk(p));
    j["edges"].push_back({{"id", e.id}, {"source", e.source}, {"target", e.target},
                          {"length", e.length_mm}, {"radius", e.radius_mm},
                          {"direction", xyz(e.direction)}, {"path", std::move(path)}});
  }
  return j;
}

inline VesselGraph graph_from_json(const nlohmann::json& j) {
  try {
    VesselGraph g;
    const auto& gr = j.at("grid");
    g.grid.dims = {gr.at("dims").at(0).get<std::int64_t>(), gr.at("dims").at(1).get<std::int64_t>(),
                   gr.at("dims").at(2).get<std::int64_t>()};
    g.grid.spacing = {gr.at("spacing").at(0).get<double>(), gr.at("spacing").at(1).get<double>(),
                      gr.at("spacing").at(2).get<double>()};
    g.grid.spacing.validate();
    g.grid.origin = {gr.at("origin").at(0).get<double>(), gr.at("origin").at(1).get<double>(),
                     gr.at("origin").at(2).get<double>()};
    auto ijk = [](const nlohmann::json& a) {
      return Index3{a.at(0).get<std::int64_t>(), a.at(1).get<std::int64_t>(), a.at(2).get<std::int64_t>()};
    };
    auto xyz = [](const nlohmann::json& a) {
      return Vec3{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
    };
    for (const auto& jn : j.at("nodes")) {
      VesselNode n;
      n.id = jn.at("id").get<int>();
      n.kind = kind_from_name(jn.at("kind").get<std::string>());
      n.voxel = ijk(jn.at("voxel"));
      n.voxels = {n.voxel};
      n.position = xyz(jn.at("position"));
      n.radius_mm = jn.at("radius").get<double>();
      if (n.kind == NodeKind::ChamberPort) {
        n.chamber = label_from_name(jn.at("chamber").get<std::string>());
        if (!is_chamber(n.chamber)) throw Error("port chamber must be LV, RV, LA or RA");
      }
      if (n.id != static_cast<int>(g.nodes.size())) throw Error("node ids must be 0..n-1 in order");
      g.nodes.push_back(std::move(n));
    }
    for (const auto& je : j.at("edges")) {
      VesselEdge e;
      e.id = je.at("id").get<int>();
      e.source = je.at("source").get<int>();
      e.target = je.at("target").get<int>();
      e.length_mm = je.at("length").get<double>();
      e.radius_mm = je.at("radius").get<double>();
      e.direction = xyz(je.at("direction"));
      if (je.contains("path"))
        for (const auto& p : je.at("path")) e.path.push_back(ijk(p));
      if (e.id != static_cast<int>(g.edges.size())) throw Error("edge ids must be 0..m-1 in order");
      const auto n = static_cast<int>(g.nodes.size());
      if (e.source < 0 || e.source >= n || e.target < 0 || e.target >= n)
        throw Error("edge endpoint out of range");
      g.edges.push_back(std::move(e));
    }
    return g;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("graph json: ") + ex.what());
  }
}

}  // namespace chdseg
