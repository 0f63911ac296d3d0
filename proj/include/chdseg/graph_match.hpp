#pragma once

// Error-tolerant attributed graph matching of vessel graphs against anatomy
// templates.
//
// A correspondence maps each graph node to a template node or leaves it
// unmapped (-1). Graph edges whose endpoints map onto a template edge take
// that edge's vessel class; the first such graph edge by id claims it and
// any other graph edge is rejected. Ports only map to ports of the same
// chamber during search. match_graph minimises the cost jointly over all
// templates with branch and bound; brute_force_match enumerates everything
// and serves as the reference.

#include <algorithm>
#include <climits>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chdseg/builtin_templates.hpp"
#include "chdseg/vessel_graph.hpp"

namespace chdseg {

enum class VesselClass { Ao, PA, LA, RA, Unclassified };

inline std::string class_name(VesselClass c) {
  switch (c) {
    case VesselClass::Ao: return "Ao";
    case VesselClass::PA: return "PA";
    case VesselClass::LA: return "LA";
    case VesselClass::RA: return "RA";
    case VesselClass::Unclassified: return "Unclassified";
  }
  return "?";
}

inline VesselClass class_from_name(const std::string& s) {
  if (s == "Ao") return VesselClass::Ao;
  if (s == "PA") return VesselClass::PA;
  if (s == "LA") return VesselClass::LA;
  if (s == "RA") return VesselClass::RA;
  if (s == "Unclassified") return VesselClass::Unclassified;
  throw Error("invalid vessel class '" + s + "' (expected Ao, PA, LA or RA)");
}

inline Label class_label(VesselClass c) {
  switch (c) {
    case VesselClass::Ao: return Label::Ao;
    case VesselClass::PA: return Label::PA;
    case VesselClass::LA: return Label::LA;
    case VesselClass::RA: return Label::RA;
    case VesselClass::Unclassified: break;
  }
  return Label::Background;
}

struct MatchWeights {
  double port = 10, kind = 2, length = 1, radius = 1, miss = 5, extra = 1;
};

struct TemplateNode {
  int id = 0;
  NodeKind kind = NodeKind::Endpoint;
  Label chamber = Label::Background;
};

struct TemplateEdge {
  int id = 0;
  int source = 0, target = 0;
  VesselClass cls = VesselClass::Ao;
  double length = 1, length_tol = 0;
  double radius = 1, radius_tol = 0;
  bool optional = false;
};

struct TemplateGraph {
  std::string variant;
  std::vector<TemplateNode> nodes;
  std::vector<TemplateEdge> edges;
  MatchWeights weights;

  /// Template edge joining a and b (either direction), or -1.
  int find_edge(int a, int b) const {
    for (const auto& e : edges)
      if ((e.source == a && e.target == b) || (e.source == b && e.target == a)) return e.id;
    return -1;
  }
  int mandatory_edges() const {
    return static_cast<int>(std::count_if(edges.begin(), edges.end(), [](const TemplateEdge& e) { return !e.optional; }));
  }
};

using TemplateSet = std::vector<TemplateGraph>;

// ---------------------------------------------------------------------------
// Template files

inline TemplateGraph parse_template(const nlohmann::json& j) {
  TemplateGraph t;
  try {
    t.variant = j.at("variant").get<std::string>();
    if (t.variant.empty()) throw Error("template variant name is empty");
    for (const auto& jn : j.at("nodes")) {
      TemplateNode n;
      n.id = jn.at("id").get<int>();
      n.kind = kind_from_name(jn.at("kind").get<std::string>());
      if (n.kind == NodeKind::ChamberPort) {
        n.chamber = label_from_name(jn.at("chamber").get<std::string>());
        if (!is_chamber(n.chamber)) throw Error("port chamber must be LV, RV, LA or RA");
      } else if (jn.contains("chamber")) {
        throw Error("only ChamberPort nodes carry a chamber");
      }
      if (n.id != static_cast<int>(t.nodes.size())) throw Error("template node ids must be 0..n-1 in order");
      t.nodes.push_back(n);
    }
    for (const auto& je : j.at("edges")) {
      TemplateEdge e;
      e.id = static_cast<int>(t.edges.size());
      if (je.contains("id") && je.at("id").get<int>() != e.id) throw Error("template edge ids must be 0..m-1 in order");
      e.source = je.at("source").get<int>();
      e.target = je.at("target").get<int>();
      e.cls = class_from_name(je.at("class").get<std::string>());
      if (e.cls == VesselClass::Unclassified) throw Error("invalid vessel class 'Unclassified'");
      e.length = je.at("length").get<double>();
      e.length_tol = je.value("length_tol", 0.0);
      e.radius = je.at("radius").get<double>();
      e.radius_tol = je.value("radius_tol", 0.0);
      e.optional = je.value("optional", false);
      const int n = static_cast<int>(t.nodes.size());
      if (e.source < 0 || e.source >= n || e.target < 0 || e.target >= n) throw Error("template edge endpoint out of range");
      if (e.source == e.target) throw Error("template self-loops are not allowed");
      if (t.find_edge(e.source, e.target) >= 0) throw Error("template has parallel edges");
      if (!(e.length > 0) || !(e.radius > 0) || e.length_tol < 0 || e.radius_tol < 0)
        throw Error("template edge attributes must be positive");
      t.edges.push_back(e);
    }
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      t.weights.port = w.value("port", t.weights.port);
      t.weights.kind = w.value("kind", t.weights.kind);
      t.weights.length = w.value("length", t.weights.length);
      t.weights.radius = w.value("radius", t.weights.radius);
      t.weights.miss = w.value("miss", t.weights.miss);
      t.weights.extra = w.value("extra", t.weights.extra);
      for (double v : {t.weights.port, t.weights.kind, t.weights.length, t.weights.radius, t.weights.miss, t.weights.extra})
        if (!(v >= 0) || !std::isfinite(v)) throw Error("template weights must be finite and >= 0");
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error("template schema: " + std::string(ex.what()));
  }
  if (t.nodes.empty() || t.edges.empty()) throw Error("template '" + t.variant + "' has no nodes or edges");
  if (std::none_of(t.nodes.begin(), t.nodes.end(), [](const TemplateNode& n) { return n.kind == NodeKind::ChamberPort; }))
    throw Error("template '" + t.variant + "' has no ChamberPort node");
  return t;
}

inline TemplateSet parse_templates(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("templates") || !j.at("templates").is_array())
    throw Error("template schema: expected {\"templates\": [...]}");
  TemplateSet set;
  for (const auto& jt : j.at("templates")) set.push_back(parse_template(jt));
  if (set.empty()) throw Error("template set is empty");
  for (std::size_t a = 0; a < set.size(); ++a)
    for (std::size_t b = 0; b < a; ++b)
      if (set[a].variant == set[b].variant) throw Error("duplicate template variant '" + set[a].variant + "'");
  return set;
}

inline TemplateSet load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open template file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw Error("template file '" + path + "': " + ex.what());
  }
  return parse_templates(j);
}

inline TemplateSet builtin_templates() { return parse_templates(nlohmann::json::parse(kBuiltinTemplatesJson)); }

// ---------------------------------------------------------------------------
// Cost

struct Correspondence {
  std::vector<int> node_map;  // graph node -> template node, -1 unmapped
};

struct CostBreakdown {
  double node = 0;
  double edge = 0;
  double structural = 0;
  int missed_edges = 0;    // mandatory template edges left unmatched
  int rejected_edges = 0;  // graph edges mapped to the reject class

  double total() const { return node + edge + structural; }
};

namespace detail {

inline bool port_mismatch(const VesselNode& g, const TemplateNode& t) {
  const bool gp = g.kind == NodeKind::ChamberPort, tp = t.kind == NodeKind::ChamberPort;
  if (!gp && !tp) return false;
  return !(gp && tp && g.chamber == t.chamber);
}

inline bool feasible(const VesselNode& g, const TemplateNode& t) { return !port_mismatch(g, t); }

inline double node_cost(const VesselNode& g, const TemplateNode& t, const MatchWeights& w) {
  return w.port * (port_mismatch(g, t) ? 1.0 : 0.0) + w.kind * (g.kind != t.kind ? 1.0 : 0.0);
}

inline double deviation(double value, double nominal, double tol) {
  return std::clamp(std::max(0.0, std::abs(value - nominal) - tol) / nominal, 0.0, 1.0);
}

inline double edge_cost(const VesselEdge& g, const TemplateEdge& t, const MatchWeights& w) {
  return w.length * deviation(g.length_mm, t.length, t.length_tol) + w.radius * deviation(g.radius_mm, t.radius, t.radius_tol);
}

inline void check_correspondence(const Correspondence& c, const VesselGraph& g, const TemplateGraph& t) {
  if (c.node_map.size() != g.nodes.size()) throw Error("invalid correspondence: size differs from graph node count");
  std::vector<bool> used(t.nodes.size(), false);
  for (int m : c.node_map) {
    if (m == -1) continue;
    if (m < 0 || m >= static_cast<int>(t.nodes.size())) throw Error("invalid correspondence: template node out of range");
    if (used[static_cast<std::size_t>(m)]) throw Error("invalid correspondence: not injective");
    used[static_cast<std::size_t>(m)] = true;
  }
}

}  // namespace detail

/// Graph edge -> claimed template edge (or -1) induced by a correspondence.
inline std::vector<int> induced_edge_map(const Correspondence& c, const VesselGraph& g, const TemplateGraph& t) {
  detail::check_correspondence(c, g, t);
  std::vector<int> map(g.edges.size(), -1);
  std::vector<bool> claimed(t.edges.size(), false);
  for (const auto& e : g.edges) {
    const int a = c.node_map[static_cast<std::size_t>(e.source)], b = c.node_map[static_cast<std::size_t>(e.target)];
    if (a < 0 || b < 0) continue;
    const int te = t.find_edge(a, b);
    if (te < 0 || claimed[static_cast<std::size_t>(te)]) continue;
    claimed[static_cast<std::size_t>(te)] = true;
    map[static_cast<std::size_t>(e.id)] = te;
  }
  return map;
}

inline CostBreakdown match_cost(const Correspondence& c, const VesselGraph& g, const TemplateGraph& t) {
  const auto map = induced_edge_map(c, g, t);
  const auto& w = t.weights;
  CostBreakdown cost;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const int m = c.node_map[i];
    if (m >= 0) cost.node += detail::node_cost(g.nodes[i], t.nodes[static_cast<std::size_t>(m)], w);
  }
  std::vector<bool> covered(t.edges.size(), false);
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (map[i] < 0) {
      ++cost.rejected_edges;
      continue;
    }
    covered[static_cast<std::size_t>(map[i])] = true;
    cost.edge += detail::edge_cost(g.edges[i], t.edges[static_cast<std::size_t>(map[i])], w);
  }
  for (const auto& te : t.edges)
    if (!te.optional && !covered[static_cast<std::size_t>(te.id)]) ++cost.missed_edges;
  cost.structural = w.miss * cost.missed_edges + w.extra * cost.rejected_edges;
  return cost;
}

// ---------------------------------------------------------------------------
// Search

struct MatchResult {
  std::string variant;
  int variant_index = -1;
  Correspondence corr;
  std::vector<int> edge_map;              // graph edge -> template edge or -1
  std::vector<VesselClass> edge_class;    // per graph edge
  CostBreakdown cost;
};

namespace detail {

inline std::vector<int> tie_key(const std::vector<int>& node_map) {
  std::vector<int> k = node_map;
  for (auto& v : k)
    if (v < 0) v = INT_MAX;
  return k;
}

/// Strict "better than" on (cost, template index, correspondence).
inline bool better(double cost, int tmpl, const std::vector<int>& map, const MatchResult& best) {
  if (best.variant_index < 0) return true;
  if (cost != best.cost.total()) return cost < best.cost.total();
  if (tmpl != best.variant_index) return tmpl < best.variant_index;
  return tie_key(map) < tie_key(best.corr.node_map);
}

inline MatchResult make_result(const VesselGraph& g, const TemplateGraph& t, int index, const Correspondence& c) {
  MatchResult r;
  r.variant = t.variant;
  r.variant_index = index;
  r.corr = c;
  r.edge_map = induced_edge_map(c, g, t);
  r.cost = match_cost(c, g, t);
  for (int te : r.edge_map)
    r.edge_class.push_back(te < 0 ? VesselClass::Unclassified : t.edges[static_cast<std::size_t>(te)].cls);
  return r;
}

inline void consider(const VesselGraph& g, const TemplateGraph& t, int index, const std::vector<int>& map,
                     MatchResult& best) {
  const Correspondence c{map};
  const double cost = match_cost(c, g, t).total();
  if (better(cost, index, map, best)) best = make_result(g, t, index, c);
}

class BranchAndBound {
public:
  BranchAndBound(const VesselGraph& g, const TemplateGraph& t, int index, MatchResult& best)
      : g_(g), t_(t), index_(index), best_(best) {
    const auto n = g.nodes.size();
    incident_.resize(n);
    for (const auto& e : g.edges) {
      incident_[static_cast<std::size_t>(e.source)].push_back(e.id);
      if (e.target != e.source) incident_[static_cast<std::size_t>(e.target)].push_back(e.id);
    }
    for (auto& v : incident_) std::sort(v.begin(), v.end());
    order_.resize(n);
    for (std::size_t i = 0; i < n; ++i) order_[i] = static_cast<int>(i);
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) {
      const bool pa = g.nodes[static_cast<std::size_t>(a)].kind == NodeKind::ChamberPort;
      const bool pb = g.nodes[static_cast<std::size_t>(b)].kind == NodeKind::ChamberPort;
      if (pa != pb) return pa;
      return incident_[static_cast<std::size_t>(a)].size() > incident_[static_cast<std::size_t>(b)].size();
    });
    pos_.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k) pos_[static_cast<std::size_t>(order_[k])] = static_cast<int>(k);
    map_.assign(n, -1);
    pre_.assign(t.nodes.size(), -1);
    claim_.assign(t.edges.size(), -1);
  }

  void run() { descend(0, 0.0); }

private:
  bool decided(int node, int depth) const { return pos_[static_cast<std::size_t>(node)] < depth; }

  /// Mandatory template edges that can no longer be covered.
  int certain_misses(int depth) const {
    int missed = 0;
    for (const auto& te : t_.edges) {
      if (te.optional || claim_[static_cast<std::size_t>(te.id)] >= 0) continue;
      const int pa = pre_[static_cast<std::size_t>(te.source)], pb = pre_[static_cast<std::size_t>(te.target)];
      if (pa >= 0 && pb >= 0) {
        ++missed;
      } else if (pa >= 0 || pb >= 0) {
        const int have = pa >= 0 ? pa : pb;
        const int need = pa >= 0 ? te.target : te.source;
        if (!open_neighbour(have, need, depth)) ++missed;
      } else if (!open_candidate(te.source, depth) || !open_candidate(te.target, depth)) {
        ++missed;
      }
    }
    return missed;
  }

  bool open_candidate(int tnode, int depth) const {
    for (std::size_t k = static_cast<std::size_t>(depth); k < order_.size(); ++k)
      if (feasible(g_.nodes[static_cast<std::size_t>(order_[k])], t_.nodes[static_cast<std::size_t>(tnode)])) return true;
    return false;
  }

  bool open_neighbour(int gnode, int tnode, int depth) const {
    for (int eid : incident_[static_cast<std::size_t>(gnode)]) {
      const auto& e = g_.edges[static_cast<std::size_t>(eid)];
      const int other = e.source == gnode ? e.target : e.source;
      if (!decided(other, depth) &&
          feasible(g_.nodes[static_cast<std::size_t>(other)], t_.nodes[static_cast<std::size_t>(tnode)]))
        return true;
    }
    return false;
  }

  void descend(int depth, double acc) {
    const auto& w = t_.weights;
    const double bound = acc + w.miss * certain_misses(depth);
    if (best_.variant_index >= 0 && bound > best_.cost.total() + 1e-9) return;
    if (depth == static_cast<int>(order_.size())) {
      consider(g_, t_, index_, map_, best_);
      return;
    }
    const int gn = order_[static_cast<std::size_t>(depth)];
    const auto& node = g_.nodes[static_cast<std::size_t>(gn)];
    for (int tn = 0; tn <= static_cast<int>(t_.nodes.size()); ++tn) {
      const bool unmapped = tn == static_cast<int>(t_.nodes.size());
      double add = 0;
      if (!unmapped) {
        if (pre_[static_cast<std::size_t>(tn)] >= 0 || !feasible(node, t_.nodes[static_cast<std::size_t>(tn)])) continue;
        map_[static_cast<std::size_t>(gn)] = tn;
        pre_[static_cast<std::size_t>(tn)] = gn;
        add += node_cost(node, t_.nodes[static_cast<std::size_t>(tn)], w);
      } else {
        map_[static_cast<std::size_t>(gn)] = -1;
      }
      // edges whose endpoints are now all decided, in id order
      std::vector<int> claimed_here;
      for (int eid : incident_[static_cast<std::size_t>(gn)]) {
        const auto& e = g_.edges[static_cast<std::size_t>(eid)];
        const int other = e.source == gn ? e.target : e.source;
        if (other != gn && !decided(other, depth)) continue;
        const int a = map_[static_cast<std::size_t>(e.source)], b = map_[static_cast<std::size_t>(e.target)];
        const int te = (a >= 0 && b >= 0) ? t_.find_edge(a, b) : -1;
        if (te >= 0 && claim_[static_cast<std::size_t>(te)] < 0) {
          claim_[static_cast<std::size_t>(te)] = eid;
          claimed_here.push_back(te);
          add += edge_cost(e, t_.edges[static_cast<std::size_t>(te)], w);
        } else {
          add += w.extra;
        }
      }
      descend(depth + 1, acc + add);
      for (int te : claimed_here) claim_[static_cast<std::size_t>(te)] = -1;
      if (!unmapped) pre_[static_cast<std::size_t>(tn)] = -1;
      map_[static_cast<std::size_t>(gn)] = -1;
    }
  }

  const VesselGraph& g_;
  const TemplateGraph& t_;
  int index_;
  MatchResult& best_;
  std::vector<std::vector<int>> incident_;
  std::vector<int> order_, pos_, map_, pre_, claim_;
};

inline void enumerate_all(const VesselGraph& g, const TemplateGraph& t, int index, std::size_t node,
                          std::vector<int>& map, std::vector<bool>& used, MatchResult& best) {
  if (node == g.nodes.size()) {
    consider(g, t, index, map, best);
    return;
  }
  for (int tn = 0; tn < static_cast<int>(t.nodes.size()); ++tn) {
    if (used[static_cast<std::size_t>(tn)] || !feasible(g.nodes[node], t.nodes[static_cast<std::size_t>(tn)])) continue;
    used[static_cast<std::size_t>(tn)] = true;
    map[node] = tn;
    enumerate_all(g, t, index, node + 1, map, used, best);
    used[static_cast<std::size_t>(tn)] = false;
  }
  map[node] = -1;
  enumerate_all(g, t, index, node + 1, map, used, best);
}

inline void check_graph(const VesselGraph& g) {
  if (g.nodes.empty()) throw Error("match: empty graph");
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (g.nodes[i].id != static_cast<int>(i)) throw Error("match: node ids must be 0..n-1");
  for (std::size_t i = 0; i < g.edges.size(); ++i)
    if (g.edges[i].id != static_cast<int>(i)) throw Error("match: edge ids must be 0..m-1");
}

}  // namespace detail

inline constexpr std::size_t kBruteForceMaxNodes = 12;

/// Minimum-cost correspondence over every template in the set.
inline MatchResult match_graph(const VesselGraph& g, const TemplateSet& templates) {
  detail::check_graph(g);
  if (templates.empty()) throw Error("match: empty template set");
  MatchResult best;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    detail::BranchAndBound bb(g, templates[i], static_cast<int>(i), best);
    bb.run();
  }
  return best;
}

inline MatchResult brute_force_match(const VesselGraph& g, const TemplateSet& templates) {
  detail::check_graph(g);
  if (g.nodes.size() > kBruteForceMaxNodes) throw Error("brute_force_match: graph too large for enumeration");
  if (templates.empty()) throw Error("match: empty template set");
  MatchResult best;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    std::vector<int> map(g.nodes.size(), -1);
    std::vector<bool> used(templates[i].nodes.size(), false);
    detail::enumerate_all(g, templates[i], static_cast<int>(i), 0, map, used, best);
  }
  return best;
}

inline MatchResult brute_force_match(const VesselGraph& g, const TemplateGraph& t) {
  return brute_force_match(g, TemplateSet{t});
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const MatchResult& r) {
  using nlohmann::json;
  json j;
  j["variant"] = r.variant;
  j["variant_index"] = r.variant_index;
  j["cost"] = {{"node", r.cost.node},
               {"edge", r.cost.edge},
               {"structural", r.cost.structural},
               {"total", r.cost.total()},
               {"missed_edges", r.cost.missed_edges},
               {"rejected_edges", r.cost.rejected_edges}};
  j["node_map"] = json::array();
  for (int m : r.corr.node_map) j["node_map"].push_back(m < 0 ? json(nullptr) : json(m));
  j["edges"] = json::array();
  for (std::size_t i = 0; i < r.edge_map.size(); ++i)
    j["edges"].push_back({{"id", i},
                          {"template_edge", r.edge_map[i] < 0 ? json(nullptr) : json(r.edge_map[i])},
                          {"class", class_name(r.edge_class[i])}});
  return j;
}

inline MatchResult match_from_json(const nlohmann::json& j) {
  try {
    MatchResult r;
    r.variant = j.at("variant").get<std::string>();
    r.variant_index = j.at("variant_index").get<int>();
    const auto& c = j.at("cost");
    r.cost.node = c.at("node").get<double>();
    r.cost.edge = c.at("edge").get<double>();
    r.cost.structural = c.at("structural").get<double>();
    r.cost.missed_edges = c.at("missed_edges").get<int>();
    r.cost.rejected_edges = c.at("rejected_edges").get<int>();
    for (const auto& m : j.at("node_map")) r.corr.node_map.push_back(m.is_null() ? -1 : m.get<int>());
    for (const auto& e : j.at("edges")) {
      r.edge_map.push_back(e.at("template_edge").is_null() ? -1 : e.at("template_edge").get<int>());
      r.edge_class.push_back(class_from_name(e.at("class").get<std::string>()));
    }
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("match json: ") + ex.what());
  }
}

}  // namespace chdseg
