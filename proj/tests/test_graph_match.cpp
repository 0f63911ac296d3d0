#include <gtest/gtest.h>

#include <chrono>
#include <numeric>

#include "support.hpp"

using namespace chdseg;
using namespace testsupport;

namespace {

/// A graph that realizes template `t` exactly, at nominal lengths and radii.
VesselGraph realize(const TemplateGraph& t) {
  VesselGraph g;
  g.grid = {{static_cast<std::int64_t>(t.nodes.size()), 1, 1}, {1, 1, 1}, {0, 0, 0}};
  for (const auto& tn : t.nodes) {
    VesselNode n;
    n.id = tn.id;
    n.kind = tn.kind;
    n.chamber = tn.chamber;
    n.voxel = {tn.id, 0, 0};
    n.radius_mm = 3;
    g.nodes.push_back(n);
  }
  for (const auto& te : t.edges) {
    VesselEdge e;
    e.id = te.id;
    e.source = te.source;
    e.target = te.target;
    e.length_mm = te.length;
    e.radius_mm = te.radius;
    g.edges.push_back(e);
  }
  return g;
}

/// Renames graph nodes by `perm` (old id -> new id); edge ids stay.
VesselGraph relabel(const VesselGraph& g, const std::vector<int>& perm) {
  VesselGraph out = g;
  for (const auto& n : g.nodes) {
    auto& dst = out.nodes[static_cast<std::size_t>(perm[static_cast<std::size_t>(n.id)])];
    dst = n;
    dst.id = perm[static_cast<std::size_t>(n.id)];
  }
  out.edges.clear();
  for (const auto& old : g.edges) {
    VesselEdge e = old;
    e.source = perm[static_cast<std::size_t>(old.source)];
    e.target = perm[static_cast<std::size_t>(old.target)];
    out.edges.push_back(e);
  }
  return out;
}

}  // namespace

TEST(Templates, BuiltinSetEqualsTheDataFile) {
  const auto builtin = builtin_templates();
  const auto file = load_templates(source_path("data/templates.json").string());
  ASSERT_EQ(builtin.size(), 4u);
  std::vector<std::string> names;
  for (const auto& t : builtin) names.push_back(t.variant);
  EXPECT_EQ(names, (std::vector<std::string>{"Normal", "TGA", "CAT", "PuA"}));
  for (std::size_t i = 0; i < builtin.size(); ++i) {
    EXPECT_EQ(builtin[i].variant, file[i].variant);
    ASSERT_EQ(builtin[i].edges.size(), file[i].edges.size());
    for (std::size_t e = 0; e < file[i].edges.size(); ++e) {
      EXPECT_EQ(builtin[i].edges[e].cls, file[i].edges[e].cls);
      EXPECT_EQ(builtin[i].edges[e].length, file[i].edges[e].length);
    }
  }
}

TEST(Templates, RejectsBadTemplates) {
  auto j = load_json(source_path("data/templates.json"));
  auto bad = j;
  bad["templates"][0]["edges"][0]["class"] = "Myo";
  EXPECT_THROW(parse_templates(bad), Error);
  bad = j;
  bad["templates"] = nlohmann::json::array();
  EXPECT_THROW(parse_templates(bad), Error);
  bad = j;
  bad["templates"][0]["edges"][0]["target"] = 99;
  EXPECT_THROW(parse_templates(bad), Error);
  EXPECT_THROW(load_templates("/nonexistent/templates.json"), Error);
}

TEST(MatchCost, TemplateMatchesItselfAtZeroCost) {
  for (const auto& t : builtin_templates()) {
    const auto g = realize(t);
    Correspondence c{std::vector<int>(g.nodes.size())};
    std::iota(c.node_map.begin(), c.node_map.end(), 0);
    EXPECT_DOUBLE_EQ(match_cost(c, g, t).total(), 0.0) << t.variant;
    const auto r = match_graph(g, builtin_templates());
    EXPECT_EQ(r.variant, t.variant);
    EXPECT_DOUBLE_EQ(r.cost.total(), 0.0);
    for (std::size_t e = 0; e < g.edges.size(); ++e) EXPECT_EQ(r.edge_class[e], t.edges[e].cls);
  }
}

TEST(MatchCost, SwappingAoAndPaCostsMore) {
  const auto templates = builtin_templates();
  const auto& normal = templates[0];
  const auto g = realize(normal);
  Correspondence right{std::vector<int>(g.nodes.size())};
  std::iota(right.node_map.begin(), right.node_map.end(), 0);
  // map the graph's LV port to the template's RV port and back
  int lv = -1, rv = -1;
  for (const auto& n : normal.nodes) {
    if (n.kind == NodeKind::ChamberPort && n.chamber == Label::LV) lv = n.id;
    if (n.kind == NodeKind::ChamberPort && n.chamber == Label::RV) rv = n.id;
  }
  ASSERT_GE(lv, 0);
  ASSERT_GE(rv, 0);
  auto swapped = right;
  std::swap(swapped.node_map[static_cast<std::size_t>(lv)], swapped.node_map[static_cast<std::size_t>(rv)]);
  EXPECT_GT(match_cost(swapped, g, normal).total(), match_cost(right, g, normal).total());
}

TEST(MatchCost, EmptyCorrespondenceCostsEveryEdge) {
  std::mt19937 rng(3);
  const auto templates = builtin_templates();
  for (int k = 0; k < 20; ++k) {
    const auto g = random_vessel_graph(rng, 8);
    for (const auto& t : templates) {
      const Correspondence c{std::vector<int>(g.nodes.size(), -1)};
      const auto cost = match_cost(c, g, t);
      EXPECT_DOUBLE_EQ(cost.total(), t.weights.miss * t.mandatory_edges() + t.weights.extra * double(g.edges.size()));
    }
  }
}

TEST(MatchCost, RejectsInvalidCorrespondences) {
  const auto t = builtin_templates()[0];
  const auto g = realize(t);
  Correspondence c{std::vector<int>(g.nodes.size(), -1)};
  c.node_map[0] = 0;
  c.node_map[1] = 0;
  EXPECT_THROW(match_cost(c, g, t), Error);
  c.node_map = {1};
  EXPECT_THROW(match_cost(c, g, t), Error);
  c.node_map.assign(g.nodes.size(), -1);
  c.node_map[0] = 1000;
  EXPECT_THROW(match_cost(c, g, t), Error);
}

TEST(Match, AgreesWithTheIndependentOracle) {
  const auto oracle = load_json(source_path("tests/data/match_oracle.json"));
  const auto templates = builtin_templates();
  ASSERT_GE(oracle["cases"].size(), 40u);
  for (const auto& c : oracle["cases"]) {
    const auto g = graph_from_json(c["graph"]);
    const auto& ex = c["expected"];
    for (const auto& r : {match_graph(g, templates), brute_force_match(g, templates)}) {
      EXPECT_EQ(r.variant, ex["variant"].get<std::string>());
      EXPECT_NEAR(r.cost.total(), ex["cost"].get<double>(), 1e-9);
      std::vector<int> nm;
      for (const auto& v : ex["node_map"]) nm.push_back(v.get<int>());
      EXPECT_EQ(r.corr.node_map, nm);
      ASSERT_EQ(r.edge_class.size(), ex["classes"].size());
      for (std::size_t e = 0; e < r.edge_class.size(); ++e)
        EXPECT_EQ(class_name(r.edge_class[e]), ex["classes"][e].get<std::string>());
    }
  }
}

TEST(Match, BranchAndBoundEqualsBruteForce) {
  std::mt19937 rng(20240611);
  const auto templates = builtin_templates();
  const auto start = std::chrono::steady_clock::now();
  for (int k = 0; k < 200; ++k) {
    const auto g = random_vessel_graph(rng, 8);
    const auto a = match_graph(g, templates), b = brute_force_match(g, templates);
    ASSERT_EQ(a.variant, b.variant) << "graph " << k;
    ASSERT_EQ(a.cost.total(), b.cost.total()) << "graph " << k;
    ASSERT_EQ(a.edge_class, b.edge_class) << "graph " << k;
    ASSERT_EQ(a.corr.node_map, b.corr.node_map) << "graph " << k;
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 60.0);
}

TEST(Match, NodeRenamingLeavesTheResultInvariant) {
  std::mt19937 rng(77);
  const auto templates = builtin_templates();
  for (int k = 0; k < 60; ++k) {
    const auto g = random_vessel_graph(rng, 7);
    std::vector<int> perm(g.nodes.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto h = relabel(g, perm);
    const auto a = match_graph(g, templates), b = match_graph(h, templates);
    EXPECT_EQ(a.cost.total(), b.cost.total()) << "graph " << k;
    EXPECT_EQ(a.variant, b.variant) << "graph " << k;
    // the renamed optimum is the original one renamed
    std::vector<int> renamed(a.corr.node_map.size());
    for (std::size_t i = 0; i < renamed.size(); ++i) renamed[static_cast<std::size_t>(perm[i])] = a.corr.node_map[i];
    const auto& t = templates[static_cast<std::size_t>(a.variant_index)];
    EXPECT_EQ(match_cost(Correspondence{renamed}, h, t).total(), b.cost.total()) << "graph " << k;
  }
  // on real graphs the optimum is unique
  for (auto v : kVariants) {
    const auto r = run_end_to_end(v, 1.0, 2);
    const auto& g = r.graph.graph;
    std::vector<int> perm(g.nodes.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    const auto h = relabel(g, perm);
    const auto m = match_graph(h, templates);
    EXPECT_EQ(m.variant, r.match.variant);
    EXPECT_EQ(m.cost.total(), r.match.cost.total());
    for (std::size_t e = 0; e < g.edges.size(); ++e)
      EXPECT_EQ(m.edge_class[e], r.match.edge_class[e]) << variant_name(v);
  }
}

TEST(Match, SelectsTheRightVariantOnRealGraphs) {
  for (auto v : kVariants) {
    const auto r = run_end_to_end(v, 1.0, 1);
    EXPECT_EQ(r.match.variant, variant_name(v));
  }
}

TEST(Match, CostNeverDropsWhenAnEdgeIsAdded) {
  // adding an unmatched edge can only add its reject cost; the optimum moves by at most that
  std::mt19937 rng(9);
  const auto templates = builtin_templates();
  for (int k = 0; k < 40; ++k) {
    auto g = random_vessel_graph(rng, 6);
    const double before = match_graph(g, templates).cost.total();
    VesselEdge e;
    e.id = static_cast<int>(g.edges.size());
    e.source = 0;
    e.target = static_cast<int>(g.nodes.size()) - 1;
    e.length_mm = 1000;
    e.radius_mm = 40;
    g.edges.push_back(e);
    const double after = match_graph(g, templates).cost.total();
    EXPECT_LE(after, before + templates[0].weights.extra + 1e-9) << "graph " << k;
  }
}

TEST(Match, BoundNeverPrunesTheOptimum) {
  // the optimum found equals the cost of its own correspondence
  std::mt19937 rng(41);
  const auto templates = builtin_templates();
  for (int k = 0; k < 40; ++k) {
    const auto g = random_vessel_graph(rng, 8);
    const auto r = match_graph(g, templates);
    EXPECT_DOUBLE_EQ(match_cost(r.corr, g, templates[static_cast<std::size_t>(r.variant_index)]).total(), r.cost.total());
    EXPECT_EQ(induced_edge_map(r.corr, g, templates[static_cast<std::size_t>(r.variant_index)]), r.edge_map);
  }
}

TEST(Match, GuardsAndErrors) {
  VesselGraph big;
  for (int i = 0; i < 13; ++i) {
    VesselNode n;
    n.id = i;
    big.nodes.push_back(n);
  }
  EXPECT_THROW(brute_force_match(big, builtin_templates()), Error);
  EXPECT_THROW(match_graph(VesselGraph{}, builtin_templates()), Error);
  EXPECT_THROW(match_graph(big, TemplateSet{}), Error);
}

TEST(Match, JsonRoundTrip) {
  const auto r = run_end_to_end(Variant::CAT, 1.0, 1).match;
  const auto j = to_json(r);
  const auto back = match_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.edge_class, r.edge_class);
  EXPECT_THROW(match_from_json(nlohmann::json::object()), Error);
}
