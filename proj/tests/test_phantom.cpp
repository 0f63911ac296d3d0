#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace chdseg;
using namespace testsupport;

namespace {

struct TruthGraph {
  nlohmann::json j;
  std::string node_chamber(int id) const {
    const auto& n = j["nodes"][static_cast<std::size_t>(id)];
    return n["kind"] == "ChamberPort" ? n["chamber"].get<std::string>() : std::string();
  }
  /// Chambers at the ports of edges whose truth class is `cls`.
  std::multiset<std::string> ports(const std::string& cls) const {
    std::multiset<std::string> out;
    for (const auto& e : j["edges"]) {
      if (e["truth"] != cls) continue;
      for (const char* end : {"source", "target"}) {
        const auto c = node_chamber(e[end].get<int>());
        if (!c.empty()) out.insert(c);
      }
    }
    return out;
  }
  /// Node ids touched by edges of class `cls`.
  std::set<int> nodes(const std::string& cls) const {
    std::set<int> out;
    for (const auto& e : j["edges"])
      if (e["truth"] == cls) {
        out.insert(e["source"].get<int>());
        out.insert(e["target"].get<int>());
      }
    return out;
  }
};

const TruthGraph& truth_graph(Variant v) {
  static std::map<int, TruthGraph> cache;
  auto it = cache.find(static_cast<int>(v));
  if (it == cache.end()) it = cache.emplace(static_cast<int>(v), TruthGraph{phantom_truth_graph(phantom(v))}).first;
  return it->second;
}

bool touches(const std::set<int>& a, const std::set<int>& b) {
  for (int x : a)
    if (b.count(x)) return true;
  return false;
}

}  // namespace

TEST(Phantom, SameSpecGivesIdenticalVolumes) {
  PhantomSpec s;
  s.variant = Variant::CAT;
  s.dims = {64, 64, 64};
  s.scale = 0.45;
  s.seed = 3;
  const auto a = generate_phantom(s), b = generate_phantom(s);
  EXPECT_EQ(a.intensity.storage(), b.intensity.storage());
  EXPECT_EQ(a.labels.storage(), b.labels.storage());
  EXPECT_EQ(a.chambers.storage(), b.chambers.storage());
  s.seed = 4;
  EXPECT_NE(generate_phantom(s).intensity.storage(), a.intensity.storage());
}

TEST(Phantom, LabelVocabularyIsTheSevenClassesAndBackground) {
  for (auto v : kVariants) {
    const auto& ph = phantom(v);
    std::set<int> codes;
    for (std::size_t i = 0; i < ph.labels.size(); ++i) codes.insert(code(ph.labels[i]));
    EXPECT_EQ(codes, (std::set<int>{0, 1, 2, 3, 4, 5, 6, 7})) << variant_name(v);
    for (std::size_t i = 0; i < ph.chambers.size(); ++i) {
      const Label c = ph.chambers[i];
      ASSERT_TRUE(c == Label::Background || is_chamber(c) || c == Label::Myo);
      if (c != Label::Background) ASSERT_EQ(c, ph.labels[i]);
    }
  }
}

TEST(Phantom, IntensityLevelsFollowTheLabels) {
  const auto& ph = phantom(Variant::Normal);
  double sum[3] = {}, n[3] = {};
  for (std::size_t i = 0; i < ph.labels.size(); ++i) {
    const Label l = ph.labels[i];
    const int k = is_blood_pool_label(l) ? 0 : (l == Label::Myo ? 1 : 2);
    sum[k] += ph.intensity[i];
    n[k] += 1;
  }
  EXPECT_NEAR(sum[0] / n[0], 300.0, 1.0);
  EXPECT_NEAR(sum[1] / n[1], 80.0, 1.0);
  EXPECT_NEAR(sum[2] / n[2], -50.0, 1.0);
}

TEST(Phantom, RejectsSmallDimsAndOverflow) {
  PhantomSpec s;
  s.dims = {63, 128, 128};
  EXPECT_THROW(generate_phantom(s), Error);
  s.dims = {128, 128, 128};
  s.scale = 2.0;
  try {
    (void)generate_phantom(s);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("overflow"), std::string::npos);
  }
  s.scale = -1;
  EXPECT_THROW(generate_phantom(s), Error);
}

TEST(Phantom, BloodPoolIsOneComponent) {
  for (auto v : kVariants) {
    const auto cc = connected_components(blood_pool_mask(phantom(v).labels), Connectivity::TwentySix);
    EXPECT_EQ(cc.component_count(), 1u) << variant_name(v);
  }
}

TEST(Phantom, NormalConnectivity) {
  const auto& g = truth_graph(Variant::Normal);
  EXPECT_EQ(g.ports("Ao"), (std::multiset<std::string>{"LV"}));
  EXPECT_EQ(g.ports("PA"), (std::multiset<std::string>{"RV"}));
  EXPECT_EQ(g.ports("LA"), (std::multiset<std::string>{"LA"}));
  EXPECT_EQ(g.ports("RA"), (std::multiset<std::string>{"RA", "RA"}));
}

TEST(Phantom, TgaSwapsTheVentricles) {
  const auto& g = truth_graph(Variant::TGA);
  EXPECT_EQ(g.ports("Ao"), (std::multiset<std::string>{"RV"}));
  EXPECT_EQ(g.ports("PA"), (std::multiset<std::string>{"LV"}));
}

TEST(Phantom, CatHasOneTrunkWithPaOffIt) {
  const auto& g = truth_graph(Variant::CAT);
  EXPECT_EQ(g.ports("Ao"), (std::multiset<std::string>{"LV", "RV"}));
  EXPECT_TRUE(g.ports("PA").empty());
  EXPECT_TRUE(touches(g.nodes("PA"), g.nodes("Ao")));
  // a single vessel leaves the ventricles: both ventricular legs meet at one junction
  std::set<int> leg_ends;
  for (const auto& e : g.j["edges"]) {
    const auto s = g.node_chamber(e["source"].get<int>()), t = g.node_chamber(e["target"].get<int>());
    if (s == "LV" || s == "RV") leg_ends.insert(e["target"].get<int>());
    if (t == "LV" || t == "RV") leg_ends.insert(e["source"].get<int>());
  }
  EXPECT_EQ(leg_ends.size(), 1u);
}

TEST(Phantom, PuaHasNoPaAtTheRightVentricle) {
  const auto& g = truth_graph(Variant::PuA);
  EXPECT_TRUE(g.ports("PA").empty());
  EXPECT_EQ(g.ports("Ao"), (std::multiset<std::string>{"LV"}));
  EXPECT_TRUE(touches(g.nodes("PA"), g.nodes("Ao")));
  for (const auto& n : g.j["nodes"]) EXPECT_FALSE(n["kind"] == "ChamberPort" && n["chamber"] == "RV");
}

TEST(Phantom, SeptalDefectJoinsTheVentricles) {
  PhantomSpec s;
  s.seed = 1;
  auto ventricles = [](const Phantom& ph) {
    return make_mask(ph.chambers, [](Label l) { return l == Label::LV || l == Label::RV; });
  };
  const auto closed = generate_phantom(s);
  s.septal_defect_mm = 4;
  const auto open = generate_phantom(s);
  EXPECT_EQ(connected_components(ventricles(closed), Connectivity::Six).component_count(), 2u);
  EXPECT_EQ(connected_components(ventricles(open), Connectivity::Six).component_count(), 1u);
}

TEST(Degrade, ZeroSpecIsIdentity) {
  const auto& ph = phantom(Variant::Normal);
  EXPECT_EQ(degrade_labels(ph.labels, DegradeSpec{}).storage(), ph.labels.storage());
}

TEST(Degrade, SameSeedSameOutput) {
  const auto& ph = phantom(Variant::TGA);
  DegradeSpec d;
  d.jitter_mm = 1.5;
  d.morph_probability = 0.5;
  d.dropout_count = 3;
  d.dropout_radius_mm = 3;
  d.seed = 11;
  const auto a = degrade_labels(ph.labels, d);
  EXPECT_EQ(a.storage(), degrade_labels(ph.labels, d).storage());
  d.seed = 12;
  EXPECT_NE(a.storage(), degrade_labels(ph.labels, d).storage());
}

TEST(Degrade, RejectsNegativeMagnitudes) {
  const auto& ph = phantom(Variant::Normal);
  DegradeSpec d;
  d.jitter_mm = -1;
  EXPECT_THROW(degrade_labels(ph.labels, d), Error);
  d = {};
  d.morph_probability = 1.5;
  EXPECT_THROW(degrade_labels(ph.labels, d), Error);
}

TEST(Degrade, OneMillimetreJitterKeepsDiceAboveNinety) {
  const auto& ph = phantom(Variant::Normal);
  DegradeSpec d;
  d.jitter_mm = 1.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    d.seed = seed;
    const auto out = degrade_labels(ph.labels, d);
    for (int c = 1; c <= 7; ++c) {
      const double v = dice(out, ph.labels, static_cast<Label>(c));
      EXPECT_GE(v, 0.90) << label_name(static_cast<Label>(c)) << " seed " << seed;
      EXPECT_LT(v, 1.0);
    }
  }
}
