#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace chdseg;
using namespace testsupport;

namespace {

LabelVolume random_labels(std::mt19937& rng, Dims d = {12, 10, 8}) {
  LabelVolume v(d, {1, 1, 1});
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<Label>(rng() % 8);
  return v;
}

/// Two straight edges along x at y = 2 and y = 7 on a 10x10x3 grid.
VesselGraph two_edges() {
  VesselGraph g;
  g.grid = {{10, 10, 3}, {1, 1, 1}, {0, 0, 0}};
  for (int i = 0; i < 4; ++i) {
    VesselNode n;
    n.id = i;
    n.voxel = {i % 2 ? 9 : 0, i < 2 ? 2 : 7, 1};
    g.nodes.push_back(n);
  }
  for (int k = 0; k < 2; ++k) {
    VesselEdge e;
    e.id = k;
    e.source = 2 * k;
    e.target = 2 * k + 1;
    for (std::int64_t x = 0; x < 10; ++x) e.path.push_back({x, k ? 7 : 2, 1});
    e.length_mm = 9;
    e.radius_mm = 1;
    g.edges.push_back(e);
  }
  return g;
}

MatchResult classes(std::vector<VesselClass> c) {
  MatchResult r;
  r.edge_class = std::move(c);
  r.edge_map.assign(r.edge_class.size(), -1);
  return r;
}

}  // namespace

TEST(Dice, Axioms) {
  std::mt19937 rng(1);
  for (int k = 0; k < 30; ++k) {
    const auto a = random_labels(rng), b = random_labels(rng);
    for (Label c : kSubstructures) {
      EXPECT_DOUBLE_EQ(dice(a, a, c), 1.0);
      const double ab = dice(a, b, c);
      EXPECT_EQ(ab, dice(b, a, c));
      EXPECT_GE(ab, 0.0);
      EXPECT_LE(ab, 1.0);
    }
  }
  LabelVolume p({8, 8, 8}, {1, 1, 1}), t = p;
  for (std::int64_t z = 0; z < 8; ++z)
    for (std::int64_t y = 0; y < 8; ++y)
      for (std::int64_t x = 0; x < 4; ++x) {
        p(x, y, z) = Label::Ao;
        t(x + 4, y, z) = Label::Ao;
      }
  EXPECT_EQ(dice(p, t, Label::Ao), 0.0);  // disjoint
  EXPECT_EQ(dice(p, t, Label::PA), 1.0);  // both empty
  EXPECT_EQ(dice(p, LabelVolume::like(p), Label::Ao), 0.0);
  // P is half of T
  LabelVolume half = LabelVolume::like(p), full = LabelVolume::like(p);
  for (std::size_t i = 0; i < full.size(); ++i) {
    full[i] = Label::LV;
    if (i % 2 == 0) half[i] = Label::LV;
  }
  EXPECT_EQ(dice(half, full, Label::LV), geometry_oracle()["dice_subset_half"].get<double>());
  EXPECT_EQ(dice(half, full, Label::LV), 2.0 / 3.0);
  EXPECT_THROW(dice(p, LabelVolume({8, 8, 9}, {1, 1, 1}), Label::Ao), Error);
}

TEST(Dice, OneOnlyForIdenticalMasks) {
  std::mt19937 rng(2);
  auto a = random_labels(rng);
  auto b = a;
  b[5] = b[5] == Label::LV ? Label::RV : Label::LV;
  EXPECT_LT(dice(a, b, Label::LV), 1.0);
}

TEST(Report, MeanIsTheAverageOfTheSevenClasses) {
  std::mt19937 rng(3);
  const auto a = random_labels(rng), b = random_labels(rng);
  const auto r = report(a, b);
  double sum = 0;
  for (std::size_t k = 0; k < 7; ++k) {
    EXPECT_EQ(r.dice[k], dice(a, b, kSubstructures[k]));
    sum += r.dice[k];
  }
  EXPECT_DOUBLE_EQ(r.mean, sum / 7);
  const auto same = report(a, a);
  for (double d : same.dice) EXPECT_EQ(d, 1.0);
  EXPECT_EQ(same.mean, 1.0);
  const auto j = to_json(r);
  EXPECT_EQ(j["dice"].size(), 7u);
  EXPECT_DOUBLE_EQ(j["mean_dice"].get<double>(), r.mean);
  const auto text = to_text(r);
  EXPECT_NE(text.find("mean"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 9);
}

TEST(Report, AortaSegmentedAsPulmonaryArtery) {
  const auto& truth = phantom(Variant::Normal).labels;
  LabelVolume pred = truth;
  std::size_t ao = 0, pa = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ao += truth[i] == Label::Ao;
    pa += truth[i] == Label::PA;
  }
  // the main part of the aorta, from the root upwards in raster order
  std::size_t moved = 0;
  for (std::size_t i = 0; i < pred.size() && moved * 4 < ao * 3; ++i)
    if (pred[i] == Label::Ao) {
      pred[i] = Label::PA;
      ++moved;
    }
  ASSERT_GT(moved, 2 * pa);
  const auto r = report(pred, truth);
  EXPECT_LT(r.dice[5], 0.5);
  EXPECT_LT(r.dice[6], 0.5);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(r.dice[k], 1.0);
}

TEST(Summary, MeanAndSampleSd) {
  MetricsReport a, b, c;
  a.dice.fill(0.8);
  b.dice.fill(0.9);
  c.dice.fill(1.0);
  a.mean = 0.8;
  b.mean = 0.9;
  c.mean = 1.0;
  const auto s = summarize({a, b, c});
  EXPECT_EQ(s.cases, 3u);
  EXPECT_NEAR(s.mean[0], 0.9, 1e-12);
  EXPECT_NEAR(s.sd[0], 0.1, 1e-12);
  EXPECT_NEAR(s.mean_of_means, 0.9, 1e-12);
  EXPECT_EQ(summarize({a}).sd[3], 0.0);
  EXPECT_THROW(summarize({}), Error);
}

TEST(Assign, NoCandidatesReturnsTheChambers) {
  std::mt19937 rng(4);
  LabelVolume chambers({10, 10, 3}, {1, 1, 1});
  for (std::size_t i = 0; i < chambers.size(); ++i) chambers[i] = static_cast<Label>(rng() % 6);
  const auto out = assign_vessel_labels(Mask::like(chambers), two_edges(), classes({VesselClass::Ao, VesselClass::PA}), chambers);
  EXPECT_EQ(out.storage(), chambers.storage());
}

TEST(Assign, NearestEdgeWinsAndTiesGoToTheLowerId) {
  LabelVolume chambers({10, 10, 3}, {1, 1, 1});
  Mask cand = Mask::like(chambers);
  for (std::size_t i = 0; i < cand.size(); ++i) cand[i] = 1;
  for (std::int64_t x = 0; x < 10; ++x) chambers(x, 0, 0) = Label::LV;
  for (std::int64_t x = 0; x < 10; ++x) cand(x, 0, 0) = 0;
  const auto out = assign_vessel_labels(cand, two_edges(), classes({VesselClass::Ao, VesselClass::PA}), chambers);
  for (std::int64_t z = 0; z < 3; ++z)
    for (std::int64_t y = 0; y < 10; ++y)
      for (std::int64_t x = 0; x < 10; ++x) {
        if (y == 0 && z == 0) {
          EXPECT_EQ(out(x, y, z), Label::LV);
          continue;
        }
        // y = 4.5 is the midline; 4 is nearer edge 0, 5 nearer edge 1
        EXPECT_EQ(out(x, y, z), y <= 4 ? Label::Ao : Label::PA) << x << "," << y << "," << z;
      }
  // move edge 1 to y = 6 so y = 4 is a tie
  auto g = two_edges();
  for (auto& p : g.edges[1].path) p.y = 6;
  const auto tie = assign_vessel_labels(cand, g, classes({VesselClass::PA, VesselClass::Ao}), chambers);
  EXPECT_EQ(tie(3, 4, 1), Label::PA);
}

TEST(Assign, AllAortaMakesEveryCandidateAorta) {
  LabelVolume chambers({10, 10, 3}, {1, 1, 1});
  Mask cand = Mask::like(chambers);
  for (std::size_t i = 0; i < cand.size(); i += 3) cand[i] = 1;
  const auto out = assign_vessel_labels(cand, two_edges(), classes({VesselClass::Ao, VesselClass::Ao}), chambers);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], cand[i] ? Label::Ao : Label::Background);
}

TEST(Assign, UnclassifiedEdgesFallBackToTheNearestClassifiedOne) {
  LabelVolume chambers({10, 10, 3}, {1, 1, 1});
  Mask cand = Mask::like(chambers);
  for (std::size_t i = 0; i < cand.size(); ++i) cand[i] = 1;
  const auto out = assign_vessel_labels(cand, two_edges(), classes({VesselClass::Unclassified, VesselClass::RA}), chambers);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], Label::RA);
  // with nothing classified the candidates are cleared
  const auto none = assign_vessel_labels(cand, two_edges(), classes({VesselClass::Unclassified, VesselClass::Unclassified}), chambers);
  for (std::size_t i = 0; i < none.size(); ++i) EXPECT_EQ(none[i], Label::Background);
}

TEST(Assign, RejectsInconsistentInputs) {
  LabelVolume chambers({10, 10, 3}, {1, 1, 1});
  const Mask cand = Mask::like(chambers);
  EXPECT_THROW(assign_vessel_labels(cand, two_edges(), classes({VesselClass::Ao}), chambers), Error);
  EXPECT_THROW(assign_vessel_labels(Mask({10, 10, 4}, {1, 1, 1}), two_edges(), classes({VesselClass::Ao, VesselClass::Ao}), chambers),
               Error);
  auto g = two_edges();
  g.grid.dims = {11, 10, 3};
  EXPECT_THROW(assign_vessel_labels(cand, g, classes({VesselClass::Ao, VesselClass::Ao}), chambers), Error);
}

TEST(Assign, OutputUsesOnlyTheSevenClasses) {
  for (auto v : kVariants) {
    const auto r = run_end_to_end(v, 1.0, 1);
    for (std::size_t i = 0; i < r.labels.size(); ++i) ASSERT_LE(code(r.labels[i]), 7) << variant_name(v);
  }
}

TEST(EndToEnd, NormalGreatVesselsAboveNinetyFive) {
  const auto r = run_end_to_end(Variant::Normal, 1.0, 1);
  const auto rep = report(r.labels, phantom(Variant::Normal).labels);
  EXPECT_GE(rep.dice[5], 0.95);
  EXPECT_GE(rep.dice[6], 0.95);
}

TEST(EndToEnd, MoreJitterNeverRaisesMeanDice) {
  const auto& truth = phantom(Variant::Normal).labels;
  double previous = 2.0;
  for (double jitter : {0.0, 0.5, 1.0, 1.5}) {
    double sum = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) sum += report(run_end_to_end(Variant::Normal, jitter, seed).labels, truth).mean;
    const double mean = sum / 5;
    EXPECT_LE(mean, previous + 1e-12) << "jitter " << jitter;
    previous = mean;
  }
}
