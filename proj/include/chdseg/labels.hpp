#pragma once

// Voxel labelling from matched vessel classes, and Dice evaluation.

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "chdseg/graph_match.hpp"
#include "chdseg/vessel_graph.hpp"
#include "chdseg/volume.hpp"

namespace chdseg {

/// Candidate voxels take the class of the nearest classified edge path voxel
/// (physical distance, ties to the lower edge id). Other voxels keep the
/// chamber input, with working codes above 7 cleared. Without any classified
/// edge the candidates become Background.
inline LabelVolume assign_vessel_labels(const Mask& candidates, const VesselGraph& graph, const MatchResult& match,
                                        const LabelVolume& chambers) {
  if (!candidates.same_grid(chambers)) throw Error("assign_vessel_labels: grid mismatch");
  if (!(graph.grid.dims == chambers.dims())) throw Error("assign_vessel_labels: graph grid mismatch");
  if (match.edge_class.size() != graph.edges.size())
    throw Error("assign_vessel_labels: match does not cover every graph edge");

  LabelVolume out = LabelVolume::like(chambers);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = is_output_label(chambers[i]) ? chambers[i] : Label::Background;

  BoundingBox box;
  if (!nonzero_bounds(candidates, box)) return out;
  std::vector<std::size_t> classified;
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    if (match.edge_class[e] == VesselClass::Unclassified) continue;
    classified.push_back(e);
    for (const auto& p : graph.edges[e].path) {
      box.min = {std::min(box.min.x, p.x), std::min(box.min.y, p.y), std::min(box.min.z, p.z)};
      box.max = {std::max(box.max.x, p.x), std::max(box.max.y, p.y), std::max(box.max.z, p.z)};
    }
  }
  const Mask cand = crop(candidates, box);
  std::vector<double> best(cand.size(), std::numeric_limits<double>::infinity());
  std::vector<Label> label(cand.size(), Label::Background);
  for (std::size_t e : classified) {
    Mask path = Mask::like(cand);
    for (const auto& p : graph.edges[e].path) path(p.x - box.min.x, p.y - box.min.y, p.z - box.min.z) = 1;
    const auto d2 = squared_distance_to_set(path);
    const Label l = class_label(match.edge_class[e]);
    for (std::size_t i = 0; i < cand.size(); ++i)
      if (cand[i] && d2[i] < best[i]) {
        best[i] = d2[i];
        label[i] = l;
      }
  }
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (!cand[i]) continue;
    const auto p = cand.coord(i);
    out(p.x + box.min.x, p.y + box.min.y, p.z + box.min.z) = label[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dice

inline double dice(const LabelVolume& pred, const LabelVolume& truth, Label cls) {
  if (!pred.same_grid(truth)) throw Error("dice: grid mismatch");
  std::size_t p = 0, t = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred[i] == cls, b = truth[i] == cls;
    p += a;
    t += b;
    both += a && b;
  }
  if (p == 0 && t == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + t);
}

struct MetricsReport {
  std::array<double, 7> dice{};  // kSubstructures order
  std::array<std::size_t, 7> pred_count{};
  std::array<std::size_t, 7> truth_count{};
  double mean = 0;
};

inline MetricsReport report(const LabelVolume& pred, const LabelVolume& truth) {
  if (!pred.same_grid(truth)) throw Error("report: grid mismatch");
  MetricsReport r;
  double sum = 0;
  for (std::size_t k = 0; k < kSubstructures.size(); ++k) {
    const Label c = kSubstructures[k];
    r.dice[k] = dice(pred, truth, c);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      r.pred_count[k] += pred[i] == c;
      r.truth_count[k] += truth[i] == c;
    }
    sum += r.dice[k];
  }
  r.mean = sum / static_cast<double>(kSubstructures.size());
  return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  for (std::size_t k = 0; k < kSubstructures.size(); ++k) {
    const auto name = label_name(kSubstructures[k]);
    j["dice"][name] = r.dice[k];
    j["pred_voxels"][name] = r.pred_count[k];
    j["truth_voxels"][name] = r.truth_count[k];
  }
  j["mean_dice"] = r.mean;
  return j;
}

inline std::string to_text(const MetricsReport& r) {
  std::string s = "class      dice   pred_voxels  truth_voxels\n";
  char buf[96];
  for (std::size_t k = 0; k < kSubstructures.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%-6s  %7.4f  %12zu  %12zu\n", label_name(kSubstructures[k]).c_str(), r.dice[k],
                  r.pred_count[k], r.truth_count[k]);
    s += buf;
  }
  std::snprintf(buf, sizeof buf, "%-6s  %7.4f\n", "mean", r.mean);
  return s + buf;
}

/// Mean and sample standard deviation over cases (sd 0 for a single case).
struct CohortSummary {
  std::array<double, 7> mean{}, sd{};
  double mean_of_means = 0, sd_of_means = 0;
  std::size_t cases = 0;
};

inline CohortSummary summarize(const std::vector<MetricsReport>& cases) {
  if (cases.empty()) throw Error("summarize: no cases");
  CohortSummary s;
  s.cases = cases.size();
  const double n = static_cast<double>(cases.size());
  auto stats = [&](auto get, double& mean, double& sd) {
    double sum = 0;
    for (const auto& c : cases) sum += get(c);
    mean = sum / n;
    double ss = 0;
    for (const auto& c : cases) ss += (get(c) - mean) * (get(c) - mean);
    sd = cases.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  };
  for (std::size_t k = 0; k < 7; ++k) stats([k](const MetricsReport& c) { return c.dice[k]; }, s.mean[k], s.sd[k]);
  stats([](const MetricsReport& c) { return c.mean; }, s.mean_of_means, s.sd_of_means);
  return s;
}

inline nlohmann::json to_json(const CohortSummary& s) {
  nlohmann::json j;
  j["cases"] = s.cases;
  for (std::size_t k = 0; k < 7; ++k) j["dice"][label_name(kSubstructures[k])] = {{"mean", s.mean[k]}, {"sd", s.sd[k]}};
  j["mean_dice"] = {{"mean", s.mean_of_means}, {"sd", s.sd_of_means}};
  return j;
}

}  // namespace chdseg
