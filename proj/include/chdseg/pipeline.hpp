#pragma once

// Config-driven composition of the stages. Every intermediate is written to
// the run directory; nothing in a run depends on wall-clock time.

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "chdseg/graph_match.hpp"
#include "chdseg/labels.hpp"
#include "chdseg/mesh.hpp"
#include "chdseg/nifti.hpp"
#include "chdseg/phantom.hpp"
#include "chdseg/segment.hpp"
#include "chdseg/skeleton.hpp"
#include "chdseg/vessel_graph.hpp"

namespace chdseg {

namespace fs = std::filesystem;

/// Bad configuration or arguments (as opposed to a stage failing on data).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class Stage { Roi, Pool, Refine, Skeleton, Graph, Match, Labels, Report, Mesh };

inline constexpr std::array<Stage, 9> kStages = {Stage::Roi,   Stage::Pool,   Stage::Refine,
                                                 Stage::Skeleton, Stage::Graph, Stage::Match,
                                                 Stage::Labels, Stage::Report, Stage::Mesh};

inline std::string stage_name(Stage s) {
  switch (s) {
    case Stage::Roi: return "roi";
    case Stage::Pool: return "pool";
    case Stage::Refine: return "refine";
    case Stage::Skeleton: return "skeleton";
    case Stage::Graph: return "graph";
    case Stage::Match: return "match";
    case Stage::Labels: return "labels";
    case Stage::Report: return "report";
    case Stage::Mesh: return "mesh";
  }
  return "?";
}

inline Stage stage_from_name(const std::string& s) {
  for (auto st : kStages)
    if (stage_name(st) == s) return st;
  throw ConfigError("unknown stage '" + s + "' (expected roi, pool, refine, skeleton, graph, match, labels, report or mesh)");
}

struct MeshParams {
  double placement_sigma_vox = 1.0;
  int smooth_iterations = 0;
  double shell_mm = 0.0;  // > 0 adds a hollow blood-pool wall

  void validate() const {
    if (!(placement_sigma_vox >= 0) || !std::isfinite(placement_sigma_vox))
      throw Error("MeshParams: placement sigma must be >= 0");
    if (smooth_iterations < 0) throw Error("MeshParams: smoothing iterations must be >= 0");
    if (!(shell_mm >= 0) || !std::isfinite(shell_mm)) throw Error("MeshParams: shell thickness must be >= 0");
  }
};

struct PhantomInput {
  PhantomSpec spec;
  DegradeSpec degrade;
};

struct PipelineConfig {
  // either files or a phantom
  std::string intensity_path, chambers_path, truth_path;
  std::optional<PhantomInput> phantom;
  SegmentParams segment;
  GraphParams graph;
  std::string templates;  // file path, or "builtin"
  std::string output_dir;
  Stage stop_after = Stage::Mesh;
  MeshParams mesh;
  bool compress = true;

  void validate() const {
    if (templates.empty()) throw ConfigError("config: missing required field 'templates'");
    if (output_dir.empty()) throw ConfigError("config: missing required field 'output_dir'");
    if (phantom && !intensity_path.empty()) throw ConfigError("config: give either 'phantom' or 'input', not both");
    if (!phantom) {
      if (intensity_path.empty()) throw ConfigError("config: missing required field 'input.intensity'");
      if (chambers_path.empty()) throw ConfigError("config: missing required field 'input.chambers'");
    }
    auto must_exist = [](const std::string& p, const std::string& field) {
      if (!p.empty() && !fs::is_regular_file(p))
        throw ConfigError("config: file for '" + field + "' does not exist: " + p);
    };
    must_exist(intensity_path, "input.intensity");
    must_exist(chambers_path, "input.chambers");
    must_exist(truth_path, "input.truth");
    if (templates != "builtin") must_exist(templates, "templates");
    try {
      segment.validate();
      graph.validate();
      mesh.validate();
      if (phantom) {
        phantom->spec.validate();
        phantom->degrade.validate();
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
};

namespace detail {

/// Reads keys of `j` into a struct, refusing keys it does not know.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError("config: '" + where_ + "' must be an object");
  }
  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config: field '" + name(key) + "' has the wrong type");
    }
  }
  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const nlohmann::json& at(const char* key) const { return j_.at(key); }
  std::string name(const char* key) const { return where_.empty() ? key : where_ + "." + key; }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("config: unknown field '" + name(it.key().c_str()) + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline Dims dims_from_json(const nlohmann::json& j, const std::string& field) {
  try {
    if (j.is_number_integer()) {
      const auto n = j.get<std::int64_t>();
      return {n, n, n};
    }
    return {j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>(), j.at(2).get<std::int64_t>()};
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: field '" + field + "' must be an integer or [nx, ny, nz]");
  }
}

inline VoxelSpacing spacing_from_json(const nlohmann::json& j, const std::string& field) {
  try {
    if (j.is_number()) {
      const auto s = j.get<double>();
      return {s, s, s};
    }
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: field '" + field + "' must be a number or [dx, dy, dz]");
  }
}

inline std::string resolve(const std::string& p, const fs::path& base) {
  if (p.empty() || p == "builtin") return p;
  const fs::path q(p);
  return (q.is_absolute() ? q : base / q).lexically_normal().string();
}

}  // namespace detail

/// Relative paths in `j` are taken relative to `base_dir`.
inline PipelineConfig parse_config(const nlohmann::json& j, const fs::path& base_dir = ".") {
  PipelineConfig c;
  detail::FieldReader top(j, "");
  if (top.has("input")) {
    detail::FieldReader in(top.at("input"), "input");
    in.get("intensity", c.intensity_path);
    in.get("chambers", c.chambers_path);
    in.get("truth", c.truth_path);
    in.finish();
  }
  if (top.has("phantom")) {
    PhantomInput p;
    detail::FieldReader ph(top.at("phantom"), "phantom");
    std::string variant = "Normal";
    ph.get("variant", variant);
    try {
      p.spec.variant = variant_from_name(variant);
    } catch (const Error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    if (ph.has("dims")) p.spec.dims = detail::dims_from_json(ph.at("dims"), "phantom.dims");
    if (ph.has("spacing")) p.spec.spacing = detail::spacing_from_json(ph.at("spacing"), "phantom.spacing");
    ph.get("seed", p.spec.seed);
    ph.get("scale", p.spec.scale);
    ph.get("septal_defect_mm", p.spec.septal_defect_mm);
    ph.get("noise_sd_scale", p.spec.noise_sd_scale);
    if (ph.has("degrade")) {
      detail::FieldReader dg(ph.at("degrade"), "phantom.degrade");
      dg.get("jitter_mm", p.degrade.jitter_mm);
      dg.get("jitter_grid_mm", p.degrade.jitter_grid_mm);
      dg.get("morph_probability", p.degrade.morph_probability);
      dg.get("morph_radius_mm", p.degrade.morph_radius_mm);
      dg.get("dropout_count", p.degrade.dropout_count);
      dg.get("dropout_radius_mm", p.degrade.dropout_radius_mm);
      dg.get("seed", p.degrade.seed);
      dg.finish();
    }
    ph.finish();
    c.phantom = p;
  }
  if (top.has("segment")) {
    detail::FieldReader s(top.at("segment"), "segment");
    s.get("threshold", c.segment.threshold);
    s.get("boundary_mm", c.segment.boundary_mm);
    s.get("roi_margin_mm", c.segment.roi_margin_mm);
    s.get("min_component_mm3", c.segment.min_component_mm3);
    s.get("flood_cap_mm", c.segment.flood_cap_mm);
    s.get("guard_core_mm", c.segment.guard_core_mm);
    s.get("guard_mm", c.segment.guard_mm);
    s.get("thin_layer_mm", c.segment.thin_layer_mm);
    s.finish();
  }
  if (top.has("graph")) {
    detail::FieldReader g(top.at("graph"), "graph");
    g.get("prune_length_mm", c.graph.prune_length_mm);
    g.get("port_radius_mm", c.graph.port_radius_mm);
    g.get("junction_merge_mm", c.graph.junction_merge_mm);
    g.get("root_fork_mm", c.graph.root_fork_mm);
    g.finish();
  }
  if (top.has("mesh")) {
    detail::FieldReader m(top.at("mesh"), "mesh");
    m.get("placement_sigma_vox", c.mesh.placement_sigma_vox);
    m.get("smooth_iterations", c.mesh.smooth_iterations);
    m.get("shell_mm", c.mesh.shell_mm);
    m.finish();
  }
  top.get("templates", c.templates);
  top.get("output_dir", c.output_dir);
  top.get("compress", c.compress);
  std::string stop;
  top.get("stop_after", stop);
  if (!stop.empty()) c.stop_after = stage_from_name(stop);
  top.finish();

  c.intensity_path = detail::resolve(c.intensity_path, base_dir);
  c.chambers_path = detail::resolve(c.chambers_path, base_dir);
  c.truth_path = detail::resolve(c.truth_path, base_dir);
  c.templates = detail::resolve(c.templates, base_dir);
  c.output_dir = detail::resolve(c.output_dir, base_dir);
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j, fs::path(path).parent_path());
}

/// The effective parameters, as recorded in the run directory (no paths).
inline nlohmann::json parameters_json(const PipelineConfig& c) {
  const auto& s = c.segment;
  const auto& g = c.graph;
  nlohmann::json j;
  j["segment"] = {{"threshold", s.threshold},         {"boundary_mm", s.boundary_mm},
                  {"roi_margin_mm", s.roi_margin_mm}, {"min_component_mm3", s.min_component_mm3},
                  {"flood_cap_mm", s.flood_cap_mm},   {"guard_core_mm", s.guard_core_mm},
                  {"guard_mm", s.guard_mm},           {"thin_layer_mm", s.thin_layer_mm}};
  j["graph"] = {{"prune_length_mm", g.prune_length_mm},
                {"port_radius_mm", g.port_radius_mm},
                {"junction_merge_mm", g.junction_merge_mm},
                {"root_fork_mm", g.root_fork_mm}};
  j["mesh"] = {{"placement_sigma_vox", c.mesh.placement_sigma_vox},
               {"smooth_iterations", c.mesh.smooth_iterations},
               {"shell_mm", c.mesh.shell_mm}};
  if (c.phantom) {
    const auto& p = *c.phantom;
    j["phantom"] = {{"variant", variant_name(p.spec.variant)},
                    {"dims", {p.spec.dims.nx, p.spec.dims.ny, p.spec.dims.nz}},
                    {"spacing", {p.spec.spacing.dx, p.spec.spacing.dy, p.spec.spacing.dz}},
                    {"seed", p.spec.seed},
                    {"scale", p.spec.scale},
                    {"septal_defect_mm", p.spec.septal_defect_mm},
                    {"noise_sd_scale", p.spec.noise_sd_scale},
                    {"degrade",
                     {{"jitter_mm", p.degrade.jitter_mm},
                      {"jitter_grid_mm", p.degrade.jitter_grid_mm},
                      {"morph_probability", p.degrade.morph_probability},
                      {"morph_radius_mm", p.degrade.morph_radius_mm},
                      {"dropout_count", p.degrade.dropout_count},
                      {"dropout_radius_mm", p.degrade.dropout_radius_mm},
                      {"seed", p.degrade.seed}}}};
  }
  j["stop_after"] = stage_name(c.stop_after);
  return j;
}

// ---------------------------------------------------------------------------
// Stage building blocks shared with the standalone subcommands

struct SegmentOutputs {
  RoiResult roi;
  LabelVolume pool;
  LabelVolume chambers;  // cropped to the RoI
  LabelVolume refined;
};

/// The RoI box together with the grid it was cut from, so results can be put
/// back on the full volume.
struct RoiRecord {
  BoundingBox box;
  Dims parent;
  VoxelSpacing spacing;
  Vec3 origin;
};

inline nlohmann::json to_json(const RoiRecord& r) {
  return {{"box", {{"min", {r.box.min.x, r.box.min.y, r.box.min.z}}, {"max", {r.box.max.x, r.box.max.y, r.box.max.z}}}},
          {"parent",
           {{"dims", {r.parent.nx, r.parent.ny, r.parent.nz}},
            {"spacing", {r.spacing.dx, r.spacing.dy, r.spacing.dz}},
            {"origin", {r.origin.x, r.origin.y, r.origin.z}}}}};
}

inline RoiRecord roi_from_json(const nlohmann::json& j) {
  try {
    RoiRecord r;
    const auto& b = j.at("box");
    r.box.min = {b.at("min").at(0).get<std::int64_t>(), b.at("min").at(1).get<std::int64_t>(),
                 b.at("min").at(2).get<std::int64_t>()};
    r.box.max = {b.at("max").at(0).get<std::int64_t>(), b.at("max").at(1).get<std::int64_t>(),
                 b.at("max").at(2).get<std::int64_t>()};
    const auto& p = j.at("parent");
    r.parent = {p.at("dims").at(0).get<std::int64_t>(), p.at("dims").at(1).get<std::int64_t>(),
                p.at("dims").at(2).get<std::int64_t>()};
    r.spacing = {p.at("spacing").at(0).get<double>(), p.at("spacing").at(1).get<double>(),
                 p.at("spacing").at(2).get<double>()};
    r.origin = {p.at("origin").at(0).get<double>(), p.at("origin").at(1).get<double>(),
                p.at("origin").at(2).get<double>()};
    if (!r.box.valid_in(r.parent)) throw Error("roi json: box outside the parent grid");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("roi json: ") + e.what());
  }
}

struct GraphOutputs {
  Mask candidates;
  Skeleton skeleton;
  VesselGraph graph;
};

/// Skeleton and graph of the VesselCandidate region of a refined volume.
inline GraphOutputs build_graph(const LabelVolume& refined, const GraphParams& params) {
  GraphOutputs out;
  out.candidates = vessel_candidates(refined);
  if (count_nonzero(out.candidates) == 0) throw Error("no vessel candidates");
  out.skeleton = skeletonize(out.candidates);
  out.graph = extract_graph(out.skeleton, refined, params);
  if (out.graph.nodes.empty()) throw Error("empty vessel graph");
  return out;
}

inline TemplateSet resolve_templates(const std::string& source) {
  return source == "builtin" ? builtin_templates() : load_templates(source);
}

/// Final labels on the full grid.
inline LabelVolume final_labels(const LabelVolume& refined, const GraphOutputs& g, const MatchResult& match,
                                const RoiRecord& roi) {
  const auto cropped = assign_vessel_labels(g.candidates, g.graph, match, refined);
  return uncrop(cropped, roi.box, roi.parent, Label::Background);
}

/// One binary STL per substructure present, plus all.stl with every body and,
/// when requested, pool_shell.stl. Returns the file names written.
inline std::vector<std::string> write_meshes(const LabelVolume& labels, const fs::path& dir, const MeshParams& p) {
  p.validate();
  fs::create_directories(dir);
  std::vector<std::string> written;
  SurfaceOptions opt;
  opt.placement_sigma_vox = p.placement_sigma_vox;
  Mesh all;
  auto add = [&](const Mask& m, const std::string& name) {
    BoundingBox b;
    if (!nonzero_bounds(m, b)) return;
    Mesh mesh = marching_cubes(crop(m, b), opt);
    if (p.smooth_iterations > 0) mesh = laplacian_smooth(std::move(mesh), p.smooth_iterations);
    write_stl(mesh, (dir / (name + ".stl")).string());
    written.push_back(name + ".stl");
    const auto base = static_cast<std::uint32_t>(all.vertices.size());
    all.vertices.insert(all.vertices.end(), mesh.vertices.begin(), mesh.vertices.end());
    for (auto t : mesh.triangles) all.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  };
  for (Label l : kSubstructures) add(label_mask(labels, l), label_name(l));
  if (!all.empty()) {
    write_stl(all, (dir / "all.stl").string());
    written.push_back("all.stl");
  }
  if (p.shell_mm > 0) {
    Mask pool = make_mask(labels, is_blood_pool_label);
    BoundingBox b;
    if (nonzero_bounds(pool, b)) {
      const auto& s = labels.spacing();
      const auto n = static_cast<std::int64_t>(std::ceil(p.shell_mm / std::min({s.dx, s.dy, s.dz}))) + 1;
      const Mask shell = make_shell(pad(crop(pool, b), n, std::uint8_t{0}), p.shell_mm, opt);
      Mesh mesh = marching_cubes(shell, opt);
      if (p.smooth_iterations > 0) mesh = laplacian_smooth(std::move(mesh), p.smooth_iterations);
      write_stl(mesh, (dir / "pool_shell.stl").string());
      written.push_back("pool_shell.stl");
    }
  }
  return written;
}

/// Vessel graph of a phantom's analytic labels: Ao, PA and the parts of LA and
/// RA outside the chamber bodies. Each edge in the JSON also carries the
/// majority ground-truth label along its path as "truth".
inline nlohmann::json phantom_truth_graph(const Phantom& ph, const GraphParams& params = {}) {
  Mask vessels = Mask::like(ph.labels);
  for (std::size_t i = 0; i < vessels.size(); ++i) {
    const Label l = ph.labels[i];
    vessels[i] = (l == Label::Ao || l == Label::PA || (is_chamber(l) && ph.chambers[i] == Label::Background)) ? 1 : 0;
  }
  const auto g = extract_graph(skeletonize(vessels), ph.chambers, params);
  auto j = to_json(g);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    std::array<std::size_t, 8> votes{};
    for (const auto& p : g.edges[e].path) ++votes[static_cast<std::size_t>(std::min(code(ph.labels(p)), 7))];
    std::size_t best = 1;
    for (std::size_t c = 2; c < 8; ++c)
      if (votes[c] > votes[best]) best = c;
    j["edges"][e]["truth"] = label_name(static_cast<Label>(best));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Full run

struct PipelineResult {
  Stage last_stage = Stage::Roi;
  std::optional<MatchResult> match;
  std::optional<MetricsReport> metrics;
  std::vector<std::string> artifacts;  // relative to the output directory, in write order
};

/// Runs the configured stages. A failing stage throws StageError naming it.
/// Progress lines go to `log` (if given) and to pipeline.log.
inline PipelineResult run_pipeline(const PipelineConfig& config, std::ostream* log = nullptr) {
  config.validate();
  const fs::path out(config.output_dir);
  try {
    fs::create_directories(out);
  } catch (const fs::filesystem_error& e) {
    throw ConfigError("config: cannot create output directory " + out.string() + ": " + e.what());
  }
  PipelineResult result;
  std::ofstream logfile(out / "pipeline.log", std::ios::binary);
  auto note = [&](const std::string& line) {
    logfile << line << "\n";
    if (log) *log << line << "\n";
  };
  const std::string ext = config.compress ? ".nii.gz" : ".nii";
  auto record = [&](const std::string& name) { result.artifacts.push_back(name); };
  auto save_json = [&](const nlohmann::json& j, const std::string& name) {
    std::ofstream f(out / name, std::ios::binary);
    f << j.dump(2) << "\n";
    if (!f) throw Error("cannot write " + (out / name).string());
    record(name);
  };
  auto save_text = [&](const std::string& text, const std::string& name) {
    std::ofstream f(out / name, std::ios::binary);
    f << text;
    if (!f) throw Error("cannot write " + (out / name).string());
    record(name);
  };
  auto save_volume = [&](const auto& v, const std::string& stem) {
    write_nifti(v, (out / (stem + ext)).string(), config.compress);
    record(stem + ext);
  };
  // runs one stage; returns false once the stop-after stage is done
  auto stage = [&](Stage s, auto&& body) {
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      note("[" + stage_name(s) + "] FAILED: " + e.what());
      throw StageError(stage_name(s), e.what());
    } catch (const std::exception& e) {
      note("[" + stage_name(s) + "] FAILED: " + e.what());
      throw StageError(stage_name(s), e.what());
    }
    result.last_stage = s;
    return s != config.stop_after;
  };

  save_json(parameters_json(config), "parameters.json");

  // inputs
  IntensityVolume intensity;
  LabelVolume chambers;
  std::optional<LabelVolume> truth;
  try {
    if (config.phantom) {
      auto ph = generate_phantom(config.phantom->spec);
      intensity = std::move(ph.intensity);
      chambers = degrade_labels(ph.chambers, config.phantom->degrade);
      truth = std::move(ph.labels);
      save_volume(intensity, "input_intensity");
      save_volume(chambers, "input_chambers");
      save_volume(*truth, "input_truth");
      note("[input] phantom " + variant_name(config.phantom->spec.variant) + " seed " +
           std::to_string(config.phantom->spec.seed) + ", chamber jitter " +
           nlohmann::json(config.phantom->degrade.jitter_mm).dump() + " mm");
    } else {
      intensity = read_nifti_intensity(config.intensity_path).first;
      chambers = read_nifti_labels(config.chambers_path).first;
      if (!config.truth_path.empty()) truth = read_nifti_labels(config.truth_path).first;
      if (!chambers.same_grid(intensity)) throw Error("chamber volume is not on the intensity grid");
      if (truth && !truth->same_grid(intensity)) throw Error("truth volume is not on the intensity grid");
      note("[input] " + config.intensity_path);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw StageError("input", e.what());
  }

  SegmentOutputs seg;
  RoiRecord roi;
  GraphOutputs graph;
  MatchResult match;
  LabelVolume labels;
  auto box_text = [](const BoundingBox& b) {
    return "[" + std::to_string(b.min.x) + "," + std::to_string(b.min.y) + "," + std::to_string(b.min.z) + "]-[" +
           std::to_string(b.max.x) + "," + std::to_string(b.max.y) + "," + std::to_string(b.max.z) + "]";
  };

  const bool go = stage(Stage::Roi, [&] {
    seg.roi = roi_crop(intensity, config.segment);
    roi = {seg.roi.box, intensity.dims(), intensity.spacing(), intensity.origin()};
    save_json(to_json(roi), "roi.json");
    save_volume(seg.roi.volume, "roi_intensity");
    note("[roi] box " + box_text(seg.roi.box));
  }) && stage(Stage::Pool, [&] {
    seg.pool = segment_blood_pool(seg.roi.volume, config.segment);
    save_volume(seg.pool, "pool");
    std::size_t inner = 0, boundary = 0;
    for (std::size_t i = 0; i < seg.pool.size(); ++i) {
      inner += seg.pool[i] == Label::BloodPool;
      boundary += seg.pool[i] == Label::PoolBoundary;
    }
    note("[pool] " + std::to_string(inner) + " interior + " + std::to_string(boundary) + " boundary voxels");
  }) && stage(Stage::Refine, [&] {
    seg.chambers = crop(chambers, seg.roi.box);
    seg.refined = refine_chambers(seg.chambers, seg.pool, config.segment);
    save_volume(seg.refined, "refined");
    note("[refine] " + std::to_string(count_nonzero(vessel_candidates(seg.refined))) + " vessel candidate voxels");
  }) && stage(Stage::Skeleton, [&] {
    graph.candidates = vessel_candidates(seg.refined);
    if (count_nonzero(graph.candidates) == 0) throw Error("no vessel candidates");
    graph.skeleton = skeletonize(graph.candidates);
    save_volume(graph.candidates, "candidates");
    save_volume(graph.skeleton.to_mask(), "skeleton");
    note("[skeleton] " + std::to_string(graph.skeleton.voxels.size()) + " voxels");
  }) && stage(Stage::Graph, [&] {
    graph.graph = extract_graph(graph.skeleton, seg.refined, config.graph);
    if (graph.graph.nodes.empty()) throw Error("empty vessel graph");
    save_json(to_json(graph.graph), "graph.json");
    std::size_t ports = 0;
    for (const auto& n : graph.graph.nodes) ports += n.kind == NodeKind::ChamberPort;
    note("[graph] " + std::to_string(graph.graph.nodes.size()) + " nodes (" + std::to_string(ports) + " ports), " +
         std::to_string(graph.graph.edges.size()) + " edges");
  }) && stage(Stage::Match, [&] {
    match = match_graph(graph.graph, resolve_templates(config.templates));
    result.match = match;
    save_json(to_json(match), "match.json");
    note("[match] variant " + match.variant + ", cost " + nlohmann::json(match.cost.total()).dump());
  }) && stage(Stage::Labels, [&] {
    labels = final_labels(seg.refined, graph, match, roi);
    save_volume(labels, "labels");
    note("[labels] written");
  }) && stage(Stage::Report, [&] {
    if (!truth) {
      note("[report] skipped, no ground truth");
      return;
    }
    const auto r = report(labels, *truth);
    result.metrics = r;
    auto j = to_json(r);
    j["variant"] = match.variant;
    save_json(j, "metrics.json");
    save_text(to_text(r), "metrics.txt");
    note("[report] mean dice " + nlohmann::json(r.mean).dump());
  }) && stage(Stage::Mesh, [&] {
    for (const auto& name : write_meshes(labels, out / "mesh", config.mesh)) record("mesh/" + name);
    note("[mesh] written");
  });
  (void)go;
  note("done after stage '" + stage_name(result.last_stage) + "'");
  logfile.flush();
  result.artifacts.push_back("pipeline.log");
  return result;
}

}  // namespace chdseg
