// chdseg command line: one subcommand per stage plus the full pipeline.
//
// Exit codes: 0 success, 1 invalid arguments or configuration, 2 a stage
// failed on its data.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "chdseg/chdseg.hpp"

namespace fs = std::filesystem;
using namespace chdseg;

namespace {

void save_json(const nlohmann::json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << j.dump(2) << "\n";
  if (!f) throw Error("cannot write " + path.string());
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string nii(bool compress) { return compress ? ".nii.gz" : ".nii"; }

const std::vector<std::string> kVariantChoices = {"normal", "tga", "cat", "pua"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vessel classification and printable models for congenital heart phantoms and CT label maps"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  bool uncompressed = false;
  app.add_flag("--uncompressed", uncompressed, "Write .nii instead of .nii.gz");

  // phantom ------------------------------------------------------------------
  auto* ph = app.add_subcommand("phantom", "Generate a synthetic phantom with ground truth");
  std::string ph_variant, ph_out;
  std::vector<std::int64_t> ph_dims{128};
  double ph_spacing = 1.0, ph_scale = 1.0, ph_septal = 0.0, ph_jitter = 0.0;
  std::uint64_t ph_seed = 0, ph_degrade_seed = 0;
  ph->add_option("--variant", ph_variant, "normal, tga, cat or pua")
      ->required()
      ->transform(CLI::IsMember(kVariantChoices, CLI::ignore_case));
  ph->add_option("--dims", ph_dims, "Grid size: one value or nx ny nz")->expected(1, 3);
  ph->add_option("--spacing", ph_spacing, "Isotropic voxel size (mm)");
  ph->add_option("--seed", ph_seed, "Noise seed");
  ph->add_option("--scale", ph_scale, "Geometry scale factor");
  ph->add_option("--septal-defect-mm", ph_septal, "Radius of a ventricular septal opening");
  ph->add_option("--jitter-mm", ph_jitter, "Boundary jitter applied to chambers.nii.gz");
  ph->add_option("--degrade-seed", ph_degrade_seed, "Seed of the chamber jitter");
  ph->add_option("--out", ph_out, "Output directory")->required();

  // segment ------------------------------------------------------------------
  auto* sg = app.add_subcommand("segment", "RoI crop, blood pool and chamber refinement");
  std::string sg_intensity, sg_chambers, sg_out;
  SegmentParams sp;
  sg->add_option("--intensity", sg_intensity, "Intensity NIfTI")->required()->check(CLI::ExistingFile);
  sg->add_option("--chambers", sg_chambers, "Chamber label NIfTI on the same grid")->required()->check(CLI::ExistingFile);
  sg->add_option("--out", sg_out, "Output directory")->required();
  sg->add_option("--threshold", sp.threshold, "Pool intensity threshold")->capture_default_str();
  sg->add_option("--boundary-mm", sp.boundary_mm, "Pool boundary thickness")->capture_default_str();
  sg->add_option("--margin-mm", sp.roi_margin_mm, "RoI margin")->capture_default_str();
  sg->add_option("--min-component-mm3", sp.min_component_mm3, "Smallest kept pool component")->capture_default_str();
  sg->add_option("--flood-cap-mm", sp.flood_cap_mm, "Refinement flood distance cap")->capture_default_str();

  // graph --------------------------------------------------------------------
  auto* gr = app.add_subcommand("graph", "Skeleton and vessel graph of a refined label volume");
  std::string gr_refined, gr_out, gr_skeleton;
  GraphParams gp;
  gr->add_option("--refined", gr_refined, "Refined labels (from segment)")->required()->check(CLI::ExistingFile);
  gr->add_option("--out", gr_out, "Graph JSON")->required();
  gr->add_option("--skeleton", gr_skeleton, "Also write the skeleton mask here");
  gr->add_option("--prune-mm", gp.prune_length_mm, "Spur pruning length")->capture_default_str();
  gr->add_option("--port-radius-mm", gp.port_radius_mm, "Chamber port reach")->capture_default_str();

  // match --------------------------------------------------------------------
  auto* mt = app.add_subcommand("match", "Classify graph edges against the anatomy templates");
  std::string mt_graph, mt_templates = "builtin", mt_out, mt_refined, mt_roi, mt_labels;
  mt->add_option("--graph", mt_graph, "Graph JSON")->required()->check(CLI::ExistingFile);
  mt->add_option("--templates", mt_templates, "Template JSON, or 'builtin'")->capture_default_str();
  mt->add_option("--out", mt_out, "Match JSON")->required();
  mt->add_option("--refined", mt_refined, "Refined labels; with --labels writes the final label map")
      ->check(CLI::ExistingFile);
  mt->add_option("--roi", mt_roi, "roi.json, to place the labels back on the full grid")->check(CLI::ExistingFile);
  mt->add_option("--labels", mt_labels, "Final label NIfTI");

  // evaluate -----------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "Per-class Dice of predictions against ground truth");
  std::vector<std::string> ev_pred, ev_truth;
  std::string ev_out;
  ev->add_option("--pred", ev_pred, "Predicted label NIfTI (one per case)")->required()->check(CLI::ExistingFile);
  ev->add_option("--truth", ev_truth, "Ground-truth label NIfTI (same order)")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "Metrics JSON");

  // mesh ---------------------------------------------------------------------
  auto* ms = app.add_subcommand("mesh", "Binary STL surfaces of each substructure");
  std::string ms_labels, ms_out;
  MeshParams mp;
  ms->add_option("--labels", ms_labels, "Label NIfTI")->required()->check(CLI::ExistingFile);
  ms->add_option("--out", ms_out, "Output directory")->required();
  ms->add_option("--shell-mm", mp.shell_mm, "Also write a hollow blood-pool wall of this thickness");
  ms->add_option("--smooth", mp.smooth_iterations, "Laplacian smoothing iterations");
  ms->add_option("--sigma-vox", mp.placement_sigma_vox, "Vertex placement smoothing width (voxels)")->capture_default_str();

  // pipeline -----------------------------------------------------------------
  auto* pl = app.add_subcommand("pipeline", "Run every stage from a JSON config");
  std::string pl_config, pl_out, pl_stop, pl_templates;
  pl->add_option("--config", pl_config, "Config JSON")->required()->check(CLI::ExistingFile);
  pl->add_option("--out", pl_out, "Override output_dir");
  pl->add_option("--templates", pl_templates, "Override templates");
  std::vector<std::string> stage_names;
  for (auto s : kStages) stage_names.push_back(stage_name(s));
  pl->add_option("--stop-after", pl_stop, "Last stage to run")->check(CLI::IsMember(stage_names));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const bool compress = !uncompressed;
  try {
    if (*ph) {
      PhantomSpec spec;
      spec.variant = variant_from_name(ph_variant);
      if (ph_dims.size() == 1) spec.dims = {ph_dims[0], ph_dims[0], ph_dims[0]};
      else if (ph_dims.size() == 3) spec.dims = {ph_dims[0], ph_dims[1], ph_dims[2]};
      else throw ConfigError("--dims takes one or three values");
      spec.spacing = {ph_spacing, ph_spacing, ph_spacing};
      spec.seed = ph_seed;
      spec.scale = ph_scale;
      spec.septal_defect_mm = ph_septal;
      DegradeSpec ds;
      ds.jitter_mm = ph_jitter;
      ds.seed = ph_degrade_seed;
      try {
        spec.validate();
        ds.validate();
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
      const auto phantom = generate_phantom(spec);
      const fs::path out(ph_out);
      fs::create_directories(out);
      write_nifti(phantom.intensity, (out / ("intensity" + nii(compress))).string(), compress);
      write_nifti(phantom.labels, (out / ("labels" + nii(compress))).string(), compress);
      write_nifti(degrade_labels(phantom.chambers, ds), (out / ("chambers" + nii(compress))).string(), compress);
      auto g = phantom_truth_graph(phantom);
      g["variant"] = variant_name(spec.variant);
      save_json(g, out / "graph.json");
      std::cout << "phantom " << variant_name(spec.variant) << " written to " << out.string() << "\n";
    } else if (*sg) {
      try {
        sp.validate();
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
      const auto intensity = read_nifti_intensity(sg_intensity).first;
      const auto chambers = read_nifti_labels(sg_chambers).first;
      if (!chambers.same_grid(intensity)) throw Error("chamber volume is not on the intensity grid");
      const fs::path out(sg_out);
      fs::create_directories(out);
      const auto roi = roi_crop(intensity, sp);
      save_json(to_json(RoiRecord{roi.box, intensity.dims(), intensity.spacing(), intensity.origin()}), out / "roi.json");
      write_nifti(roi.volume, (out / ("roi_intensity" + nii(compress))).string(), compress);
      const auto pool = segment_blood_pool(roi.volume, sp);
      write_nifti(pool, (out / ("pool" + nii(compress))).string(), compress);
      const auto refined = refine_chambers(crop(chambers, roi.box), pool, sp);
      write_nifti(refined, (out / ("refined" + nii(compress))).string(), compress);
      std::cout << "RoI, pool and refined chambers written to " << out.string() << "\n";
    } else if (*gr) {
      try {
        gp.validate();
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
      const auto refined = read_nifti_labels(gr_refined).first;
      const auto g = build_graph(refined, gp);
      save_json(to_json(g.graph), gr_out);
      if (!gr_skeleton.empty()) write_nifti(g.skeleton.to_mask(), gr_skeleton, wants_gzip(gr_skeleton));
      std::cout << g.graph.nodes.size() << " nodes, " << g.graph.edges.size() << " edges\n";
    } else if (*mt) {
      if (!mt_labels.empty() && (mt_refined.empty() || mt_roi.empty()))
        throw ConfigError("--labels needs --refined and --roi");
      if (mt_templates != "builtin" && !fs::is_regular_file(mt_templates))
        throw ConfigError("template file does not exist: " + mt_templates);
      const auto graph = graph_from_json(load_json(mt_graph));
      const auto result = match_graph(graph, resolve_templates(mt_templates));
      save_json(to_json(result), mt_out);
      if (!mt_labels.empty()) {
        const auto refined = read_nifti_labels(mt_refined).first;
        const auto roi = roi_from_json(load_json(mt_roi));
        GraphOutputs g;
        g.candidates = vessel_candidates(refined);
        g.graph = graph;
        write_nifti(final_labels(refined, g, result, roi), mt_labels, wants_gzip(mt_labels));
      }
      std::cout << "variant " << result.variant << ", cost " << result.cost.total() << "\n";
    } else if (*ev) {
      if (ev_pred.size() != ev_truth.size()) throw ConfigError("--pred and --truth need the same number of files");
      std::vector<MetricsReport> cases;
      for (std::size_t i = 0; i < ev_pred.size(); ++i) {
        cases.push_back(report(read_nifti_labels(ev_pred[i]).first, read_nifti_labels(ev_truth[i]).first));
        std::cout << ev_pred[i] << "\n" << to_text(cases.back());
      }
      nlohmann::json j;
      if (cases.size() == 1) {
        j = to_json(cases[0]);
      } else {
        j["cases"] = nlohmann::json::array();
        for (const auto& c : cases) j["cases"].push_back(to_json(c));
        j["summary"] = to_json(summarize(cases));
        const auto s = summarize(cases);
        std::printf("cohort of %zu: mean dice %.4f +- %.4f\n", s.cases, s.mean_of_means, s.sd_of_means);
      }
      if (!ev_out.empty()) save_json(j, ev_out);
    } else if (*ms) {
      try {
        mp.validate();
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
      const auto labels = read_nifti_labels(ms_labels).first;
      for (const auto& name : write_meshes(labels, ms_out, mp)) std::cout << name << "\n";
    } else if (*pl) {
      auto config = load_config(pl_config);
      if (!pl_out.empty()) config.output_dir = pl_out;
      if (!pl_templates.empty()) config.templates = pl_templates;
      if (!pl_stop.empty()) config.stop_after = stage_from_name(pl_stop);
      const auto r = run_pipeline(config, &std::cout);
      if (r.metrics) std::cout << to_text(*r.metrics);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
