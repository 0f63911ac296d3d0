#pragma once

// Synthetic cardiac phantoms for four great-vessel variants.
//
// Chambers are ellipsoids, vessels are capsule polylines of constant radius
// and the myocardium is a shell around the LV. Geometry is given in mm
// relative to the volume centre (x to the patient's left, y posterior, z
// superior) and multiplied by `scale`.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "chdseg/volume.hpp"

namespace chdseg {

enum class Variant { Normal, TGA, CAT, PuA };

inline constexpr std::array<Variant, 4> kVariants = {Variant::Normal, Variant::TGA, Variant::CAT,
                                                     Variant::PuA};

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Normal: return "Normal";
    case Variant::TGA: return "TGA";
    case Variant::CAT: return "CAT";
    case Variant::PuA: return "PuA";
  }
  return "?";
}

inline Variant variant_from_name(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto v : kVariants) {
    auto n = variant_name(v);
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
    if (n == s) return v;
  }
  throw Error("unknown variant '" + s + "' (expected normal, tga, cat or pua)");
}

struct Ellipsoid {
  Label label;
  Vec3 centre;
  Vec3 radii;

  bool contains(const Vec3& p) const {
    const double x = (p.x - centre.x) / radii.x, y = (p.y - centre.y) / radii.y,
                 z = (p.z - centre.z) / radii.z;
    return x * x + y * y + z * z <= 1.0;
  }
};

struct Tube {
  std::string name;
  Label label;  // Ao, PA, LA (pulmonary veins) or RA (caval veins)
  double radius;
  std::vector<Vec3> points;

  double distance(const Vec3& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
      const Vec3 ab = points[i + 1] - points[i];
      const double t = std::clamp(dot(p - points[i], ab) / dot(ab, ab), 0.0, 1.0);
      best = std::min(best, norm(p - (points[i] + ab * t)));
    }
    return best;
  }
};

struct PhantomGeometry {
  std::vector<Ellipsoid> chambers;  // priority order
  std::vector<Tube> tubes;
  double myo_thickness = 4.0;
};

/// Variant geometry in mm relative to the volume centre, before scaling.
inline PhantomGeometry phantom_geometry(Variant v) {
  PhantomGeometry g;
  g.chambers = {{Label::LV, {13, 2, -16}, {11, 11, 15}},
                {Label::RV, {-13, -2, -16}, {11, 11, 14}},
                {Label::LA, {9, 8, 2}, {10, 9, 8}},
                {Label::RA, {-9, 6, 2}, {10, 9, 8}}};

  const std::vector<Vec3> lv_root = {{13, -2, -12}, {11, -14, -2}, {10, -16, 8}};
  const std::vector<Vec3> rv_root = {{-13, -4, -12}, {-11, -15, -2}, {-10, -17, 8}};
  const std::vector<Vec3> arch_tail = {{2, 24, 30}, {2, 28, 14}, {2, 28, -44}};

  auto join = [](std::vector<Vec3> a, const std::vector<Vec3>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };

  switch (v) {
    case Variant::Normal:
      g.tubes.push_back({"Ao", Label::Ao, 5.0, join(join(lv_root, {{8, -12, 24}, {4, 4, 36}}), arch_tail)});
      g.tubes.push_back({"PA", Label::PA, 4.5, join(rv_root, {{-8, -14, 18}})});
      g.tubes.push_back({"LPA", Label::PA, 3.5, {{-8, -14, 18}, {-4, 0, 20}, {0, 14, 22}}});
      g.tubes.push_back({"RPA", Label::PA, 3.5, {{-8, -14, 18}, {-20, -10, 22}, {-30, -4, 24}}});
      break;
    case Variant::TGA:
      g.tubes.push_back({"Ao", Label::Ao, 5.0, join(join(rv_root, {{-8, -14, 24}, {-2, 4, 36}}), arch_tail)});
      g.tubes.push_back({"PA", Label::PA, 4.5, join(lv_root, {{8, -12, 18}})});
      g.tubes.push_back({"LPA", Label::PA, 3.5, {{8, -12, 18}, {16, -4, 20}, {26, 4, 22}}});
      g.tubes.push_back({"RPA", Label::PA, 3.5, {{8, -12, 18}, {0, 0, 18}, {-6, 14, 20}}});
      break;
    case Variant::CAT:
      g.tubes.push_back({"AoL", Label::Ao, 5.0, {{13, -2, -12}, {8, -15, 2}, {0, -13, 14}}});
      g.tubes.push_back({"AoR", Label::Ao, 5.0, {{-13, -4, -12}, {-7, -16, 2}, {0, -13, 14}}});
      g.tubes.push_back({"Trunk", Label::Ao, 5.5, {{0, -13, 14}, {0, -10, 26}}});
      g.tubes.push_back({"Ao", Label::Ao, 5.0, join({{0, -10, 26}, {2, 6, 36}}, arch_tail)});
      g.tubes.push_back({"PA", Label::PA, 4.0, {{0, -10, 26}, {-14, -12, 30}, {-26, -8, 30}}});
      break;
    case Variant::PuA:
      g.tubes.push_back({"Ao", Label::Ao, 5.0, join(join(lv_root, {{8, -12, 24}, {4, 4, 36}}), arch_tail)});
      g.tubes.push_back({"PA", Label::PA, 2.5, {{2, 28, 6}, {-10, 26, 14}, {-20, 22, 20}}});
      break;
  }
  g.tubes.push_back({"PV", Label::LA, 3.5, {{12, 9, 2}, {26, 16, 4}, {36, 16, 4}}});
  g.tubes.push_back({"SVC", Label::RA, 4.0, {{-10, 6, 2}, {-16, 2, 24}, {-16, 2, 40}}});
  g.tubes.push_back({"IVC", Label::RA, 4.0, {{-9, 10, 0}, {-14, 24, -16}, {-14, 24, -44}}});
  return g;
}

struct PhantomSpec {
  Variant variant = Variant::Normal;
  Dims dims{128, 128, 128};
  VoxelSpacing spacing{1.0, 1.0, 1.0};
  std::uint64_t seed = 0;
  double scale = 1.0;
  /// Radius (mm) of an opening in the ventricular septum; 0 disables it.
  double septal_defect_mm = 0.0;
  double noise_sd_scale = 1.0;

  void validate() const {
    if (dims.nx < 64 || dims.ny < 64 || dims.nz < 64) throw Error("phantom dims must be >= 64 per axis");
    spacing.validate();
    if (!(scale > 0) || !std::isfinite(scale)) throw Error("phantom scale must be positive");
    if (septal_defect_mm < 0) throw Error("septal defect radius must be >= 0");
    if (noise_sd_scale < 0) throw Error("noise scale must be >= 0");
  }
};

struct Phantom {
  IntensityVolume intensity;
  LabelVolume labels;    // ground truth, codes 0-7
  LabelVolume chambers;  // chamber bodies (LV, RV, LA, RA) and Myo, no vessels
};

inline constexpr float kPoolIntensity = 300.0f, kPoolSd = 20.0f;
inline constexpr float kMyoIntensity = 80.0f, kMyoSd = 10.0f;
inline constexpr float kBackgroundIntensity = -50.0f, kBackgroundSd = 10.0f;

inline bool is_blood_pool_label(Label l) {
  return is_chamber(l) || l == Label::Ao || l == Label::PA;
}

inline Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const auto geo = phantom_geometry(spec.variant);
  const auto& s = spec.spacing;
  const Vec3 centre{(spec.dims.nx - 1) * s.dx / 2, (spec.dims.ny - 1) * s.dy / 2, (spec.dims.nz - 1) * s.dz / 2};
  const double k = spec.scale;
  const double myo = geo.myo_thickness * k;

  // world-space primitives
  std::vector<Ellipsoid> chambers;
  for (const auto& e : geo.chambers) chambers.push_back({e.label, centre + e.centre * k, e.radii * k});
  std::vector<Tube> tubes;
  for (const auto& t : geo.tubes) {
    Tube w{t.name, t.label, t.radius * k, {}};
    for (const auto& p : t.points) w.points.push_back(centre + p * k);
    tubes.push_back(std::move(w));
  }
  const Vec3 lo{0, 0, 0}, hi{(spec.dims.nx - 1) * s.dx, (spec.dims.ny - 1) * s.dy, (spec.dims.nz - 1) * s.dz};
  auto inside = [&](const Vec3& a, const Vec3& b) {
    return a.x >= lo.x && a.y >= lo.y && a.z >= lo.z && b.x <= hi.x && b.y <= hi.y && b.z <= hi.z;
  };
  for (const auto& e : chambers) {
    const double pad = e.label == Label::LV ? myo : 0.0;
    const Vec3 r = e.radii + Vec3{pad, pad, pad};
    if (!inside(e.centre - r, e.centre + r)) throw Error("phantom geometry overflow: " + label_name(e.label));
  }
  for (const auto& t : tubes)
    for (const auto& p : t.points) {
      const Vec3 r{t.radius, t.radius, t.radius};
      if (!inside(p - r, p + r)) throw Error("phantom geometry overflow: " + t.name);
    }

  const Ellipsoid& lv = chambers[0];
  const Ellipsoid& rv = chambers[1];
  Tube defect{"defect", Label::LV, spec.septal_defect_mm * k, {lv.centre, rv.centre}};

  Phantom out{IntensityVolume(spec.dims, s), LabelVolume(spec.dims, s), LabelVolume(spec.dims, s)};
  Mask lv_mask(spec.dims, s);
  for (std::int64_t z = 0; z < spec.dims.nz; ++z)
    for (std::int64_t y = 0; y < spec.dims.ny; ++y)
      for (std::int64_t x = 0; x < spec.dims.nx; ++x) {
        const Vec3 p{x * s.dx, y * s.dy, z * s.dz};
        Label l = Label::Background;
        bool body = false;
        for (const auto& e : chambers)
          if (e.contains(p)) {
            l = e.label;
            body = true;
            break;
          }
        if (l == Label::Background)
          for (const auto& t : tubes)
            if (t.distance(p) <= t.radius) {
              l = t.label;
              break;
            }
        if (l == Label::Background && defect.radius > 0 && defect.distance(p) <= defect.radius) {
          l = norm(p - lv.centre) <= norm(p - rv.centre) ? Label::LV : Label::RV;
          body = true;
        }
        out.labels(x, y, z) = l;
        if (body) out.chambers(x, y, z) = l;
        if (l == Label::LV && body) lv_mask(x, y, z) = 1;
      }

  const Mask shell = dilate(lv_mask, myo);
  for (std::size_t i = 0; i < shell.size(); ++i)
    if (shell[i] && out.labels[i] == Label::Background) {
      out.labels[i] = Label::Myo;
      out.chambers[i] = Label::Myo;
    }

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  const auto sd = static_cast<float>(spec.noise_sd_scale);
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    const Label l = out.labels[i];
    const float n = noise(rng) * sd;
    if (is_blood_pool_label(l))
      out.intensity[i] = kPoolIntensity + kPoolSd * n;
    else if (l == Label::Myo)
      out.intensity[i] = kMyoIntensity + kMyoSd * n;
    else
      out.intensity[i] = kBackgroundIntensity + kBackgroundSd * n;
  }
  return out;
}

/// Union of the blood-filled classes (chambers and great vessels).
inline Mask blood_pool_mask(const LabelVolume& labels) {
  return make_mask(labels, [](Label l) { return is_blood_pool_label(l); });
}

// ---------------------------------------------------------------------------
// Degradation of label maps (simulated upstream segmentation error)

struct DegradeSpec {
  double jitter_mm = 0.0;          // amplitude of the smooth boundary displacement field
  double jitter_grid_mm = 8.0;     // control-point spacing of that field
  double morph_probability = 0.0;  // per structure, chance of erosion or dilation
  double morph_radius_mm = 1.0;
  int dropout_count = 0;
  double dropout_radius_mm = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (jitter_mm < 0 || morph_probability < 0 || morph_probability > 1 || morph_radius_mm < 0 ||
        dropout_count < 0 || dropout_radius_mm < 0 || !(jitter_grid_mm > 0))
      throw Error("degrade spec magnitudes must be >= 0 (probability <= 1)");
  }
};

inline LabelVolume degrade_labels(const LabelVolume& labels, const DegradeSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LabelVolume out = labels;

  for (int c = 1; c <= 7; ++c) {
    const double u = unit(rng);
    const bool grow = unit(rng) < 0.5;
    if (u >= spec.morph_probability || spec.morph_radius_mm == 0) continue;
    const Label l = static_cast<Label>(c);
    const Mask m = label_mask(out, l);
    if (count_nonzero(m) == 0) continue;
    if (grow) {
      const Mask d = dilate(m, spec.morph_radius_mm);
      for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] && out[i] == Label::Background) out[i] = l;
    } else {
      const Mask e = erode(m, spec.morph_radius_mm);
      for (std::size_t i = 0; i < e.size(); ++i)
        if (m[i] && !e[i]) out[i] = Label::Background;
    }
  }

  if (spec.jitter_mm > 0) {
    const auto& d = out.dims();
    const auto& s = out.spacing();
    const double g = spec.jitter_grid_mm;
    const std::int64_t gx = static_cast<std::int64_t>(std::ceil((d.nx - 1) * s.dx / g)) + 2;
    const std::int64_t gy = static_cast<std::int64_t>(std::ceil((d.ny - 1) * s.dy / g)) + 2;
    const std::int64_t gz = static_cast<std::int64_t>(std::ceil((d.nz - 1) * s.dz / g)) + 2;
    std::uniform_real_distribution<double> amp(-spec.jitter_mm, spec.jitter_mm);
    std::vector<Vec3> ctrl(static_cast<std::size_t>(gx * gy * gz));
    for (auto& c : ctrl) {
      c.x = amp(rng);
      c.y = amp(rng);
      c.z = amp(rng);
    }
    auto at = [&](std::int64_t i, std::int64_t j, std::int64_t k) -> const Vec3& {
      return ctrl[static_cast<std::size_t>(i + gx * (j + gy * k))];
    };
    const LabelVolume src = out;
    for (std::int64_t z = 0; z < d.nz; ++z)
      for (std::int64_t y = 0; y < d.ny; ++y)
        for (std::int64_t x = 0; x < d.nx; ++x) {
          const double fx = x * s.dx / g, fy = y * s.dy / g, fz = z * s.dz / g;
          const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy),
                     iz = static_cast<std::int64_t>(fz);
          const double tx = fx - ix, ty = fy - iy, tz = fz - iz;
          Vec3 disp;
          for (int c = 0; c < 8; ++c) {
            const double w = ((c & 1) ? tx : 1 - tx) * ((c & 2) ? ty : 1 - ty) * ((c & 4) ? tz : 1 - tz);
            disp = disp + at(ix + (c & 1), iy + ((c >> 1) & 1), iz + ((c >> 2) & 1)) * w;
          }
          auto sample = [](double v, double sp, std::int64_t n) {
            return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(v / sp + 0.5)), 0, n - 1);
          };
          out(x, y, z) = src(sample(x * s.dx + disp.x, s.dx, d.nx), sample(y * s.dy + disp.y, s.dy, d.ny),
                             sample(z * s.dz + disp.z, s.dz, d.nz));
        }
  }

  if (spec.dropout_count > 0 && spec.dropout_radius_mm > 0) {
    for (int k = 0; k < spec.dropout_count; ++k) {
      std::vector<std::size_t> fg;
      for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i] != Label::Background) fg.push_back(i);
      if (fg.empty()) break;
      std::uniform_int_distribution<std::size_t> pick(0, fg.size() - 1);
      const Vec3 c = out.world(out.coord(fg[pick(rng)]));
      const double r = spec.dropout_radius_mm;
      const auto& s = out.spacing();
      const Vec3 rel = c - out.origin();
      const std::int64_t x0 = static_cast<std::int64_t>(std::floor((rel.x - r) / s.dx)),
                         x1 = static_cast<std::int64_t>(std::ceil((rel.x + r) / s.dx));
      const std::int64_t y0 = static_cast<std::int64_t>(std::floor((rel.y - r) / s.dy)),
                         y1 = static_cast<std::int64_t>(std::ceil((rel.y + r) / s.dy));
      const std::int64_t z0 = static_cast<std::int64_t>(std::floor((rel.z - r) / s.dz)),
                         z1 = static_cast<std::int64_t>(std::ceil((rel.z + r) / s.dz));
      for (std::int64_t z = z0; z <= z1; ++z)
        for (std::int64_t y = y0; y <= y1; ++y)
          for (std::int64_t x = x0; x <= x1; ++x)
            if (out.contains(x, y, z) && norm(out.world({x, y, z}) - c) <= r) out(x, y, z) = Label::Background;
    }
  }
  return out;
}

}  // namespace chdseg
