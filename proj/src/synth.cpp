#include "plume/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace plume {

std::string to_string(FalseKind k) {
  switch (k) {
    case FalseKind::ColumnStripe:
      return "column_stripe";
    case FalseKind::Blob:
      return "blob";
    case FalseKind::BrightLine:
      return "bright_line";
  }
  return "blob";
}

FalseKind false_kind_from_string(const std::string& s) {
  if (s == "column_stripe") return FalseKind::ColumnStripe;
  if (s == "blob") return FalseKind::Blob;
  if (s == "bright_line") return FalseKind::BrightLine;
  throw FormatError("unknown false enhancement kind: " + s);
}

void SynthSpec::validate() const {
  if (rows < 2 || cols < 1 || bands < 2) throw Error("synth: scene needs rows >= 2, cols >= 1, bands >= 2");
  if (!(noise_sd > 0.0) || !(cmf_noise > 0.0) || !(mean_level > 0.0)) throw Error("synth: noise and level must be positive");
  if (band_correlation <= -1.0 || band_correlation >= 1.0) throw Error("synth: band_correlation must lie in (-1, 1)");
  if (nodata_margin < 0.0 || nodata_margin > 1.0) throw Error("synth: nodata_margin must lie in [0, 1]");
  for (const auto& p : plumes) {
    if (!(p.peak > 0.0)) throw Error("synth: plume " + p.plume_id + " needs a positive peak");
    if (!(p.decay > 0.0) || !(p.cross_decay > 0.0)) throw Error("synth: plume " + p.plume_id + " needs positive decay");
    if (p.row < 0 || p.col < 0 || p.row >= rows || p.col >= cols)
      throw Error("synth: plume " + p.plume_id + " origin outside the scene");
  }
  for (const auto& f : false_enhancements) {
    if (!(f.magnitude > 0.0)) throw Error("synth: false enhancement magnitude must be positive");
    if (f.row < 0 || f.col < 0 || f.row >= rows || f.col >= cols)
      throw Error("synth: false enhancement outside the scene");
  }
}

Eigen::MatrixXd synth_covariance(const SynthSpec& spec) {
  Eigen::MatrixXd s(spec.bands, spec.bands);
  for (int i = 0; i < spec.bands; ++i)
    for (int j = 0; j < spec.bands; ++j)
      s(i, j) = std::pow(spec.band_correlation, std::abs(i - j)) * spec.noise_sd * spec.noise_sd;
  return s;
}

TargetSpectrum synth_target(const SynthSpec& spec) {
  const int B = spec.bands;
  Eigen::VectorXd t0(B);
  for (int b = 0; b < B; ++b) {
    const double z = (b - 0.5 * (B - 1)) / (0.25 * B);
    t0(b) = -std::exp(-z * z) - 0.3 * (b % 2);
  }
  const Eigen::MatrixXd sigma = synth_covariance(spec);
  const double energy = t0.dot(sigma.llt().solve(t0));
  return TargetSpectrum{t0 / (spec.cmf_noise * std::sqrt(energy))};
}

namespace {

// Exponential footprint shape in rotated coordinates; u is downwind.
double shape(double dr, double dc, double decay, double cross, double angle_deg) {
  const double th = angle_deg * std::numbers::pi / 180.0;
  const double u = dc * std::cos(th) + dr * std::sin(th);
  const double v = -dc * std::sin(th) + dr * std::cos(th);
  const double along = u >= 0.0 ? u / decay : -u / cross;
  return std::exp(-along - std::abs(v) / cross);
}

// Field of a false enhancement in ppm-m equivalent.
double false_field(const SynthFalseEnhancement& f, int r, int c, int rows) {
  switch (f.kind) {
    case FalseKind::Blob:
      return f.magnitude * shape(r - f.row, c - f.col, f.decay, f.cross_decay, f.angle_deg);
    case FalseKind::BrightLine: {
      const double th = f.angle_deg * std::numbers::pi / 180.0;
      const double dr = r - f.row, dc = c - f.col;
      const double u = dc * std::cos(th) + dr * std::sin(th);
      const double v = -dc * std::sin(th) + dr * std::cos(th);
      return std::abs(u) <= f.decay && std::abs(v) <= 0.75 ? f.magnitude : 0.0;
    }
    case FalseKind::ColumnStripe:
      return c == static_cast<int>(std::lround(f.col)) && r < static_cast<int>(std::ceil(f.fraction * rows)) ? f.magnitude
                                                                                                         : 0.0;
  }
  return 0.0;
}

// Component w with t' S^-1 w = 0 and Mahalanobis norm equal to that of t.
Eigen::VectorXd orthogonal_component(const Eigen::VectorXd& t, const Eigen::MatrixXd& sigma, Rng& rng) {
  const auto llt = sigma.llt();
  const Eigen::VectorXd st = llt.solve(t);
  const double tt = t.dot(st);
  for (int attempt = 0; attempt < 16; ++attempt) {
    Eigen::VectorXd r(t.size());
    for (int i = 0; i < r.size(); ++i) r(i) = rng.normal();
    Eigen::VectorXd w = r - (st.dot(r) / tt) * t;
    const double ww = w.dot(llt.solve(w));
    if (ww > 1e-12 * tt) return w * std::sqrt(tt / ww);
  }
  return Eigen::VectorXd::Zero(t.size());
}

}  // namespace

double plume_footprint(const SynthPlume& p, double r, double c) {
  return p.peak * shape(r - p.row, c - p.col, p.decay, p.cross_decay, p.wind_deg);
}

SynthScene gen_scene(const SynthSpec& spec) {
  spec.validate();
  const int R = spec.rows, C = spec.cols, B = spec.bands;
  Rng rng(derive_seed(spec.seed, 0x73796e7468ull));
  const Eigen::MatrixXd sigma = synth_covariance(spec);
  const Eigen::MatrixXd L = sigma.llt().matrixL();
  SynthScene out;
  out.scene_id = spec.scene_id;
  out.zone = spec.zone;
  out.target = synth_target(spec);
  const Eigen::VectorXd& t = out.target.t;

  Mask nodata(R, C, 0);
  for (int r = 0; r < R; ++r) {
    const double edge = spec.nodata_margin * C * (1.0 - static_cast<double>(r) / R);
    for (int c = 0; c < C; ++c) nodata(r, c) = c < edge ? 1 : 0;
  }

  Grid<double> truth(R, C, 0.0);
  std::vector<Mask> supports;
  for (const auto& p : spec.plumes) {
    Mask s(R, C, 0);
    for (int r = 0; r < R; ++r) {
      for (int c = 0; c < C; ++c) {
        const double v = plume_footprint(p, r, c);
        truth(r, c) += v;
        s(r, c) = v > spec.label_threshold && !nodata(r, c) ? 1 : 0;
      }
    }
    supports.push_back(std::move(s));
  }

  std::vector<Eigen::VectorXd> fe_spectra;
  std::vector<Grid<double>> fe_fields;
  for (const auto& f : spec.false_enhancements) {
    Eigen::VectorXd s = t;
    if (f.kind != FalseKind::ColumnStripe) s += f.confuser_mix * orthogonal_component(t, sigma, rng);
    fe_spectra.push_back(s);
    Grid<double> field(R, C, 0.0);
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) field(r, c) = false_field(f, r, c, R);
    if (!spec.allow_overlap) {
      for (const auto& sup : supports)
        for (size_t i = 0; i < sup.size(); ++i)
          if (sup.data[i] && field.data[i] > spec.label_threshold)
            throw Error("synth: false enhancement overlaps a plume support");
    }
    fe_fields.push_back(std::move(field));
  }

  std::vector<double> gain(static_cast<size_t>(C));
  for (auto& g : gain) g = 1.0 + spec.column_gain_sd * rng.normal();

  Raster rad(R, C, B);
  rad.nodata = -9999.0;
  rad.nodata_mask = nodata;
  rad.gsd = spec.gsd;
  rad.bbox = bbox_from_origin(spec.origin_x, spec.origin_y, R, C, spec.gsd);
  for (int b = 0; b < B; ++b) rad.band_names.push_back("b" + std::to_string(b));
  Eigen::VectorXd z(B), x(B);
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      for (int b = 0; b < B; ++b) z(b) = rng.normal();
      x = L * z;
      for (int b = 0; b < B; ++b) x(b) += spec.mean_level * (1.0 + 0.05 * b) * gain[static_cast<size_t>(c)];
      x += truth(r, c) * t;
      for (size_t k = 0; k < fe_fields.size(); ++k) x += fe_fields[k](r, c) * fe_spectra[k];
      for (int b = 0; b < B; ++b) rad.at(b, r, c) = nodata(r, c) ? -9999.0f : static_cast<float>(x(b));
    }
  }
  out.radiance = std::move(rad);

  out.truth_cmf = out.radiance.like(1);
  out.truth_cmf.band_names = {"enhancement"};
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) out.truth_cmf.at(r, c) = nodata(r, c) ? 0.0f : static_cast<float>(truth(r, c));

  LabelProduct& lab = out.truth_labels;
  lab.plume_mask = Mask(R, C, 0);
  lab.bg_priority_mask = Mask(R, C, 0);
  const Grid<float> truth_f = out.truth_cmf.band(0);
  for (size_t k = 0; k < spec.plumes.size(); ++k) {
    const auto& p = spec.plumes[k];
    Roi roi;
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c)
        if (supports[k](r, c)) {
          roi.pixels.push_back({r, c});
          lab.plume_mask(r, c) = 1;
        }
    if (roi.pixels.empty()) {
      lab.rejected.push_back({p.plume_id, RejectReason::NoSeed});
    } else {
      roi.annotate(truth_f);
      lab.kept.push_back({p.plume_id, p.sector, roi});
    }
    PlumeInstance inst;
    inst.scene_id = spec.scene_id;
    inst.plume_id = p.plume_id;
    inst.origin = Pixel{static_cast<int>(std::lround(p.row)), static_cast<int>(std::lround(p.col))};
    inst.sector = p.sector;
    out.instances.push_back(inst);
  }
  auto by_id = [](const auto& a, const auto& b) { return a.plume_id < b.plume_id; };
  std::sort(lab.kept.begin(), lab.kept.end(), by_id);
  std::sort(lab.rejected.begin(), lab.rejected.end(), by_id);
  std::sort(out.instances.begin(), out.instances.end(), by_id);

  out.manifest = spec_to_json(spec);
  nlohmann::json areas = nlohmann::json::object();
  for (const auto& k : lab.kept) areas[k.plume_id] = k.roi.area_px;
  out.manifest["truth_label_area"] = areas;
  return out;
}

Campaign gen_campaign(int n_scenes, const CampaignPlan& plan, const SynthSpec& tmpl, uint64_t seed) {
  if (n_scenes < 2) throw Error("gen_campaign: need at least two scenes");
  int group_size = 1;
  if (plan.overlap == "pairs")
    group_size = 2;
  else if (plan.overlap == "repeats")
    group_size = plan.group_size;
  else if (plan.overlap != "disjoint")
    throw Error("gen_campaign: unknown overlap plan '" + plan.overlap + "'");
  if (group_size < 1) throw Error("gen_campaign: group_size must be positive");
  if (group_size > 1 && !(plan.iou > 0.0 && plan.iou < 1.0)) throw Error("gen_campaign: iou must lie in (0, 1)");

  const int R = tmpl.rows, C = tmpl.cols;
  // Column shift between consecutive passes for the requested IoU: (C - s) / (C + s) = iou.
  const int shift = group_size > 1 ? std::max(1, static_cast<int>(std::lround(C * (1.0 - plan.iou) / (1.0 + plan.iou)))) : 0;
  const int span = (group_size - 1) * shift;
  const int lo_c = plan.margin_px + span, hi_c = C - plan.margin_px;
  const int lo_r = plan.margin_px, hi_r = R - plan.margin_px;
  if (hi_c <= lo_c || hi_r <= lo_r) throw Error("gen_campaign: infeasible overlap plan for the scene size");

  Rng rng(derive_seed(seed, 0x63616d70ull));
  const std::vector<Sector> sectors = {Sector::OilNG, Sector::Landfill, Sector::Livestock, Sector::ElectricityGen,
                                       Sector::Wastewater};
  Campaign camp;
  nlohmann::json scenes = nlohmann::json::array();
  const int n_groups = (n_scenes + group_size - 1) / group_size;
  int scene_index = 0;
  for (int g = 0; g < n_groups && scene_index < n_scenes; ++g) {
    struct Site {
      bool plume;
      double row, col;
      SynthPlume p;
      SynthFalseEnhancement f;
    };
    std::vector<Site> sites;
    const int n_sites = plan.plumes_per_scene + plan.false_per_scene;
    const double spacing = plan.min_spacing > 0.0 ? plan.min_spacing : 2.0 * plan.decay_max;
    for (int k = 0; k < n_sites; ++k) {
      Site s{};
      s.plume = k < plan.plumes_per_scene;
      bool placed = false;
      for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
        s.row = rng.integer(lo_r, hi_r - 1);
        s.col = rng.integer(lo_c, hi_c - 1);
        placed = std::all_of(sites.begin(), sites.end(),
                             [&](const Site& o) { return std::hypot(o.row - s.row, o.col - s.col) >= spacing; });
      }
      if (!placed) throw Error("gen_campaign: cannot place sites with the requested density");
      const double wind = rng.uniform(0.0, 360.0);
      if (s.plume) {
        s.p.peak = rng.uniform(plan.peak_min, plan.peak_max);
        s.p.decay = rng.uniform(plan.decay_min, plan.decay_max);
        s.p.cross_decay = rng.uniform(plan.cross_min, plan.cross_max);
        s.p.wind_deg = wind;
        s.p.sector = sectors[rng.index(sectors.size())];
        char id[32];
        std::snprintf(id, sizeof id, "g%03d-p%02d", g, k);
        s.p.plume_id = id;
      } else {
        s.f.kind = plan.false_kinds.empty() ? FalseKind::Blob : plan.false_kinds[rng.index(plan.false_kinds.size())];
        s.f.angle_deg = wind;
        if (plan.confusers_like_plumes) {
          s.f.magnitude = rng.uniform(plan.peak_min, plan.peak_max);
          s.f.decay = rng.uniform(plan.decay_min, plan.decay_max);
          s.f.cross_decay = rng.uniform(plan.cross_min, plan.cross_max);
          s.f.confuser_mix = plan.confuser_mix;
        } else {
          s.f.magnitude = rng.uniform(plan.false_min, plan.false_max);
          s.f.decay = rng.uniform(plan.decay_min, plan.decay_max);
          s.f.cross_decay = rng.uniform(plan.cross_min, plan.cross_max);
          s.f.confuser_mix = plan.confuser_mix;
        }
      }
      sites.push_back(s);
    }

    const double group_x = g * (C + 10.0 * (span + C)) * tmpl.gsd;
    for (int pass = 0; pass < group_size && scene_index < n_scenes; ++pass, ++scene_index) {
      SynthSpec spec = tmpl;
      char sid[32];
      std::snprintf(sid, sizeof sid, "s%03d", scene_index);
      spec.scene_id = sid;
      spec.seed = derive_seed(seed, static_cast<uint64_t>(scene_index) + 1);
      spec.origin_x = group_x + pass * shift * tmpl.gsd;
      spec.origin_y = 0.0;
      spec.zone = "Z" + std::to_string(g);
      spec.plumes.clear();
      spec.false_enhancements.clear();
      for (const auto& s : sites) {
        const double jr = plan.jitter_px > 0 ? rng.uniform(-plan.jitter_px, plan.jitter_px) : 0.0;
        const double jc = plan.jitter_px > 0 ? rng.uniform(-plan.jitter_px, plan.jitter_px) : 0.0;
        const double row = std::clamp(std::round(s.row + jr), 0.0, R - 1.0);
        const double col = std::clamp(std::round(s.col - pass * shift + jc), 0.0, C - 1.0);
        if (s.plume) {
          SynthPlume p = s.p;
          p.row = row;
          p.col = col;
          spec.plumes.push_back(p);
        } else {
          SynthFalseEnhancement f = s.f;
          f.row = row;
          f.col = col;
          spec.false_enhancements.push_back(f);
        }
      }
      SynthScene scene = gen_scene(spec);
      scene.group = g;
      scene.manifest["group"] = g;
      scenes.push_back({{"scene_id", spec.scene_id},
                        {"group", g},
                        {"zone", spec.zone},
                        {"bbox", {scene.radiance.bbox.min_x, scene.radiance.bbox.min_y, scene.radiance.bbox.max_x,
                                  scene.radiance.bbox.max_y}}});
      camp.scenes.push_back(std::move(scene));
    }
  }
  camp.manifest = {{"seed", seed}, {"plan", plan_to_json(plan)}, {"template", spec_to_json(tmpl)}, {"scenes", scenes}};
  return camp;
}

nlohmann::json spec_to_json(const SynthSpec& s) {
  nlohmann::json j;
  j["scene_id"] = s.scene_id;
  j["rows"] = s.rows;
  j["cols"] = s.cols;
  j["bands"] = s.bands;
  j["gsd"] = s.gsd;
  j["origin_x"] = s.origin_x;
  j["origin_y"] = s.origin_y;
  j["zone"] = s.zone;
  j["mean_level"] = s.mean_level;
  j["noise_sd"] = s.noise_sd;
  j["band_correlation"] = s.band_correlation;
  j["column_gain_sd"] = s.column_gain_sd;
  j["cmf_noise"] = s.cmf_noise;
  j["label_threshold"] = s.label_threshold;
  j["nodata_margin"] = s.nodata_margin;
  j["allow_overlap"] = s.allow_overlap;
  j["seed"] = s.seed;
  nlohmann::json plumes = nlohmann::json::array();
  for (const auto& p : s.plumes)
    plumes.push_back({{"plume_id", p.plume_id},
                      {"row", p.row},
                      {"col", p.col},
                      {"peak", p.peak},
                      {"decay", p.decay},
                      {"cross_decay", p.cross_decay},
                      {"wind_deg", p.wind_deg},
                      {"sector", to_string(p.sector)}});
  j["plumes"] = plumes;
  nlohmann::json fes = nlohmann::json::array();
  for (const auto& f : s.false_enhancements)
    fes.push_back({{"kind", to_string(f.kind)},
                   {"row", f.row},
                   {"col", f.col},
                   {"magnitude", f.magnitude},
                   {"decay", f.decay},
                   {"cross_decay", f.cross_decay},
                   {"angle_deg", f.angle_deg},
                   {"fraction", f.fraction},
                   {"confuser_mix", f.confuser_mix}});
  j["false_enhancements"] = fes;
  return j;
}

namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

SynthSpec spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    read_opt(j, "scene_id", s.scene_id);
    read_opt(j, "rows", s.rows);
    read_opt(j, "cols", s.cols);
    read_opt(j, "bands", s.bands);
    read_opt(j, "gsd", s.gsd);
    read_opt(j, "origin_x", s.origin_x);
    read_opt(j, "origin_y", s.origin_y);
    read_opt(j, "zone", s.zone);
    read_opt(j, "mean_level", s.mean_level);
    read_opt(j, "noise_sd", s.noise_sd);
    read_opt(j, "band_correlation", s.band_correlation);
    read_opt(j, "column_gain_sd", s.column_gain_sd);
    read_opt(j, "cmf_noise", s.cmf_noise);
    read_opt(j, "label_threshold", s.label_threshold);
    read_opt(j, "nodata_margin", s.nodata_margin);
    read_opt(j, "allow_overlap", s.allow_overlap);
    read_opt(j, "seed", s.seed);
    if (j.contains("plumes")) {
      int k = 0;
      for (const auto& pj : j.at("plumes")) {
        SynthPlume p;
        p.plume_id = "p" + std::to_string(k++);
        read_opt(pj, "plume_id", p.plume_id);
        p.row = pj.at("row").get<double>();
        p.col = pj.at("col").get<double>();
        read_opt(pj, "peak", p.peak);
        read_opt(pj, "decay", p.decay);
        read_opt(pj, "cross_decay", p.cross_decay);
        read_opt(pj, "wind_deg", p.wind_deg);
        if (pj.contains("sector")) p.sector = sector_from_string(pj.at("sector").get<std::string>());
        s.plumes.push_back(p);
      }
    }
    if (j.contains("false_enhancements")) {
      for (const auto& fj : j.at("false_enhancements")) {
        SynthFalseEnhancement f;
        if (fj.contains("kind")) f.kind = false_kind_from_string(fj.at("kind").get<std::string>());
        f.row = fj.value("row", 0.0);
        f.col = fj.at("col").get<double>();
        read_opt(fj, "magnitude", f.magnitude);
        read_opt(fj, "decay", f.decay);
        read_opt(fj, "cross_decay", f.cross_decay);
        read_opt(fj, "angle_deg", f.angle_deg);
        read_opt(fj, "fraction", f.fraction);
        read_opt(fj, "confuser_mix", f.confuser_mix);
        s.false_enhancements.push_back(f);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed synth spec: " + std::string(e.what()));
  }
  s.validate();
  return s;
}

nlohmann::json plan_to_json(const CampaignPlan& p) {
  nlohmann::json kinds = nlohmann::json::array();
  for (auto k : p.false_kinds) kinds.push_back(to_string(k));
  return {{"overlap", p.overlap},
          {"group_size", p.group_size},
          {"iou", p.iou},
          {"jitter_px", p.jitter_px},
          {"plumes_per_scene", p.plumes_per_scene},
          {"false_per_scene", p.false_per_scene},
          {"false_kinds", kinds},
          {"peak_min", p.peak_min},
          {"peak_max", p.peak_max},
          {"decay_min", p.decay_min},
          {"decay_max", p.decay_max},
          {"cross_min", p.cross_min},
          {"cross_max", p.cross_max},
          {"false_min", p.false_min},
          {"false_max", p.false_max},
          {"confusers_like_plumes", p.confusers_like_plumes},
          {"confuser_mix", p.confuser_mix},
          {"margin_px", p.margin_px},
          {"min_spacing", p.min_spacing}};
}

CampaignPlan plan_from_json(const nlohmann::json& j) {
  CampaignPlan p;
  try {
    read_opt(j, "overlap", p.overlap);
    read_opt(j, "group_size", p.group_size);
    read_opt(j, "iou", p.iou);
    read_opt(j, "jitter_px", p.jitter_px);
    read_opt(j, "plumes_per_scene", p.plumes_per_scene);
    read_opt(j, "false_per_scene", p.false_per_scene);
    if (j.contains("false_kinds")) {
      p.false_kinds.clear();
      for (const auto& k : j.at("false_kinds")) p.false_kinds.push_back(false_kind_from_string(k.get<std::string>()));
    }
    read_opt(j, "peak_min", p.peak_min);
    read_opt(j, "peak_max", p.peak_max);
    read_opt(j, "decay_min", p.decay_min);
    read_opt(j, "decay_max", p.decay_max);
    read_opt(j, "cross_min", p.cross_min);
    read_opt(j, "cross_max", p.cross_max);
    read_opt(j, "false_min", p.false_min);
    read_opt(j, "false_max", p.false_max);
    read_opt(j, "confusers_like_plumes", p.confusers_like_plumes);
    read_opt(j, "confuser_mix", p.confuser_mix);
    read_opt(j, "margin_px", p.margin_px);
    read_opt(j, "min_spacing", p.min_spacing);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed campaign plan: " + std::string(e.what()));
  }
  return p;
}

void write_scene(const SynthScene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_raster(scene.radiance, dir / (scene.scene_id + "_radiance"));
  write_raster(scene.truth_cmf, dir / (scene.scene_id + "_truth"));
  write_instances(scene.instances, dir / (scene.scene_id + "_instances.jsonl"));
  write_target(scene.target, dir / "target.json");
  std::ofstream(dir / (scene.scene_id + "_manifest.json")) << scene.manifest.dump(2) << "\n";
}

void write_campaign(const Campaign& campaign, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : campaign.scenes) write_scene(s, dir);
  std::ofstream(dir / "campaign.json") << campaign.manifest.dump(2) << "\n";
}

Campaign read_campaign(const std::filesystem::path& dir) {
  std::ifstream in(dir / "campaign.json");
  if (!in) throw FormatError("campaign manifest not found in " + dir.string());
  Campaign camp;
  try {
    in >> camp.manifest;
    const TargetSpectrum target = read_target(dir / "target.json");
    for (const auto& sj : camp.manifest.at("scenes")) {
      SynthScene s;
      s.scene_id = sj.at("scene_id").get<std::string>();
      s.group = sj.value("group", 0);
      s.zone = sj.value("zone", std::string());
      s.radiance = read_raster(dir / (s.scene_id + "_radiance"));
      s.instances = read_instances(dir / (s.scene_id + "_instances.jsonl"));
      s.target = target;
      std::ifstream mj(dir / (s.scene_id + "_manifest.json"));
      if (mj) mj >> s.manifest;
      camp.scenes.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed campaign manifest: " + std::string(e.what()));
  }
  return camp;
}

}  // namespace plume
