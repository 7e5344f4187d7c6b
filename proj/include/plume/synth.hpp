#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plume/labeling.hpp"
#include "plume/raster.hpp"
#include "plume/retrieval.hpp"

namespace plume {

struct SynthPlume {
  std::string plume_id;
  double row = 0.0;
  double col = 0.0;
  double peak = 2000.0;         // ppm-m at the source
  double decay = 10.0;          // downwind e-folding length, px
  double cross_decay = 4.0;     // crosswind and upwind e-folding length, px
  double wind_deg = 0.0;        // 0 = +col direction, 90 = +row direction
  Sector sector = Sector::Other;
};

enum class FalseKind { ColumnStripe, Blob, BrightLine };

std::string to_string(FalseKind k);
FalseKind false_kind_from_string(const std::string& s);

struct SynthFalseEnhancement {
  FalseKind kind = FalseKind::Blob;
  double row = 0.0;
  double col = 0.0;
  double magnitude = 1500.0;  // filter response in ppm-m
  double decay = 8.0;         // blob: downwind length; line: half length
  double cross_decay = 3.0;   // blob only
  double angle_deg = 0.0;
  double fraction = 0.6;      // column stripe: leading fraction of rows affected
  /// Spectral departure from the target, relative to the target's Mahalanobis norm.
  double confuser_mix = 1.0;
};

struct SynthSpec {
  std::string scene_id = "scene";
  int rows = 128;
  int cols = 128;
  int bands = 8;
  double gsd = 30.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::string zone;
  double mean_level = 1000.0;  // background radiance scale
  double noise_sd = 5.0;       // per-band radiance noise
  double band_correlation = 0.6;
  double column_gain_sd = 0.02;
  double cmf_noise = 370.0;     // matched-filter noise in ppm-m
  double label_threshold = 500.0;
  double nodata_margin = 0.0;   // slanted swath edge, fraction of cols masked at the top row
  bool allow_overlap = true;    // false: plume and false-enhancement supports must be disjoint
  std::vector<SynthPlume> plumes;
  std::vector<SynthFalseEnhancement> false_enhancements;
  uint64_t seed = 0;

  void validate() const;
};

struct SynthScene {
  std::string scene_id;
  Raster radiance;
  Raster truth_cmf;  // analytic plume enhancement, ppm-m
  LabelProduct truth_labels;
  std::vector<PlumeInstance> instances;
  TargetSpectrum target;
  std::string zone;
  int group = 0;
  nlohmann::json manifest;
};

/// Background covariance used by the generator (band_correlation^|i-j| * noise_sd^2).
Eigen::MatrixXd synth_covariance(const SynthSpec& spec);
/// Target scaled so that the matched-filter noise equals spec.cmf_noise.
TargetSpectrum synth_target(const SynthSpec& spec);

/// Analytic footprint value of a plume at pixel (r, c).
double plume_footprint(const SynthPlume& p, double r, double c);

SynthScene gen_scene(const SynthSpec& spec);

struct CampaignPlan {
  std::string overlap = "disjoint";  // disjoint | pairs | repeats
  int group_size = 2;                // repeats only
  double iou = 0.9;                  // target bbox IoU between passes of a group
  double jitter_px = 1.0;            // site jitter between passes
  int plumes_per_scene = 2;
  int false_per_scene = 0;
  std::vector<FalseKind> false_kinds = {FalseKind::Blob};
  double peak_min = 2000.0;
  double peak_max = 4000.0;
  double decay_min = 8.0;
  double decay_max = 14.0;
  double cross_min = 3.0;
  double cross_max = 5.0;
  double false_min = 1500.0;
  double false_max = 3000.0;
  /// Draw false-enhancement blobs from the plume footprint distribution.
  bool confusers_like_plumes = false;
  double confuser_mix = 1.0;
  int margin_px = 12;  // sites stay this far from the scene edge
  double min_spacing = 0.0;  // between sites, px; 0 selects 2 * decay_max
};

struct Campaign {
  std::vector<SynthScene> scenes;
  nlohmann::json manifest;
};

Campaign gen_campaign(int n_scenes, const CampaignPlan& plan, const SynthSpec& scene_template, uint64_t seed);

nlohmann::json spec_to_json(const SynthSpec& spec);
SynthSpec spec_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const CampaignPlan& plan);
CampaignPlan plan_from_json(const nlohmann::json& j);

/// Writes radiance, truth CMF, instances, target and a manifest into `dir`.
void write_scene(const SynthScene& scene, const std::filesystem::path& dir);
void write_campaign(const Campaign& campaign, const std::filesystem::path& dir);
/// Reads a directory produced by write_campaign.
Campaign read_campaign(const std::filesystem::path& dir);

}  // namespace plume
