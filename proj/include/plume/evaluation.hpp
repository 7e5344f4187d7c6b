#pragma once

#include <map>
#include <string>
#include <vector>

#include "plume/labeling.hpp"
#include "plume/morphology.hpp"
#include "plume/raster.hpp"

namespace plume {

/// precision = tp / (tp + fp), recall = tp / (tp + fn), both 1 on 0/0; F1 is 0 on 0/0.
struct BinaryMetrics {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 0.0;
};

BinaryMetrics binary_metrics(long long tp, long long fp, long long fn);

/// Counts over pixels where `valid` is nonzero.
BinaryMetrics pixel_metrics(const Mask& pred, const Mask& label, const Mask& valid);

/// Tile classification metrics of (score >= threshold) against 0/1 labels.
BinaryMetrics tile_metrics(const std::vector<double>& scores, const std::vector<int>& labels, double threshold);

struct AmbiguityRule {
  int min_area = 81;
  double min_max_enhancement = 1000.0;
};

/// Components of `pred_mask` merged transitively within `radius` px, annotated from band 0 of `cmf`.
std::vector<Roi> detection_rois(const Mask& pred_mask, const Raster& cmf, int radius = 10);

/// Manual flag (roi.ambiguous) OR area below the rule OR max enhancement below the rule.
bool flag_ambiguous(const Roi& roi, const AmbiguityRule& rule = {});

struct InstanceMatch {
  int label_index = 0;
  int detection_index = 0;
  long long overlap_px = 0;
  double iou = 0.0;
};

struct MatchResult {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  std::vector<InstanceMatch> matches;  // every overlapping (label, detection) pair
  std::vector<uint8_t> label_detected;
  std::vector<uint8_t> detection_matched;
};

/// Overlap matching (IoU threshold 0): a label ROI touching any detection is a TP, an untouched
/// label ROI is a FN, and a detection touching no label is a FP.
MatchResult match_instances(const std::vector<Roi>& label_rois, const std::vector<Roi>& detection_rois);

struct InstanceMetrics {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 0.0;
};

/// Per-label-ROI record carried into stratified tables.
struct LabelOutcome {
  std::string scene_id;
  std::string campaign;
  Sector sector = Sector::Other;
  int area_px = 0;
  double max_val = 0.0;
  bool ambiguous = false;
  bool detected = false;
};

struct MetricReport {
  std::string scene_id;
  std::string campaign;
  BinaryMetrics pixel;
  InstanceMetrics all;
  InstanceMetrics unambiguous_only;
  std::vector<Roi> label_rois;
  std::vector<Roi> detection_rois;
  std::vector<InstanceMatch> matches;
  std::vector<LabelOutcome> outcomes;
};

struct SceneReportOptions {
  std::string scene_id;
  std::string campaign;
  int merge_radius = 10;
  AmbiguityRule ambiguity;
};

/// Thresholds `salience` (>= threshold on unmasked pixels) and scores it against the labels.
MetricReport scene_report(const Raster& salience, double threshold, const LabelProduct& labels, const Raster& cmf,
                          const SceneReportOptions& options = {});

/// Scores a precomputed binary prediction.
MetricReport mask_report(const Mask& pred, const LabelProduct& labels, const Raster& cmf,
                         const SceneReportOptions& options = {});

/// Pools instance counts over scene reports.
InstanceMetrics pooled_instances(const std::vector<MetricReport>& reports, bool unambiguous_only = false);

struct StrataBins {
  std::vector<double> area_edges = {100.0, 400.0, 1600.0};          // px
  std::vector<double> concentration_edges = {1000.0, 2000.0, 4000.0};  // ppm-m
};

struct StratumStats {
  long long tp = 0;
  long long fn = 0;
  double fnr = 0.0;  // fn / (tp + fn)
};

/// FNR per stratum; key is one of campaign, sector, area_bin, concentration_bin.
std::map<std::string, StratumStats> stratified_report(const std::vector<MetricReport>& reports, const std::string& key,
                                                      const StrataBins& bins = {});

std::string report_json(const MetricReport& report);
std::string report_table(const MetricReport& report);

}  // namespace plume
