#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plume/detector/training.hpp"
#include "plume/evaluation.hpp"
#include "plume/labeling.hpp"
#include "plume/quality.hpp"
#include "plume/retrieval.hpp"
#include "plume/sampling.hpp"
#include "plume/synth.hpp"

namespace plume {

struct ProcessingConfig {
  CmfOptions cmf;
  LabelConfig labels;
  /// Label with the campaign BGE threshold instead of labels.bge_threshold.
  bool use_campaign_threshold = false;
  int tile_size = 32;
  BackgroundTileConfig background;
};

struct ProcessedScene {
  std::string scene_id;
  int group = 0;
  SceneInfo info;
  Raster cmf;
  LabelProduct labels;
  std::vector<PlumeInstance> instances;
  std::vector<TileSample> plume_tiles;
  std::vector<TileSample> background_tiles;
};

struct ProcessedCampaign {
  std::vector<ProcessedScene> scenes;
  CampaignBgeStats bge;
};

/// cmf -> bge -> labels -> plume and background tiles for every scene of a campaign.
ProcessedCampaign process_campaign(const Campaign& campaign, const ProcessingConfig& config, uint64_t seed);

std::vector<TrainingTile> training_tiles(const ProcessedScene& scene, const std::vector<TileSample>& tiles);

struct StudyConfig {
  ProcessingConfig processing;
  ModelSpec model{DetectorMode::Tilewise, 32, 2, 8, 3, 0};
  TrainConfig train;
  double train_fraction = 0.75;
  // Off lets the study run on campaigns without repeat passes, where the two arms should agree.
  bool require_overlap = true;

  StudyConfig();
};

struct StratificationReport {
  double f1_random = 0.0;
  double f1_stratified = 0.0;
  double gap = 0.0;  // f1_random - f1_stratified
  size_t random_train = 0, random_test = 0;
  size_t stratified_train = 0, stratified_test = 0;

  nlohmann::json to_json() const;
};

/// Trains the same tilewise model on a group-stratified split and on a class-stratified random
/// tile split, and compares tilewise test F1 at probability 0.5.
StratificationReport run_stratification_study(const Campaign& campaign, uint64_t seed, const StudyConfig& config = {});

struct SceneFalsePositives {
  std::string scene_id;
  std::vector<Roi> rois;
};

struct SamplingReport {
  long long fp_dense = 0;
  long long fp_balanced = 0;
  long long fp_total = 0;
  size_t dense_tiles = 0;
  size_t balanced_tiles = 0;
  size_t plume_tiles = 0;

  nlohmann::json to_json() const;
};

/// FP ROIs intersecting the dense background sample versus a seeded balanced subset of
/// `balanced_count` of its tiles.
SamplingReport compare_sampling(const std::vector<SceneFalsePositives>& fps, const std::vector<TileSample>& dense,
                                size_t balanced_count, uint64_t seed);

/// Trains one multitask model on the training groups and counts its test-scene false positive
/// detections captured by balanced versus dense background sampling.
SamplingReport run_sampling_study(const Campaign& campaign, uint64_t seed, const StudyConfig& config = {});

struct DetectionBenchmark {
  InstanceMetrics all;
  InstanceMetrics unambiguous_only;
  BinaryMetrics pixel;  // pooled over test scenes
  double threshold = 0.5;
  size_t train_scenes = 0;
  size_t test_scenes = 0;
  size_t train_tiles = 0;
  std::vector<double> epoch_losses;

  nlohmann::json to_json() const;
};

/// cmf -> labels -> tiles -> train (config.model mode) -> calibrate -> infer -> eval, scored on
/// the held-out scene groups.
DetectionBenchmark run_detection_benchmark(const Campaign& campaign, uint64_t seed, const StudyConfig& config);

/// Campaign presets used by the studies.
Campaign leakage_campaign(uint64_t seed, int n_scenes = 32);
Campaign sampling_campaign(uint64_t seed, int n_scenes = 8);
Campaign detection_campaign(uint64_t seed, int n_scenes = 20);

}  // namespace plume
