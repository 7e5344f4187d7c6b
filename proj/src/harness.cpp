#include "plume/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "plume/evaluation.hpp"
#include "plume/inference.hpp"

namespace plume {

ProcessedCampaign process_campaign(const Campaign& campaign, const ProcessingConfig& config, uint64_t seed) {
  ProcessedCampaign out;
  const size_t n = campaign.scenes.size();
  out.scenes.resize(n);
  std::vector<BgeProfile> profiles(n);
  parallel_for(n, [&](size_t i) {
    const SynthScene& s = campaign.scenes[i];
    ProcessedScene& p = out.scenes[i];
    p.scene_id = s.scene_id;
    p.group = s.group;
    p.info = SceneInfo{s.scene_id, s.radiance.bbox, s.zone};
    p.cmf = cmf_scene(s.radiance, s.target, config.cmf);
    p.instances = s.instances;
    profiles[i] = bge_profile(p.cmf, s.scene_id);
  });
  out.bge = campaign_stats(profiles);
  LabelConfig lc = config.labels;
  if (config.use_campaign_threshold) lc.bge_threshold = out.bge.threshold;
  parallel_for(n, [&](size_t i) {
    ProcessedScene& p = out.scenes[i];
    p.labels = cmf_guided_labels(p.cmf, p.instances, lc);
    p.plume_tiles = sample_plume_tiles(p.cmf, p.labels, config.tile_size, p.scene_id);
    p.background_tiles = sample_background_tiles(p.cmf, p.labels, p.plume_tiles, config.tile_size,
                                                 derive_seed(seed, i), p.scene_id, config.background);
  });
  return out;
}

std::vector<TrainingTile> training_tiles(const ProcessedScene& scene, const std::vector<TileSample>& tiles) {
  std::vector<TrainingTile> out;
  out.reserve(tiles.size());
  for (const auto& t : tiles) out.push_back({extract_tile(scene.cmf, scene.labels.plume_mask, t), t.klass});
  return out;
}

StudyConfig::StudyConfig() {
  train.max_epochs = 150;
  train.batch_size = 16;
  // Random dihedral ops would scramble the per-site orientation that repeat passes share.
  train.augment = false;
}

nlohmann::json StratificationReport::to_json() const {
  return {{"f1_random", f1_random},
          {"f1_stratified", f1_stratified},
          {"gap", gap},
          {"random", {{"train_tiles", random_train}, {"test_tiles", random_test}}},
          {"stratified", {{"train_tiles", stratified_train}, {"test_tiles", stratified_test}}}};
}

nlohmann::json SamplingReport::to_json() const {
  return {{"fp_dense", fp_dense},         {"fp_balanced", fp_balanced},       {"fp_total", fp_total},
          {"dense_tiles", dense_tiles},   {"balanced_tiles", balanced_tiles}, {"plume_tiles", plume_tiles},
          {"delta", fp_dense - fp_balanced}};
}

namespace {

std::vector<SceneInfo> scene_infos(const ProcessedCampaign& pc) {
  std::vector<SceneInfo> infos;
  for (const auto& s : pc.scenes) infos.push_back(s.info);
  return infos;
}

double tile_f1(const DetectorModel& model, const std::vector<TrainingTile>& tiles, const TrainConfig& cfg) {
  std::vector<double> scores(tiles.size());
  std::vector<int> labels(tiles.size());
  parallel_for(tiles.size(), [&](size_t i) {
    const auto& d = tiles[i].data;
    const TilePrediction p = forward(model, prepare_input(d.values, d.nodata, cfg.clip_lo, cfg.clip_hi));
    scores[i] = p.probability;
    labels[i] = tiles[i].klass == TileClass::Plume ? 1 : 0;
  });
  return tile_metrics(scores, labels, 0.5).f1;
}

double train_and_score(const StudyConfig& cfg, uint64_t seed, const std::vector<TrainingTile>& train_set,
                       const std::vector<TrainingTile>& test_set) {
  ModelSpec spec = cfg.model;
  spec.seed = seed;
  DetectorModel model(spec);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  train(model, train_set, tc);
  return tile_f1(model, test_set, tc);
}

// Background tiles placed on blob confusers with the plume-tile rule, so tile geometry
// carries no class information. Tiles touching plume tiles or plume pixels are dropped.
std::vector<TileSample> confuser_tiles(const SynthScene& synth, const ProcessedScene& scene,
                                       const ProcessingConfig& cfg) {
  std::vector<PlumeInstance> sites;
  int k = 0;
  for (const auto& f : synth.manifest.at("false_enhancements")) {
    if (f.at("kind").get<std::string>() != "blob") continue;
    PlumeInstance inst;
    inst.scene_id = scene.scene_id;
    inst.plume_id = "confuser-" + std::to_string(k++);
    inst.origin = Pixel{static_cast<int>(std::lround(f.at("row").get<double>())),
                        static_cast<int>(std::lround(f.at("col").get<double>()))};
    sites.push_back(inst);
  }
  std::vector<TileSample> out;
  if (sites.empty()) return out;
  LabelConfig lc = cfg.labels;
  const LabelProduct confusers = cmf_guided_labels(scene.cmf, sites, lc);
  for (auto t : sample_plume_tiles(scene.cmf, confusers, cfg.tile_size, scene.scene_id)) {
    bool clash = std::any_of(scene.plume_tiles.begin(), scene.plume_tiles.end(),
                             [&](const TileSample& p) { return p.overlaps(t); });
    for (int r = t.row0; r < t.row0 + t.size && !clash; ++r)
      for (int c = t.col0; c < t.col0 + t.size && !clash; ++c) clash = scene.labels.plume_mask(r, c) != 0;
    if (clash) continue;
    t.klass = TileClass::Background;
    out.push_back(t);
  }
  return out;
}

}  // namespace

StratificationReport run_stratification_study(const Campaign& campaign, uint64_t seed, const StudyConfig& config) {
  ProcessingConfig pcfg = config.processing;
  pcfg.tile_size = config.model.tile_size;
  const ProcessedCampaign pc = process_campaign(campaign, pcfg, seed);
  const auto groups = group_scenes(scene_infos(pc), GroupMode::IouGraph);
  if (config.require_overlap &&
      std::all_of(groups.begin(), groups.end(), [](const SceneGroup& g) { return g.scene_ids.size() < 2; }))
    throw Error("stratification study: campaign has no overlapping scene groups");

  std::vector<TrainingTile> all;
  std::vector<std::string> tile_scene;
  for (size_t i = 0; i < pc.scenes.size(); ++i) {
    const ProcessedScene& s = pc.scenes[i];
    std::vector<TileSample> tiles = s.plume_tiles;
    for (auto& t : confuser_tiles(campaign.scenes[i], s, pcfg)) tiles.push_back(std::move(t));
    for (const auto& b : s.background_tiles)
      if (std::none_of(tiles.begin(), tiles.end(), [&](const TileSample& t) { return t.overlaps(b); }))
        tiles.push_back(b);
    for (auto& t : training_tiles(s, tiles)) {
      all.push_back(std::move(t));
      tile_scene.push_back(s.scene_id);
    }
  }

  StratificationReport rep;
  const SplitAssignment split = split_groups(groups, config.train_fraction, derive_seed(seed, 1));
  const auto side = split.scene_split(groups);
  std::vector<TrainingTile> s_train, s_test;
  for (size_t i = 0; i < all.size(); ++i) (side.at(tile_scene[i]) == "train" ? s_train : s_test).push_back(all[i]);

  std::vector<size_t> plume_idx, bg_idx;
  for (size_t i = 0; i < all.size(); ++i) (all[i].klass == TileClass::Plume ? plume_idx : bg_idx).push_back(i);
  Rng rng(derive_seed(seed, 2));
  rng.shuffle(plume_idx);
  rng.shuffle(bg_idx);
  std::vector<TrainingTile> r_train, r_test;
  for (const auto* idx : {&plume_idx, &bg_idx}) {
    const auto n_train = static_cast<size_t>(std::llround(config.train_fraction * static_cast<double>(idx->size())));
    for (size_t k = 0; k < idx->size(); ++k) (k < n_train ? r_train : r_test).push_back(all[(*idx)[k]]);
  }

  rep.stratified_train = s_train.size();
  rep.stratified_test = s_test.size();
  rep.random_train = r_train.size();
  rep.random_test = r_test.size();
  rep.f1_stratified = train_and_score(config, seed, s_train, s_test);
  rep.f1_random = train_and_score(config, seed, r_train, r_test);
  rep.gap = rep.f1_random - rep.f1_stratified;
  return rep;
}

SamplingReport compare_sampling(const std::vector<SceneFalsePositives>& fps, const std::vector<TileSample>& dense,
                                size_t balanced_count, uint64_t seed) {
  std::vector<size_t> order(dense.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(derive_seed(seed, 3));
  rng.shuffle(order);
  order.resize(std::min(balanced_count, order.size()));
  std::sort(order.begin(), order.end());
  std::vector<TileSample> balanced;
  for (size_t i : order) balanced.push_back(dense[i]);

  auto captured = [&](const std::vector<TileSample>& tiles) {
    long long n = 0;
    for (const auto& scene : fps) {
      for (const auto& roi : scene.rois) {
        const bool hit = std::any_of(tiles.begin(), tiles.end(), [&](const TileSample& t) {
          if (t.scene_id != scene.scene_id) return false;
          return std::any_of(roi.pixels.begin(), roi.pixels.end(), [&](const Pixel& p) {
            return p.row >= t.row0 && p.row < t.row0 + t.size && p.col >= t.col0 && p.col < t.col0 + t.size;
          });
        });
        n += hit ? 1 : 0;
      }
    }
    return n;
  };
  SamplingReport rep;
  rep.fp_dense = captured(dense);
  rep.fp_balanced = captured(balanced);
  for (const auto& s : fps) rep.fp_total += static_cast<long long>(s.rois.size());
  rep.dense_tiles = dense.size();
  rep.balanced_tiles = balanced.size();
  return rep;
}

SamplingReport run_sampling_study(const Campaign& campaign, uint64_t seed, const StudyConfig& config) {
  ProcessingConfig pcfg = config.processing;
  StudyConfig cfg = config;
  cfg.model.mode = DetectorMode::Multitask;
  pcfg.tile_size = cfg.model.tile_size;
  const ProcessedCampaign pc = process_campaign(campaign, pcfg, seed);
  const auto groups = group_scenes(scene_infos(pc), GroupMode::IouGraph);
  const SplitAssignment split = split_groups(groups, cfg.train_fraction, derive_seed(seed, 1));
  const auto side = split.scene_split(groups);

  std::vector<TrainingTile> train_set;
  for (const auto& s : pc.scenes) {
    if (side.at(s.scene_id) != "train") continue;
    for (const auto* set : {&s.plume_tiles, &s.background_tiles})
      for (auto& t : training_tiles(s, *set)) train_set.push_back(std::move(t));
  }
  ModelSpec spec = cfg.model;
  spec.seed = seed;
  DetectorModel model(spec);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  train(model, train_set, tc);
  model.calibrated_threshold = calibrate_threshold(model, train_set, tc);

  std::vector<SceneFalsePositives> fps;
  std::vector<TileSample> dense;
  size_t plume_tiles = 0;
  for (const auto& s : pc.scenes) {
    if (side.at(s.scene_id) != "test") continue;
    const SalienceMap sal = predict_scene(model, s.cmf, {tc.clip_lo, tc.clip_hi, 0});
    SceneReportOptions opts;
    opts.scene_id = s.scene_id;
    const MetricReport rep = scene_report(sal.raster, model.calibrated_threshold, s.labels, s.cmf, opts);
    SceneFalsePositives f{s.scene_id, {}};
    std::vector<uint8_t> matched(rep.detection_rois.size(), 0);
    for (const auto& m : rep.matches) matched[static_cast<size_t>(m.detection_index)] = 1;
    for (size_t d = 0; d < rep.detection_rois.size(); ++d)
      if (!matched[d]) f.rois.push_back(rep.detection_rois[d]);
    fps.push_back(std::move(f));
    dense.insert(dense.end(), s.background_tiles.begin(), s.background_tiles.end());
    plume_tiles += s.plume_tiles.size();
  }
  SamplingReport rep = compare_sampling(fps, dense, plume_tiles, seed);
  rep.plume_tiles = plume_tiles;
  return rep;
}

nlohmann::json DetectionBenchmark::to_json() const {
  auto inst = [](const InstanceMetrics& m) {
    return nlohmann::json{{"tp", m.tp},   {"fp", m.fp}, {"fn", m.fn}, {"precision", m.precision},
                          {"recall", m.recall}, {"f1", m.f1}};
  };
  return {{"instances", {{"all", inst(all)}, {"unambiguous_only", inst(unambiguous_only)}}},
          {"pixel", {{"precision", pixel.precision}, {"recall", pixel.recall}, {"f1", pixel.f1}}},
          {"threshold", threshold},
          {"train_scenes", train_scenes},
          {"test_scenes", test_scenes},
          {"train_tiles", train_tiles},
          {"epoch_losses", epoch_losses}};
}

DetectionBenchmark run_detection_benchmark(const Campaign& campaign, uint64_t seed, const StudyConfig& config) {
  ProcessingConfig pcfg = config.processing;
  pcfg.tile_size = config.model.tile_size;
  const ProcessedCampaign pc = process_campaign(campaign, pcfg, seed);
  const auto groups = group_scenes(scene_infos(pc), GroupMode::IouGraph);
  const SplitAssignment split = split_groups(groups, config.train_fraction, derive_seed(seed, 1));
  const auto side = split.scene_split(groups);

  DetectionBenchmark out;
  std::vector<TrainingTile> train_set;
  for (const auto& s : pc.scenes) {
    if (side.at(s.scene_id) != "train") continue;
    ++out.train_scenes;
    for (const auto* set : {&s.plume_tiles, &s.background_tiles})
      for (auto& t : training_tiles(s, *set)) train_set.push_back(std::move(t));
  }
  out.train_tiles = train_set.size();
  ModelSpec spec = config.model;
  spec.seed = seed;
  DetectorModel model(spec);
  TrainConfig tc = config.train;
  tc.seed = seed;
  out.epoch_losses = train(model, train_set, tc).epoch_losses;
  if (model.mode() != DetectorMode::Tilewise) model.calibrated_threshold = calibrate_threshold(model, train_set, tc);
  out.threshold = model.calibrated_threshold;

  std::vector<MetricReport> reports;
  long long ptp = 0, pfp = 0, pfn = 0;
  for (const auto& s : pc.scenes) {
    if (side.at(s.scene_id) != "test") continue;
    ++out.test_scenes;
    const SalienceMap sal = predict_scene(model, s.cmf, {tc.clip_lo, tc.clip_hi, 0});
    SceneReportOptions opts;
    opts.scene_id = s.scene_id;
    reports.push_back(scene_report(sal.raster, model.calibrated_threshold, s.labels, s.cmf, opts));
    ptp += reports.back().pixel.tp;
    pfp += reports.back().pixel.fp;
    pfn += reports.back().pixel.fn;
  }
  out.all = pooled_instances(reports, false);
  out.unambiguous_only = pooled_instances(reports, true);
  out.pixel = binary_metrics(ptp, pfp, pfn);
  return out;
}

Campaign leakage_campaign(uint64_t seed, int n_scenes) {
  // Confusers share the plume footprint distribution and spectrum, so only site identity
  // separates the classes.
  SynthSpec tmpl;
  tmpl.rows = 128;
  tmpl.cols = 128;
  tmpl.cmf_noise = 150.0;
  CampaignPlan plan;
  plan.min_spacing = 34.0;
  plan.overlap = "repeats";
  plan.group_size = 4;
  plan.iou = 0.9;
  plan.jitter_px = 1.0;
  plan.plumes_per_scene = 2;
  plan.false_per_scene = 3;
  plan.false_kinds = {FalseKind::Blob};
  plan.confusers_like_plumes = true;
  plan.confuser_mix = 0.0;
  return gen_campaign(n_scenes, plan, tmpl, seed);
}

Campaign sampling_campaign(uint64_t seed, int n_scenes) {
  SynthSpec tmpl;
  tmpl.rows = 128;
  tmpl.cols = 128;
  tmpl.cmf_noise = 150.0;
  CampaignPlan plan;
  plan.overlap = "pairs";
  plan.plumes_per_scene = 2;
  plan.false_per_scene = 5;
  plan.false_kinds = {FalseKind::Blob, FalseKind::BrightLine};
  plan.confuser_mix = 0.0;
  plan.min_spacing = 30.0;
  return gen_campaign(n_scenes, plan, tmpl, seed);
}

Campaign detection_campaign(uint64_t seed, int n_scenes) {
  SynthSpec tmpl;
  tmpl.rows = 128;
  tmpl.cols = 128;
  tmpl.cmf_noise = 150.0;
  CampaignPlan plan;
  plan.overlap = "pairs";
  plan.plumes_per_scene = 2;
  plan.peak_min = 2500.0;
  plan.peak_max = 4000.0;
  plan.decay_min = 10.0;
  plan.decay_max = 16.0;
  plan.cross_min = 4.0;
  plan.cross_max = 6.0;
  return gen_campaign(n_scenes, plan, tmpl, seed);
}

}  // namespace plume
