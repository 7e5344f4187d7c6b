// plume-kit: single-step commands over the plume library plus the cached `run` pipeline.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

#include "plume/detector/baseline.hpp"
#include "plume/detector/training.hpp"
#include "plume/evaluation.hpp"
#include "plume/harness.hpp"
#include "plume/inference.hpp"
#include "plume/labeling.hpp"
#include "plume/pipeline.hpp"
#include "plume/quality.hpp"
#include "plume/retrieval.hpp"
#include "plume/sampling.hpp"
#include "plume/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace plume;

namespace {

json load_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  json j;
  in >> j;
  return j;
}

void save_json(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << j.dump(2) << "\n";
}

// Scene lists are JSON arrays of {scene_id, cmf, labels, bbox, zone}; relative paths resolve
// against the list's directory. A campaign.json is accepted wherever a scene list is.
struct SceneEntry {
  std::string scene_id;
  fs::path cmf, labels;
  json raw;
};

std::vector<SceneEntry> load_scene_list(const fs::path& p) {
  json j = load_json(p);
  if (j.is_object() && j.contains("scenes")) j = j.at("scenes");
  if (!j.is_array()) throw Error(p.string() + ": expected a scene list");
  const fs::path base = p.parent_path();
  auto resolve = [&](const json& e, const char* key) -> fs::path {
    if (!e.contains(key)) return {};
    const fs::path v = e.at(key).get<std::string>();
    return v.is_absolute() ? v : base / v;
  };
  std::vector<SceneEntry> out;
  for (const auto& e : j) out.push_back({e.at("scene_id").get<std::string>(), resolve(e, "cmf"), resolve(e, "labels"), e});
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Methane plume detection toolkit"};
  app.require_subcommand(1);
  uint64_t seed = 0;
  auto add_seed = [&](CLI::App* sub) { return sub->add_option("--seed", seed, "Random seed"); };

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene or campaign");
  fs::path synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "Scene spec, or {n_scenes, plan, template} for a campaign")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  auto* synth_seed = add_seed(synth);

  // cmf
  auto* cmf = app.add_subcommand("cmf", "Columnwise matched-filter retrieval");
  fs::path cmf_rad, cmf_target, cmf_out;
  std::optional<double> cmf_ridge, cmf_outlier;
  double cmf_scale = 1.0;
  cmf->add_option("--radiance", cmf_rad)->required();
  cmf->add_option("--target", cmf_target)->required();
  cmf->add_option("--ridge", cmf_ridge, "Absolute ridge; automatic per column when omitted");
  cmf->add_option("--ppm-scale", cmf_scale);
  cmf->add_option("--outlier-percentile", cmf_outlier);
  cmf->add_option("--out", cmf_out)->required();
  add_seed(cmf);

  // bge
  auto* bge = app.add_subcommand("bge", "Campaign background-enhancement statistics and triage");
  fs::path bge_scenes, bge_out;
  std::optional<double> bge_override;
  bge->add_option("--scenes", bge_scenes, "Scene list with cmf paths")->required();
  bge->add_option("--threshold-override", bge_override);
  bge->add_option("--out", bge_out)->required();
  add_seed(bge);

  // labels
  auto* labels = app.add_subcommand("labels", "CMF-guided label generation");
  fs::path lab_cmf, lab_inst, lab_stats, lab_out;
  LabelConfig lab_cfg;
  labels->add_option("--cmf", lab_cmf)->required();
  labels->add_option("--instances", lab_inst, "Instance list (JSON lines)")->required();
  auto* lab_thr = labels->add_option("--bge-threshold", lab_cfg.bge_threshold);
  labels->add_option("--bge-stats", lab_stats, "Take the threshold from a bge stats file")->excludes(lab_thr);
  labels->add_option("--merge-radius", lab_cfg.merge_radius);
  labels->add_option("--min-area", lab_cfg.min_area);
  labels->add_option("--min-max-enhancement", lab_cfg.min_max_enhancement);
  labels->add_option("--out", lab_out, "Output prefix")->required();
  add_seed(labels);

  // split
  auto* split = app.add_subcommand("split", "Spatially stratified train/test scene split");
  fs::path split_scenes, split_out;
  double split_fraction = 0.75;
  std::string split_mode = "iou_graph";
  split->add_option("--scenes", split_scenes, "Scene list with bbox (and zone)")->required();
  split->add_option("--fraction", split_fraction);
  split->add_option("--mode", split_mode)->check(CLI::IsMember({"iou_graph", "utm_mgrs_zone"}));
  split->add_option("--out", split_out)->required();
  add_seed(split);

  // sample
  auto* sample = app.add_subcommand("sample", "Plume and background tile sampling");
  fs::path sample_scenes, sample_split, sample_out;
  int sample_size = 32;
  BackgroundTileConfig sample_bg;
  sample->add_option("--scenes", sample_scenes, "Scene list with cmf and labels paths")->required();
  sample->add_option("--split", sample_split, "Split file; tiles inherit their scene's side");
  sample->add_option("--tile-size", sample_size);
  sample->add_option("--max-bg-overlap", sample_bg.max_bg_overlap);
  sample->add_option("--out", sample_out)->required();
  add_seed(sample);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a detector");
  fs::path train_cfg_path, train_tiles, train_scenes, train_out;
  std::string train_mode;
  train_cmd->add_option("--mode", train_mode)->check(CLI::IsMember({"tilewise", "pixelwise", "multitask"}));
  train_cmd->add_option("--config", train_cfg_path, "Training section JSON");
  train_cmd->add_option("--tiles", train_tiles)->required();
  train_cmd->add_option("--scenes", train_scenes, "Scene list with cmf and labels paths")->required();
  train_cmd->add_option("--out", train_out, "Model prefix")->required();
  add_seed(train_cmd);

  // infer
  auto* infer = app.add_subcommand("infer", "Full-scene salience map");
  fs::path inf_model, inf_scene, inf_out;
  bool inf_oracle = false, inf_baseline = false;
  InferenceOptions inf_opts;
  double inf_tau = 500.0;
  infer->add_option("--model", inf_model);
  infer->add_option("--scene", inf_scene, "CMF raster")->required();
  infer->add_option("--out", inf_out)->required();
  infer->add_flag("--oracle", inf_oracle, "Per-pixel sliding window instead of shift-and-stitch");
  infer->add_option("--strip-cells", inf_opts.strip_cells);
  infer->add_flag("--baseline", inf_baseline, "Threshold-and-area baseline instead of a model");
  infer->add_option("--baseline-tau", inf_tau);
  add_seed(infer);

  // eval
  auto* eval = app.add_subcommand("eval", "Pixel and instance metrics for one scene");
  fs::path ev_sal, ev_labels, ev_cmf, ev_out;
  double ev_thr = 0.5;
  SceneReportOptions ev_opts;
  eval->add_option("--salience", ev_sal)->required();
  eval->add_option("--labels", ev_labels, "Label prefix written by `labels`")->required();
  eval->add_option("--cmf", ev_cmf)->required();
  eval->add_option("--threshold", ev_thr);
  eval->add_option("--scene-id", ev_opts.scene_id);
  eval->add_option("--campaign", ev_opts.campaign);
  eval->add_option("--merge-radius", ev_opts.merge_radius);
  eval->add_option("--out", ev_out, "JSON report path");
  add_seed(eval);

  // study
  auto* study = app.add_subcommand("study", "Bias case studies on synthetic campaigns");
  std::string study_name;
  fs::path study_campaign, study_out;
  bool study_allow_disjoint = false;
  study->add_option("--name", study_name)->required()->check(CLI::IsMember({"stratify", "sampling"}));
  study->add_option("--campaign", study_campaign, "Campaign directory; the engineered preset when omitted");
  study->add_flag("--allow-disjoint", study_allow_disjoint, "Run stratify on campaigns without repeat passes");
  study->add_option("--out", study_out);
  add_seed(study);

  // run
  auto* run = app.add_subcommand("run", "Run the cached pipeline from a config file");
  fs::path run_config, run_workdir;
  run->add_option("--config", run_config)->required();
  run->add_option("--workdir", run_workdir, "Overrides the config's workdir");
  auto* run_seed = add_seed(run);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const json spec = load_json(synth_spec);
      if (spec.contains("plan") || spec.contains("n_scenes")) {
        const uint64_t s = synth_seed->count() ? seed : spec.value("seed", uint64_t{0});
        const Campaign c = gen_campaign(spec.value("n_scenes", 8), plan_from_json(spec.value("plan", json::object())),
                                        spec_from_json(spec.value("template", json::object())), s);
        write_campaign(c, synth_out);
        std::cout << "wrote " << c.scenes.size() << " scenes to " << synth_out.string() << "\n";
      } else {
        SynthSpec s = spec_from_json(spec);
        if (synth_seed->count()) s.seed = seed;
        fs::create_directories(synth_out);
        write_scene(gen_scene(s), synth_out);
        std::cout << "wrote scene " << s.scene_id << " to " << synth_out.string() << "\n";
      }
    } else if (cmf->parsed()) {
      CmfOptions opt;
      opt.ridge = cmf_ridge;
      opt.ppm_scale = cmf_scale;
      opt.outlier_percentile = cmf_outlier;
      write_raster(cmf_scene(read_raster(cmf_rad), read_target(cmf_target), opt), cmf_out);
    } else if (bge->parsed()) {
      std::vector<std::string> ids;
      std::vector<Raster> cmfs;
      for (const auto& e : load_scene_list(bge_scenes)) {
        ids.push_back(e.scene_id);
        cmfs.push_back(read_raster(e.cmf));
      }
      const json rep = bge_report(ids, cmfs, bge_override);
      save_json(bge_out, rep);
      std::cout << "mu_hat " << rep["mu_hat"] << " sigma_hat " << rep["sigma_hat"] << " threshold "
                << rep["threshold"] << "\n";
    } else if (labels->parsed()) {
      if (!lab_stats.empty()) lab_cfg.bge_threshold = load_json(lab_stats).at("threshold").get<double>();
      const Raster c = read_raster(lab_cmf);
      const LabelProduct lp = cmf_guided_labels(c, read_instances(lab_inst), lab_cfg);
      write_label_product(lp, c, lab_out);
      std::cout << lp.kept.size() << " kept, " << lp.rejected.size() << " rejected\n";
    } else if (split->parsed()) {
      std::vector<SceneInfo> infos;
      for (const auto& e : load_scene_list(split_scenes)) {
        const auto b = e.raw.at("bbox").get<std::vector<double>>();
        if (b.size() != 4) throw Error("scene " + e.scene_id + ": bbox needs 4 values");
        infos.push_back({e.scene_id, {b[0], b[1], b[2], b[3]}, e.raw.value("zone", "")});
      }
      const auto groups = group_scenes(infos, group_mode_from_string(split_mode));
      const SplitAssignment sa = split_groups(groups, split_fraction, seed);
      json gj = json::array();
      for (const auto& g : groups) gj.push_back({{"group_id", g.group_id}, {"scenes", g.scene_ids}});
      save_json(split_out, {{"groups", gj},
                            {"train_groups", sa.train_groups},
                            {"test_groups", sa.test_groups},
                            {"scenes", sa.scene_split(groups)}});
    } else if (sample->parsed()) {
      std::map<std::string, std::string> side;
      if (!sample_split.empty())
        side = load_json(sample_split).at("scenes").get<std::map<std::string, std::string>>();
      std::vector<TileSample> all;
      const auto scenes = load_scene_list(sample_scenes);
      for (size_t i = 0; i < scenes.size(); ++i) {
        const auto& e = scenes[i];
        const Raster c = read_raster(e.cmf);
        const LabelProduct lp = read_label_product(e.labels, c);
        auto tiles = sample_plume_tiles(c, lp, sample_size, e.scene_id);
        auto bg = sample_background_tiles(c, lp, tiles, sample_size, derive_seed(seed, i), e.scene_id, sample_bg);
        tiles.insert(tiles.end(), bg.begin(), bg.end());
        for (auto& t : tiles) {
          if (side.count(e.scene_id)) t.split = side.at(e.scene_id);
          all.push_back(std::move(t));
        }
      }
      if (sample_out.has_parent_path()) fs::create_directories(sample_out.parent_path());
      write_tile_manifest(all, sample_out);
      std::cout << all.size() << " tiles\n";
    } else if (train_cmd->parsed()) {
      json section = train_cfg_path.empty() ? json::object() : load_json(train_cfg_path);
      if (section.contains("train")) section = section.at("train");
      if (!train_mode.empty()) section["mode"] = train_mode;
      const auto tiles = read_tile_manifest(train_tiles);
      const bool any_train = std::any_of(tiles.begin(), tiles.end(), [](const TileSample& t) { return t.split == "train"; });
      std::map<std::string, std::pair<Raster, LabelProduct>> loaded;
      std::map<std::string, SceneEntry> entries;
      for (const auto& e : load_scene_list(train_scenes)) entries.emplace(e.scene_id, e);
      std::vector<TrainingTile> set;
      int size = 0;
      for (const auto& t : tiles) {
        if (any_train && t.split != "train") continue;
        auto it = loaded.find(t.scene_id);
        if (it == loaded.end()) {
          const auto& e = entries.at(t.scene_id);
          Raster c = read_raster(e.cmf);
          LabelProduct lp = read_label_product(e.labels, c);
          it = loaded.emplace(t.scene_id, std::make_pair(std::move(c), std::move(lp))).first;
        }
        set.push_back({extract_tile(it->second.first, it->second.second.plume_mask, t), t.klass});
        size = t.size;
      }
      if (set.empty()) throw Error("train: no training tiles");
      DetectorModel model(model_spec_from_json(section, size, seed));
      const TrainConfig tc = train_config_from_json(section, seed);
      const TrainResult res = train(model, set, tc);
      if (model.mode() != DetectorMode::Tilewise) model.calibrated_threshold = calibrate_threshold(model, set, tc);
      write_model(model, train_out);
      std::cout << "final loss " << res.epoch_losses.back() << " threshold " << model.calibrated_threshold << "\n";
    } else if (infer->parsed()) {
      const Raster c = read_raster(inf_scene);
      if (inf_baseline) {
        write_raster(baseline_detect(c, inf_tau), inf_out);
      } else {
        if (inf_model.empty()) throw Error("infer: --model is required unless --baseline is given");
        const DetectorModel model = read_model(inf_model);
        write_raster(predict_scene(model, c, inf_opts, inf_oracle).raster, inf_out);
      }
    } else if (eval->parsed()) {
      const Raster c = read_raster(ev_cmf);
      const MetricReport r = scene_report(read_raster(ev_sal), ev_thr, read_label_product(ev_labels, c), c, ev_opts);
      std::cout << report_table(r);
      if (!ev_out.empty()) save_json(ev_out, json::parse(report_json(r)));
    } else if (study->parsed()) {
      json result;
      if (study_name == "stratify") {
        StudyConfig cfg;
        cfg.require_overlap = !study_allow_disjoint;
        const Campaign camp = study_campaign.empty() ? leakage_campaign(seed) : read_campaign(study_campaign);
        result = run_stratification_study(camp, seed, cfg).to_json();
      } else {
        const Campaign camp = study_campaign.empty() ? sampling_campaign(seed) : read_campaign(study_campaign);
        result = run_sampling_study(camp, seed).to_json();
      }
      std::cout << result.dump(2) << "\n";
      if (!study_out.empty()) save_json(study_out, result);
    } else if (run->parsed()) {
      const json config = load_json(run_config);
      fs::path workdir = run_workdir;
      if (workdir.empty()) {
        workdir = config.value("workdir", std::string("plume-work"));
        if (workdir.is_relative()) workdir = run_config.parent_path() / workdir;
      }
      const PipelineReport rep =
          pipeline_run(config, workdir, run_seed->count() ? std::optional<uint64_t>(seed) : std::nullopt);
      for (const auto& s : rep.stages) {
        std::cout << s.name << "\t" << s.status << "\t" << s.key;
        if (!s.message.empty()) std::cout << "\t" << s.message;
        std::cout << "\n";
      }
      if (!rep.ok) {
        for (const auto& s : rep.stages)
          if (s.status == "error") std::cerr << "stage " << s.name << " failed: " << s.message << "\n";
        return 1;
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
