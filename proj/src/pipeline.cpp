#include "plume/pipeline.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "plume/detector/training.hpp"
#include "plume/evaluation.hpp"
#include "plume/harness.hpp"
#include "plume/inference.hpp"
#include "plume/labeling.hpp"
#include "plume/quality.hpp"
#include "plume/retrieval.hpp"
#include "plume/sampling.hpp"
#include "plume/synth.hpp"

namespace plume {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const json& config_schema() {
  static const json schema = [] {
    const json plan_defaults = plan_to_json(CampaignPlan{});
    const json spec_defaults = spec_to_json(SynthSpec{});
    json plan = json::object();
    for (const auto& [k, v] : plan_defaults.items())
      plan[k] = v.is_array() ? "string[]" : v.is_boolean() ? "boolean" : v.is_string() ? "string" : "number";
    json tmpl = json::object();
    for (const auto& [k, v] : spec_defaults.items())
      tmpl[k] = v.is_array() ? "array" : v.is_boolean() ? "boolean" : v.is_string() ? "string" : "number";
    return json{
        {"workdir", "string"},
        {"seed", "integer"},
        {"stages", "string[]"},
        {"inputs", {{"campaign_dir", "string"}}},
        {"synth", {{"n_scenes", "integer"}, {"plan", plan}, {"template", tmpl}}},
        {"cmf", {{"ridge", "number|null"}, {"ppm_scale", "number"}, {"outlier_percentile", "number|null"}}},
        {"bge", {{"threshold_override", "number|null"}}},
        {"labels",
         {{"bge_threshold", "number|string"},
          {"merge_radius", "integer"},
          {"transitive", "boolean"},
          {"min_area", "integer"},
          {"min_max_enhancement", "number"},
          {"connectivity", "integer"}}},
        {"split", {{"mode", "string"}, {"fraction", "number"}}},
        {"sample",
         {{"tile_size", "integer"}, {"max_bg_overlap", "number"}, {"max_nodata", "number"}, {"grid_step", "integer"}}},
        {"train",
         {{"mode", "string"},
          {"blocks", "integer"},
          {"channels", "integer"},
          {"kernel", "integer"},
          {"epochs", "integer"},
          {"learning_rate", "number"},
          {"batch_size", "integer"},
          {"augment", "boolean"},
          {"focal_form", "string"},
          {"w_seg", "number"},
          {"alpha_f", "number"},
          {"gamma_f", "number"},
          {"alpha_seg", "number"},
          {"w_cls", "number|null"},
          {"clip_lo", "number"},
          {"clip_hi", "number"}}},
        {"infer", {{"oracle", "boolean"}, {"scenes", "string"}, {"strip_cells", "integer"}}},
        {"eval", {{"threshold", "number|null"}, {"merge_radius", "integer"}}},
        {"study", {{"names", "string[]"}, {"seeds", "integer[]"}}},
    };
  }();
  return schema;
}

bool type_matches(const json& v, const std::string& type) {
  size_t start = 0;
  while (start <= type.size()) {
    const size_t bar = type.find('|', start);
    const std::string t = type.substr(start, bar == std::string::npos ? std::string::npos : bar - start);
    if ((t == "number" && v.is_number()) || (t == "integer" && v.is_number_integer()) ||
        (t == "string" && v.is_string()) || (t == "boolean" && v.is_boolean()) || (t == "null" && v.is_null()) ||
        (t == "array" && v.is_array()))
      return true;
    if (t == "string[]" && v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); }))
      return true;
    if (t == "integer[]" && v.is_array() &&
        std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_integer(); }))
      return true;
    if (bar == std::string::npos) break;
    start = bar + 1;
  }
  return false;
}

void check_node(const json& value, const json& schema, const std::string& path) {
  if (schema.is_string()) {
    if (!type_matches(value, schema.get<std::string>()))
      throw ConfigError("config error at '" + path + "': expected " + schema.get<std::string>());
    return;
  }
  if (!value.is_object()) throw ConfigError("config error at '" + path + "': expected an object");
  for (const auto& [k, v] : value.items()) {
    const std::string sub = path.empty() ? k : path + "." + k;
    if (!schema.contains(k)) throw ConfigError("config error: unknown key '" + sub + "'");
    check_node(v, schema.at(k), sub);
  }
}

}  // namespace

void validate_config(const json& config) {
  check_node(config, config_schema(), "");
  if (config.contains("stages")) {
    const auto& order = pipeline_stage_order();
    for (const auto& s : config.at("stages"))
      if (std::find(order.begin(), order.end(), s.get<std::string>()) == order.end())
        throw ConfigError("config error at 'stages': unknown stage '" + s.get<std::string>() + "'");
  }
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string stage_key(const std::string& stage, const json& params, uint64_t seed,
                      const std::vector<std::string>& upstream_keys) {
  json j = {{"stage", stage}, {"params", params}, {"seed", seed}, {"upstream", upstream_keys}, {"format", 1}};
  return sha256_hex(j.dump()).substr(0, 20);
}

const std::vector<std::string>& pipeline_stage_order() {
  static const std::vector<std::string> order = {"synth", "cmf",   "bge",  "labels", "split",
                                                 "sample", "train", "infer", "eval",  "study"};
  return order;
}

json PipelineReport::to_json() const {
  json stages_j = json::array();
  for (const auto& s : stages) {
    json e = {{"name", s.name}, {"key", s.key}, {"status", s.status}, {"dir", s.dir}, {"seconds", s.seconds}};
    if (!s.message.empty()) e["message"] = s.message;
    stages_j.push_back(e);
  }
  return {{"ok", ok}, {"stages", stages_j}};
}

namespace {

const std::map<std::string, std::vector<std::string>>& stage_deps() {
  static const std::map<std::string, std::vector<std::string>> deps = {
      {"synth", {}},
      {"cmf", {"synth"}},
      {"bge", {"cmf"}},
      {"labels", {"synth", "cmf", "bge"}},
      {"split", {"synth"}},
      {"sample", {"cmf", "labels", "split"}},
      {"train", {"cmf", "labels", "sample"}},
      {"infer", {"synth", "cmf", "split", "train"}},
      {"eval", {"cmf", "labels", "split", "train", "infer"}},
      {"study", {}},
  };
  return deps;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("missing stage input " + p.string());
  json j;
  in >> j;
  return j;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << j.dump(2) << "\n";
}

template <typename T>
T param(const json& section, const char* key, T fallback) {
  if (!section.contains(key) || section.at(key).is_null()) return fallback;
  return section.at(key).get<T>();
}

std::vector<std::string> scene_ids(const fs::path& campaign_dir) {
  std::vector<std::string> ids;
  const json campaign = read_json(campaign_dir / "campaign.json");
  for (const auto& s : campaign.at("scenes"))
    ids.push_back(s.at("scene_id").get<std::string>());
  return ids;
}

struct Context {
  json config;
  uint64_t seed = 0;
  std::map<std::string, fs::path> dirs;
  fs::path campaign_dir() const { return dirs.at("synth"); }
};

}  // namespace

ModelSpec model_spec_from_json(const json& t, int tile_size, uint64_t seed) {
  ModelSpec s;
  s.mode = detector_mode_from_string(param<std::string>(t, "mode", "multitask"));
  s.tile_size = tile_size;
  s.blocks = param<int>(t, "blocks", 2);
  s.channels = param<int>(t, "channels", 4);
  s.kernel = param<int>(t, "kernel", 3);
  s.seed = seed;
  return s;
}

TrainConfig train_config_from_json(const json& t, uint64_t seed) {
  TrainConfig c;
  c.max_epochs = param<int>(t, "epochs", 40);
  c.learning_rate = param<double>(t, "learning_rate", 0.003);
  c.batch_size = param<int>(t, "batch_size", 16);
  c.augment = param<bool>(t, "augment", true);
  c.seed = seed;
  c.clip_lo = param<double>(t, "clip_lo", 0.0);
  c.clip_hi = param<double>(t, "clip_hi", 4000.0);
  const std::string form = param<std::string>(t, "focal_form", "paper");
  if (form == "paper")
    c.loss.focal_form = FocalForm::Paper;
  else if (form == "canonical")
    c.loss.focal_form = FocalForm::Canonical;
  else
    throw ConfigError("config error at 'train.focal_form': expected paper or canonical");
  c.loss.w_seg = param<double>(t, "w_seg", c.loss.w_seg);
  c.loss.alpha_f = param<double>(t, "alpha_f", c.loss.alpha_f);
  c.loss.gamma_f = param<double>(t, "gamma_f", c.loss.gamma_f);
  c.loss.alpha_seg = param<double>(t, "alpha_seg", c.loss.alpha_seg);
  if (t.contains("w_cls") && !t.at("w_cls").is_null()) c.w_cls = t.at("w_cls").get<double>();
  return c;
}

json bge_report(const std::vector<std::string>& ids, const std::vector<Raster>& cmfs,
                std::optional<double> override_thr) {
  std::vector<BgeProfile> profiles;
  for (size_t i = 0; i < ids.size(); ++i) profiles.push_back(bge_profile(cmfs[i], ids[i]));
  const CampaignBgeStats st = campaign_stats(profiles, override_thr);
  json scenes = json::object();
  for (size_t i = 0; i < ids.size(); ++i) {
    json flags = json::array();
    for (const auto& f : triage(cmfs[i], st))
      flags.push_back({{"kind", to_string(f.kind)}, {"column", f.column}, {"value", f.value}, {"detail", f.detail}});
    const auto med = profiles[i].scene_median();
    scenes[ids[i]] = {{"scene_median", med ? json(*med) : json(nullptr)}, {"flags", flags}};
  }
  return {{"mu_hat", st.mu_hat},
          {"sigma_hat", st.sigma_hat},
          {"threshold", st.threshold},
          {"derived_threshold", st.derived_threshold},
          {"pooled_count", st.pooled_count},
          {"scenes", scenes}};
}

json eval_summary(const std::vector<MetricReport>& reports) {
  auto inst = [](const InstanceMetrics& m) {
    return json{{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
  };
  json strata = json::object();
  for (const char* key : {"campaign", "sector", "area_bin", "concentration_bin"}) {
    json t = json::object();
    for (const auto& [k, s] : stratified_report(reports, key)) t[k] = {{"tp", s.tp}, {"fn", s.fn}, {"fnr", s.fnr}};
    strata[key] = t;
  }
  return {{"pooled", {{"all", inst(pooled_instances(reports, false))},
                      {"unambiguous_only", inst(pooled_instances(reports, true))}}},
          {"strata", strata}};
}

namespace {

void run_synth(const Context& ctx, const json& p, const fs::path& out) {
  if (ctx.config.contains("inputs") && ctx.config.at("inputs").contains("campaign_dir")) {
    const Campaign camp = read_campaign(ctx.config.at("inputs").at("campaign_dir").get<std::string>());
    write_campaign(camp, out);
    return;
  }
  const SynthSpec tmpl = spec_from_json(p.value("template", json::object()));
  const CampaignPlan plan = plan_from_json(p.value("plan", json::object()));
  write_campaign(gen_campaign(param<int>(p, "n_scenes", 8), plan, tmpl, ctx.seed), out);
}

void run_cmf(const Context& ctx, const json& p, const fs::path& out) {
  CmfOptions opt;
  if (p.contains("ridge") && !p.at("ridge").is_null()) opt.ridge = p.at("ridge").get<double>();
  opt.ppm_scale = param<double>(p, "ppm_scale", 1.0);
  if (p.contains("outlier_percentile") && !p.at("outlier_percentile").is_null())
    opt.outlier_percentile = p.at("outlier_percentile").get<double>();
  const fs::path src = ctx.campaign_dir();
  const TargetSpectrum target = read_target(src / "target.json");
  for (const auto& id : scene_ids(src))
    write_raster(cmf_scene(read_raster(src / (id + "_radiance")), target, opt), out / (id + "_cmf"));
}

void run_bge(const Context& ctx, const json& p, const fs::path& out) {
  std::vector<Raster> cmfs;
  const auto ids = scene_ids(ctx.campaign_dir());
  for (const auto& id : ids) cmfs.push_back(read_raster(ctx.dirs.at("cmf") / (id + "_cmf")));
  std::optional<double> override_thr;
  if (p.contains("threshold_override") && !p.at("threshold_override").is_null())
    override_thr = p.at("threshold_override").get<double>();
  write_json(out / "bge.json", bge_report(ids, cmfs, override_thr));
}

void run_labels(const Context& ctx, const json& p, const fs::path& out) {
  LabelConfig lc;
  if (p.contains("bge_threshold")) {
    const json& t = p.at("bge_threshold");
    if (t.is_string()) {
      if (t.get<std::string>() != "campaign")
        throw ConfigError("config error at 'labels.bge_threshold': expected a number or \"campaign\"");
      lc.bge_threshold = read_json(ctx.dirs.at("bge") / "bge.json").at("threshold").get<double>();
    } else {
      lc.bge_threshold = t.get<double>();
    }
  }
  lc.merge_radius = param<int>(p, "merge_radius", lc.merge_radius);
  lc.transitive = param<bool>(p, "transitive", lc.transitive);
  lc.min_area = param<int>(p, "min_area", lc.min_area);
  lc.min_max_enhancement = param<double>(p, "min_max_enhancement", lc.min_max_enhancement);
  lc.connectivity = param<int>(p, "connectivity", lc.connectivity);
  for (const auto& id : scene_ids(ctx.campaign_dir())) {
    const Raster cmf = read_raster(ctx.dirs.at("cmf") / (id + "_cmf"));
    const auto inst = read_instances(ctx.campaign_dir() / (id + "_instances.jsonl"));
    write_label_product(cmf_guided_labels(cmf, inst, lc), cmf, out / (id + "_labels"));
  }
}

void run_split(const Context& ctx, const json& p, const fs::path& out) {
  std::vector<SceneInfo> infos;
  const json campaign = read_json(ctx.campaign_dir() / "campaign.json");
  for (const auto& s : campaign.at("scenes")) {
    const auto b = s.at("bbox").get<std::vector<double>>();
    infos.push_back({s.at("scene_id").get<std::string>(), {b.at(0), b.at(1), b.at(2), b.at(3)}, s.value("zone", "")});
  }
  const GroupMode mode = group_mode_from_string(param<std::string>(p, "mode", "iou_graph"));
  const auto groups = group_scenes(infos, mode);
  const SplitAssignment split = split_groups(groups, param<double>(p, "fraction", 0.75), ctx.seed);
  json gj = json::array();
  for (const auto& g : groups) gj.push_back({{"group_id", g.group_id}, {"scenes", g.scene_ids}});
  write_json(out / "split.json", {{"groups", gj},
                                  {"train_groups", split.train_groups},
                                  {"test_groups", split.test_groups},
                                  {"scenes", split.scene_split(groups)}});
}

std::map<std::string, std::string> load_split(const Context& ctx) {
  return read_json(ctx.dirs.at("split") / "split.json").at("scenes").get<std::map<std::string, std::string>>();
}

void run_sample(const Context& ctx, const json& p, const fs::path& out) {
  const int size = param<int>(p, "tile_size", 32);
  BackgroundTileConfig bc;
  bc.max_bg_overlap = param<double>(p, "max_bg_overlap", bc.max_bg_overlap);
  bc.max_nodata = param<double>(p, "max_nodata", bc.max_nodata);
  bc.grid_step = param<int>(p, "grid_step", bc.grid_step);
  const auto side = load_split(ctx);
  std::vector<TileSample> all;
  const auto ids = scene_ids(ctx.campaign_dir());
  for (size_t i = 0; i < ids.size(); ++i) {
    const auto& id = ids[i];
    const Raster cmf = read_raster(ctx.dirs.at("cmf") / (id + "_cmf"));
    const LabelProduct lab = read_label_product(ctx.dirs.at("labels") / (id + "_labels"), cmf);
    auto tiles = sample_plume_tiles(cmf, lab, size, id);
    auto bg = sample_background_tiles(cmf, lab, tiles, size, derive_seed(ctx.seed, i), id, bc);
    tiles.insert(tiles.end(), bg.begin(), bg.end());
    for (auto& t : tiles) {
      t.split = side.at(id);
      all.push_back(std::move(t));
    }
  }
  write_tile_manifest(all, out / "tiles.jsonl");
}

void run_train(const Context& ctx, const json& p, const fs::path& out) {
  const auto tiles = read_tile_manifest(ctx.dirs.at("sample") / "tiles.jsonl");
  std::map<std::string, std::pair<Raster, LabelProduct>> scenes;
  std::vector<TrainingTile> train_set;
  int tile_size = 0;
  for (const auto& t : tiles) {
    if (t.split != "train") continue;
    auto it = scenes.find(t.scene_id);
    if (it == scenes.end()) {
      Raster cmf = read_raster(ctx.dirs.at("cmf") / (t.scene_id + "_cmf"));
      LabelProduct lab = read_label_product(ctx.dirs.at("labels") / (t.scene_id + "_labels"), cmf);
      it = scenes.emplace(t.scene_id, std::make_pair(std::move(cmf), std::move(lab))).first;
    }
    train_set.push_back({extract_tile(it->second.first, it->second.second.plume_mask, t), t.klass});
    tile_size = t.size;
  }
  if (train_set.empty()) throw Error("train: no training tiles");
  DetectorModel model(model_spec_from_json(p, tile_size, ctx.seed));
  const TrainConfig tc = train_config_from_json(p, ctx.seed);
  const TrainResult res = train(model, train_set, tc);
  if (model.mode() != DetectorMode::Tilewise) model.calibrated_threshold = calibrate_threshold(model, train_set, tc);
  write_model(model, out / "model");
  write_json(out / "train.json", {{"epoch_losses", res.epoch_losses},
                                  {"w_cls", res.w_cls},
                                  {"threshold", model.calibrated_threshold},
                                  {"tiles", train_set.size()}});
}

void run_infer(const Context& ctx, const json& p, const fs::path& out) {
  const DetectorModel model = read_model(ctx.dirs.at("train") / "model");
  const bool all = param<std::string>(p, "scenes", "test") == "all";
  const auto side = load_split(ctx);
  const json tp = ctx.config.value("train", json::object());
  InferenceOptions opt{param<double>(tp, "clip_lo", 0.0), param<double>(tp, "clip_hi", 4000.0),
                       param<int>(p, "strip_cells", 0)};
  for (const auto& id : scene_ids(ctx.campaign_dir())) {
    if (!all && side.at(id) != "test") continue;
    const Raster cmf = read_raster(ctx.dirs.at("cmf") / (id + "_cmf"));
    write_raster(predict_scene(model, cmf, opt, param<bool>(p, "oracle", false)).raster, out / (id + "_salience"));
  }
}

void run_eval(const Context& ctx, const json& p, const fs::path& out) {
  const DetectorModel model = read_model(ctx.dirs.at("train") / "model");
  const double thr = param<double>(p, "threshold", model.calibrated_threshold);
  SceneReportOptions opts;
  opts.merge_radius = param<int>(p, "merge_radius", 10);
  std::vector<MetricReport> reports;
  json scenes = json::array();
  std::string table;
  for (const auto& id : scene_ids(ctx.campaign_dir())) {
    const fs::path sal_path = ctx.dirs.at("infer") / (id + "_salience.json");
    if (!fs::exists(sal_path)) continue;
    const Raster cmf = read_raster(ctx.dirs.at("cmf") / (id + "_cmf"));
    const LabelProduct lab = read_label_product(ctx.dirs.at("labels") / (id + "_labels"), cmf);
    opts.scene_id = id;
    opts.campaign = "synthetic";
    reports.push_back(scene_report(read_raster(sal_path), thr, lab, cmf, opts));
    scenes.push_back(json::parse(report_json(reports.back())));
    table += id + "\n" + report_table(reports.back());
  }
  json summary = eval_summary(reports);
  summary["threshold"] = thr;
  summary["scenes"] = scenes;
  write_json(out / "eval.json", summary);
  std::ofstream(out / "eval.txt") << table;
}

void run_study(const Context& ctx, const json& p, const fs::path& out) {
  const auto names = param<std::vector<std::string>>(p, "names", {"stratify", "sampling"});
  const auto seeds = param<std::vector<uint64_t>>(p, "seeds", {ctx.seed});
  json results = json::object();
  for (const auto& name : names) {
    json arr = json::array();
    for (uint64_t s : seeds) {
      if (name == "stratify")
        arr.push_back(run_stratification_study(leakage_campaign(s), s).to_json());
      else if (name == "sampling")
        arr.push_back(run_sampling_study(sampling_campaign(s), s).to_json());
      else
        throw ConfigError("config error at 'study.names': unknown study '" + name + "'");
    }
    results[name] = arr;
  }
  write_json(out / "study.json", results);
}

using StageFn = std::function<void(const Context&, const json&, const fs::path&)>;

const std::map<std::string, StageFn>& stage_fns() {
  static const std::map<std::string, StageFn> fns = {
      {"synth", run_synth}, {"cmf", run_cmf},     {"bge", run_bge},     {"labels", run_labels}, {"split", run_split},
      {"sample", run_sample}, {"train", run_train}, {"infer", run_infer}, {"eval", run_eval},     {"study", run_study},
  };
  return fns;
}

}  // namespace

PipelineReport pipeline_run(const json& config, const fs::path& workdir, std::optional<uint64_t> seed_override) {
  validate_config(config);
  Context ctx;
  ctx.config = config;
  ctx.seed = seed_override ? *seed_override : config.value("seed", uint64_t{0});

  std::vector<std::string> stages = config.value("stages", pipeline_stage_order());
  const auto& order = pipeline_stage_order();
  std::sort(stages.begin(), stages.end(), [&](const std::string& a, const std::string& b) {
    return std::find(order.begin(), order.end(), a) < std::find(order.begin(), order.end(), b);
  });
  stages.erase(std::unique(stages.begin(), stages.end()), stages.end());
  const std::set<std::string> declared(stages.begin(), stages.end());
  const bool external_campaign = config.contains("inputs") && config.at("inputs").contains("campaign_dir");
  for (const auto& s : stages)
    for (const auto& d : stage_deps().at(s))
      if (!declared.count(d) && !(d == "synth" && external_campaign))
        throw ConfigError("config error at 'stages': stage '" + s + "' requires stage '" + d + "'");

  fs::create_directories(workdir / "cache");
  PipelineReport report;
  std::map<std::string, std::string> keys;
  if (external_campaign && !declared.count("synth")) {
    const fs::path dir = config.at("inputs").at("campaign_dir").get<std::string>();
    if (!fs::exists(dir / "campaign.json")) throw Error("missing stage input " + (dir / "campaign.json").string());
    std::ifstream in(dir / "campaign.json");
    keys["synth"] = sha256_hex(std::string(std::istreambuf_iterator<char>(in), {})).substr(0, 20);
    ctx.dirs["synth"] = dir;
  }

  for (const auto& name : stages) {
    StageStatus st;
    st.name = name;
    if (!report.ok) {
      st.status = "skipped";
      report.stages.push_back(st);
      continue;
    }
    const json params = config.value(name, json::object());
    json key_params = params;
    if (name == "synth" && external_campaign) key_params["inputs"] = config.at("inputs");
    std::vector<std::string> up;
    for (const auto& d : stage_deps().at(name)) up.push_back(keys.at(d));
    st.key = stage_key(name, key_params, ctx.seed, up);
    const fs::path dir = workdir / "cache" / (name + "-" + st.key);
    st.dir = fs::relative(dir, workdir).string();
    keys[name] = st.key;
    ctx.dirs[name] = dir;
    const auto t0 = std::chrono::steady_clock::now();
    if (fs::exists(dir / "done.json")) {
      st.status = "cached";
    } else {
      try {
        fs::remove_all(dir);
        fs::create_directories(dir);
        stage_fns().at(name)(ctx, params, dir);
        write_json(dir / "done.json", {{"stage", name}, {"key", st.key}, {"params", params}});
        st.status = "ran";
      } catch (const std::exception& e) {
        st.status = "error";
        st.message = e.what();
        report.ok = false;
      }
    }
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.stages.push_back(st);
  }
  write_json(workdir / "report.json", report.to_json());
  return report;
}

}  // namespace plume
