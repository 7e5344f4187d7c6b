#include <fstream>

#include "helpers.hpp"
#include "plume/pipeline.hpp"
#include "plume/synth.hpp"

using namespace plume;
using nlohmann::json;

namespace {

json small_config() {
  return json::parse(R"({
    "seed": 5,
    "stages": ["synth", "cmf", "bge", "labels", "split", "sample", "train", "infer", "eval"],
    "synth": {
      "n_scenes": 4,
      "plan": {"overlap": "pairs", "plumes_per_scene": 1, "peak_min": 3000, "peak_max": 4000},
      "template": {"rows": 64, "cols": 64, "bands": 5, "cmf_noise": 150}
    },
    "labels": {"bge_threshold": 500},
    "split": {"mode": "iou_graph", "fraction": 0.5},
    "sample": {"tile_size": 32},
    "train": {"mode": "multitask", "blocks": 2, "channels": 2, "epochs": 2, "focal_form": "canonical"}
  })");
}

std::string error_of(const json& cfg) {
  try {
    validate_config(cfg);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(PipelineConfig, UnknownKeyIsNamed) {
  auto cfg = small_config();
  cfg["train"]["epohcs"] = 3;
  const std::string msg = error_of(cfg);
  EXPECT_NE(msg.find("train.epohcs"), std::string::npos) << msg;
  cfg = small_config();
  cfg["colour"] = "blue";
  EXPECT_NE(error_of(cfg).find("colour"), std::string::npos);
}

TEST(PipelineConfig, TypeErrorsNameThePath) {
  auto cfg = small_config();
  cfg["sample"]["tile_size"] = "big";
  const std::string msg = error_of(cfg);
  EXPECT_NE(msg.find("sample.tile_size"), std::string::npos) << msg;
  cfg = small_config();
  cfg["stages"] = {"synth", 3};
  EXPECT_FALSE(error_of(cfg).empty());
  cfg = small_config();
  cfg["stages"] = {"synth", "polish"};
  EXPECT_FALSE(error_of(cfg).empty());
  EXPECT_TRUE(error_of(small_config()).empty());
}

TEST(PipelineConfig, TrainSectionParsing) {
  const json train = {{"mode", "tilewise"}, {"blocks", 1}, {"epochs", 7}, {"focal_form", "paper"}};
  const auto spec = model_spec_from_json(train, 16, 9);
  EXPECT_EQ(spec.mode, DetectorMode::Tilewise);
  EXPECT_EQ(spec.blocks, 1);
  EXPECT_EQ(spec.tile_size, 16);
  const auto tc = train_config_from_json(train, 9);
  EXPECT_EQ(tc.max_epochs, 7);
  EXPECT_EQ(tc.loss.focal_form, FocalForm::Paper);
  EXPECT_THROW(train_config_from_json({{"focal_form", "lens"}}, 1), ConfigError);
}

TEST(PipelineHashing, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(PipelineHashing, StageKeyTracksInputs) {
  const json p = {{"ridge", 1e-6}};
  const auto k = stage_key("cmf", p, 1, {"abc"});
  EXPECT_EQ(k, stage_key("cmf", p, 1, {"abc"}));
  EXPECT_NE(k, stage_key("cmf", p, 2, {"abc"}));
  EXPECT_NE(k, stage_key("cmf", {{"ridge", 2e-6}}, 1, {"abc"}));
  EXPECT_NE(k, stage_key("cmf", p, 1, {"abd"}));
  EXPECT_NE(k, stage_key("bge", p, 1, {"abc"}));
}

TEST(PipelineRun, RunsThenReusesTheCache) {
  const auto dir = test::temp_dir("work");
  const auto first = pipeline_run(small_config(), dir);
  ASSERT_TRUE(first.ok) << first.to_json().dump(1);
  ASSERT_EQ(first.stages.size(), 9u);
  for (const auto& s : first.stages) EXPECT_EQ(s.status, "ran") << s.name;
  ASSERT_TRUE(std::filesystem::exists(dir / "report.json"));

  const auto second = pipeline_run(small_config(), dir);
  ASSERT_TRUE(second.ok);
  for (size_t i = 0; i < second.stages.size(); ++i) {
    EXPECT_EQ(second.stages[i].status, "cached") << second.stages[i].name;
    EXPECT_EQ(second.stages[i].key, first.stages[i].key);
  }

  const json eval = json::parse(std::ifstream(dir / first.stages.back().dir / "eval.json"));
  EXPECT_TRUE(eval.contains("pooled"));

  // A changed training parameter reruns training and everything downstream only.
  auto cfg = small_config();
  cfg["train"]["epochs"] = 3;
  const auto third = pipeline_run(cfg, dir);
  ASSERT_TRUE(third.ok);
  for (const auto& s : third.stages) {
    const bool downstream = s.name == "train" || s.name == "infer" || s.name == "eval";
    EXPECT_EQ(s.status, downstream ? "ran" : "cached") << s.name;
  }
  EXPECT_NE(pipeline_run(small_config(), dir, 6).stages[0].key, first.stages[0].key);
}

TEST(PipelineRun, MissingUpstreamIsAConfigError) {
  const auto dir = test::temp_dir("work");
  auto cfg = small_config();
  cfg["stages"] = {"cmf", "bge"};
  EXPECT_THROW(pipeline_run(cfg, dir), ConfigError);
  cfg["inputs"] = {{"campaign_dir", (dir / "nowhere").string()}};
  EXPECT_THROW(pipeline_run(cfg, dir), std::exception);
}

TEST(PipelineRun, ExternalCampaignStandsInForSynth) {
  const auto dir = test::temp_dir("work");
  CampaignPlan plan;
  plan.overlap = "pairs";
  plan.plumes_per_scene = 1;
  SynthSpec tmpl;
  tmpl.rows = tmpl.cols = 48;
  tmpl.bands = 4;
  write_campaign(gen_campaign(2, plan, tmpl, 1), dir / "camp");
  auto cfg = small_config();
  cfg["stages"] = {"cmf", "bge"};
  cfg["inputs"] = {{"campaign_dir", (dir / "camp").string()}};
  const auto rep = pipeline_run(cfg, dir / "work");
  ASSERT_TRUE(rep.ok) << rep.to_json().dump(1);
  ASSERT_EQ(rep.stages.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "work" / rep.stages[1].dir / "bge.json"));
}
