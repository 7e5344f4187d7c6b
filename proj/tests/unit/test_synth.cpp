#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "plume/detector/baseline.hpp"
#include "plume/evaluation.hpp"
#include "plume/labeling.hpp"
#include "plume/quality.hpp"
#include "plume/retrieval.hpp"
#include "plume/sampling.hpp"
#include "plume/synth.hpp"

using namespace plume;

namespace {

SynthSpec small_spec(int rows = 96, int cols = 96) {
  SynthSpec s;
  s.rows = rows;
  s.cols = cols;
  s.bands = 6;
  s.cmf_noise = 150.0;
  s.seed = 3;
  return s;
}

SynthPlume plume_at(double row, double col, double peak, double decay, double cross, double wind) {
  SynthPlume p;
  p.plume_id = "p";
  p.row = row;
  p.col = col;
  p.peak = peak;
  p.decay = decay;
  p.cross_decay = cross;
  p.wind_deg = wind;
  return p;
}

}  // namespace

TEST(Synth, FootprintFollowsClosedForm) {
  // Wind along +col: c = peak exp(-u / decay - |v| / cross) downwind, exp(-|u| / cross - |v| / cross) upwind.
  const auto p = plume_at(40, 30, 2000, 10, 4, 0);
  for (int dr = -6; dr <= 6; ++dr)
    for (int dc = -8; dc <= 20; ++dc) {
      const double along = dc >= 0 ? dc / 10.0 : -dc / 4.0;
      EXPECT_NEAR(plume_footprint(p, 40 + dr, 30 + dc), 2000 * std::exp(-along - std::abs(dr) / 4.0), 1e-9);
    }
  // Turning the wind by 90 degrees turns the footprint towards +row.
  const auto q = plume_at(40, 30, 2000, 10, 4, 90);
  EXPECT_NEAR(plume_footprint(q, 50, 30), 2000 * std::exp(-1.0), 1e-9);
}

TEST(Synth, LabelAreaEqualsSuperlevelCount) {
  auto spec = small_spec();
  spec.plumes = {plume_at(48, 30, 2000, 10, 4, 0)};
  const auto scene = gen_scene(spec);
  // exp(-u / 10 - |v| / 4) > 1 / 4 on the integer lattice, counted by hand.
  const double bound = std::log(4.0);
  int expected = 0;
  for (int dr = -10; dr <= 10; ++dr)
    for (int dc = -10; dc <= 20; ++dc) {
      const double along = dc >= 0 ? dc / 10.0 : -dc / 4.0;
      expected += along + std::abs(dr) / 4.0 < bound;
    }
  ASSERT_EQ(scene.truth_labels.kept.size(), 1u);
  EXPECT_EQ(scene.truth_labels.kept[0].roi.area_px, expected);
  EXPECT_EQ(static_cast<int>(count_true(scene.truth_labels.plume_mask)), expected);
  EXPECT_EQ(scene.manifest["truth_label_area"]["p"].get<int>(), expected);
}

TEST(Synth, BackgroundOnlySceneIsCentred) {
  auto spec = small_spec(128, 48);
  const auto scene = gen_scene(spec);
  EXPECT_EQ(count_true(scene.truth_labels.plume_mask), 0u);
  EXPECT_TRUE(scene.truth_labels.kept.empty());
  const Raster cmf = cmf_scene(scene.radiance, scene.target);
  double sum_abs = 0.0;
  for (int c = 0; c < cmf.cols; ++c) {
    std::vector<double> col;
    for (int r = 0; r < cmf.rows; ++r) col.push_back(cmf.at(r, c));
    const double m = median(col);
    sum_abs += std::abs(m);
    EXPECT_LT(std::abs(m), 0.5 * spec.cmf_noise) << c;
  }
  EXPECT_LT(sum_abs / cmf.cols, 0.15 * spec.cmf_noise);
}

TEST(Synth, MatchedFilterNoiseMatchesSpec) {
  auto spec = small_spec(128, 32);
  const auto scene = gen_scene(spec);
  const Raster cmf = cmf_scene(scene.radiance, scene.target);
  double s2 = 0.0;
  for (float v : cmf.values) s2 += static_cast<double>(v) * v;
  EXPECT_NEAR(std::sqrt(s2 / cmf.values.size()), spec.cmf_noise, 0.1 * spec.cmf_noise);
}

TEST(Synth, SeedDeterminesOutput) {
  auto spec = small_spec(48, 48);
  spec.plumes = {plume_at(20, 20, 3000, 8, 3, 45)};
  const auto a = gen_scene(spec), b = gen_scene(spec);
  EXPECT_EQ(a.radiance.values, b.radiance.values);
  EXPECT_EQ(a.truth_labels.plume_mask, b.truth_labels.plume_mask);
  spec.seed = 4;
  EXPECT_NE(gen_scene(spec).radiance.values, a.radiance.values);
}

TEST(Synth, OverlapGuardAndValidation) {
  auto spec = small_spec(64, 64);
  spec.allow_overlap = false;
  spec.plumes = {plume_at(30, 30, 3000, 10, 4, 0)};
  SynthFalseEnhancement f;
  f.row = 30;
  f.col = 33;
  f.magnitude = 3000;
  spec.false_enhancements = {f};
  EXPECT_THROW(gen_scene(spec), Error);
  spec.false_enhancements[0].col = 5;
  spec.false_enhancements[0].row = 5;
  EXPECT_NO_THROW(gen_scene(spec));
  spec.nodata_margin = 1.5;
  EXPECT_THROW(gen_scene(spec), Error);
}

TEST(Synth, SpecJsonRoundTrip) {
  auto spec = small_spec();
  spec.plumes = {plume_at(10, 12, 2500, 9, 3, 30)};
  spec.nodata_margin = 0.2;
  const auto back = spec_from_json(spec_to_json(spec));
  EXPECT_EQ(spec_to_json(back), spec_to_json(spec));
  CampaignPlan plan;
  plan.overlap = "repeats";
  plan.group_size = 3;
  EXPECT_EQ(plan_to_json(plan_from_json(plan_to_json(plan))), plan_to_json(plan));
}

TEST(Campaign, PairsAreRecoveredByGrouping) {
  CampaignPlan plan;
  plan.overlap = "pairs";
  plan.iou = 0.9;
  plan.plumes_per_scene = 1;
  const auto camp = gen_campaign(6, plan, small_spec(64, 64), 5);
  ASSERT_EQ(camp.scenes.size(), 6u);
  std::vector<SceneInfo> infos;
  for (const auto& s : camp.scenes) infos.push_back({s.scene_id, s.radiance.bbox, s.zone});
  const auto groups = group_scenes(infos, GroupMode::IouGraph);
  ASSERT_EQ(groups.size(), 3u);
  for (const auto& g : groups) {
    ASSERT_EQ(g.scene_ids.size(), 2u);
    const auto& a = camp.scenes[std::stoi(g.scene_ids[0].substr(1))];
    const auto& b = camp.scenes[std::stoi(g.scene_ids[1].substr(1))];
    EXPECT_EQ(a.group, b.group);
    EXPECT_NEAR(bbox_iou(a.radiance.bbox, b.radiance.bbox), 0.9, 0.02);
  }
}

TEST(Campaign, DisjointPlanGivesSingletons) {
  CampaignPlan plan;
  plan.overlap = "disjoint";
  const auto camp = gen_campaign(5, plan, small_spec(64, 64), 6);
  std::vector<SceneInfo> infos;
  for (const auto& s : camp.scenes) infos.push_back({s.scene_id, s.radiance.bbox, s.zone});
  for (const auto& g : group_scenes(infos, GroupMode::IouGraph)) EXPECT_EQ(g.scene_ids.size(), 1u);
}

TEST(Campaign, RepeatPassesShareOriginsWithinJitter) {
  CampaignPlan plan;
  plan.overlap = "repeats";
  plan.group_size = 3;
  plan.iou = 0.85;
  plan.jitter_px = 1.5;
  plan.plumes_per_scene = 2;
  plan.false_per_scene = 1;
  const auto tmpl = small_spec(96, 96);
  const auto camp = gen_campaign(6, plan, tmpl, 7);
  // World position of each plume in pixel units, keyed by plume id.
  std::map<std::string, std::vector<std::pair<double, double>>> seen;
  for (const auto& s : camp.scenes) {
    const double x0 = s.radiance.bbox.min_x / tmpl.gsd;
    for (const auto& p : s.manifest["plumes"]) {
      seen[p["plume_id"].get<std::string>()].push_back({p["row"].get<double>(), x0 + p["col"].get<double>()});
    }
  }
  ASSERT_EQ(seen.size(), 4u);
  const double reach = 2 * plan.jitter_px + 1.0;  // two independent draws, each rounded
  for (const auto& [id, pos] : seen) {
    ASSERT_EQ(pos.size(), 3u) << id;
    for (size_t i = 1; i < pos.size(); ++i) {
      EXPECT_LE(std::abs(pos[i].first - pos[0].first), reach) << id;
      EXPECT_LE(std::abs(pos[i].second - pos[0].second), reach) << id;
    }
  }
  EXPECT_THROW(gen_campaign(1, plan, tmpl, 7), Error);
  plan.overlap = "chains";
  EXPECT_THROW(gen_campaign(4, plan, tmpl, 7), Error);
}

TEST(Synth, StrongPlumesAreRecoveredEndToEnd) {
  auto spec = small_spec(128, 128);
  spec.plumes = {plume_at(30, 20, 2500, 10, 4, 0), plume_at(90, 90, 4000, 12, 4, 200)};
  spec.plumes[1].plume_id = "q";
  const auto scene = gen_scene(spec);
  const Raster cmf = cmf_scene(scene.radiance, scene.target);
  const auto labels = cmf_guided_labels(cmf, scene.instances);
  ASSERT_EQ(labels.kept.size(), 2u);
  const auto rep = scene_report(baseline_detect(cmf, 500.0, 16), 0.5, labels, cmf);
  EXPECT_DOUBLE_EQ(rep.all.recall, 1.0);
  EXPECT_EQ(rep.all.fn, 0);
}

TEST(Synth, ColumnStripeTripsTriage) {
  auto spec = small_spec(96, 48);
  SynthFalseEnhancement stripe;
  stripe.kind = FalseKind::ColumnStripe;
  stripe.col = 20;
  stripe.magnitude = 2500;
  stripe.fraction = 0.8;
  spec.false_enhancements = {stripe};
  const auto scene = gen_scene(spec);
  const Raster cmf = cmf_scene(scene.radiance, scene.target);
  spec.false_enhancements.clear();
  spec.seed = 11;
  const auto clean = gen_scene(spec);
  const Raster clean_cmf = cmf_scene(clean.radiance, clean.target);
  const auto stats = campaign_stats({bge_profile(cmf), bge_profile(clean_cmf)});
  bool hit = false;
  for (const auto& f : triage(cmf, stats))
    hit |= f.kind == TriageKind::ColumnArtifact && std::abs(f.column - 20) <= 1;
  EXPECT_TRUE(hit);
  for (const auto& f : triage(clean_cmf, stats)) EXPECT_NE(f.kind, TriageKind::ColumnArtifact);
}
