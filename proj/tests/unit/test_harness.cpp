#include <cmath>

#include "helpers.hpp"
#include "plume/harness.hpp"

using namespace plume;

namespace {

TileSample bg_tile(const std::string& scene, int r0, int c0, int size) {
  TileSample t;
  t.scene_id = scene;
  t.row0 = r0;
  t.col0 = c0;
  t.size = size;
  t.klass = TileClass::Background;
  t.label_patch = Mask(size, size, 0);
  return t;
}

Roi square(int r0, int c0, int side) {
  Roi r;
  for (int y = r0; y < r0 + side; ++y)
    for (int x = c0; x < c0 + side; ++x) r.pixels.push_back({y, x});
  r.area_px = side * side;
  return r;
}

// The leakage preset's plan and template with every scene on its own footprint.
Campaign disjoint_campaign(uint64_t seed) {
  const Campaign base = leakage_campaign(seed);
  CampaignPlan plan = plan_from_json(base.manifest.at("plan"));
  plan.overlap = "disjoint";
  return gen_campaign(32, plan, spec_from_json(base.manifest.at("template")), seed);
}

}  // namespace

TEST(SamplingComparison, DenseCapturesEveryEngineeredFalsePositive) {
  // Five FP detections, each inside its own dense background tile; the balanced draw keeps two.
  std::vector<TileSample> dense;
  SceneFalsePositives fps{"s0", {}};
  for (int k = 0; k < 5; ++k) {
    dense.push_back(bg_tile("s0", 0, 32 * k, 32));
    fps.rois.push_back(square(10, 32 * k + 10, 4));
  }
  dense.push_back(bg_tile("s0", 64, 0, 32));  // empty tile
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const auto rep = compare_sampling({fps}, dense, 2, seed);
    EXPECT_EQ(rep.fp_dense, 5);
    EXPECT_EQ(rep.fp_total, 5);
    EXPECT_LE(rep.fp_balanced, 2);
    EXPECT_EQ(rep.balanced_tiles, 2u);
    EXPECT_EQ(rep.dense_tiles, 6u);
  }
}

TEST(SamplingComparison, NoFalsePositivesMeansAgreement) {
  std::vector<TileSample> dense = {bg_tile("s0", 0, 0, 32), bg_tile("s0", 0, 32, 32)};
  const auto rep = compare_sampling({{"s0", {}}}, dense, 1, 3);
  EXPECT_EQ(rep.fp_dense, 0);
  EXPECT_EQ(rep.fp_balanced, 0);
}

TEST(SamplingComparison, OnlyTilesOfTheSameSceneCount) {
  std::vector<TileSample> dense = {bg_tile("other", 0, 0, 32)};
  const auto rep = compare_sampling({{"s0", {square(4, 4, 3)}}}, dense, 1, 0);
  EXPECT_EQ(rep.fp_dense, 0);
  EXPECT_EQ(rep.fp_total, 1);
}

TEST(Studies, SamplingStudyIsDeterministicAndDenseDominates) {
  StudyConfig cfg;
  cfg.train.max_epochs = 3;
  const Campaign camp = sampling_campaign(2, 6);
  const auto a = run_sampling_study(camp, 2, cfg);
  const auto b = run_sampling_study(camp, 2, cfg);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_GE(a.fp_dense, a.fp_balanced);
  EXPECT_LE(a.fp_dense, a.fp_total);
}

TEST(Studies, StratificationNeedsOverlappingGroups) {
  StudyConfig cfg;
  cfg.train.max_epochs = 2;
  const Campaign camp = disjoint_campaign(1);
  EXPECT_THROW(run_stratification_study(camp, 1, cfg), Error);
}

TEST(Studies, StratificationIsDeterministic) {
  StudyConfig cfg;
  cfg.train.max_epochs = 3;
  const Campaign camp = leakage_campaign(3, 12);
  const auto a = run_stratification_study(camp, 3, cfg);
  const auto b = run_stratification_study(camp, 3, cfg);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_DOUBLE_EQ(a.gap, a.f1_random - a.f1_stratified);
}

// Without repeat passes there is no leakage channel, so the arms differ only by sampling noise.
// A single seed has ~60 test tiles, too few for a tight bound, so the mean absolute gap over five
// seeds is held to the bound instead.
TEST(Studies, DisjointCampaignShowsNoSystematicGap) {
  StudyConfig cfg;
  cfg.require_overlap = false;
  double sum = 0.0;
  for (uint64_t seed = 1; seed <= 5; ++seed)
    sum += std::abs(run_stratification_study(disjoint_campaign(seed), seed, cfg).gap);
  EXPECT_LT(sum / 5.0, 0.1);
}
