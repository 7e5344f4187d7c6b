#include "helpers.hpp"
#include "plume/labeling.hpp"
#include "plume/synth.hpp"

using namespace plume;

namespace {
PlumeInstance at(int r, int c, const std::string& id, Sector s = Sector::Other) {
  PlumeInstance p;
  p.scene_id = "s";
  p.plume_id = id;
  p.origin = Pixel{r, c};
  p.sector = s;
  return p;
}
}  // namespace

TEST(ThresholdMask, StrictAndMaskAware) {
  Raster r = test::blank(2, 3);
  r.at(0, 0) = 500.f;
  r.at(0, 1) = 500.5f;
  r.at(0, 2) = 900.f;
  r.nodata_mask(0, 2) = 1;
  const Mask m = threshold_mask(r, 500.0);
  EXPECT_EQ(m(0, 0), 0);
  EXPECT_EQ(m(0, 1), 1);
  EXPECT_EQ(m(0, 2), 0);
  EXPECT_EQ(count_true(threshold_mask(test::blank(4, 4, 1, 400.f), 500.0)), 0u);
}

TEST(ThresholdMask, SyntheticSupportAboveTau) {
  SynthSpec s;
  s.rows = s.cols = 64;
  SynthPlume p;
  p.plume_id = "p";
  p.row = 32;
  p.col = 32;
  p.peak = 1500;
  s.plumes = {p};
  const SynthScene sc = gen_scene(s);
  const Mask m = threshold_mask(sc.truth_cmf, 500.0);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) EXPECT_EQ(m(r, c), plume_footprint(p, r, c) > 500.0 ? 1 : 0);
}

TEST(Labels, NoSeedWhenOriginOutsideComponents) {
  Raster r = test::blank(20, 20);
  test::paint(r, 2, 2, 5, 5, 2000.f);
  const auto lp = cmf_guided_labels(r, {at(15, 15, "a")});
  ASSERT_EQ(lp.rejected.size(), 1u);
  EXPECT_EQ(lp.rejected[0].reason, RejectReason::NoSeed);
  EXPECT_EQ(count_true(lp.bg_priority_mask), 25u);
  Raster masked = r;
  masked.nodata_mask(3, 3) = 1;
  EXPECT_EQ(cmf_guided_labels(masked, {at(3, 3, "b")}).rejected[0].reason, RejectReason::NoSeed);
}

TEST(Labels, EightPxJoinTwelvePxDoesNot) {
  for (auto [gap, joined] : {std::pair{8, true}, std::pair{12, false}}) {
    Raster r = test::blank(20, 50);
    test::paint(r, 5, 5, 4, 4, 2000.f);
    test::paint(r, 5, 8 + gap, 4, 4, 2000.f);
    const auto lp = cmf_guided_labels(r, {at(6, 6, "a")});
    EXPECT_EQ(lp.plume_mask(6, 9 + gap) != 0, joined) << gap;
    EXPECT_EQ(lp.bg_priority_mask(6, 9 + gap) != 0, !joined) << gap;
  }
}

TEST(Labels, PolygonSeedsEveryIntersectingComponent) {
  Raster r = test::blank(20, 60);
  test::paint(r, 5, 2, 4, 4, 2000.f);
  test::paint(r, 5, 40, 4, 4, 2000.f);
  PlumeInstance p;
  p.plume_id = "poly";
  p.region = Mask(20, 60, 0);
  (*p.region)(6, 3) = 1;
  (*p.region)(6, 41) = 1;
  const auto lp = cmf_guided_labels(r, {p});
  EXPECT_EQ(count_true(lp.plume_mask), 32u);
}

TEST(Labels, Invariants) {
  // Random blobs, three instances: disjoint classes, fixed point, order independence, monotonicity.
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    Raster r = test::blank(80, 80);
    for (int k = 0; k < 12; ++k)
      test::paint(r, rng.integer(0, 74), rng.integer(0, 74), rng.integer(1, 5), rng.integer(1, 5),
                  static_cast<float>(rng.uniform(400, 2500)));
    std::vector<PlumeInstance> inst;
    for (int k = 0; k < 3; ++k) inst.push_back(at(rng.integer(0, 79), rng.integer(0, 79), "p" + std::to_string(k)));
    const auto lp = cmf_guided_labels(r, inst);
    for (size_t i = 0; i < lp.plume_mask.size(); ++i) {
      EXPECT_FALSE(lp.plume_mask.data[i] && lp.bg_priority_mask.data[i]);
      if (lp.plume_mask.data[i]) EXPECT_GT(r.values[i], 500.f);
    }
    for (const auto& k : lp.kept) {
      bool touches = false;
      for (const auto& p : k.roi.pixels) touches |= lp.plume_mask(p.row, p.col) != 0;
      EXPECT_TRUE(touches);
    }
    std::vector<PlumeInstance> reversed(inst.rbegin(), inst.rend());
    const auto lp2 = cmf_guided_labels(r, reversed);
    EXPECT_EQ(lp.plume_mask, lp2.plume_mask);
    EXPECT_EQ(lp.kept.size(), lp2.kept.size());

    LabelConfig lower;
    lower.bge_threshold = 450.0;
    const auto lp3 = cmf_guided_labels(r, inst, lower);
    for (const auto& k : lp.kept)
      for (const auto& k3 : lp3.kept)
        if (k3.plume_id == k.plume_id) EXPECT_GE(k3.roi.area_px, k.roi.area_px);

    // Closure: relabelling with only the kept ROI pixels above threshold adds nothing.
    Raster only = test::blank(80, 80);
    for (size_t i = 0; i < only.values.size(); ++i) only.values[i] = lp.plume_mask.data[i] ? r.values[i] : 0.f;
    std::vector<PlumeInstance> kept_inst;
    for (const auto& i : inst)
      for (const auto& k : lp.kept)
        if (k.plume_id == i.plume_id) kept_inst.push_back(i);
    EXPECT_EQ(cmf_guided_labels(only, kept_inst).plume_mask, lp.plume_mask);
  }
}

TEST(Labels, RasterRoundTripAndSidecar) {
  Raster r = test::blank(30, 30);
  test::paint(r, 2, 2, 6, 6, 1800.f);
  test::paint(r, 20, 20, 3, 3, 900.f);
  const auto lp = cmf_guided_labels(r, {at(3, 3, "a", Sector::Landfill)});
  const Raster enc = label_raster(lp, r);
  EXPECT_EQ(enc.at(3, 3), 1.f);
  EXPECT_EQ(enc.at(21, 21), 2.f);
  EXPECT_EQ(enc.at(0, 0), 0.f);
  const auto dir = test::temp_dir("l");
  write_label_product(lp, r, dir / "s_labels");
  const auto back = read_label_product(dir / "s_labels", r);
  EXPECT_EQ(back.plume_mask, lp.plume_mask);
  EXPECT_EQ(back.bg_priority_mask, lp.bg_priority_mask);
  ASSERT_EQ(back.kept.size(), 1u);
  EXPECT_EQ(back.kept[0].sector, Sector::Landfill);
  EXPECT_EQ(back.kept[0].roi.area_px, 36);
  EXPECT_DOUBLE_EQ(back.kept[0].roi.max_val, 1800.0);
}

TEST(Labels, InstanceJsonLines) {
  const auto dir = test::temp_dir("i");
  std::vector<PlumeInstance> in = {at(1, 2, "a", Sector::OilNG), at(3, 4, "b", Sector::Wastewater)};
  write_instances(in, dir / "i.jsonl");
  const auto out = read_instances(dir / "i.jsonl");
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].plume_id, "b");
  EXPECT_EQ(out[1].origin->col, 4);
  EXPECT_EQ(out[1].sector, Sector::Wastewater);
  EXPECT_THROW(sector_from_string("Mining"), Error);
}
