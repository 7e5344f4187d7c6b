#include <algorithm>
#include <random>
#include <set>

#include "helpers.hpp"
#include "plume/evaluation.hpp"
#include "plume/labeling.hpp"

using namespace plume;

namespace {

Mask box(int rows, int cols, std::initializer_list<std::array<int, 4>> boxes) {
  Mask m(rows, cols, 0);
  for (const auto& b : boxes)
    for (int r = b[0]; r < b[0] + b[2]; ++r)
      for (int c = b[1]; c < b[1] + b[3]; ++c) m(r, c) = 1;
  return m;
}

Roi roi_of(std::initializer_list<Pixel> px) {
  Roi r;
  r.pixels = px;
  std::sort(r.pixels.begin(), r.pixels.end());
  r.area_px = static_cast<int>(r.pixels.size());
  return r;
}

LabelProduct labels_only(const Mask& plume) {
  LabelProduct lp;
  lp.plume_mask = plume;
  lp.bg_priority_mask = Mask(plume.rows, plume.cols, 0);
  return lp;
}

// Brute force: 8-connected flood fill, then union components whose nearest pixels are within
// the Chebyshev radius. Returns the partition as sorted pixel lists.
std::set<std::vector<Pixel>> merge_oracle(const Mask& m, int radius) {
  Grid<int> comp(m.rows, m.cols, -1);
  std::vector<std::vector<Pixel>> comps;
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      if (!m(r, c) || comp(r, c) >= 0) continue;
      std::vector<Pixel> stack{{r, c}}, px;
      comp(r, c) = static_cast<int>(comps.size());
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        px.push_back(p);
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int y = p.row + dr, x = p.col + dc;
            if (m.in_bounds(y, x) && m(y, x) && comp(y, x) < 0) {
              comp(y, x) = comp(r, c);
              stack.push_back({y, x});
            }
          }
      }
      comps.push_back(px);
    }
  std::vector<int> parent(comps.size());
  for (size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (size_t a = 0; a < comps.size(); ++a)
    for (size_t b = a + 1; b < comps.size(); ++b) {
      bool near = false;
      for (const auto& p : comps[a]) {
        for (const auto& q : comps[b])
          if (std::max(std::abs(p.row - q.row), std::abs(p.col - q.col)) <= radius) {
            near = true;
            break;
          }
        if (near) break;
      }
      if (near) parent[find(static_cast<int>(a))] = find(static_cast<int>(b));
    }
  std::map<int, std::vector<Pixel>> groups;
  for (size_t i = 0; i < comps.size(); ++i) {
    auto& g = groups[find(static_cast<int>(i))];
    g.insert(g.end(), comps[i].begin(), comps[i].end());
  }
  std::set<std::vector<Pixel>> out;
  for (auto& [k, g] : groups) {
    std::sort(g.begin(), g.end());
    out.insert(g);
  }
  return out;
}

}  // namespace

TEST(PixelMetrics, Conventions) {
  const Mask label = box(8, 8, {{{1, 1, 3, 3}}});
  const Mask valid(8, 8, 1);
  const auto same = pixel_metrics(label, label, valid);
  EXPECT_DOUBLE_EQ(same.precision, 1.0);
  EXPECT_DOUBLE_EQ(same.recall, 1.0);
  EXPECT_DOUBLE_EQ(same.f1, 1.0);
  const auto none = pixel_metrics(Mask(8, 8, 0), label, valid);
  EXPECT_DOUBLE_EQ(none.precision, 1.0);
  EXPECT_DOUBLE_EQ(none.recall, 0.0);
  EXPECT_DOUBLE_EQ(none.f1, 0.0);
  const auto empty = binary_metrics(0, 0, 0);
  EXPECT_DOUBLE_EQ(empty.precision, 1.0);
  EXPECT_DOUBLE_EQ(empty.recall, 1.0);
  EXPECT_DOUBLE_EQ(empty.f1, 0.0);
  EXPECT_THROW(pixel_metrics(Mask(8, 7, 0), label, valid), ShapeError);
}

TEST(PixelMetrics, MatchesCountingOracle) {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Mask pred = test::random_mask(gen, 32, 32, 0.3);
    const Mask label = test::random_mask(gen, 32, 32, 0.2);
    const Mask valid = test::random_mask(gen, 32, 32, 0.8);
    long long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
      if (!valid.data[i]) continue;
      tp += pred.data[i] && label.data[i];
      fp += pred.data[i] && !label.data[i];
      fn += !pred.data[i] && label.data[i];
    }
    const auto m = pixel_metrics(pred, label, valid);
    EXPECT_EQ(m.tp, tp);
    EXPECT_EQ(m.fp, fp);
    EXPECT_EQ(m.fn, fn);
    const double p = static_cast<double>(tp) / (tp + fp), r = static_cast<double>(tp) / (tp + fn);
    EXPECT_NEAR(m.precision, p, 1e-15);
    EXPECT_NEAR(m.recall, r, 1e-15);
    EXPECT_NEAR(m.f1, 2 * p * r / (p + r), 1e-14);
  }
}

TEST(TileMetrics, ThresholdIsInclusive) {
  const auto m = tile_metrics({0.2, 0.5, 0.9, 0.4}, {0, 1, 1, 1}, 0.5);
  EXPECT_EQ(m.tp, 2);
  EXPECT_EQ(m.fp, 0);
  EXPECT_EQ(m.fn, 1);
}

TEST(DetectionRois, MergeDistanceBoundary) {
  const auto cmf = test::blank(40, 60, 1, 1500.0f);
  const Mask near = box(40, 60, {{{5, 5, 4, 4}}, {{5, 16, 4, 4}}});  // nearest pixels 8 apart
  EXPECT_EQ(detection_rois(near, cmf).size(), 1u);
  const Mask far = box(40, 60, {{{5, 5, 4, 4}}, {{5, 23, 4, 4}}});  // 15 apart
  const auto rois = detection_rois(far, cmf);
  ASSERT_EQ(rois.size(), 2u);
  EXPECT_EQ(rois[0].area_px, 16);
  EXPECT_DOUBLE_EQ(rois[0].max_val, 1500.0);
}

TEST(DetectionRois, RandomMasksMatchPairwiseOracle) {
  std::mt19937_64 gen(2);
  const auto cmf = test::blank(48, 48);
  for (int trial = 0; trial < 15; ++trial) {
    const Mask m = test::random_mask(gen, 48, 48, 0.004 + 0.002 * (trial % 4));
    const int radius = 2 + trial % 9;
    std::set<std::vector<Pixel>> got;
    for (const auto& r : detection_rois(m, cmf, radius)) got.insert(r.pixels);
    EXPECT_EQ(got, merge_oracle(m, radius)) << trial;
  }
}

TEST(Ambiguity, AreaOrConcentration) {
  Roi r;
  r.area_px = 80;
  r.max_val = 2000;
  EXPECT_TRUE(flag_ambiguous(r));
  r.area_px = 200;
  r.max_val = 900;
  EXPECT_TRUE(flag_ambiguous(r));
  r.max_val = 2000;
  EXPECT_FALSE(flag_ambiguous(r));
  r.ambiguous = true;
  EXPECT_TRUE(flag_ambiguous(r));
  r.ambiguous = false;
  r.area_px = 81;
  r.max_val = 1000;
  EXPECT_FALSE(flag_ambiguous(r));
}

TEST(Matching, ManyToOneRules) {
  const Roi big = roi_of({{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}});
  const auto one_label = match_instances({big}, {roi_of({{0, 0}}), roi_of({{0, 2}}), roi_of({{0, 4}, {1, 4}})});
  EXPECT_EQ(one_label.tp, 1);
  EXPECT_EQ(one_label.fp, 0);
  EXPECT_EQ(one_label.fn, 0);
  EXPECT_EQ(one_label.matches.size(), 3u);
  EXPECT_NEAR(one_label.matches[2].iou, 1.0 / 7.0, 1e-12);

  const auto shared = match_instances({roi_of({{0, 0}}), roi_of({{0, 5}})}, {big});
  EXPECT_EQ(shared.tp, 2);
  EXPECT_EQ(shared.fp, 0);

  const auto apart = match_instances({roi_of({{0, 0}})}, {roi_of({{5, 5}})});
  EXPECT_EQ(apart.tp, 0);
  EXPECT_EQ(apart.fp, 1);
  EXPECT_EQ(apart.fn, 1);
}

TEST(Matching, OrderIndependentAndCountsConsistent) {
  std::mt19937_64 gen(3);
  const auto cmf = test::blank(40, 40);
  for (int trial = 0; trial < 20; ++trial) {
    auto labels = detection_rois(test::random_mask(gen, 40, 40, 0.01), cmf, 2);
    auto dets = detection_rois(test::random_mask(gen, 40, 40, 0.01), cmf, 2);
    const auto a = match_instances(labels, dets);
    EXPECT_EQ(a.tp + a.fn, static_cast<long long>(labels.size()));
    EXPECT_LE(a.fp, static_cast<long long>(dets.size()));
    std::shuffle(labels.begin(), labels.end(), gen);
    std::reverse(dets.begin(), dets.end());
    const auto b = match_instances(labels, dets);
    EXPECT_EQ(a.tp, b.tp);
    EXPECT_EQ(a.fp, b.fp);
    EXPECT_EQ(a.fn, b.fn);
  }
}

TEST(SceneReport, PerfectSalience) {
  auto cmf = test::blank(64, 64, 1, 0.0f);
  test::paint(cmf, 10, 10, 12, 12, 2500.0f);
  test::paint(cmf, 40, 40, 10, 10, 3000.0f);
  const Mask plume = box(64, 64, {{{10, 10, 12, 12}}, {{40, 40, 10, 10}}});
  auto sal = cmf.like(1);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) sal.at(r, c) = plume(r, c) ? 1.0f : 0.0f;
  const auto rep = scene_report(sal, 0.5, labels_only(plume), cmf);
  EXPECT_DOUBLE_EQ(rep.pixel.f1, 1.0);
  EXPECT_EQ(rep.all.tp, 2);
  EXPECT_EQ(rep.all.fp, 0);
  EXPECT_EQ(rep.all.fn, 0);
  EXPECT_DOUBLE_EQ(rep.all.precision, 1.0);
  EXPECT_DOUBLE_EQ(rep.unambiguous_only.recall, 1.0);
  EXPECT_THROW(scene_report(test::blank(10, 10), 0.5, labels_only(plume), cmf), ShapeError);
}

TEST(SceneReport, SpeckleOnlyCountsInTheAllVariant) {
  auto cmf = test::blank(64, 64, 1, 0.0f);
  test::paint(cmf, 10, 10, 12, 12, 2500.0f);
  test::paint(cmf, 50, 50, 2, 2, 3000.0f);
  const Mask plume = box(64, 64, {{{10, 10, 12, 12}}});
  const Mask pred = box(64, 64, {{{10, 10, 12, 12}}, {{50, 50, 2, 2}}});
  const auto rep = mask_report(pred, labels_only(plume), cmf);
  EXPECT_EQ(rep.all.tp, 1);
  EXPECT_EQ(rep.all.fp, 1);
  EXPECT_EQ(rep.unambiguous_only.tp, 1);
  EXPECT_EQ(rep.unambiguous_only.fp, 0);
  EXPECT_GE(rep.unambiguous_only.precision, rep.all.precision);
}

TEST(SceneReport, WholeSceneDetectionIsThePathologicalCase) {
  auto cmf = test::blank(64, 64, 1, 0.0f);
  test::paint(cmf, 10, 10, 12, 12, 2500.0f);
  const Mask plume = box(64, 64, {{{10, 10, 12, 12}}});
  const auto rep = mask_report(Mask(64, 64, 1), labels_only(plume), cmf);
  EXPECT_DOUBLE_EQ(rep.all.recall, 1.0);
  EXPECT_DOUBLE_EQ(rep.all.precision, 1.0);
  EXPECT_NEAR(rep.pixel.precision, 144.0 / 4096.0, 1e-15);
}

TEST(SceneReport, MaskedPixelsAreOutsidePixelMetrics) {
  auto cmf = test::blank(32, 32, 1, 0.0f);
  test::paint(cmf, 4, 4, 10, 10, 2500.0f);
  for (int r = 0; r < 32; ++r) cmf.nodata_mask(r, 31) = 1;
  const Mask plume = box(32, 32, {{{4, 4, 10, 10}}});
  Mask pred = plume;
  for (int r = 0; r < 32; ++r) pred(r, 31) = 1;
  const auto rep = mask_report(pred, labels_only(plume), cmf);
  EXPECT_EQ(rep.pixel.fp, 0);
  EXPECT_DOUBLE_EQ(rep.pixel.precision, 1.0);
}

TEST(Strata, SectorFnr) {
  MetricReport rep;
  for (int i = 0; i < 4; ++i) {
    LabelOutcome o;
    o.sector = Sector::Landfill;
    o.campaign = "A";
    o.area_px = 150;
    o.max_val = 2500;
    o.detected = i != 2;
    rep.outcomes.push_back(o);
  }
  LabelOutcome o;
  o.sector = Sector::OilNG;
  o.campaign = "B";
  o.area_px = 50;
  o.max_val = 500;
  o.detected = true;
  rep.outcomes.push_back(o);
  const auto by_sector = stratified_report({rep}, "sector");
  EXPECT_DOUBLE_EQ(by_sector.at(to_string(Sector::Landfill)).fnr, 0.25);
  EXPECT_EQ(by_sector.at(to_string(Sector::Landfill)).fn, 1);
  EXPECT_DOUBLE_EQ(by_sector.at(to_string(Sector::OilNG)).fnr, 0.0);
  const auto by_campaign = stratified_report({rep}, "campaign");
  EXPECT_DOUBLE_EQ(by_campaign.at("A").fnr, 0.25);
  EXPECT_EQ(stratified_report({rep}, "area_bin").size(), 2u);
  EXPECT_EQ(stratified_report({rep}, "concentration_bin").size(), 2u);
  EXPECT_THROW(stratified_report({rep}, "wind"), Error);
}

TEST(Strata, CountingOracleOverRandomOutcomes) {
  std::mt19937_64 gen(4);
  std::vector<MetricReport> reports(3);
  std::map<std::string, std::pair<long long, long long>> want;  // campaign -> (tp, fn)
  for (size_t k = 0; k < reports.size(); ++k)
    for (int i = 0; i < 40; ++i) {
      LabelOutcome o;
      o.campaign = "c" + std::to_string(gen() % 4);
      o.detected = gen() % 3 != 0;
      reports[k].outcomes.push_back(o);
      auto& w = want[o.campaign];
      (o.detected ? w.first : w.second)++;
    }
  const auto got = stratified_report(reports, "campaign");
  ASSERT_EQ(got.size(), want.size());
  for (const auto& [k, w] : want) {
    EXPECT_EQ(got.at(k).tp, w.first);
    EXPECT_EQ(got.at(k).fn, w.second);
    EXPECT_DOUBLE_EQ(got.at(k).fnr, static_cast<double>(w.second) / (w.first + w.second));
  }
}

TEST(SceneReport, AllDetectedMeansZeroFnrEverywhere) {
  auto cmf = test::blank(64, 64, 1, 0.0f);
  test::paint(cmf, 5, 5, 10, 10, 1200.0f);
  test::paint(cmf, 40, 30, 15, 15, 3500.0f);
  const Mask plume = box(64, 64, {{{5, 5, 10, 10}}, {{40, 30, 15, 15}}});
  const auto rep = mask_report(plume, labels_only(plume), cmf);
  for (const char* key : {"campaign", "sector", "area_bin", "concentration_bin"})
    for (const auto& [k, s] : stratified_report({rep}, key)) EXPECT_DOUBLE_EQ(s.fnr, 0.0) << key << " " << k;
  EXPECT_NE(report_json(rep).find("\"tp\""), std::string::npos);
  EXPECT_FALSE(report_table(rep).empty());
}
