#include "plume/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace plume {

BinaryMetrics binary_metrics(long long tp, long long fp, long long fn) {
  BinaryMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = 2 * tp + fp + fn == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  return m;
}

BinaryMetrics pixel_metrics(const Mask& pred, const Mask& label, const Mask& valid) {
  if (!pred.same_shape(label) || !pred.same_shape(valid)) throw ShapeError("pixel_metrics: shape mismatch");
  long long tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!valid.data[i]) continue;
    const bool p = pred.data[i] != 0, l = label.data[i] != 0;
    tp += p && l;
    fp += p && !l;
    fn += !p && l;
  }
  return binary_metrics(tp, fp, fn);
}

BinaryMetrics tile_metrics(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size()) throw ShapeError("tile_metrics: size mismatch");
  long long tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool p = scores[i] >= threshold, l = labels[i] != 0;
    tp += p && l;
    fp += p && !l;
    fn += !p && l;
  }
  return binary_metrics(tp, fp, fn);
}

std::vector<Roi> detection_rois(const Mask& pred_mask, const Raster& cmf, int radius) {
  if (pred_mask.rows != cmf.rows || pred_mask.cols != cmf.cols) throw ShapeError("detection_rois: shape mismatch");
  const Grid<float> values = cmf.band(0);
  return merged_rois(pred_mask, radius, &values);
}

bool flag_ambiguous(const Roi& roi, const AmbiguityRule& rule) {
  return roi.ambiguous || roi.area_px < rule.min_area || roi.max_val < rule.min_max_enhancement;
}

namespace {

struct Box {
  int r0, c0, r1, c1;
  bool intersects(const Box& o) const { return r0 <= o.r1 && o.r0 <= r1 && c0 <= o.c1 && o.c0 <= c1; }
};

Box box_of(const std::vector<Pixel>& px) {
  Box b{px.front().row, px.front().col, px.front().row, px.front().col};
  for (const auto& p : px) {
    b.r0 = std::min(b.r0, p.row);
    b.c0 = std::min(b.c0, p.col);
    b.r1 = std::max(b.r1, p.row);
    b.c1 = std::max(b.c1, p.col);
  }
  return b;
}

std::vector<Pixel> sorted_unique(std::vector<Pixel> px) {
  std::sort(px.begin(), px.end());
  px.erase(std::unique(px.begin(), px.end()), px.end());
  return px;
}

long long intersection_size(const std::vector<Pixel>& a, const std::vector<Pixel>& b) {
  long long n = 0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

InstanceMetrics instance_metrics(long long tp, long long fp, long long fn) {
  const BinaryMetrics b = binary_metrics(tp, fp, fn);
  return {tp, fp, fn, b.precision, b.recall, b.f1};
}

}  // namespace

MatchResult match_instances(const std::vector<Roi>& label_rois, const std::vector<Roi>& detection_rois) {
  MatchResult out;
  out.label_detected.assign(label_rois.size(), 0);
  out.detection_matched.assign(detection_rois.size(), 0);
  std::vector<std::vector<Pixel>> lp, dp;
  std::vector<Box> lb, db;
  for (const auto& r : label_rois) {
    lp.push_back(sorted_unique(r.pixels));
    lb.push_back(lp.back().empty() ? Box{1, 1, 0, 0} : box_of(lp.back()));
  }
  for (const auto& r : detection_rois) {
    dp.push_back(sorted_unique(r.pixels));
    db.push_back(dp.back().empty() ? Box{1, 1, 0, 0} : box_of(dp.back()));
  }
  for (size_t l = 0; l < lp.size(); ++l) {
    if (lp[l].empty()) continue;
    for (size_t d = 0; d < dp.size(); ++d) {
      if (dp[d].empty() || !lb[l].intersects(db[d])) continue;
      const long long inter = intersection_size(lp[l], dp[d]);
      if (inter == 0) continue;
      const long long uni = static_cast<long long>(lp[l].size() + dp[d].size()) - inter;
      out.matches.push_back({static_cast<int>(l), static_cast<int>(d), inter,
                             static_cast<double>(inter) / static_cast<double>(uni)});
      out.label_detected[l] = 1;
      out.detection_matched[d] = 1;
    }
  }
  for (auto v : out.label_detected) (v ? out.tp : out.fn) += 1;
  for (auto v : out.detection_matched) out.fp += v ? 0 : 1;
  return out;
}

MetricReport mask_report(const Mask& pred, const LabelProduct& labels, const Raster& cmf,
                         const SceneReportOptions& options) {
  if (!pred.same_shape(labels.plume_mask) || pred.rows != cmf.rows || pred.cols != cmf.cols)
    throw ShapeError("scene_report: geometry mismatch");
  MetricReport rep;
  rep.scene_id = options.scene_id;
  rep.campaign = options.campaign;

  Mask valid(cmf.rows, cmf.cols, 1);
  for (size_t i = 0; i < valid.size(); ++i) valid.data[i] = cmf.nodata_mask.data[i] ? 0 : 1;
  rep.pixel = pixel_metrics(pred, labels.plume_mask, valid);

  const Grid<float> values = cmf.band(0);
  rep.label_rois = merged_rois(labels.plume_mask, options.merge_radius, &values);
  rep.detection_rois = merged_rois(pred, options.merge_radius, &values);

  const MatchResult all = match_instances(rep.label_rois, rep.detection_rois);
  rep.all = instance_metrics(all.tp, all.fp, all.fn);
  rep.matches = all.matches;

  std::vector<Roi> lu, du;
  for (size_t i = 0; i < rep.label_rois.size(); ++i) {
    if (!flag_ambiguous(rep.label_rois[i], options.ambiguity)) {
      lu.push_back(rep.label_rois[i]);
    }
  }
  for (const auto& d : rep.detection_rois)
    if (!flag_ambiguous(d, options.ambiguity)) du.push_back(d);
  const MatchResult un = match_instances(lu, du);
  rep.unambiguous_only = instance_metrics(un.tp, un.fp, un.fn);

  // Sector of a label ROI: the first kept instance (by plume_id) it overlaps.
  Grid<int> inst(cmf.rows, cmf.cols, -1);
  for (size_t k = labels.kept.size(); k-- > 0;)
    for (const auto& p : labels.kept[k].roi.pixels)
      if (inst.in_bounds(p.row, p.col)) inst(p.row, p.col) = static_cast<int>(k);
  for (size_t i = 0; i < rep.label_rois.size(); ++i) {
    const Roi& roi = rep.label_rois[i];
    LabelOutcome o;
    o.scene_id = rep.scene_id;
    o.campaign = rep.campaign;
    o.area_px = roi.area_px;
    o.max_val = roi.max_val;
    o.ambiguous = flag_ambiguous(roi, options.ambiguity);
    o.detected = all.label_detected[i] != 0;
    int best = -1;
    for (const auto& p : roi.pixels) {
      const int k = inst(p.row, p.col);
      if (k >= 0 && (best < 0 || k < best)) best = k;
    }
    if (best >= 0) o.sector = labels.kept[static_cast<size_t>(best)].sector;
    rep.outcomes.push_back(o);
  }
  return rep;
}

MetricReport scene_report(const Raster& salience, double threshold, const LabelProduct& labels, const Raster& cmf,
                          const SceneReportOptions& options) {
  if (salience.rows != cmf.rows || salience.cols != cmf.cols) throw ShapeError("scene_report: geometry mismatch");
  Mask pred(salience.rows, salience.cols, 0);
  for (int r = 0; r < salience.rows; ++r)
    for (int c = 0; c < salience.cols; ++c)
      pred(r, c) = !cmf.masked(r, c) && !salience.masked(r, c) && salience.at(r, c) >= threshold ? 1 : 0;
  return mask_report(pred, labels, cmf, options);
}

InstanceMetrics pooled_instances(const std::vector<MetricReport>& reports, bool unambiguous_only) {
  long long tp = 0, fp = 0, fn = 0;
  for (const auto& r : reports) {
    const InstanceMetrics& m = unambiguous_only ? r.unambiguous_only : r.all;
    tp += m.tp;
    fp += m.fp;
    fn += m.fn;
  }
  return instance_metrics(tp, fp, fn);
}

namespace {

std::string bin_name(double v, const std::vector<double>& edges) {
  std::ostringstream os;
  size_t i = 0;
  while (i < edges.size() && v >= edges[i]) ++i;
  if (i == 0)
    os << "<" << edges.front();
  else if (i == edges.size())
    os << ">=" << edges.back();
  else
    os << "[" << edges[i - 1] << "," << edges[i] << ")";
  return os.str();
}

}  // namespace

std::map<std::string, StratumStats> stratified_report(const std::vector<MetricReport>& reports, const std::string& key,
                                                      const StrataBins& bins) {
  if (key != "campaign" && key != "sector" && key != "area_bin" && key != "concentration_bin")
    throw Error("stratified_report: unknown stratum key '" + key + "'");
  if ((key == "area_bin" && bins.area_edges.empty()) || (key == "concentration_bin" && bins.concentration_edges.empty()))
    throw Error("stratified_report: empty bin edges");
  std::map<std::string, StratumStats> out;
  for (const auto& rep : reports) {
    for (const auto& o : rep.outcomes) {
      std::string k;
      if (key == "campaign")
        k = o.campaign;
      else if (key == "sector")
        k = to_string(o.sector);
      else if (key == "area_bin")
        k = bin_name(o.area_px, bins.area_edges);
      else
        k = bin_name(o.max_val, bins.concentration_edges);
      auto& s = out[k];
      (o.detected ? s.tp : s.fn) += 1;
    }
  }
  for (auto& [k, s] : out) s.fnr = s.tp + s.fn == 0 ? 0.0 : static_cast<double>(s.fn) / static_cast<double>(s.tp + s.fn);
  return out;
}

namespace {

nlohmann::json instance_json(const InstanceMetrics& m) {
  return {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

}  // namespace

std::string report_json(const MetricReport& r) {
  nlohmann::json j;
  j["scene_id"] = r.scene_id;
  j["campaign"] = r.campaign;
  j["pixel"] = {{"tp", r.pixel.tp},
                {"fp", r.pixel.fp},
                {"fn", r.pixel.fn},
                {"precision", r.pixel.precision},
                {"recall", r.pixel.recall},
                {"f1", r.pixel.f1}};
  j["instances"] = {{"all", instance_json(r.all)}, {"unambiguous_only", instance_json(r.unambiguous_only)}};
  nlohmann::json matches = nlohmann::json::array();
  for (const auto& m : r.matches)
    matches.push_back({{"label", m.label_index}, {"detection", m.detection_index}, {"overlap_px", m.overlap_px},
                       {"iou", m.iou}});
  j["matches"] = matches;
  j["label_rois"] = r.label_rois.size();
  j["detection_rois"] = r.detection_rois.size();
  return j.dump(2) + "\n";
}

std::string report_table(const MetricReport& r) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-18s %6s %6s %6s %9s %9s %9s\n", "variant", "tp", "fp", "fn", "precision", "recall",
                "f1");
  out += buf;
  auto row = [&](const char* name, long long tp, long long fp, long long fn, double p, double rc, double f) {
    std::snprintf(buf, sizeof buf, "%-18s %6lld %6lld %6lld %9.4f %9.4f %9.4f\n", name, tp, fp, fn, p, rc, f);
    out += buf;
  };
  row("pixel", r.pixel.tp, r.pixel.fp, r.pixel.fn, r.pixel.precision, r.pixel.recall, r.pixel.f1);
  row("instance/all", r.all.tp, r.all.fp, r.all.fn, r.all.precision, r.all.recall, r.all.f1);
  row("instance/unambig", r.unambiguous_only.tp, r.unambiguous_only.fp, r.unambiguous_only.fn,
      r.unambiguous_only.precision, r.unambiguous_only.recall, r.unambiguous_only.f1);
  return out;
}

}  // namespace plume
