#include "plume/labeling.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace plume {

namespace {
constexpr std::array<std::pair<Sector, const char*>, 6> kSectorNames{{
    {Sector::OilNG, "OilNG"},
    {Sector::Landfill, "Landfill"},
    {Sector::Livestock, "Livestock"},
    {Sector::ElectricityGen, "ElectricityGen"},
    {Sector::Wastewater, "Wastewater"},
    {Sector::Other, "Other"},
}};
}  // namespace

std::string to_string(Sector s) {
  for (const auto& [k, name] : kSectorNames)
    if (k == s) return name;
  return "Other";
}

Sector sector_from_string(const std::string& s) {
  for (const auto& [k, name] : kSectorNames)
    if (s == name) return k;
  throw FormatError("unknown sector: " + s);
}

std::string to_string(RejectReason r) { return r == RejectReason::NoSeed ? "NO_SEED" : "SMALL_AND_WEAK"; }

Mask threshold_mask(const Raster& cmf, double tau) {
  if (cmf.bands != 1) throw ShapeError("threshold_mask expects a 1-band raster");
  Mask m(cmf.rows, cmf.cols, 0);
  for (int r = 0; r < cmf.rows; ++r)
    for (int c = 0; c < cmf.cols; ++c)
      m(r, c) = (!cmf.masked(r, c) && static_cast<double>(cmf.at(r, c)) > tau) ? 1 : 0;
  return m;
}

LabelProduct cmf_guided_labels(const Raster& cmf, const std::vector<PlumeInstance>& instances,
                               const LabelConfig& config) {
  const Mask above = threshold_mask(cmf, config.bge_threshold);
  const ComponentLabels cl = label_components(above, config.connectivity);
  const Grid<float> values = cmf.band(0);

  std::vector<const PlumeInstance*> ordered;
  for (const auto& inst : instances) ordered.push_back(&inst);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const PlumeInstance* a, const PlumeInstance* b) { return a->plume_id < b->plume_id; });

  LabelProduct out;
  std::vector<uint8_t> kept_component(static_cast<size_t>(cl.count), 0);
  for (const PlumeInstance* inst : ordered) {
    std::set<int> seeds;
    if (inst->origin) {
      const Pixel o = *inst->origin;
      if (!cmf.nodata_mask.in_bounds(o.row, o.col))
        throw Error("instance " + inst->plume_id + " origin lies outside the scene");
      if (!cmf.masked(o.row, o.col) && cl.labels(o.row, o.col) >= 0) seeds.insert(cl.labels(o.row, o.col));
    }
    if (inst->region) {
      if (!inst->region->same_shape(above)) throw ShapeError("instance " + inst->plume_id + " region shape mismatch");
      for (size_t i = 0; i < above.size(); ++i)
        if (inst->region->data[i] && cl.labels.data[i] >= 0) seeds.insert(cl.labels.data[i]);
    }
    if (seeds.empty()) {
      out.rejected.push_back({inst->plume_id, RejectReason::NoSeed});
      continue;
    }
    const auto members =
        accrete_components(cl, std::vector<int>(seeds.begin(), seeds.end()), config.merge_radius, config.transitive);
    std::vector<uint8_t> in(static_cast<size_t>(cl.count), 0);
    for (int m : members) in[m] = 1;

    Roi roi;
    for (int r = 0; r < above.rows; ++r)
      for (int c = 0; c < above.cols; ++c)
        if (const int id = cl.labels(r, c); id >= 0 && in[id]) roi.pixels.push_back({r, c});
    roi.annotate(values);

    if (roi.area_px < config.min_area && roi.max_val < config.min_max_enhancement) {
      out.rejected.push_back({inst->plume_id, RejectReason::SmallAndWeak});
      continue;
    }
    for (int m : members) kept_component[m] = 1;
    roi.id = static_cast<int>(out.kept.size());
    out.kept.push_back({inst->plume_id, inst->sector, std::move(roi)});
  }

  out.plume_mask = Mask(above.rows, above.cols, 0);
  out.bg_priority_mask = Mask(above.rows, above.cols, 0);
  for (size_t i = 0; i < above.size(); ++i) {
    const int id = cl.labels.data[i];
    if (id < 0) continue;
    if (kept_component[id])
      out.plume_mask.data[i] = 1;
    else
      out.bg_priority_mask.data[i] = 1;
  }
  return out;
}

Raster label_raster(const LabelProduct& labels, const Raster& like) {
  Raster out = like.like(1);
  out.band_names = {"label"};
  out.nodata = std::nullopt;
  out.nodata_mask = Mask(like.rows, like.cols, 0);
  for (int r = 0; r < like.rows; ++r)
    for (int c = 0; c < like.cols; ++c)
      out.at(r, c) = labels.plume_mask(r, c) ? 1.0f : (labels.bg_priority_mask(r, c) ? 2.0f : 0.0f);
  return out;
}

LabelProduct labels_from_raster(const Raster& raster) {
  if (raster.bands != 1) throw ShapeError("label raster must have one band");
  LabelProduct out;
  out.plume_mask = Mask(raster.rows, raster.cols, 0);
  out.bg_priority_mask = Mask(raster.rows, raster.cols, 0);
  for (int r = 0; r < raster.rows; ++r)
    for (int c = 0; c < raster.cols; ++c) {
      if (raster.masked(r, c)) continue;
      const float v = raster.at(r, c);
      if (v == 1.0f) out.plume_mask(r, c) = 1;
      if (v == 2.0f) out.bg_priority_mask(r, c) = 1;
    }
  return out;
}

std::vector<PlumeInstance> read_instances(const std::filesystem::path& jsonl) {
  std::ifstream in(jsonl);
  if (!in) throw FormatError("instances manifest not found: " + jsonl.string());
  std::vector<PlumeInstance> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PlumeInstance inst;
      inst.scene_id = j.at("scene_id").get<std::string>();
      inst.plume_id = j.at("plume_id").get<std::string>();
      if (j.contains("origin")) {
        const auto o = j.at("origin").get<std::vector<int>>();
        if (o.size() != 2) throw FormatError("origin must be [row, col]");
        inst.origin = Pixel{o[0], o[1]};
      }
      inst.sector = sector_from_string(j.value("sector", std::string("Other")));
      out.push_back(std::move(inst));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(jsonl.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_instances(const std::vector<PlumeInstance>& instances, const std::filesystem::path& jsonl) {
  std::ofstream out(jsonl);
  if (!out) throw Error("cannot write " + jsonl.string());
  for (const auto& inst : instances) {
    nlohmann::json j;
    j["scene_id"] = inst.scene_id;
    j["plume_id"] = inst.plume_id;
    if (inst.origin) j["origin"] = {inst.origin->row, inst.origin->col};
    j["sector"] = to_string(inst.sector);
    out << j.dump() << "\n";
  }
}

namespace {
std::filesystem::path sidecar_path(std::filesystem::path prefix) {
  if (prefix.extension() == ".json" || prefix.extension() == ".bin") prefix.replace_extension();
  return prefix.string() + ".instances.json";
}
}  // namespace

void write_label_product(const LabelProduct& labels, const Raster& like, const std::filesystem::path& prefix) {
  write_raster(label_raster(labels, like), prefix);
  nlohmann::json kept = nlohmann::json::array();
  for (const auto& k : labels.kept) {
    nlohmann::json px = nlohmann::json::array();
    for (const auto& p : k.roi.pixels) px.push_back({p.row, p.col});
    kept.push_back({{"plume_id", k.plume_id},
                    {"sector", to_string(k.sector)},
                    {"area_px", k.roi.area_px},
                    {"max_val", k.roi.max_val},
                    {"pixels", px}});
  }
  nlohmann::json rejected = nlohmann::json::array();
  for (const auto& r : labels.rejected) rejected.push_back({{"plume_id", r.plume_id}, {"reason", to_string(r.reason)}});
  std::ofstream out(sidecar_path(prefix));
  if (!out) throw Error("cannot write " + sidecar_path(prefix).string());
  out << nlohmann::json{{"kept", kept}, {"rejected", rejected}}.dump() << "\n";
}

LabelProduct read_label_product(const std::filesystem::path& prefix, const Raster& cmf) {
  LabelProduct lab = labels_from_raster(read_raster(prefix));
  std::ifstream in(sidecar_path(prefix));
  if (!in) throw FormatError("missing label sidecar " + sidecar_path(prefix).string());
  nlohmann::json j;
  in >> j;
  const Grid<float> values = cmf.band(0);
  for (const auto& k : j.at("kept")) {
    KeptInstance ki;
    ki.plume_id = k.at("plume_id").get<std::string>();
    ki.sector = sector_from_string(k.at("sector").get<std::string>());
    for (const auto& p : k.at("pixels")) ki.roi.pixels.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    ki.roi.annotate(values);
    lab.kept.push_back(std::move(ki));
  }
  for (const auto& r : j.at("rejected")) {
    const std::string reason = r.at("reason").get<std::string>();
    lab.rejected.push_back({r.at("plume_id").get<std::string>(),
                            reason == to_string(RejectReason::NoSeed) ? RejectReason::NoSeed : RejectReason::SmallAndWeak});
  }
  return lab;
}

}  // namespace plume
