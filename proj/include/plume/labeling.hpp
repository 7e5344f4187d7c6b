#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plume/morphology.hpp"
#include "plume/raster.hpp"

namespace plume {

enum class Sector { OilNG, Landfill, Livestock, ElectricityGen, Wastewater, Other };

std::string to_string(Sector s);
Sector sector_from_string(const std::string& s);

/// Expert-provided plume: an origin point or a coarse mask.
struct PlumeInstance {
  std::string scene_id;
  std::string plume_id;
  std::optional<Pixel> origin;
  std::optional<Mask> region;
  Sector sector = Sector::Other;
};

enum class RejectReason { NoSeed, SmallAndWeak };

std::string to_string(RejectReason r);

struct KeptInstance {
  std::string plume_id;
  Sector sector = Sector::Other;
  Roi roi;  // union ROI of the instance, annotated from the CMF
};

struct RejectedInstance {
  std::string plume_id;
  RejectReason reason;
};

struct LabelProduct {
  Mask plume_mask;
  Mask bg_priority_mask;
  std::vector<KeptInstance> kept;        // sorted by plume_id
  std::vector<RejectedInstance> rejected;  // sorted by plume_id
};

struct LabelConfig {
  double bge_threshold = 500.0;
  int merge_radius = 10;
  bool transitive = true;
  int min_area = 16;
  double min_max_enhancement = 1000.0;
  int connectivity = 8;
};

/// True where the pixel is unmasked and its value exceeds `tau`.
Mask threshold_mask(const Raster& cmf, double tau);

LabelProduct cmf_guided_labels(const Raster& cmf, const std::vector<PlumeInstance>& instances,
                               const LabelConfig& config = {});

/// Encodes labels as {0: background, 1: plume, 2: bg_priority}.
Raster label_raster(const LabelProduct& labels, const Raster& like);
/// Decodes a label raster; instance lists are left empty.
LabelProduct labels_from_raster(const Raster& raster);

std::vector<PlumeInstance> read_instances(const std::filesystem::path& jsonl);
void write_instances(const std::vector<PlumeInstance>& instances, const std::filesystem::path& jsonl);

/// Label raster at `<prefix>` plus `<prefix>.instances.json` holding the kept and rejected lists.
void write_label_product(const LabelProduct& labels, const Raster& like, const std::filesystem::path& prefix);
/// Inverse of write_label_product; kept ROIs are re-annotated from `cmf`.
LabelProduct read_label_product(const std::filesystem::path& prefix, const Raster& cmf);

}  // namespace plume
