#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "plume/labeling.hpp"
#include "plume/raster.hpp"

namespace plume {

enum class GroupMode { IouGraph, UtmMgrsZone };

std::string to_string(GroupMode m);
GroupMode group_mode_from_string(const std::string& s);

/// Scene metadata needed for spatial grouping.
struct SceneInfo {
  std::string scene_id;
  GeoBoundingBox bbox;
  std::string zone;  // UTM/MGRS zone id, used in zone mode
};

struct SceneGroup {
  int group_id = 0;
  std::vector<std::string> scene_ids;
  GroupMode derived_by = GroupMode::IouGraph;
};

struct SplitAssignment {
  std::vector<int> train_groups;
  std::vector<int> test_groups;
  double fraction = 0.75;
  uint64_t seed = 0;

  /// scene_id -> "train" | "test"
  std::map<std::string, std::string> scene_split(const std::vector<SceneGroup>& groups) const;
};

enum class TileClass { Plume, Background };

std::string to_string(TileClass k);
TileClass tile_class_from_string(const std::string& s);

/// Window reference into a scene; pixels are materialized on demand.
struct TileSample {
  std::string scene_id;
  int row0 = 0;
  int col0 = 0;
  int size = 256;
  TileClass klass = TileClass::Background;
  Mask label_patch;
  double nodata_fraction = 0.0;
  std::string split;

  int label() const { return klass == TileClass::Plume ? 1 : 0; }
  bool overlaps(const TileSample& o) const;
  long long overlap_area(const TileSample& o) const;
};

/// Materialized tile content.
struct TileData {
  Grid<float> values;  // raw CMF (ppm-m)
  Mask nodata;
  Mask label;
};

double bbox_iou(const GeoBoundingBox& a, const GeoBoundingBox& b);

std::vector<SceneGroup> group_scenes(const std::vector<SceneInfo>& scenes, GroupMode mode);

/// Seeded shuffle of groups, assigned to train until its scene count reaches fraction * total.
SplitAssignment split_groups(const std::vector<SceneGroup>& groups, double fraction, uint64_t seed);

struct PlumeTileConfig {
  int merge_radius = 10;
};

/// Iterative center-of-mass tiling of plume ROIs; tiles never overlap one another.
std::vector<TileSample> sample_plume_tiles(const Raster& scene, const LabelProduct& labels, int size,
                                           const std::string& scene_id = {}, const PlumeTileConfig& config = {});

struct BackgroundTileConfig {
  double max_bg_overlap = 0.10;  // fraction of tile area, pairwise
  double max_nodata = 0.50;
  int grid_step = 0;             // candidate stride in px; 0 picks size / 32
  int lookahead = 12;            // leading candidates scored by the area they leave reachable
  int attempts = 4;              // seeded restarts; the best-covering layout is kept
};

/// Seeded greedy placement covering bg-priority pixels first, then the rest of the scene.
std::vector<TileSample> sample_background_tiles(const Raster& scene, const LabelProduct& labels,
                                                const std::vector<TileSample>& existing, int size, uint64_t seed,
                                                const std::string& scene_id = {},
                                                const BackgroundTileConfig& config = {});

/// Fraction of valid, non-plume pixels (outside plume tiles) covered by background tiles.
double background_coverage(const Raster& scene, const LabelProduct& labels, const std::vector<TileSample>& tiles);

TileData extract_tile(const Raster& cmf, const Mask& plume_mask, const TileSample& tile);

/// Dihedral op `op` in [0, 8): rotate by 90*(op % 4) degrees counter-clockwise, then
/// mirror left-right when op >= 4.
template <typename T>
Grid<T> apply_dihedral(const Grid<T>& g, int op) {
  if (g.rows != g.cols) throw ShapeError("augment: tile must be square");
  if (op < 0 || op > 7) throw Error("augment: op must be in [0, 8)");
  const int n = g.rows;
  Grid<T> out(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      int rr = r, cc = c;
      for (int k = 0; k < op % 4; ++k) {
        const int t = rr;
        rr = n - 1 - cc;
        cc = t;
      }
      if (op >= 4) cc = n - 1 - cc;
      out(rr, cc) = g(r, c);
    }
  }
  return out;
}

TileData augment(const TileData& tile, int op);
TileSample augment(const TileSample& tile, int op);

void write_tile_manifest(const std::vector<TileSample>& tiles, const std::filesystem::path& jsonl);
/// Reads tile references; label patches are not stored and come back empty.
std::vector<TileSample> read_tile_manifest(const std::filesystem::path& jsonl);

}  // namespace plume
