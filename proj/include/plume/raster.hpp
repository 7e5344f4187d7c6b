#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plume/common.hpp"

namespace plume {

/// Projected-meter extent of a scene.
struct GeoBoundingBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  double area() const { return width() * height(); }
  bool operator==(const GeoBoundingBox&) const = default;
};

/// Band-sequential float32 raster with a per-pixel nodata mask.
///
/// `nodata_mask` is 1 where the pixel carries no data. Masked pixels are written back with
/// the header nodata value in every band; in memory their values are not meaningful.
struct Raster {
  int rows = 0;
  int cols = 0;
  int bands = 1;
  std::vector<float> values;  // bands * rows * cols
  Mask nodata_mask;
  GeoBoundingBox bbox;
  double gsd = 1.0;
  std::optional<double> nodata;
  std::vector<std::string> band_names;

  Raster() = default;
  Raster(int rows, int cols, int bands = 1, float fill = 0.0f);

  float& at(int band, int r, int c) { return values[index(band, r, c)]; }
  float at(int band, int r, int c) const { return values[index(band, r, c)]; }
  float& at(int r, int c) { return values[index(0, r, c)]; }
  float at(int r, int c) const { return values[index(0, r, c)]; }

  bool masked(int r, int c) const { return nodata_mask(r, c) != 0; }
  size_t pixel_count() const { return static_cast<size_t>(rows) * cols; }
  size_t valid_count() const { return pixel_count() - count_true(nodata_mask); }

  /// Copies one band into a grid.
  Grid<float> band(int b) const;
  /// Header-only copy (geometry, mask, nodata) with `n_bands` zeroed bands.
  Raster like(int n_bands = 1) const;
  /// Checks the structural invariants; throws ShapeError.
  void validate() const;

  size_t index(int band, int r, int c) const {
    return (static_cast<size_t>(band) * rows + r) * cols + c;
  }
};

/// Bounding box of `rows`x`cols` pixels anchored at (min_x, min_y).
GeoBoundingBox bbox_from_origin(double min_x, double min_y, int rows, int cols, double gsd);

/// Reads `<stem>.json` + `<stem>.bin`. `path` may name either file or the stem.
Raster read_raster(const std::filesystem::path& path);

/// Writes `<stem>.json` + `<stem>.bin`; masked pixels are written as nodata.
void write_raster(const Raster& raster, const std::filesystem::path& path);

/// Elementwise clamp into [lo, hi]; the mask is unchanged.
Raster clip_values(const Raster& raster, double lo, double hi);

}  // namespace plume
