#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "plume/common.hpp"

namespace plume {

/// Connected pixel region with enhancement statistics.
struct Roi {
  int id = 0;
  std::vector<Pixel> pixels;  // row-major order
  int area_px = 0;
  double max_val = 0.0;
  double mean_val = 0.0;
  bool ambiguous = false;

  /// Recomputes area/max/mean from `values` (ppm-m).
  void annotate(const Grid<float>& values);
};

/// Component label image: -1 for background, else index into the component list.
struct ComponentLabels {
  Grid<int> labels;
  int count = 0;
};

ComponentLabels label_components(const Mask& mask, int connectivity = 8);

/// Maximal connected regions of `mask`, ordered by their first pixel in row-major scan.
std::vector<Roi> connected_components(const Mask& mask, int connectivity = 8);

/// True exactly where the Chebyshev distance to a true input pixel is <= radius.
Mask dilate(const Mask& mask, int radius);

/// Pairs (a < b) of components whose closest pixels are within Chebyshev distance `radius`.
std::vector<std::pair<int, int>> nearby_component_pairs(const ComponentLabels& cl, int radius);

/// Groups components transitively when any two are within `radius` (Chebyshev).
/// Each group lists component indices in ascending order; groups are ordered by their first member.
std::vector<std::vector<int>> cluster_components(const ComponentLabels& cl, int radius);

/// Components reachable from `seeds` through hops of at most `radius`.
/// With `transitive == false` only direct neighbours of the seeds are added.
std::vector<int> accrete_components(const ComponentLabels& cl, const std::vector<int>& seeds, int radius,
                                    bool transitive = true);

/// Merges connected components of `mask` lying within `radius` of one another into ROIs.
/// When `values` is given, each ROI is annotated with its area and enhancement statistics.
std::vector<Roi> merged_rois(const Mask& mask, int radius, const Grid<float>* values = nullptr,
                             int connectivity = 8);

/// Rasterizes ROI pixels into a mask of the given shape.
Mask roi_mask(const std::vector<Roi>& rois, int rows, int cols);

}  // namespace plume
