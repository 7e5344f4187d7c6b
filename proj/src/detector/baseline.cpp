#include "plume/detector/baseline.hpp"

#include "plume/labeling.hpp"
#include "plume/morphology.hpp"

namespace plume {

Raster baseline_detect(const Raster& cmf, double tau, int min_area) {
  Raster out = cmf.like(1);
  const Mask above = threshold_mask(cmf, tau);
  for (const Roi& roi : connected_components(above, 8)) {
    if (roi.area_px < min_area) continue;
    for (const Pixel& p : roi.pixels) out.at(p.row, p.col) = 1.0f;
  }
  return out;
}

}  // namespace plume
