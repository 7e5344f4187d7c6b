#pragma once

#include "plume/raster.hpp"

namespace plume {

/// Salience 1 on 8-connected components of (cmf > tau) with at least `min_area` pixels.
Raster baseline_detect(const Raster& cmf, double tau = 500.0, int min_area = 16);

}  // namespace plume
